use ndarray::Array2;
use rand::Rng;

use crate::canonical::{canonicalize, CanonicalForm};
use crate::error::{Error, Result};
use crate::graph::{DistanceTable, Graph};
use crate::model::params::SUBTOKEN_BUCKET;
use crate::substructure::Substructure;

/// Transformer input for one graph: `n` node tokens followed by `m`
/// substructure tokens.
#[derive(Debug, Clone)]
pub struct TokenBatch {
    pub n: usize,
    pub m: usize,
    pub node_feat_ids: Vec<usize>,
    pub canon_forms: Vec<CanonicalForm>,
    /// Sorted member nodes of each substructure token.
    pub membership: Vec<Vec<usize>>,
    /// `(n+m) x (n+m)`, entries `0` or `-inf`.
    pub mask: Array2<f64>,
    /// `(n+m) x (n+m)` rows of the distance bias table.
    pub dist_ids: Array2<usize>,
    /// Edge features along the stored shortest path of each node pair, `n*n` row-major.
    pub sp_edge_feats: Vec<Vec<usize>>,
}

impl TokenBatch {
    pub fn num_tokens(&self) -> usize {
        self.n + self.m
    }

    pub fn sp_feats(&self, i: usize, j: usize) -> &[usize] {
        &self.sp_edge_feats[i * self.n + j]
    }

    pub fn is_masked(&self, i: usize, j: usize) -> bool {
        self.mask[[i, j]] == f64::NEG_INFINITY
    }
}

/// Builds tokens for `g` with one DFS encoding per chosen substructure.
///
/// A substructure token sees only its member nodes, and a node sees a
/// substructure token only if it is a member. Node-node attention is global.
/// Pairs involving a substructure token use [`SUBTOKEN_BUCKET`].
pub fn build_tokens<R: Rng + ?Sized>(
    g: &Graph,
    chosen: &[&Substructure],
    d: &DistanceTable,
    rng: &mut R,
    s_max: usize,
) -> Result<TokenBatch> {
    let forms = chosen
        .iter()
        .map(|s| canonicalize(s, rng, s_max))
        .collect::<Result<Vec<_>>>()?;
    build_tokens_with_forms(g, chosen, forms, d)
}

/// Like [`build_tokens`] with precomputed encodings.
pub fn build_tokens_with_forms(
    g: &Graph,
    chosen: &[&Substructure],
    canon_forms: Vec<CanonicalForm>,
    d: &DistanceTable,
) -> Result<TokenBatch> {
    let n = g.num_nodes;
    let m = chosen.len();
    if d.num_nodes() != n {
        return Err(Error::Shape(format!(
            "distance table covers {} nodes, graph has {n}",
            d.num_nodes()
        )));
    }
    if canon_forms.len() != m {
        return Err(Error::Shape(format!(
            "{} encodings for {m} substructures",
            canon_forms.len()
        )));
    }
    let mut membership = Vec::with_capacity(m);
    for s in chosen {
        if let Some(&bad) = s.nodes.iter().find(|&&v| v >= n) {
            return Err(Error::NodeOutOfRange {
                node: bad,
                num_nodes: n,
            });
        }
        if s.nodes.is_empty() {
            return Err(Error::Shape(
                "substructure token with no member nodes".into(),
            ));
        }
        let mut nodes = s.nodes.clone();
        nodes.sort_unstable();
        nodes.dedup();
        membership.push(nodes);
    }

    let t = n + m;
    let mut mask = Array2::zeros((t, t));
    let mut dist_ids = Array2::from_elem((t, t), SUBTOKEN_BUCKET);
    for i in 0..n {
        for j in 0..n {
            dist_ids[[i, j]] = d.bucket(i, j);
        }
    }
    for a in 0..m {
        let row = n + a;
        for j in 0..t {
            mask[[row, j]] = f64::NEG_INFINITY;
            mask[[j, row]] = f64::NEG_INFINITY;
        }
    }
    for (a, nodes) in membership.iter().enumerate() {
        for &v in nodes {
            mask[[n + a, v]] = 0.0;
            mask[[v, n + a]] = 0.0;
        }
    }

    let mut sp_edge_feats = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            sp_edge_feats.push(d.sp_edges(i, j).iter().map(|&e| g.edge_feat[e]).collect());
        }
    }

    Ok(TokenBatch {
        n,
        m,
        node_feat_ids: g.node_feat.clone(),
        canon_forms,
        membership,
        mask,
        dist_ids,
        sp_edge_feats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::all_pairs_distances;
    use crate::substructure::Kind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tokens(g: &Graph, subs: &[Vec<usize>]) -> Result<TokenBatch> {
        let subs: Vec<Substructure> = subs
            .iter()
            .map(|nodes| Substructure {
                adj: crate::substructure::InducedAdjacency::empty(nodes.len()),
                nodes: nodes.clone(),
                kind: Kind::Path,
                center: None,
            })
            .collect();
        let refs: Vec<&Substructure> = subs.iter().collect();
        let d = all_pairs_distances(g);
        build_tokens(g, &refs, &d, &mut ChaCha8Rng::seed_from_u64(0), 10)
    }

    #[test]
    fn mask_for_partial_substructure() {
        let g = Graph::path(3);
        let b = tokens(&g, &[vec![0, 1]]).unwrap();
        let row: Vec<bool> = (0..4).map(|j| b.is_masked(3, j)).collect();
        assert_eq!(row, vec![false, false, true, true]);
        let col: Vec<bool> = (0..4).map(|i| b.is_masked(i, 3)).collect();
        assert_eq!(col, vec![false, false, true, true]);
        for i in 0..3 {
            for j in 0..3 {
                assert!(!b.is_masked(i, j));
            }
        }
        assert_eq!(b.dist_ids[[3, 0]], SUBTOKEN_BUCKET);
        assert_eq!(b.dist_ids[[0, 2]], 2);
    }

    #[test]
    fn no_substructures_means_open_mask() {
        let g = Graph::cycle(4);
        let b = tokens(&g, &[]).unwrap();
        assert_eq!(b.m, 0);
        assert!(b.mask.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn covering_substructure_sees_every_node() {
        let g = Graph::cycle(4);
        let b = tokens(&g, &[vec![0, 1, 2, 3], vec![1, 2]]).unwrap();
        assert!((0..4).all(|j| !b.is_masked(4, j)));
        assert!(b.is_masked(4, 5) && b.is_masked(5, 4) && b.is_masked(4, 4));
        for i in 0..b.num_tokens() {
            assert!((0..b.num_tokens()).any(|j| !b.is_masked(i, j)));
        }
    }

    #[test]
    fn invalid_member_is_rejected() {
        let g = Graph::path(3);
        assert!(matches!(
            tokens(&g, &[vec![0, 7]]),
            Err(Error::NodeOutOfRange { node: 7, .. })
        ));
    }

    #[test]
    fn shortest_path_edge_features() {
        let mut g = Graph::path(3);
        g.edge_feat = vec![2, 3];
        let b = tokens(&g, &[]).unwrap();
        assert_eq!(b.sp_feats(0, 2), &[2, 3]);
        assert_eq!(b.sp_feats(2, 0), &[3, 2]);
        assert!(b.sp_feats(1, 1).is_empty());
    }
}
