//! Greedy coverage-balanced substructure sampling.
//!
//! An initial draw is balanced across kinds. Each later round ranks the unused
//! substructures by how many under-covered nodes they contain and draws a few
//! uniformly from the best `top_k`, so sparsely covered nodes are preferred.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::substructure::SubstructureSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerParams {
    /// Minimum number of sampled substructures covering each node.
    pub thre: usize,
    pub n_init: usize,
    pub top_k: usize,
    pub n_sample: usize,
    /// Hard cap on the number of sampled substructures.
    pub m_max: usize,
}

impl SamplerParams {
    /// Default schedule for a graph with `num_nodes` nodes; keeps the token
    /// count below the node count.
    pub fn for_graph(num_nodes: usize, thre: usize) -> Self {
        let n = num_nodes.max(1);
        let n_sample = n.div_ceil(8).max(1);
        SamplerParams {
            thre: thre.max(1),
            n_init: n.div_ceil(4).max(1),
            top_k: 2 * n_sample,
            n_sample,
            m_max: n,
        }
    }

    pub fn check(&self) -> Result<()> {
        let positive = self.thre > 0
            && self.n_init > 0
            && self.top_k > 0
            && self.n_sample > 0
            && self.m_max > 0;
        if !positive {
            return Err(Error::Config(
                "sampler parameters must all be positive".into(),
            ));
        }
        if self.n_sample > self.top_k {
            return Err(Error::Config(format!(
                "n_sample ({}) exceeds top_k ({})",
                self.n_sample, self.top_k
            )));
        }
        if self.m_max < self.n_init {
            return Err(Error::Config(format!(
                "m_max ({}) is below n_init ({})",
                self.m_max, self.n_init
            )));
        }
        Ok(())
    }
}

/// Returns distinct item indices of `set` in draw order.
pub fn sample_substructures<R: Rng + ?Sized>(
    set: &SubstructureSet,
    p: &SamplerParams,
    rng: &mut R,
) -> Vec<usize> {
    if set.is_empty() {
        return Vec::new();
    }
    let mut used = vec![false; set.len()];
    let mut cover = vec![0usize; set.num_nodes];
    let mut chosen = Vec::new();

    let take =
        |idx: usize, used: &mut Vec<bool>, cover: &mut Vec<usize>, chosen: &mut Vec<usize>| {
            used[idx] = true;
            for &v in &set.get(idx).nodes {
                cover[v] += 1;
            }
            chosen.push(idx);
        };

    // Round-robin over kinds, uniform within each kind.
    let mut pools: Vec<Vec<usize>> = set.kinds().map(|k| set.indices_of(k).to_vec()).collect();
    for pool in &mut pools {
        pool.shuffle(rng);
    }
    let init = p.n_init.min(p.m_max).min(set.len());
    'init: while chosen.len() < init {
        for pool in &mut pools {
            if chosen.len() == init {
                break 'init;
            }
            if let Some(idx) = pool.pop() {
                take(idx, &mut used, &mut cover, &mut chosen);
            }
        }
    }

    while chosen.len() < p.m_max {
        if cover.iter().all(|&c| c >= p.thre) {
            break;
        }
        let mut ranked: Vec<(usize, usize)> = (0..set.len())
            .filter(|&i| !used[i])
            .map(|i| {
                let cnt = set
                    .get(i)
                    .nodes
                    .iter()
                    .filter(|&&v| cover[v] < p.thre)
                    .count();
                (i, cnt)
            })
            .filter(|&(_, cnt)| cnt > 0)
            .collect();
        // Nothing left that touches an under-covered node.
        if ranked.is_empty() {
            break;
        }
        ranked.shuffle(rng);
        ranked.sort_by_key(|&(_, cnt)| std::cmp::Reverse(cnt));
        ranked.truncate(p.top_k);
        let draw = p.n_sample.min(ranked.len()).min(p.m_max - chosen.len());
        let picks: Vec<usize> = ranked.choose_multiple(rng, draw).map(|&(i, _)| i).collect();
        for idx in picks {
            take(idx, &mut used, &mut cover, &mut chosen);
        }
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::substructure::{Kind, Substructure};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_schedule() {
        let p = SamplerParams::for_graph(20, 1);
        assert_eq!((p.n_init, p.n_sample, p.top_k, p.m_max), (5, 3, 6, 20));
        p.check().unwrap();
        let tiny = SamplerParams::for_graph(1, 1);
        assert_eq!(
            (tiny.n_init, tiny.n_sample, tiny.top_k, tiny.m_max),
            (1, 1, 2, 1)
        );
        tiny.check().unwrap();
    }

    #[test]
    fn parameter_checks() {
        let mut p = SamplerParams::for_graph(8, 1);
        p.n_sample = p.top_k + 1;
        assert!(p.check().is_err());
        let mut p = SamplerParams::for_graph(8, 1);
        p.m_max = p.n_init - 1;
        assert!(p.check().is_err());
        let mut p = SamplerParams::for_graph(8, 1);
        p.thre = 0;
        assert!(p.check().is_err());
    }

    #[test]
    fn empty_set_gives_empty_sample() {
        let set = SubstructureSet::new(0, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_substructures(&set, &SamplerParams::for_graph(4, 1), &mut rng).is_empty());
    }

    #[test]
    fn single_covering_item() {
        let g = Graph::path(4);
        let adj = g.adjacency();
        let mut set = SubstructureSet::new(0, 4);
        set.push(Substructure::new(&adj, vec![0, 1, 2, 3], Kind::Path, None));
        let p = SamplerParams {
            thre: 1,
            n_init: 1,
            top_k: 2,
            n_sample: 1,
            m_max: 4,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_substructures(&set, &p, &mut rng), vec![0]);
    }

    #[test]
    fn initial_draw_balances_kinds() {
        let g = Graph::complete(6);
        let adj = g.adjacency();
        let mut set = SubstructureSet::new(0, 6);
        for a in 0..6 {
            for b in a + 1..6 {
                set.push(Substructure::new(&adj, vec![a, b], Kind::Path, None));
            }
        }
        set.push(Substructure::new(&adj, vec![0, 1, 2], Kind::Cycle, None));
        set.push(Substructure::new(&adj, vec![3, 4, 5], Kind::Cycle, None));
        let p = SamplerParams {
            thre: 6,
            n_init: 4,
            top_k: 1,
            n_sample: 1,
            m_max: 4,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let picked = sample_substructures(&set, &p, &mut rng);
        let cycles = picked
            .iter()
            .filter(|&&i| set.get(i).kind == Kind::Cycle)
            .count();
        assert_eq!(cycles, 2);
    }
}
