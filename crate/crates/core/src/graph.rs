//! Undirected graphs with categorical node/edge features, plus hop distances
//! and one canonical shortest path per node pair.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance bucket reserved for unreachable pairs. Reachable distances are
/// clamped to `MAX_DIST_BUCKET - 1` when bucketed.
pub const MAX_DIST_BUCKET: usize = 64;

/// Supervision attached to a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Scalar(f64),
    NodeLabels(Vec<usize>),
}

/// One record of the JSON Lines graph format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub node_feat: Vec<usize>,
    pub edge_feat: Vec<usize>,
    #[serde(default)]
    pub target: Option<Target>,
}

/// First broken invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    SelfLoop { edge: usize },
    EndpointOutOfRange { edge: usize },
    DuplicateEdge { edge: usize },
    NodeFeatLength { expected: usize, found: usize },
    EdgeFeatLength { expected: usize, found: usize },
    LabelLength { expected: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SelfLoop { edge } => write!(f, "self-loop (edge {edge})"),
            Violation::EndpointOutOfRange { edge } => {
                write!(f, "endpoint out of range (edge {edge})")
            }
            Violation::DuplicateEdge { edge } => write!(f, "duplicate edge (edge {edge})"),
            Violation::NodeFeatLength { expected, found } => {
                write!(f, "node_feat length {found}, expected {expected}")
            }
            Violation::EdgeFeatLength { expected, found } => {
                write!(f, "edge_feat length {found}, expected {expected}")
            }
            Violation::LabelLength { expected, found } => {
                write!(f, "node label count {found}, expected {expected}")
            }
        }
    }
}

/// Returns the first violated structural invariant, or `Ok(())`.
pub fn validate(g: &Graph) -> std::result::Result<(), Violation> {
    let mut seen = HashSet::with_capacity(g.edges.len());
    for (idx, &(u, v)) in g.edges.iter().enumerate() {
        if u == v {
            return Err(Violation::SelfLoop { edge: idx });
        }
        if u >= g.num_nodes || v >= g.num_nodes {
            return Err(Violation::EndpointOutOfRange { edge: idx });
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return Err(Violation::DuplicateEdge { edge: idx });
        }
    }
    if g.node_feat.len() != g.num_nodes {
        return Err(Violation::NodeFeatLength {
            expected: g.num_nodes,
            found: g.node_feat.len(),
        });
    }
    if g.edge_feat.len() != g.edges.len() {
        return Err(Violation::EdgeFeatLength {
            expected: g.edges.len(),
            found: g.edge_feat.len(),
        });
    }
    if let Some(Target::NodeLabels(labels)) = &g.target {
        if labels.len() != g.num_nodes {
            return Err(Violation::LabelLength {
                expected: g.num_nodes,
                found: labels.len(),
            });
        }
    }
    Ok(())
}

impl Graph {
    /// Graph with all-zero features and no target.
    pub fn from_edges(num_nodes: usize, edges: Vec<(usize, usize)>) -> Self {
        let edge_feat = vec![0; edges.len()];
        Graph {
            num_nodes,
            edges,
            node_feat: vec![0; num_nodes],
            edge_feat,
            target: None,
        }
    }

    pub fn validated(self) -> Result<Self> {
        validate(&self).map_err(Error::InvalidGraph)?;
        Ok(self)
    }

    pub fn adjacency(&self) -> Adjacency {
        Adjacency::new(self)
    }

    pub fn node_labels(&self) -> Option<&[usize]> {
        match &self.target {
            Some(Target::NodeLabels(l)) => Some(l),
            _ => None,
        }
    }

    pub fn scalar_target(&self) -> Option<f64> {
        match self.target {
            Some(Target::Scalar(y)) => Some(y),
            _ => None,
        }
    }

    pub fn path(n: usize) -> Self {
        Graph::from_edges(n, (1..n).map(|i| (i - 1, i)).collect())
    }

    pub fn cycle(n: usize) -> Self {
        Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)).collect())
    }

    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        Graph::from_edges(n, edges)
    }

    /// Star with center 0 and `leaves` leaves.
    pub fn star(leaves: usize) -> Self {
        Graph::from_edges(leaves + 1, (1..=leaves).map(|i| (0, i)).collect())
    }
}

/// Dense adjacency view with sorted neighbor lists and edge ids.
#[derive(Debug, Clone)]
pub struct Adjacency {
    n: usize,
    edge_id: Vec<Option<usize>>,
    neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    pub fn new(g: &Graph) -> Self {
        let n = g.num_nodes;
        let mut edge_id = vec![None; n * n];
        let mut neighbors = vec![Vec::new(); n];
        for (idx, &(u, v)) in g.edges.iter().enumerate() {
            edge_id[u * n + v] = Some(idx);
            edge_id[v * n + u] = Some(idx);
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Adjacency {
            n,
            edge_id,
            neighbors,
        }
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edge_id[u * self.n + v].is_some()
    }

    #[inline]
    pub fn edge_id(&self, u: usize, v: usize) -> Option<usize> {
        self.edge_id[u * self.n + v]
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }
}

/// Hop distances and one deterministic shortest path for every ordered pair.
#[derive(Debug, Clone)]
pub struct DistanceTable {
    n: usize,
    hops: Vec<Option<u32>>,
    sp_edges: Vec<Vec<usize>>,
}

impl DistanceTable {
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Exact hop count, `None` when unreachable.
    pub fn hops(&self, i: usize, j: usize) -> Option<usize> {
        self.hops[i * self.n + j].map(|d| d as usize)
    }

    /// Hop distance with unreachable pairs reported as [`MAX_DIST_BUCKET`].
    pub fn dis(&self, i: usize, j: usize) -> usize {
        self.hops(i, j).unwrap_or(MAX_DIST_BUCKET)
    }

    /// Bias-table bucket: reachable distances saturate at `MAX_DIST_BUCKET - 1`.
    pub fn bucket(&self, i: usize, j: usize) -> usize {
        match self.hops(i, j) {
            Some(d) => d.min(MAX_DIST_BUCKET - 1),
            None => MAX_DIST_BUCKET,
        }
    }

    /// Edge indices along the stored shortest path from `i` to `j`, in walk order.
    pub fn sp_edges(&self, i: usize, j: usize) -> &[usize] {
        &self.sp_edges[i * self.n + j]
    }
}

/// BFS from every node. At each level the predecessor of a node is its
/// smallest-index neighbor one level closer to the source, which fixes a
/// single shortest path per pair.
pub fn all_pairs_distances(g: &Graph) -> DistanceTable {
    let adj = g.adjacency();
    let n = g.num_nodes;
    let mut hops = vec![None; n * n];
    let mut sp_edges = vec![Vec::new(); n * n];
    let mut dist = vec![u32::MAX; n];
    let mut pred = vec![usize::MAX; n];
    let mut queue = VecDeque::with_capacity(n);

    for src in 0..n {
        dist.fill(u32::MAX);
        pred.fill(usize::MAX);
        dist[src] = 0;
        queue.clear();
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for &w in adj.neighbors(u) {
                if dist[w] == u32::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        for v in 0..n {
            if v == src || dist[v] == u32::MAX {
                continue;
            }
            pred[v] = adj
                .neighbors(v)
                .iter()
                .copied()
                .find(|&w| dist[w] + 1 == dist[v])
                .expect("a reachable node has a predecessor on the previous level");
        }
        for dst in 0..n {
            if dist[dst] == u32::MAX {
                continue;
            }
            hops[src * n + dst] = Some(dist[dst]);
            let mut path = Vec::with_capacity(dist[dst] as usize);
            let mut cur = dst;
            while cur != src {
                let p = pred[cur];
                path.push(adj.edge_id(p, cur).expect("predecessor is adjacent"));
                cur = p;
            }
            path.reverse();
            sp_edges[src * n + dst] = path;
        }
    }
    DistanceTable { n, hops, sp_edges }
}

/// Reads one graph per non-empty line and validates each.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<Graph>> {
    let mut graphs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let g: Graph = serde_json::from_str(&line)?;
        validate(&g).map_err(|violation| Error::InvalidRecord {
            line: lineno + 1,
            violation,
        })?;
        graphs.push(g);
    }
    Ok(graphs)
}

pub fn write_jsonl<W: Write>(mut writer: W, graphs: &[Graph]) -> Result<()> {
    for g in graphs {
        serde_json::to_writer(&mut writer, g)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn load_jsonl(path: impl AsRef<std::path::Path>) -> Result<Vec<Graph>> {
    let file = std::fs::File::open(path)?;
    read_jsonl(std::io::BufReader::new(file))
}

pub fn save_jsonl(path: impl AsRef<std::path::Path>, graphs: &[Graph]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_jsonl(&mut w, graphs)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_is_valid() {
        assert_eq!(validate(&Graph::cycle(3)), Ok(()));
    }

    #[test]
    fn self_loop_is_reported() {
        let g = Graph::from_edges(3, vec![(0, 0)]);
        let v = validate(&g).unwrap_err();
        assert!(matches!(v, Violation::SelfLoop { .. }));
        assert!(v.to_string().starts_with("self-loop"));
    }

    #[test]
    fn out_of_range_endpoint_is_reported() {
        let g = Graph::from_edges(3, vec![(0, 5)]);
        let v = validate(&g).unwrap_err();
        assert!(v.to_string().starts_with("endpoint out of range"));
    }

    #[test]
    fn duplicate_and_length_violations() {
        let g = Graph::from_edges(3, vec![(0, 1), (1, 0)]);
        assert!(matches!(
            validate(&g),
            Err(Violation::DuplicateEdge { edge: 1 })
        ));
        let mut g = Graph::cycle(3);
        g.node_feat.pop();
        assert!(matches!(
            validate(&g),
            Err(Violation::NodeFeatLength { .. })
        ));
        let mut g = Graph::cycle(3);
        g.edge_feat.push(0);
        assert!(matches!(
            validate(&g),
            Err(Violation::EdgeFeatLength { .. })
        ));
        let mut g = Graph::cycle(3);
        g.target = Some(Target::NodeLabels(vec![0, 1]));
        assert!(matches!(validate(&g), Err(Violation::LabelLength { .. })));
    }

    #[test]
    fn path_distances_and_shortest_path() {
        let g = Graph::path(4);
        let d = all_pairs_distances(&g);
        assert_eq!(d.dis(0, 3), 3);
        let edges: Vec<_> = d.sp_edges(0, 3).iter().map(|&e| g.edges[e]).collect();
        assert_eq!(edges, vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(d.sp_edges(2, 2), &[] as &[usize]);
    }

    #[test]
    fn triangle_distances() {
        let d = all_pairs_distances(&Graph::cycle(3));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d.dis(i, j), usize::from(i != j));
            }
        }
    }

    #[test]
    fn disconnected_pair_uses_sentinel() {
        let g = Graph::from_edges(2, vec![]);
        let d = all_pairs_distances(&g);
        assert_eq!(d.dis(0, 1), MAX_DIST_BUCKET);
        assert_eq!(d.bucket(0, 1), MAX_DIST_BUCKET);
        assert_eq!(d.hops(0, 1), None);
        assert!(d.sp_edges(0, 1).is_empty());
    }

    #[test]
    fn tie_break_prefers_smallest_predecessor() {
        // 4-cycle 0-1-2-3-0: two shortest paths from 0 to 2; the stored one goes via 1.
        let g = Graph::cycle(4);
        let d = all_pairs_distances(&g);
        let edges: Vec<_> = d.sp_edges(0, 2).iter().map(|&e| g.edges[e]).collect();
        assert_eq!(edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn long_paths_saturate_bucket() {
        let g = Graph::path(70);
        let d = all_pairs_distances(&g);
        assert_eq!(d.hops(0, 69), Some(69));
        assert_eq!(d.bucket(0, 69), MAX_DIST_BUCKET - 1);
    }

    #[test]
    fn jsonl_round_trip_keeps_keys() {
        let mut g = Graph::cycle(3);
        g.target = Some(Target::Scalar(1.5));
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &[g.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        for key in ["num_nodes", "edges", "node_feat", "edge_feat", "target"] {
            assert!(text.contains(&format!("\"{key}\"")), "{text}");
        }
        let back = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, vec![g]);

        let labelled =
            r#"{"num_nodes":2,"edges":[[0,1]],"node_feat":[0,1],"edge_feat":[0],"target":[1,0]}"#;
        let back = read_jsonl(labelled.as_bytes()).unwrap();
        assert_eq!(back[0].node_labels(), Some(&[1usize, 0][..]));
        let bad = r#"{"num_nodes":2,"edges":[[0,0]],"node_feat":[0,1],"edge_feat":[0]}"#;
        assert!(matches!(
            read_jsonl(bad.as_bytes()),
            Err(Error::InvalidRecord { line: 1, .. })
        ));
    }
}
