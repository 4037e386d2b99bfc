//! Exact enumeration of induced cycles, stars and paths, plus k-hop and
//! random-walk neighborhoods.
//!
//! Every [`Substructure`] is an induced subgraph: its adjacency contains all
//! parent edges between its nodes and nothing else.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{Adjacency, Graph};

/// Largest substructure fed to the token encoder.
pub const DEFAULT_S_MAX: usize = 10;

// Fixed stream for k-hop truncation so extraction of that kind stays deterministic.
const KHOP_TRUNCATION_SEED: u64 = 0x6b68_6f70;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Cycle,
    Star,
    Path,
    Khop,
    Rwalk,
}

impl Kind {
    pub const ALL: [Kind; 5] = [Kind::Cycle, Kind::Star, Kind::Path, Kind::Khop, Kind::Rwalk];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Cycle => "cycle",
            Kind::Star => "star",
            Kind::Path => "path",
            Kind::Khop => "khop",
            Kind::Rwalk => "rwalk",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Kind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown substructure kind `{s}`"))
    }
}

/// Symmetric 0/1 adjacency over a small node set, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InducedAdjacency {
    size: usize,
    bits: Vec<bool>,
}

impl InducedAdjacency {
    pub fn empty(size: usize) -> Self {
        InducedAdjacency {
            size,
            bits: vec![false; size * size],
        }
    }

    /// Builds from an undirected edge list over `0..size`.
    pub fn from_edges(size: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = Self::empty(size);
        for &(u, v) in edges {
            adj.set(u, v, true);
        }
        adj
    }

    /// Adjacency of the subgraph induced by `nodes` (in the given order).
    pub fn induced(parent: &Adjacency, nodes: &[usize]) -> Self {
        let mut adj = Self::empty(nodes.len());
        for (a, &u) in nodes.iter().enumerate() {
            for (b, &v) in nodes.iter().enumerate().skip(a + 1) {
                if parent.has_edge(u, v) {
                    adj.set(a, b, true);
                }
            }
        }
        adj
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.size + j]
    }

    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        self.bits[i * self.size + j] = on;
        self.bits[j * self.size + i] = on;
    }

    pub fn degree(&self, i: usize) -> usize {
        (0..self.size).filter(|&j| self.get(i, j)).count()
    }

    pub fn num_edges(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count() / 2
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        let mut out = Self::empty(self.size);
        for i in 0..self.size {
            for j in i + 1..self.size {
                if self.get(i, j) {
                    out.set(perm[i], perm[j], true);
                }
            }
        }
        out
    }

    /// Reorders so that new position `p` holds old node `order[p]`.
    pub fn permute(&self, order: &[usize]) -> Self {
        let mut out = Self::empty(self.size);
        for (a, &i) in order.iter().enumerate() {
            for (b, &j) in order.iter().enumerate() {
                out.bits[a * self.size + b] = self.get(i, j);
            }
        }
        out
    }
}

/// An induced subgraph of a parent graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Substructure {
    /// Sorted parent node ids.
    pub nodes: Vec<usize>,
    /// Induced adjacency in `nodes` order.
    pub adj: InducedAdjacency,
    pub kind: Kind,
    /// Star center or neighborhood root.
    pub center: Option<usize>,
}

impl Substructure {
    pub fn new(
        parent: &Adjacency,
        mut nodes: Vec<usize>,
        kind: Kind,
        center: Option<usize>,
    ) -> Self {
        nodes.sort_unstable();
        nodes.dedup();
        let adj = InducedAdjacency::induced(parent, &nodes);
        Substructure {
            nodes,
            adj,
            kind,
            center,
        }
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.nodes.binary_search(&v).is_ok()
    }
}

/// Inclusive size range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeRange {
    pub min: usize,
    pub max: usize,
}

impl SizeRange {
    pub const fn new(min: usize, max: usize) -> Self {
        SizeRange { min, max }
    }

    pub fn contains(&self, k: usize) -> bool {
        self.min <= k && k <= self.max
    }
}

/// Which substructure kinds to extract, and their size limits.
/// Star sizes count leaves; cycle and path sizes count nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabConfig {
    pub cycles: Option<SizeRange>,
    pub stars: Option<SizeRange>,
    pub paths: Option<SizeRange>,
    pub khop: Option<usize>,
    pub rwalk: Option<usize>,
    pub s_max: usize,
}

impl VocabConfig {
    /// Cycles of 3..=8 nodes, stars with 2..=6 leaves, paths of 4..=8 nodes.
    pub fn geometric() -> Self {
        VocabConfig {
            cycles: Some(SizeRange::new(3, 8)),
            stars: Some(SizeRange::new(2, 6)),
            paths: Some(SizeRange::new(4, 8)),
            khop: None,
            rwalk: None,
            s_max: DEFAULT_S_MAX,
        }
    }

    pub fn none() -> Self {
        VocabConfig {
            cycles: None,
            stars: None,
            paths: None,
            khop: None,
            rwalk: None,
            s_max: DEFAULT_S_MAX,
        }
    }

    /// Default parameters for each listed kind: 2-hop and 10-step walks.
    pub fn from_kinds(kinds: &[Kind]) -> Self {
        let geo = Self::geometric();
        let mut cfg = Self::none();
        for kind in kinds {
            match kind {
                Kind::Cycle => cfg.cycles = geo.cycles,
                Kind::Star => cfg.stars = geo.stars,
                Kind::Path => cfg.paths = geo.paths,
                Kind::Khop => cfg.khop = Some(2),
                Kind::Rwalk => cfg.rwalk = Some(10),
            }
        }
        cfg
    }
}

impl Default for VocabConfig {
    fn default() -> Self {
        Self::geometric()
    }
}

/// Induced cycles with node count in `[k_min, k_max]`, one per node set.
pub fn enumerate_cycles(g: &Graph, k_min: usize, k_max: usize) -> Vec<Substructure> {
    assert!(
        3 <= k_min && k_min <= k_max,
        "cycle sizes need 3 <= k_min <= k_max"
    );
    let adj = g.adjacency();
    let mut walker = InducedWalker::new(&adj);
    let mut out = Vec::new();
    for s in 0..adj.num_nodes() {
        walker.push(s);
        cycle_search(&adj, &mut walker, s, k_min, k_max, &mut out);
        walker.pop();
    }
    finish(&adj, out, Kind::Cycle)
}

fn cycle_search(
    adj: &Adjacency,
    walker: &mut InducedWalker,
    s: usize,
    k_min: usize,
    k_max: usize,
    out: &mut Vec<(Vec<usize>, Option<usize>)>,
) {
    let last = *walker.path.last().unwrap();
    let len = walker.path.len();
    for &w in adj.neighbors(last) {
        if w <= s || walker.in_path[w] {
            continue;
        }
        if len >= 2 && adj.has_edge(w, s) {
            // Closing vertex: adjacent to exactly the two path ends. Requiring the
            // second vertex to be smaller than the closing one fixes a direction.
            if walker.touch[w] == 2 && k_min <= len + 1 && len < k_max && walker.path[1] < w {
                let mut nodes = walker.path.clone();
                nodes.push(w);
                out.push((nodes, None));
            }
        } else if walker.touch[w] == 1 && len + 2 <= k_max {
            walker.push(w);
            cycle_search(adj, walker, s, k_min, k_max, out);
            walker.pop();
        }
    }
}

/// Induced paths with node count in `[k_min, k_max]`, one per node set.
pub fn enumerate_paths(g: &Graph, k_min: usize, k_max: usize) -> Vec<Substructure> {
    assert!(
        2 <= k_min && k_min <= k_max,
        "path sizes need 2 <= k_min <= k_max"
    );
    let adj = g.adjacency();
    let mut walker = InducedWalker::new(&adj);
    let mut out = Vec::new();
    for s in 0..adj.num_nodes() {
        walker.push(s);
        path_search(&adj, &mut walker, k_min, k_max, &mut out);
        walker.pop();
    }
    finish(&adj, out, Kind::Path)
}

fn path_search(
    adj: &Adjacency,
    walker: &mut InducedWalker,
    k_min: usize,
    k_max: usize,
    out: &mut Vec<(Vec<usize>, Option<usize>)>,
) {
    let len = walker.path.len();
    let first = walker.path[0];
    let last = walker.path[len - 1];
    // Each path is reported from its smaller endpoint.
    if len >= k_min && last > first {
        out.push((walker.path.clone(), None));
    }
    if len == k_max {
        return;
    }
    for &w in adj.neighbors(last) {
        if !walker.in_path[w] && walker.touch[w] == 1 {
            walker.push(w);
            path_search(adj, walker, k_min, k_max, out);
            walker.pop();
        }
    }
}

/// Induced stars: a center plus `[leaves_min, leaves_max]` pairwise
/// non-adjacent neighbors.
pub fn enumerate_stars(g: &Graph, leaves_min: usize, leaves_max: usize) -> Vec<Substructure> {
    assert!(
        2 <= leaves_min && leaves_min <= leaves_max,
        "stars need 2 <= leaves_min <= leaves_max"
    );
    let adj = g.adjacency();
    let mut out = Vec::new();
    let mut leaves = Vec::new();
    for c in 0..adj.num_nodes() {
        let nbrs = adj.neighbors(c);
        leaf_search(
            &adj,
            nbrs,
            0,
            &mut leaves,
            leaves_min,
            leaves_max,
            &mut |leaves| {
                let mut nodes = leaves.to_vec();
                nodes.push(c);
                out.push((nodes, Some(c)));
            },
        );
    }
    finish(&adj, out, Kind::Star)
}

fn leaf_search(
    adj: &Adjacency,
    candidates: &[usize],
    start: usize,
    chosen: &mut Vec<usize>,
    lo: usize,
    hi: usize,
    emit: &mut dyn FnMut(&[usize]),
) {
    if chosen.len() >= lo {
        emit(chosen);
    }
    if chosen.len() == hi {
        return;
    }
    for idx in start..candidates.len() {
        let w = candidates[idx];
        if chosen.iter().all(|&u| !adj.has_edge(u, w)) {
            chosen.push(w);
            leaf_search(adj, candidates, idx + 1, chosen, lo, hi, emit);
            chosen.pop();
        }
    }
}

fn finish(adj: &Adjacency, raw: Vec<(Vec<usize>, Option<usize>)>, kind: Kind) -> Vec<Substructure> {
    let mut items: Vec<Substructure> = raw
        .into_iter()
        .map(|(nodes, center)| Substructure::new(adj, nodes, kind, center))
        .collect();
    items.sort_by(|a, b| (&a.nodes, a.center).cmp(&(&b.nodes, b.center)));
    items
}

/// Path under construction, with per-node counts of adjacent path vertices.
struct InducedWalker {
    path: Vec<usize>,
    in_path: Vec<bool>,
    touch: Vec<u32>,
    neighbors: Vec<Vec<usize>>,
}

impl InducedWalker {
    fn new(adj: &Adjacency) -> Self {
        let n = adj.num_nodes();
        InducedWalker {
            path: Vec::new(),
            in_path: vec![false; n],
            touch: vec![0; n],
            neighbors: (0..n).map(|v| adj.neighbors(v).to_vec()).collect(),
        }
    }

    fn push(&mut self, v: usize) {
        self.path.push(v);
        self.in_path[v] = true;
        for &x in &self.neighbors[v] {
            self.touch[x] += 1;
        }
    }

    fn pop(&mut self) {
        let v = self.path.pop().unwrap();
        self.in_path[v] = false;
        for &x in &self.neighbors[v] {
            self.touch[x] -= 1;
        }
    }
}

/// Nodes within `k` hops of `v`, as an induced substructure rooted at `v`.
pub fn khop_neighborhood(g: &Graph, v: usize, k: usize) -> Substructure {
    let adj = g.adjacency();
    khop_with(&adj, v, k)
}

fn khop_with(adj: &Adjacency, v: usize, k: usize) -> Substructure {
    let mut dist = vec![usize::MAX; adj.num_nodes()];
    dist[v] = 0;
    let mut queue = VecDeque::from([v]);
    let mut nodes = vec![v];
    while let Some(u) = queue.pop_front() {
        if dist[u] == k {
            continue;
        }
        for &w in adj.neighbors(u) {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                nodes.push(w);
                queue.push_back(w);
            }
        }
    }
    Substructure::new(adj, nodes, Kind::Khop, Some(v))
}

/// Nodes visited by one uniform random walk of `steps` steps from `v`.
/// An isolated start stays put.
pub fn random_walk_neighborhood<R: Rng + ?Sized>(
    g: &Graph,
    v: usize,
    steps: usize,
    rng: &mut R,
) -> Substructure {
    let adj = g.adjacency();
    rwalk_with(&adj, v, steps, rng)
}

fn rwalk_with<R: Rng + ?Sized>(
    adj: &Adjacency,
    v: usize,
    steps: usize,
    rng: &mut R,
) -> Substructure {
    let mut nodes = vec![v];
    let mut cur = v;
    for _ in 0..steps {
        if let Some(&next) = adj.neighbors(cur).choose(rng) {
            cur = next;
            nodes.push(cur);
        }
    }
    Substructure::new(adj, nodes, Kind::Rwalk, Some(v))
}

/// Uniformly subsamples an oversized neighborhood down to `s_max` nodes,
/// always keeping its root.
fn truncate<R: Rng + ?Sized>(
    adj: &Adjacency,
    s: Substructure,
    s_max: usize,
    rng: &mut R,
) -> Substructure {
    if s.size() <= s_max {
        return s;
    }
    let root = s.center.expect("neighborhoods are rooted");
    let others: Vec<usize> = s.nodes.iter().copied().filter(|&u| u != root).collect();
    let mut keep: Vec<usize> = others.choose_multiple(rng, s_max - 1).copied().collect();
    keep.push(root);
    Substructure::new(adj, keep, s.kind, s.center)
}

/// Deduplicated collection of substructures extracted from one graph.
#[derive(Debug, Clone, Default)]
pub struct SubstructureSet {
    pub graph_id: usize,
    pub num_nodes: usize,
    items: Vec<Substructure>,
    by_kind: BTreeMap<Kind, Vec<usize>>,
    keys: HashSet<(Kind, Vec<usize>, Option<usize>)>,
}

impl SubstructureSet {
    pub fn new(graph_id: usize, num_nodes: usize) -> Self {
        SubstructureSet {
            graph_id,
            num_nodes,
            ..Default::default()
        }
    }

    /// Adds `s` unless an item with the same kind, node set and center exists.
    pub fn push(&mut self, s: Substructure) -> bool {
        let key = (s.kind, s.nodes.clone(), s.center);
        if !self.keys.insert(key) {
            return false;
        }
        self.by_kind
            .entry(s.kind)
            .or_default()
            .push(self.items.len());
        self.items.push(s);
        true
    }

    pub fn items(&self) -> &[Substructure] {
        &self.items
    }

    pub fn get(&self, idx: usize) -> &Substructure {
        &self.items[idx]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Item indices of one kind, in insertion order.
    pub fn indices_of(&self, kind: Kind) -> &[usize] {
        self.by_kind.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn kinds(&self) -> impl Iterator<Item = Kind> + '_ {
        self.by_kind.keys().copied()
    }

    pub fn count(&self, kind: Kind) -> usize {
        self.indices_of(kind).len()
    }
}

/// Union of the configured enumerations. Neighborhood kinds produce one item
/// per node, truncated to `cfg.s_max` nodes; `rng` drives the random walks.
pub fn extract_all<R: Rng + ?Sized>(
    g: &Graph,
    graph_id: usize,
    cfg: &VocabConfig,
    rng: &mut R,
) -> SubstructureSet {
    let adj = g.adjacency();
    let mut set = SubstructureSet::new(graph_id, g.num_nodes);
    if let Some(r) = cfg.cycles {
        enumerate_cycles(g, r.min.max(3), r.max)
            .into_iter()
            .for_each(|s| {
                set.push(s);
            });
    }
    if let Some(r) = cfg.stars {
        enumerate_stars(g, r.min.max(2), r.max)
            .into_iter()
            .for_each(|s| {
                set.push(s);
            });
    }
    if let Some(r) = cfg.paths {
        enumerate_paths(g, r.min.max(2), r.max)
            .into_iter()
            .for_each(|s| {
                set.push(s);
            });
    }
    if let Some(k) = cfg.khop {
        let mut trunc_rng = ChaCha8Rng::seed_from_u64(KHOP_TRUNCATION_SEED);
        for v in 0..g.num_nodes {
            let s = khop_with(&adj, v, k);
            set.push(truncate(&adj, s, cfg.s_max, &mut trunc_rng));
        }
    }
    if let Some(steps) = cfg.rwalk {
        for v in 0..g.num_nodes {
            let s = rwalk_with(&adj, v, steps, rng);
            set.push(truncate(&adj, s, cfg.s_max, rng));
        }
    }
    set
}
