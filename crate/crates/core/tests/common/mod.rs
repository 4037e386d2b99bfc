//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use deepgraph::canonical::{dfs_order_with, encode, Chooser};
use deepgraph::graph::Target;
use deepgraph::model::{
    forward, prepare_tokens, ModelConfig, ModelParams, Prediction, Task, TokenBatch,
};
use deepgraph::substructure::{InducedAdjacency, Kind};
use deepgraph::train::{backward, loss};
use deepgraph::{Graph, Substructure};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Finite differences

pub const FD_STEP: f64 = 1e-4;

fn loss_at(params: &ModelParams, batch: &TokenBatch, target: &Target) -> f64 {
    let trace = forward(params, batch).unwrap();
    loss(&trace.prediction, target, params.config.task)
        .unwrap()
        .value
}

/// Central-difference gradient of the loss for every tensor, keyed by path.
pub fn numeric_gradients(
    params: &ModelParams,
    batch: &TokenBatch,
    target: &Target,
) -> Vec<(String, Vec<f64>)> {
    let mut work = params.clone();
    let names: Vec<(String, usize)> = params
        .tensors()
        .iter()
        .map(|(n, t)| (n.clone(), t.len()))
        .collect();
    let mut out = Vec::new();
    for (idx, (name, len)) in names.into_iter().enumerate() {
        let mut grad = Vec::with_capacity(len);
        for k in 0..len {
            let orig = nth(&work, idx, k);
            set_nth(&mut work, idx, k, orig + FD_STEP);
            let up = loss_at(&work, batch, target);
            set_nth(&mut work, idx, k, orig - FD_STEP);
            let down = loss_at(&work, batch, target);
            set_nth(&mut work, idx, k, orig);
            grad.push((up - down) / (2.0 * FD_STEP));
        }
        out.push((name, grad));
    }
    out
}

fn nth(p: &ModelParams, tensor: usize, k: usize) -> f64 {
    p.tensors()[tensor].1.iter().nth(k).copied().unwrap()
}

fn set_nth(p: &mut ModelParams, tensor: usize, k: usize, v: f64) {
    let mut all = p.tensors_mut();
    *all[tensor].1.iter_mut().nth(k).unwrap() = v;
}

/// `|a - b| / max(|a|, |b|)` in the Euclidean norm; zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

// ---------------------------------------------------------------------------
// Random graphs

pub fn random_graph<R: Rng>(n: usize, p: f64, rng: &mut R) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges)
}

// ---------------------------------------------------------------------------
// Gradient check

/// Relative error between analytic and central-difference gradients for
/// every tensor of a 2-layer, 2-head, width-8 model on a 6-node graph with
/// two substructure tokens.
pub fn gradient_errors(task: Task, eta_override: Option<f64>, seed: u64) -> Vec<(String, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = ModelConfig::new(2, 2, 8, task);
    cfg.num_node_feats = 4;
    cfg.num_edge_feats = 3;
    if let Some(eta) = eta_override {
        cfg.eta = eta;
    }
    let mut params = ModelParams::init(cfg, &mut rng).unwrap();
    // Non-trivial layer-norm parameters exercise every term of the LN gradient.
    for layer in &mut params.layers {
        layer.ln1_gain.mapv_inplace(|_| rng.random_range(0.5..1.5));
        layer.ln2_bias.mapv_inplace(|_| rng.random_range(-0.3..0.3));
        layer.ff1_b.mapv_inplace(|_| rng.random_range(-0.3..0.3));
    }
    let mut g = Graph::from_edges(6, vec![(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5)]);
    g.node_feat = vec![0, 1, 2, 3, 1, 0];
    g.edge_feat = vec![0, 1, 2, 0, 1, 2];
    let adj = g.adjacency();
    let subs = [
        Substructure::new(&adj, vec![0, 1, 2], Kind::Cycle, None),
        Substructure::new(&adj, vec![2, 3, 4, 5], Kind::Path, None),
    ];
    let chosen: Vec<&Substructure> = subs.iter().collect();
    let batch = prepare_tokens(&g, &chosen, &params, &mut rng).unwrap();
    let trace = forward(&params, &batch).unwrap();
    let target = match (task, &trace.prediction) {
        (Task::GraphRegression, Prediction::Scalar(p)) => Target::Scalar(p + 3.0),
        _ => Target::NodeLabels(vec![0, 1, 2, 1, 0, 2]),
    };
    let (_, grads) = backward(&trace, &params, &batch, &target).unwrap();
    let numeric = numeric_gradients(&params, &batch, &target);
    grads
        .tensors()
        .into_iter()
        .zip(numeric)
        .map(|((name, analytic), (_, fd))| {
            let a: Vec<f64> = analytic.iter().copied().collect();
            (name, relative_error(&a, &fd))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Brute-force substructure enumeration

/// Node sets (and star centers) of every induced cycle, path and star,
/// found by testing each node subset.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct BruteForce {
    pub cycles: BTreeSet<Vec<usize>>,
    pub paths: BTreeSet<Vec<usize>>,
    pub stars: BTreeSet<(Vec<usize>, usize)>,
}

pub fn brute_force_substructures(g: &Graph) -> BruteForce {
    let n = g.num_nodes;
    assert!(n <= 16);
    let mut edge = vec![vec![false; n]; n];
    for &(u, v) in &g.edges {
        edge[u][v] = true;
        edge[v][u] = true;
    }
    let mut out = BruteForce::default();
    for mask in 1u32..(1 << n) {
        let nodes: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        let k = nodes.len();
        if k < 2 {
            continue;
        }
        let deg: Vec<usize> = nodes
            .iter()
            .map(|&u| nodes.iter().filter(|&&v| edge[u][v]).count())
            .collect();
        let edges: usize = deg.iter().sum::<usize>() / 2;
        if !connected(&nodes, &edge) {
            continue;
        }
        if k >= 3 && deg.iter().all(|&d| d == 2) {
            out.cycles.insert(nodes.clone());
        }
        // A connected graph with k-1 edges and maximum degree 2 is a path.
        if edges == k - 1 && deg.iter().all(|&d| d <= 2) {
            out.paths.insert(nodes.clone());
        }
        if k >= 3 && edges == k - 1 {
            if let Some(c) = (0..k).find(|&i| deg[i] == k - 1) {
                out.stars.insert((nodes.clone(), nodes[c]));
            }
        }
    }
    out
}

fn connected(nodes: &[usize], edge: &[Vec<bool>]) -> bool {
    let mut seen = vec![false; nodes.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..nodes.len() {
            if !seen[j] && edge[nodes[i]][nodes[j]] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.iter().all(|&s| s)
}

pub fn node_sets(items: &[Substructure]) -> BTreeSet<Vec<usize>> {
    items.iter().map(|s| sorted(&s.nodes)).collect()
}

pub fn star_sets(items: &[Substructure]) -> BTreeSet<(Vec<usize>, usize)> {
    items
        .iter()
        .map(|s| (sorted(&s.nodes), s.center.expect("star without center")))
        .collect()
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}

// ---------------------------------------------------------------------------
// Exhaustive attention capacity

/// `max ||(C1 - C2) E^T H W||_F` over all pairs of row-one-hot `n x m` mixing
/// matrices, by explicit enumeration.
pub fn capacity_by_enumeration(h: &Array2<f64>, e: &Array2<f64>, w: &Array2<f64>) -> f64 {
    let (n, m) = e.dim();
    let v = e.t().dot(h).dot(w);
    let total = m.pow(n as u32);
    let mut best: f64 = 0.0;
    for c1 in 0..total {
        for c2 in 0..total {
            let (mut a, mut b) = (c1, c2);
            let mut sq = 0.0;
            for _ in 0..n {
                let (ra, rb) = (a % m, b % m);
                a /= m;
                b /= m;
                sq += (&v.row(ra) - &v.row(rb)).mapv(|x| x * x).sum();
            }
            best = best.max(sq.sqrt());
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Exact DFS encoding distribution

/// Replays a fixed prefix of choices, then picks 0 and records each arity.
struct Scripted {
    prefix: Vec<usize>,
    pos: usize,
    arities: Vec<usize>,
    taken: Vec<usize>,
}

impl Chooser for Scripted {
    fn choose(&mut self, n: usize) -> usize {
        let pick = self.prefix.get(self.pos).copied().unwrap_or(0);
        assert!(pick < n, "replayed choice out of range");
        self.pos += 1;
        self.arities.push(n);
        self.taken.push(pick);
        pick
    }
}

/// Probability of each flattened encoding over every branch of the DFS.
pub fn encoding_distribution(adj: &InducedAdjacency, s_max: usize) -> BTreeMap<Vec<u8>, f64> {
    let mut dist = BTreeMap::new();
    let mut prefix: Vec<usize> = Vec::new();
    loop {
        let mut ch = Scripted {
            prefix: prefix.clone(),
            pos: 0,
            arities: Vec::new(),
            taken: Vec::new(),
        };
        let order = dfs_order_with(adj, &mut ch);
        let prob: f64 = ch.arities.iter().map(|&a| 1.0 / a as f64).product();
        let form = encode(adj, &order, s_max).unwrap();
        *dist.entry(form.flat_adj).or_insert(0.0) += prob;
        // Advance the branch odometer from the deepest decision.
        let mut next = ch.taken;
        loop {
            match next.pop() {
                None => return dist,
                Some(c) => {
                    let arity = ch.arities[next.len()];
                    if c + 1 < arity {
                        next.push(c + 1);
                        break;
                    }
                }
            }
        }
        prefix = next;
    }
}

/// Every labeled graph on `k` nodes, by edge bitmask.
pub fn all_adjacencies(k: usize) -> Vec<InducedAdjacency> {
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .collect();
    (0u32..1 << pairs.len())
        .map(|mask| {
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &p)| p)
                .collect();
            InducedAdjacency::from_edges(k, &edges)
        })
        .collect()
}

pub mod criteria;
