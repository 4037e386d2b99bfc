//! Degree-guided randomized DFS ordering and flattened adjacency encoding of
//! substructures.
//!
//! The DFS starts from a uniformly chosen minimum-degree node; at each node the
//! unvisited neighbors are visited in ascending degree order, with same-degree
//! neighbors in uniformly random order. Because every random decision depends
//! only on degrees, the distribution of encodings is invariant under node
//! relabeling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::substructure::{InducedAdjacency, Substructure};

/// Source of uniform choices for the DFS.
pub trait Chooser {
    /// Uniform index in `0..n`, `n >= 1`.
    fn choose(&mut self, n: usize) -> usize;
}

/// Adapts any RNG to [`Chooser`].
pub struct RngChooser<'a, R: ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> Chooser for RngChooser<'_, R> {
    fn choose(&mut self, n: usize) -> usize {
        if n == 1 {
            0
        } else {
            self.0.random_range(0..n)
        }
    }
}

/// Flattened, zero-padded adjacency of a substructure in DFS order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanonicalForm {
    /// `perm[p]` is the substructure-local node placed at position `p`.
    pub perm: Vec<usize>,
    /// Upper triangle of the `s_max x s_max` padded adjacency, row-major:
    /// pairs (0,1), (0,2), ..., (0,s_max-1), (1,2), ...
    pub flat_adj: Vec<u8>,
    pub size: usize,
}

/// Number of entries in a flattened encoding for substructures of at most `s_max` nodes.
pub fn flat_len(s_max: usize) -> usize {
    s_max * s_max.saturating_sub(1) / 2
}

/// Position of pair `(i, j)`, `i < j < s_max`, in the flattened encoding.
pub fn flat_index(i: usize, j: usize, s_max: usize) -> usize {
    debug_assert!(i < j && j < s_max);
    i * s_max - i * (i + 1) / 2 + (j - i - 1)
}

pub fn dfs_order<R: Rng + ?Sized>(adj: &InducedAdjacency, rng: &mut R) -> Vec<usize> {
    dfs_order_with(adj, &mut RngChooser(rng))
}

/// DFS order driven by an arbitrary [`Chooser`]. Components are restarted at a
/// uniformly chosen minimum-degree unvisited node.
pub fn dfs_order_with<C: Chooser + ?Sized>(adj: &InducedAdjacency, chooser: &mut C) -> Vec<usize> {
    let n = adj.size();
    let degree: Vec<usize> = (0..n).map(|i| adj.degree(i)).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let min_deg = (0..n)
            .filter(|&i| !visited[i])
            .map(|i| degree[i])
            .min()
            .unwrap();
        let starts: Vec<usize> = (0..n)
            .filter(|&i| !visited[i] && degree[i] == min_deg)
            .collect();
        let start = starts[chooser.choose(starts.len())];
        visit(adj, &degree, start, &mut visited, &mut order, chooser);
    }
    order
}

fn visit<C: Chooser + ?Sized>(
    adj: &InducedAdjacency,
    degree: &[usize],
    u: usize,
    visited: &mut [bool],
    order: &mut Vec<usize>,
    chooser: &mut C,
) {
    visited[u] = true;
    order.push(u);
    let mut next: Vec<usize> = (0..adj.size())
        .filter(|&w| adj.get(u, w) && !visited[w])
        .collect();
    next.sort_by_key(|&w| degree[w]);
    let mut lo = 0;
    while lo < next.len() {
        let mut hi = lo + 1;
        while hi < next.len() && degree[next[hi]] == degree[next[lo]] {
            hi += 1;
        }
        shuffle(&mut next[lo..hi], chooser);
        lo = hi;
    }
    for w in next {
        if !visited[w] {
            visit(adj, degree, w, visited, order, chooser);
        }
    }
}

/// Fisher-Yates through the chooser.
fn shuffle<C: Chooser + ?Sized>(items: &mut [usize], chooser: &mut C) {
    for i in (1..items.len()).rev() {
        let j = chooser.choose(i + 1);
        items.swap(i, j);
    }
}

/// Flattens `adj` under `order` into an `s_max`-padded upper triangle.
pub fn encode(adj: &InducedAdjacency, order: &[usize], s_max: usize) -> Result<CanonicalForm> {
    let size = adj.size();
    if size > s_max {
        return Err(Error::SizeOverflow { size, s_max });
    }
    let mut flat_adj = vec![0u8; flat_len(s_max)];
    for a in 0..size {
        for b in a + 1..size {
            if adj.get(order[a], order[b]) {
                flat_adj[flat_index(a, b, s_max)] = 1;
            }
        }
    }
    Ok(CanonicalForm {
        perm: order.to_vec(),
        flat_adj,
        size,
    })
}

pub fn canonicalize<R: Rng + ?Sized>(
    s: &Substructure,
    rng: &mut R,
    s_max: usize,
) -> Result<CanonicalForm> {
    if s.size() > s_max {
        return Err(Error::SizeOverflow {
            size: s.size(),
            s_max,
        });
    }
    let order = dfs_order(&s.adj, rng);
    encode(&s.adj, &order, s_max)
}

/// Independent DFS samples of one substructure, for averaging the encoder over orderings.
pub fn canonicalize_pooled<R: Rng + ?Sized>(
    s: &Substructure,
    num_samples: usize,
    rng: &mut R,
    s_max: usize,
) -> Result<Vec<CanonicalForm>> {
    if num_samples == 0 {
        return Err(Error::Config("num_samples must be at least 1".into()));
    }
    (0..num_samples)
        .map(|_| canonicalize(s, rng, s_max))
        .collect()
}

impl CanonicalForm {
    /// Rebuilds the (permuted) adjacency encoded in `flat_adj`.
    pub fn decode(&self, s_max: usize) -> InducedAdjacency {
        let mut adj = InducedAdjacency::empty(self.size);
        for a in 0..self.size {
            for b in a + 1..self.size {
                if self.flat_adj[flat_index(a, b, s_max)] == 1 {
                    adj.set(a, b, true);
                }
            }
        }
        adj
    }
}
