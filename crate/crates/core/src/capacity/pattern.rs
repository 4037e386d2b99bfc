use ndarray::Array2;

use crate::error::{Error, Result};
use crate::substructure::Substructure;

/// Attention patterns of `m` substructures over `n` nodes: column `j` is the
/// uniform distribution on the nodes of substructure `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternBasis {
    e: Array2<f64>,
}

impl PatternBasis {
    pub fn from_node_sets(n: usize, sets: &[Vec<usize>]) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::EmptyPattern("pattern basis"));
        }
        let mut e = Array2::zeros((n, sets.len()));
        for (j, nodes) in sets.iter().enumerate() {
            let mut nodes = nodes.clone();
            nodes.sort_unstable();
            nodes.dedup();
            if nodes.is_empty() {
                return Err(Error::Shape(format!("substructure {j} has no nodes")));
            }
            if let Some(&bad) = nodes.iter().find(|&&v| v >= n) {
                return Err(Error::NodeOutOfRange {
                    node: bad,
                    num_nodes: n,
                });
            }
            let w = 1.0 / nodes.len() as f64;
            for v in nodes {
                e[[v, j]] = w;
            }
        }
        Ok(PatternBasis { e })
    }

    pub fn from_substructures(n: usize, subs: &[&Substructure]) -> Result<Self> {
        let sets: Vec<Vec<usize>> = subs.iter().map(|s| s.nodes.clone()).collect();
        Self::from_node_sets(n, &sets)
    }

    /// `n x m`.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.e
    }

    pub fn num_nodes(&self) -> usize {
        self.e.nrows()
    }

    pub fn num_patterns(&self) -> usize {
        self.e.ncols()
    }
}
