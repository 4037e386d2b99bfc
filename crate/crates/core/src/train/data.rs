//! Synthetic datasets: cycle-count regression and two-block community labels.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, Target};
use crate::substructure::enumerate_cycles;

/// Node features for the cycle task are degrees, saturated at this value.
pub const MAX_DEGREE_FEATURE: usize = 15;
/// Share of nodes per block whose label is exposed as a feature (at least one).
pub const REVEAL_FRACTION: f64 = 0.1;

/// Number of induced cycles of length 3 to 8.
pub fn cycle_count(g: &Graph) -> usize {
    enumerate_cycles(g, 3, 8).len()
}

/// Random graphs with every edge present independently with `edge_prob`.
/// Targets are induced-cycle counts, standardized over the whole dataset
/// (only centered when every count is equal).
pub fn gen_cycle_regression<R: Rng + ?Sized>(
    n_graphs: usize,
    node_range: (usize, usize),
    edge_prob: f64,
    rng: &mut R,
) -> Result<Vec<Graph>> {
    let (lo, hi) = node_range;
    if lo < 4 || hi > 24 || lo > hi {
        return Err(Error::Config(format!(
            "node range {lo}..={hi} must lie within 4..=24"
        )));
    }
    check_prob("edge_prob", edge_prob)?;
    let mut graphs = Vec::with_capacity(n_graphs);
    let mut raw = Vec::with_capacity(n_graphs);
    for _ in 0..n_graphs {
        let n = rng.random_range(lo..=hi);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random_bool(edge_prob) {
                    edges.push((u, v));
                }
            }
        }
        let mut g = Graph::from_edges(n, edges);
        let adj = g.adjacency();
        g.node_feat = (0..n)
            .map(|v| adj.degree(v).min(MAX_DEGREE_FEATURE))
            .collect();
        raw.push(cycle_count(&g) as f64);
        graphs.push(g);
    }
    let count = raw.len().max(1) as f64;
    let mean = raw.iter().sum::<f64>() / count;
    let var = raw.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / count;
    let std = if var > 0.0 { var.sqrt() } else { 1.0 };
    for (g, c) in graphs.iter_mut().zip(raw) {
        g.target = Some(Target::Scalar((c - mean) / std));
    }
    Ok(graphs)
}

/// Two equal blocks; edges inside a block appear with `p_in`, across with `p_out`.
/// Labels are block ids. Revealed seed nodes carry feature `label + 1`, all
/// others feature 0.
pub fn gen_community_nodes<R: Rng + ?Sized>(
    n_graphs: usize,
    nodes_per_block: usize,
    p_in: f64,
    p_out: f64,
    rng: &mut R,
) -> Result<Vec<Graph>> {
    check_prob("p_in", p_in)?;
    check_prob("p_out", p_out)?;
    if p_in <= p_out {
        return Err(Error::Config(format!(
            "p_in ({p_in}) must exceed p_out ({p_out})"
        )));
    }
    if nodes_per_block == 0 {
        return Err(Error::Config("nodes_per_block must be positive".into()));
    }
    let n = 2 * nodes_per_block;
    let reveal = ((nodes_per_block as f64 * REVEAL_FRACTION).round() as usize).max(1);
    let mut graphs = Vec::with_capacity(n_graphs);
    for _ in 0..n_graphs {
        let labels: Vec<usize> = (0..n).map(|v| v / nodes_per_block).collect();
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let p = if labels[u] == labels[v] { p_in } else { p_out };
                if rng.random_bool(p) {
                    edges.push((u, v));
                }
            }
        }
        let mut g = Graph::from_edges(n, edges);
        for block in 0..2 {
            let mut members: Vec<usize> =
                (block * nodes_per_block..(block + 1) * nodes_per_block).collect();
            members.shuffle(rng);
            for &v in &members[..reveal] {
                g.node_feat[v] = block + 1;
            }
        }
        g.target = Some(Target::NodeLabels(labels));
        graphs.push(g);
    }
    Ok(graphs)
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{name} must be a probability, got {p}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn raw_cycle_targets() {
        assert_eq!(cycle_count(&Graph::cycle(3)), 1);
        assert_eq!(cycle_count(&Graph::from_edges(5, vec![])), 0);
    }

    #[test]
    fn targets_are_standardized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let graphs = gen_cycle_regression(200, (6, 12), 0.3, &mut rng).unwrap();
        let t: Vec<f64> = graphs.iter().map(|g| g.scalar_target().unwrap()).collect();
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        let var = t.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / t.len() as f64;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-9);
        for g in &graphs {
            crate::graph::validate(g).unwrap();
        }
    }

    #[test]
    fn bad_ranges_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(gen_cycle_regression(1, (3, 8), 0.3, &mut rng).is_err());
        assert!(gen_cycle_regression(1, (8, 30), 0.3, &mut rng).is_err());
        assert!(gen_community_nodes(1, 5, 0.1, 0.3, &mut rng).is_err());
    }

    #[test]
    fn disconnected_blocks_are_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = &gen_community_nodes(1, 6, 1.0, 0.0, &mut rng).unwrap()[0];
        let labels = g.node_labels().unwrap();
        for &(u, v) in &g.edges {
            assert_eq!(labels[u], labels[v]);
        }
        assert_eq!(g.edges.len(), 2 * 15);
    }

    #[test]
    fn revealed_seeds_match_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for g in gen_community_nodes(20, 10, 0.3, 0.05, &mut rng).unwrap() {
            let labels = g.node_labels().unwrap();
            let revealed: Vec<usize> = (0..20).filter(|&v| g.node_feat[v] > 0).collect();
            assert_eq!(revealed.len(), 2);
            for v in revealed {
                assert_eq!(g.node_feat[v] - 1, labels[v]);
            }
            assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 10);
        }
    }
}
