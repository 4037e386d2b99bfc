//! The acceptance criteria as plain functions. Each returns a one-line
//! summary, `Ok` when the criterion holds.

use std::time::Instant;

use deepgraph::capacity::{
    attention_capacity, verify_theorem1, verify_theorem3, PatternBasis, ShapeSpec,
};
use deepgraph::experiments::{
    ablate, mean_eval, repro_capacity, AblationConfig, ReproConfig, Variant,
};
use deepgraph::model::forward;
use deepgraph::model::{prepare_tokens, ModelConfig, ModelParams, Task};
use deepgraph::sampler::{sample_substructures, SamplerParams};
use deepgraph::substructure::{
    enumerate_cycles, enumerate_paths, enumerate_stars, extract_all, Kind,
};
use deepgraph::{Substructure, SubstructureSet, VocabConfig};
use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    all_adjacencies, brute_force_substructures, capacity_by_enumeration, encoding_distribution,
    gradient_errors, node_sets, random_graph, star_sets,
};

pub type Outcome = Result<String, String>;

pub const SEED: u64 = 0;

pub const CAPACITY_TOL: f64 = 1e-9;
pub const GRAD_TOL: f64 = 1e-4;
/// Two encoding distributions are equal when every probability agrees to this.
pub const DIST_TOL: f64 = 1e-12;
pub const PROPTEST_CASES: u32 = 256;

fn verdict(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn timed(start: Instant) -> String {
    format!("{:.1}s", start.elapsed().as_secs_f64())
}

/// 200 random graphs of at most 9 nodes; cycles, paths and stars against
/// subset enumeration.
pub fn enumeration_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut mismatches = Vec::new();
    let mut items = 0;
    for trial in 0..200 {
        let n = rng.random_range(1..=9);
        let p = rng.random_range(0.15..0.75);
        let g = random_graph(n, p, &mut rng);
        let brute = brute_force_substructures(&g);
        let cycles = if n >= 3 {
            node_sets(&enumerate_cycles(&g, 3, n))
        } else {
            Default::default()
        };
        let paths = if n >= 2 {
            node_sets(&enumerate_paths(&g, 2, n))
        } else {
            Default::default()
        };
        let stars = if n >= 3 {
            star_sets(&enumerate_stars(&g, 2, n - 1))
        } else {
            Default::default()
        };
        items += cycles.len() + paths.len() + stars.len();
        if cycles != brute.cycles || paths != brute.paths || stars != brute.stars {
            mismatches.push(trial);
        }
    }
    verdict(
        mismatches.is_empty(),
        format!(
            "200 graphs, {items} substructures, mismatching graphs {mismatches:?}, {}",
            timed(start)
        ),
    )
}

/// Closed-form capacity against exhaustive one-hot enumeration, n <= 4, m <= 3.
pub fn capacity_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=3);
        let d = rng.random_range(1..=4);
        let sets: Vec<Vec<usize>> = (0..m)
            .map(|_| {
                let mut nodes: Vec<usize> = (0..n).collect();
                nodes.shuffle(&mut rng);
                nodes.truncate(rng.random_range(1..=n));
                nodes
            })
            .collect();
        let e = PatternBasis::from_node_sets(n, &sets).unwrap();
        let h = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
        let w = Array2::from_shape_fn((d, d), |_| rng.random_range(-1.0..1.0));
        let closed = attention_capacity(&h.view(), &e, &w.view()).unwrap();
        let brute = capacity_by_enumeration(&h, e.matrix(), &w);
        worst = worst.max((closed - brute).abs());
    }
    verdict(
        worst <= CAPACITY_TOL,
        format!(
            "1000 instances, max |diff| {worst:.2e} (tol {CAPACITY_TOL:.0e}), {}",
            timed(start)
        ),
    )
}

/// Depth bound with the stated sqrt(2m) prefactor, and alpha < 1, over 1000
/// random simplified stacks.
pub fn theorem1_bound() -> Outcome {
    let start = Instant::now();
    let spec = ShapeSpec::Random {
        max_depth: 8,
        max_n: 16,
        max_m: 5,
    };
    let r = verify_theorem1(spec, 1000, SEED).map_err(|e| e.to_string())?;
    verdict(
        r.violations == 0 && r.alpha_not_below_one == 0,
        format!(
            "{} layers, {} violations (max ratio {:.3}), {} with sqrt(2n), alpha >= 1 in {} (max {:.6}), {}",
            r.layers_checked,
            r.violations,
            r.max_ratio,
            r.violations_sqrt_2n,
            r.alpha_not_below_one,
            r.max_alpha,
            timed(start)
        ),
    )
}

/// Adversarial global alpha below the smallest local alpha, r_max = n/2.
pub fn theorem3_ordering() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [8, 16] {
        let r = verify_theorem3(n, n / 2, n / 2, n, 10_000, SEED).map_err(|e| e.to_string())?;
        ok &= r.ordering_holds;
        parts.push(format!(
            "n={n}: global {:.4} vs local min {:.4}",
            r.global_adversarial_alpha, r.local_min_alpha
        ));
    }
    verdict(ok, format!("{}, {}", parts.join("; "), timed(start)))
}

pub fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut worst = (String::new(), 0.0f64);
    for (task, seed) in [
        (Task::GraphRegression, 1),
        (Task::NodeClassification { classes: 3 }, 2),
    ] {
        for (name, err) in gradient_errors(task, None, seed) {
            if err >= worst.1 {
                worst = (name, err);
            }
        }
    }
    verdict(
        worst.1 < GRAD_TOL,
        format!(
            "worst block {} at {:.2e} (tol {GRAD_TOL:.0e}), {}",
            worst.0,
            worst.1,
            timed(start)
        ),
    )
}

/// Random 24-layer models: unmasked capacity decays, masked ends above unmasked.
pub fn capacity_decay() -> Outcome {
    let start = Instant::now();
    let r = repro_capacity(&ReproConfig::default(), SEED).map_err(|e| e.to_string())?;
    let (u_first, u_last) = (
        r.unmasked[0].normalized,
        r.unmasked.last().unwrap().normalized,
    );
    let m_last = r.masked.last().unwrap().normalized;
    verdict(
        u_last < u_first && m_last > u_last,
        format!(
            "unmasked layer 1 {u_first:.4} -> layer {} {u_last:.4}; masked final {m_last:.4}, {}",
            r.unmasked.len(),
            timed(start)
        ),
    )
}

pub fn ablation_direction() -> Outcome {
    let start = Instant::now();
    let cfg = AblationConfig {
        variants: vec![Variant::Full, Variant::NoLocalAttention],
        ..AblationConfig::default()
    };
    let rows = ablate(&cfg, SEED).map_err(|e| e.to_string())?;
    let full = mean_eval(&rows, Variant::Full).unwrap();
    let plain = mean_eval(&rows, Variant::NoLocalAttention).unwrap();
    verdict(
        full <= plain,
        format!(
            "eval MAE full {full:.4}, no_local_attention {plain:.4} over 4 seeds, {}",
            timed(start)
        ),
    )
}

// ---------------------------------------------------------------------------
// Property tests

fn runner() -> TestRunner {
    let config = Config {
        cases: PROPTEST_CASES,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn small_model(seed: u64) -> ModelParams {
    let mut cfg = ModelConfig::new(2, 2, 8, Task::GraphRegression);
    cfg.num_node_feats = 16;
    ModelParams::init(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Substructure tokens see exactly their members, node-node attention is
/// open, and every attention row is a distribution with zeros where masked.
pub fn mask_properties(n: usize, p: f64, seed: u64) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_graph(n, p, &mut rng);
    let set = extract_all(&g, 0, &VocabConfig::from_kinds(&Kind::ALL), &mut rng);
    let picks = sample_substructures(&set, &SamplerParams::for_graph(n, 1), &mut rng);
    let chosen: Vec<&Substructure> = picks.iter().map(|&i| set.get(i)).collect();
    let params = small_model(seed);
    let batch = prepare_tokens(&g, &chosen, &params, &mut rng).unwrap();
    let t = batch.num_tokens();
    prop_assert_eq!(batch.m, chosen.len());
    for i in 0..t {
        for j in 0..t {
            let x = batch.mask[[i, j]];
            prop_assert!(x == 0.0 || x == f64::NEG_INFINITY);
            prop_assert_eq!(x, batch.mask[[j, i]]);
            let open = match (i < n, j < n) {
                (true, true) => true,
                (false, false) => false,
                (true, false) => chosen[j - n].contains(i),
                (false, true) => chosen[i - n].contains(j),
            };
            prop_assert_eq!(x == 0.0, open, "mask entry ({}, {})", i, j);
        }
    }
    let trace = forward(&params, &batch).unwrap();
    for layer in &trace.layers {
        for head in &layer.attention.heads {
            for i in 0..t {
                let row = head.attn.row(i);
                prop_assert!((row.sum() - 1.0).abs() < 1e-12);
                for j in 0..t {
                    prop_assert!(row[j] >= 0.0);
                    if batch.is_masked(i, j) {
                        prop_assert_eq!(row[j], 0.0);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Sampled items are distinct, at most `m_max`, and the sampler only stops
/// once coverage is met, the cap is hit, or nothing left can help.
pub fn sampler_properties(
    set: &SubstructureSet,
    sp: &SamplerParams,
    seed: u64,
) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample_substructures(set, sp, &mut rng);
    let mut seen = picks.clone();
    seen.sort_unstable();
    seen.dedup();
    prop_assert_eq!(seen.len(), picks.len());
    prop_assert!(picks.len() <= sp.m_max);
    let mut cover = vec![0usize; set.num_nodes];
    for &i in &picks {
        for &v in &set.get(i).nodes {
            cover[v] += 1;
        }
    }
    let covered = cover.iter().all(|&c| c >= sp.thre);
    let helpful_left = (0..set.len())
        .filter(|i| !picks.contains(i))
        .any(|i| set.get(i).nodes.iter().any(|&v| cover[v] < sp.thre));
    prop_assert!(covered || picks.len() == sp.m_max || !helpful_left);
    Ok(())
}

/// Exact encoding distributions of an adjacency and a relabeled copy agree.
pub fn dfs_invariance(
    adj: &deepgraph::substructure::InducedAdjacency,
    perm: &[usize],
) -> Result<(), TestCaseError> {
    let a = encoding_distribution(adj, 10);
    let b = encoding_distribution(&adj.relabel(perm), 10);
    prop_assert!((a.values().sum::<f64>() - 1.0).abs() < DIST_TOL);
    prop_assert_eq!(a.len(), b.len());
    for (code, pa) in &a {
        let pb = b.get(code).copied().unwrap_or(0.0);
        prop_assert!(
            (pa - pb).abs() < DIST_TOL,
            "encoding {:?}: {} vs {}",
            code,
            pa,
            pb
        );
    }
    Ok(())
}

pub fn sampler_case() -> impl Strategy<Value = (usize, f64, usize, u64)> {
    (1usize..=14, 0.1f64..0.8, 1usize..=3, any::<u64>())
}

fn sampler_setup(n: usize, p: f64, thre: usize, seed: u64) -> (SubstructureSet, SamplerParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_graph(n, p, &mut rng);
    let set = extract_all(&g, 0, &VocabConfig::from_kinds(&Kind::ALL), &mut rng);
    (set, SamplerParams::for_graph(n, thre))
}

pub fn check_sampler(n: usize, p: f64, thre: usize, seed: u64) -> Result<(), TestCaseError> {
    let (set, sp) = sampler_setup(n, p, thre, seed);
    sampler_properties(&set, &sp, seed ^ 1)
}

pub fn dfs_case() -> impl Strategy<Value = (usize, u32, u64)> {
    (1usize..=5, any::<u32>(), any::<u64>())
}

pub fn check_dfs(k: usize, edge_bits: u32, perm_seed: u64) -> Result<(), TestCaseError> {
    let all = all_adjacencies(k);
    let adj = &all[edge_bits as usize % all.len()];
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
    dfs_invariance(adj, &perm)
}

/// Every graph on at most 4 nodes under every relabeling.
pub fn dfs_exhaustive_small() -> Result<(), TestCaseError> {
    for k in 1..=4 {
        let perms = permutations(k);
        for adj in all_adjacencies(k) {
            for perm in &perms {
                dfs_invariance(&adj, perm)?;
            }
        }
    }
    Ok(())
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

pub fn properties() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mask = runner().run(&(1usize..=12, 0.1f64..0.8, any::<u64>()), |(n, p, s)| {
        mask_properties(n, p, s)
    });
    if let Err(e) = mask {
        failures.push(format!("mask/row-stochastic: {e}"));
    }
    if let Err(e) = runner().run(&sampler_case(), |(n, p, t, s)| check_sampler(n, p, t, s)) {
        failures.push(format!("sampler coverage: {e}"));
    }
    if let Err(e) = runner().run(&dfs_case(), |(k, b, s)| check_dfs(k, b, s)) {
        failures.push(format!("dfs invariance: {e}"));
    }
    if let Err(e) = dfs_exhaustive_small() {
        failures.push(format!("dfs invariance (exhaustive): {e}"));
    }
    verdict(
        failures.is_empty(),
        format!(
            "{} cases x 3 properties plus exhaustive <= 4 nodes{}, {}",
            PROPTEST_CASES,
            if failures.is_empty() {
                String::new()
            } else {
                format!(": {}", failures.join("; "))
            },
            timed(start)
        ),
    )
}
