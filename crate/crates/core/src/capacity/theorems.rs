//! Monte Carlo checks of the depth bounds on attention capacity and of the
//! local-versus-global ordering of the contraction coefficient.

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::coeffs::{alpha_coefficient, gamma_coefficient, residual_coefficients};
use crate::capacity::linalg::{center_rows, frobenius, spectral_norm};
use crate::capacity::measure::attention_capacity;
use crate::capacity::pattern::PatternBasis;
use crate::error::{Error, Result};
use crate::rng::stream_rng;

fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || std * normal(rng))
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn simplex<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Array1<f64> {
    // Exponential weights with a random temperature reach both flat and peaked points.
    let temp: f64 = rng.random_range(0.1..8.0);
    let mut w = Array1::from_shape_simple_fn(len, || {
        let z: f64 = normal(rng);
        (temp * z).exp()
    });
    let s = w.sum();
    w /= s;
    w
}

fn random_node_sets<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut nodes: Vec<usize> = (0..n).collect();
    (0..m)
        .map(|_| {
            nodes.shuffle(rng);
            let k = rng.random_range(1..=n);
            nodes[..k].to_vec()
        })
        .collect()
}

/// Dimensions of one simplified-stack trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackShape {
    pub depth: usize,
    pub n: usize,
    pub m: usize,
    pub d: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerCheck {
    pub layer: usize,
    pub capacity: f64,
    /// Bound with the `sqrt(2m)` prefactor.
    pub bound: f64,
    /// Same bound with `sqrt(2n)`, the operator-norm bound of a difference of
    /// two `n x m` row-stochastic matrices.
    pub bound_sqrt_2n: f64,
    /// Coefficients of this layer's residual block (absent for the last layer).
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub shape: StackShape,
    pub layers: Vec<LayerCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub theorem: u8,
    pub seed: u64,
    pub trials: usize,
    pub layers_checked: usize,
    pub violations: usize,
    pub violations_sqrt_2n: usize,
    /// Layers whose alpha is not strictly below 1.
    pub alpha_not_below_one: usize,
    pub max_alpha: f64,
    /// Largest capacity / bound ratio seen.
    pub max_ratio: f64,
    pub records: Vec<TrialRecord>,
}

/// How trial shapes are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapeSpec {
    Fixed(StackShape),
    /// Uniform depth in `1..=depth`, nodes in `2..=n`, patterns in `2..=m`,
    /// width `n' + 0..=4` so that `H W D` can have full row rank.
    Random {
        max_depth: usize,
        max_n: usize,
        max_m: usize,
    },
}

impl ShapeSpec {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> StackShape {
        match *self {
            ShapeSpec::Fixed(s) => s,
            ShapeSpec::Random {
                max_depth,
                max_n,
                max_m,
            } => {
                let n = rng.random_range(2..=max_n.max(2));
                StackShape {
                    depth: rng.random_range(1..=max_depth.max(1)),
                    n,
                    m: rng.random_range(2..=max_m.max(2)),
                    d: n + rng.random_range(0..=4),
                }
            }
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            ShapeSpec::Fixed(s) => s.depth >= 1 && s.n >= 1 && s.m >= 1 && s.d >= 1,
            ShapeSpec::Random {
                max_depth,
                max_n,
                max_m,
            } => max_depth >= 1 && max_n >= 2 && max_m >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("stack dimensions must be positive".into()))
        }
    }
}

/// Runs one trial of `H_{i+1} = (H_i + A_i H_i W_i - 1 b_i^T) D_i`, optionally
/// followed by a ReLU feed-forward block per layer. `D_i` is rescaled so that
/// the block preserves the centered norm (lambda = 1), which is the norm
/// assumption under which the bounds are stated.
fn stack_trial<R: Rng + ?Sized>(
    shape: StackShape,
    with_ffn: bool,
    rng: &mut R,
) -> Result<Vec<LayerCheck>> {
    let StackShape { depth, n, m, d } = shape;
    let sets = random_node_sets(n, m, rng);
    let basis = PatternBasis::from_node_sets(n, &sets)?;
    let e = basis.matrix();
    let pm_et = spectral_norm(&center_rows(&e.t()).view())?;
    let mut h = gaussian(n, d, 1.0, rng);
    let ph1 = frobenius(&center_rows(&h.view()).view());
    let ws: Vec<Array2<f64>> = (0..depth)
        .map(|_| gaussian(d, d, 1.0 / (d as f64).sqrt(), rng))
        .collect();
    let mut prefix = 1.0;
    let mut out = Vec::with_capacity(depth);
    for (l, w) in ws.iter().enumerate() {
        let capacity = attention_capacity(&h.view(), &basis, &w.view())?;
        let w_norm = spectral_norm(&w.view())?;
        let tail = pm_et * w_norm * ph1;
        let mut check = LayerCheck {
            layer: l + 1,
            capacity,
            bound: (2.0 * m as f64).sqrt() * prefix * tail,
            bound_sqrt_2n: (2.0 * n as f64).sqrt() * prefix * tail,
            alpha: None,
            lambda: None,
            gamma: None,
        };
        if l + 1 < depth {
            // Attention rows are convex combinations of the patterns.
            let mut c = Array2::zeros((m, n));
            for mut col in c.columns_mut() {
                col.assign(&simplex(m, rng));
            }
            let a = c.t().dot(&e.t());
            let b = Array1::from_shape_simple_fn(d, || 0.1 * normal(rng));
            let raw = Array1::from_shape_simple_fn(d, || rng.random_range(0.5..1.5));
            let (alpha, lambda_raw) = residual_coefficients(
                &h.view(),
                &a.view(),
                &w.view(),
                &b,
                &Array2::from_diag(&raw),
                1.0,
            )?;
            let dmat = Array2::from_diag(&(&raw / lambda_raw));
            let (_, lambda) =
                residual_coefficients(&h.view(), &a.view(), &w.view(), &b, &dmat, 1.0)?;
            let next = (&h + &a.dot(&h).dot(w) - &b).dot(&dmat);
            let mut gamma = 1.0;
            h = next;
            if with_ffn {
                let d_ff = 2 * d;
                let w1 = gaussian(d, d_ff, 1.0 / (d as f64).sqrt(), rng);
                let w2 = gaussian(d_ff, d, 1.0 / (d_ff as f64).sqrt(), rng);
                let b1 = Array1::from_shape_simple_fn(d_ff, || 0.1 * normal(rng));
                let b2 = Array1::from_shape_simple_fn(d, || 0.1 * normal(rng));
                let bn = Array1::from_shape_simple_fn(d, || 0.1 * normal(rng));
                let dp = Array2::from_diag(&Array1::from_shape_simple_fn(d, || {
                    rng.random_range(0.5..1.5)
                }));
                let ff = (h.dot(&w1) + &b1).mapv(|v| v.max(0.0)).dot(&w2);
                h = (&h + &ff + &b2 - &bn).dot(&dp);
                gamma = gamma_coefficient(&dp.view(), &w1.view(), &w2.view())?;
                check.gamma = Some(gamma);
            }
            check.alpha = Some(alpha);
            check.lambda = Some(lambda);
            prefix *= alpha * gamma;
        }
        out.push(check);
    }
    Ok(out)
}

fn bound_report(theorem: u8, spec: ShapeSpec, trials: usize, seed: u64) -> Result<BoundReport> {
    spec.check()?;
    let records = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            let shape = spec.draw(&mut rng);
            let layers = stack_trial(shape, theorem == 2, &mut rng)?;
            Ok(TrialRecord {
                trial: t,
                shape,
                layers,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = BoundReport {
        theorem,
        seed,
        trials,
        layers_checked: 0,
        violations: 0,
        violations_sqrt_2n: 0,
        alpha_not_below_one: 0,
        max_alpha: 0.0,
        max_ratio: 0.0,
        records: Vec::new(),
    };
    for r in &records {
        for l in &r.layers {
            report.layers_checked += 1;
            report.violations += usize::from(l.capacity > l.bound);
            report.violations_sqrt_2n += usize::from(l.capacity > l.bound_sqrt_2n);
            if l.bound > 0.0 {
                report.max_ratio = report.max_ratio.max(l.capacity / l.bound);
            }
            if let Some(a) = l.alpha {
                report.max_alpha = report.max_alpha.max(a);
                report.alpha_not_below_one += usize::from(a >= 1.0);
            }
        }
    }
    report.records = records;
    Ok(report)
}

/// Attention-only stack: capacity at every layer against the product-of-alpha bound.
pub fn verify_theorem1(spec: ShapeSpec, trials: usize, seed: u64) -> Result<BoundReport> {
    bound_report(1, spec, trials, seed)
}

/// Attention plus feed-forward stack: bound with the product of `alpha * gamma`.
pub fn verify_theorem2(spec: ShapeSpec, trials: usize, seed: u64) -> Result<BoundReport> {
    bound_report(2, spec, trials, seed)
}

/// Allowed attention pairs of a local layout: a node may attend itself and any
/// node sharing a substructure with it.
fn local_mask(n: usize, sets: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut allowed = vec![vec![false; n]; n];
    for (i, row) in allowed.iter_mut().enumerate() {
        row[i] = true;
    }
    for set in sets {
        for &u in set {
            for &v in set {
                allowed[u][v] = true;
            }
        }
    }
    allowed
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, &a)| a)
                .map(|(j, _)| j)
                .collect()
        })
        .collect()
}

/// Up to `m` random substructures of 2..=r_max nodes such that no node shares
/// a substructure with more than `r_max` nodes (itself included).
pub fn random_local_layout<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    r_max: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut nodes: Vec<usize> = (0..n).collect();
    if r_max < 2 {
        return sets;
    }
    for _ in 0..m {
        for _attempt in 0..100 {
            nodes.shuffle(rng);
            let k = rng.random_range(2..=r_max.min(n));
            let mut candidate = sets.clone();
            candidate.push(nodes[..k].to_vec());
            if local_mask(n, &candidate)
                .iter()
                .all(|row| row.len() <= r_max)
            {
                sets = candidate;
                break;
            }
        }
    }
    sets
}

/// Row-stochastic attention supported on `allowed`.
fn random_attention<R: Rng + ?Sized>(allowed: &[Vec<usize>], rng: &mut R) -> Array2<f64> {
    let n = allowed.len();
    let mut a = Array2::zeros((n, n));
    for (i, cols) in allowed.iter().enumerate() {
        let w = simplex(cols.len(), rng);
        for (&j, &x) in cols.iter().zip(w.iter()) {
            a[[i, j]] = x;
        }
    }
    a
}

/// Every row puts all weight on the allowed node whose centered value vector
/// is largest, concentrating attention on as few columns as possible.
fn hub_attention(allowed: &[Vec<usize>], strength: &[f64]) -> Array2<f64> {
    let n = allowed.len();
    let mut a = Array2::zeros((n, n));
    for (i, cols) in allowed.iter().enumerate() {
        let best = cols
            .iter()
            .copied()
            .max_by(|&x, &y| strength[x].total_cmp(&strength[y]))
            .expect("every node may attend itself");
        a[[i, best]] = 1.0;
    }
    a
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderingReport {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub r_max: usize,
    pub d: usize,
    pub trials: usize,
    /// Every node attends the single node with the largest centered value vector.
    pub global_adversarial_alpha: f64,
    pub global_random_min_alpha: f64,
    pub local_random_min_alpha: f64,
    /// Hub construction restricted to each sampled local layout (minimum over layouts).
    pub local_adversarial_alpha: f64,
    pub local_min_alpha: f64,
    /// `global_adversarial_alpha < local_min_alpha`.
    pub ordering_holds: bool,
}

/// Minimum contraction coefficient under local versus global attention, for
/// one shared `H`, `W`, `D` and `b = 0`. The global minimum is approached by
/// the construction where every node attends one node; local attention is
/// searched over `trials` random layouts and attention matrices.
pub fn verify_theorem3(
    n: usize,
    m: usize,
    r_max: usize,
    d: usize,
    trials: usize,
    seed: u64,
) -> Result<OrderingReport> {
    if n < 2 || d == 0 || r_max == 0 || r_max >= n {
        return Err(Error::Config(format!(
            "need n >= 2, d >= 1 and 1 <= r_max < n (n={n}, r_max={r_max}, d={d})"
        )));
    }
    let mut rng = stream_rng(seed, u64::MAX);
    let h = gaussian(n, d, 1.0, &mut rng);
    let w = gaussian(d, d, 1.0 / (d as f64).sqrt(), &mut rng);
    let dmat = Array2::from_diag(&Array1::from_shape_simple_fn(d, || {
        rng.random_range(0.5..1.5)
    }));
    let b = Array1::zeros(d);
    let strength: Vec<f64> = center_rows(&h.view())
        .dot(&w)
        .dot(&dmat)
        .rows()
        .into_iter()
        .map(|r| r.dot(&r))
        .collect();
    let alpha = |a: &ArrayView2<f64>| alpha_coefficient(&h.view(), a, &w.view(), &b, &dmat);

    let everything: Vec<Vec<usize>> = vec![(0..n).collect(); n];
    let global_adversarial_alpha = alpha(&hub_attention(&everything, &strength).view())?;

    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            let global = alpha(&random_attention(&everything, &mut rng).view())?;
            let layout = random_local_layout(n, m, r_max, &mut rng);
            let allowed = local_mask(n, &layout);
            let local = alpha(&random_attention(&allowed, &mut rng).view())?;
            let local_hub = alpha(&hub_attention(&allowed, &strength).view())?;
            Ok((global, local, local_hub))
        })
        .collect::<Result<Vec<_>>>()?;
    let min =
        |f: fn(&(f64, f64, f64)) -> f64| per_trial.iter().map(f).fold(f64::INFINITY, f64::min);
    let global_random_min_alpha = min(|t| t.0);
    let local_random_min_alpha = min(|t| t.1);
    let local_adversarial_alpha = min(|t| t.2);
    let local_min_alpha = local_random_min_alpha.min(local_adversarial_alpha);
    Ok(OrderingReport {
        seed,
        n,
        m,
        r_max,
        d,
        trials,
        global_adversarial_alpha,
        global_random_min_alpha,
        local_random_min_alpha,
        local_adversarial_alpha,
        local_min_alpha,
        ordering_holds: global_adversarial_alpha < local_min_alpha,
    })
}
