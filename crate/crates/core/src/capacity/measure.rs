use ndarray::{s, ArrayView2};
use serde::Serialize;

use crate::capacity::coeffs::{gamma_with_eta, ln_scaling, residual_coefficients};
use crate::capacity::linalg::{center_rows, frobenius, spectral_norm};
use crate::capacity::pattern::PatternBasis;
use crate::error::{Error, Result};
use crate::model::forward::ForwardTrace;
use crate::model::params::ModelParams;

/// Maximum over pattern pairs of the output difference. The objective is convex
/// in each column of the mixing matrices, so the maximum sits at one-hot
/// columns and equals `sqrt(n)` times the largest row difference of `E^T H W`.
pub fn attention_capacity(
    h: &ArrayView2<f64>,
    e: &PatternBasis,
    wvo: &ArrayView2<f64>,
) -> Result<f64> {
    if e.num_patterns() == 0 {
        return Err(Error::EmptyPattern("attention capacity"));
    }
    if h.nrows() != e.num_nodes() || h.ncols() != wvo.nrows() {
        return Err(Error::Shape(format!(
            "hidden {:?}, patterns over {} nodes, value-output {:?}",
            h.dim(),
            e.num_nodes(),
            wvo.dim()
        )));
    }
    let v = e.matrix().t().dot(h).dot(wvo);
    Ok((h.nrows() as f64).sqrt() * max_row_distance(&v.view()))
}

fn max_row_distance(v: &ArrayView2<f64>) -> f64 {
    let mut best: f64 = 0.0;
    for a in 0..v.nrows() {
        for b in a + 1..v.nrows() {
            let d = (&v.row(a) - &v.row(b)).mapv(|x| x * x).sum().sqrt();
            best = best.max(d);
        }
    }
    best
}

fn row_norm_sum(x: &ArrayView2<f64>) -> f64 {
    x.rows().into_iter().map(|r| r.dot(&r).sqrt()).sum()
}

fn check_layer(trace: &ForwardTrace, params: &ModelParams, layer: usize) -> Result<()> {
    if layer == 0 || layer > params.layers.len() || layer > trace.layers.len() {
        return Err(Error::Shape(format!(
            "layer {layer} outside 1..={}",
            params.layers.len().min(trace.layers.len())
        )));
    }
    Ok(())
}

/// Capacity of each head at 1-based `layer`, divided by the summed value-vector
/// norms of the node tokens.
pub fn normalized_capacity_per_head(
    trace: &ForwardTrace,
    e: &PatternBasis,
    params: &ModelParams,
    layer: usize,
) -> Result<Vec<(f64, f64)>> {
    check_layer(trace, params, layer)?;
    let h = trace.hidden(layer - 1).slice(s![..trace.n, ..]);
    let lp = &params.layers[layer - 1];
    (0..params.config.heads)
        .map(|head| {
            let w = lp.value_output(head, params.config.d_head);
            let cap = attention_capacity(&h, e, &w.view())?;
            let denom = row_norm_sum(&h.dot(&w).view());
            if denom == 0.0 {
                return Err(Error::ZeroDenominator("normalized capacity"));
            }
            Ok((cap, cap / denom))
        })
        .collect()
}

/// Mean over heads of the normalized capacity.
pub fn normalized_capacity(
    trace: &ForwardTrace,
    e: &PatternBasis,
    params: &ModelParams,
    layer: usize,
) -> Result<f64> {
    let per_head = normalized_capacity_per_head(trace, e, params, layer)?;
    Ok(per_head.iter().map(|p| p.1).sum::<f64>() / per_head.len() as f64)
}

/// Largest value-vector difference between substructure tokens over their mean
/// value-vector norm, averaged over heads.
pub fn token_capacity(trace: &ForwardTrace, params: &ModelParams, layer: usize) -> Result<f64> {
    check_layer(trace, params, layer)?;
    if trace.m < 2 {
        return Err(Error::Shape(format!(
            "token capacity needs two substructure tokens, have {}",
            trace.m
        )));
    }
    let h = trace.hidden(layer - 1).slice(s![trace.n.., ..]);
    let lp = &params.layers[layer - 1];
    let mut total = 0.0;
    for head in 0..params.config.heads {
        let v = h.dot(&lp.value_output(head, params.config.d_head));
        let mean_norm = row_norm_sum(&v.view()) / trace.m as f64;
        if mean_norm == 0.0 {
            return Err(Error::ZeroDenominator("token capacity"));
        }
        total += max_row_distance(&v.view()) / mean_norm;
    }
    Ok(total / params.config.heads as f64)
}

/// Per-layer capacity figures of a forward evaluation. Coefficients use the
/// node-token block of each head's attention and a diagonal stand-in for the
/// layer norm; all per-head quantities are averaged over heads.
#[derive(Debug, Clone, Serialize)]
pub struct LayerCapacity {
    pub layer: usize,
    pub capacity: f64,
    pub normalized: f64,
    pub token_capacity: Option<f64>,
    pub alpha: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub bound: f64,
    pub bound_satisfied: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityReport {
    pub layers: Vec<LayerCapacity>,
}

pub fn capacity_report(
    trace: &ForwardTrace,
    e: &PatternBasis,
    params: &ModelParams,
) -> Result<CapacityReport> {
    let cfg = &params.config;
    let n = trace.n;
    let m = e.num_patterns() as f64;
    let pe = center_rows(&e.matrix().t()).t().to_owned();
    let pm_et = spectral_norm(&pe.t())?;
    let ph1 = frobenius(&center_rows(&trace.hidden(0).slice(s![..n, ..])).view());
    let mut prefix = 1.0;
    let mut layers = Vec::with_capacity(trace.layers.len());
    for l in 1..=trace.layers.len() {
        let lt = &trace.layers[l - 1];
        let lp = &params.layers[l - 1];
        let per_head = normalized_capacity_per_head(trace, e, params, l)?;
        let heads = cfg.heads as f64;
        let capacity = per_head.iter().map(|p| p.0).sum::<f64>() / heads;
        let normalized = per_head.iter().map(|p| p.1).sum::<f64>() / heads;
        let token = if trace.m >= 2 {
            Some(token_capacity(trace, params, l)?)
        } else {
            None
        };

        let h = lt.input.slice(s![..n, ..]);
        let (d, b) = ln_scaling(
            &lt.attention.ln.inv_std.slice(s![..n]),
            &lp.ln1_gain,
            &lp.ln1_bias,
        );
        let (d2, _) = ln_scaling(&lt.ln2.inv_std.slice(s![..n]), &lp.ln2_gain, &lp.ln2_bias);
        let mut alpha = 0.0;
        let mut lambda = 0.0;
        let mut w_norm = 0.0;
        for (head, ht) in lt.attention.heads.iter().enumerate() {
            let a = ht.attn.slice(s![..n, ..n]);
            let w = lp.value_output(head, cfg.d_head);
            let (al, la) = residual_coefficients(&h, &a, &w.view(), &b, &d, cfg.eta)?;
            alpha += al;
            lambda += la;
            w_norm += spectral_norm(&w.view())?;
        }
        alpha /= heads;
        lambda /= heads;
        w_norm /= heads;
        let gamma = gamma_with_eta(&d2, &lp.ff1_w.view(), &lp.ff2_w.view(), cfg.eta)?;
        let bound = (2.0 * m).sqrt() * prefix * pm_et * w_norm * ph1;
        layers.push(LayerCapacity {
            layer: l,
            capacity,
            normalized,
            token_capacity: token,
            alpha,
            lambda,
            gamma,
            bound,
            bound_satisfied: capacity <= bound,
        });
        prefix *= alpha * lambda * gamma;
    }
    Ok(CapacityReport { layers })
}
