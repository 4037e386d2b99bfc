//! Reverse-mode gradients of the forward pass in `model::forward`.

use ndarray::{s, Array1, Array2, Axis};

use crate::error::Result;
use crate::graph::Target;
use crate::model::forward::{ForwardTrace, LnCache, Prediction};
use crate::model::params::{Gradients, ModelParams};
use crate::model::tokens::TokenBatch;
use crate::train::loss::loss;

/// Loss and its exact gradient for one graph.
pub fn backward(
    trace: &ForwardTrace,
    params: &ModelParams,
    batch: &TokenBatch,
    target: &Target,
) -> Result<(f64, Gradients)> {
    let lg = loss(&trace.prediction, target, params.config.task)?;
    let grads = backward_from_output(trace, params, batch, &lg.d_pred);
    Ok((lg.value, grads))
}

/// Gradients for an arbitrary upstream gradient on the prediction.
pub fn backward_from_output(
    trace: &ForwardTrace,
    params: &ModelParams,
    batch: &TokenBatch,
    d_pred: &Prediction,
) -> Gradients {
    let cfg = &params.config;
    let mut g = params.zeros_like();
    let n = trace.n;
    let hidden = trace.final_hidden();
    let mut dx = Array2::zeros(hidden.dim());

    match d_pred {
        Prediction::Scalar(dp) => {
            let pooled = hidden.slice(s![..n, ..]).mean_axis(Axis(0)).expect("n > 0");
            g.head_w.column_mut(0).assign(&(&pooled * *dp));
            g.head_b[[0, 0]] = *dp;
            let row = params.head_w.column(0).to_owned() * (*dp / n as f64);
            for i in 0..n {
                dx.row_mut(i).assign(&row);
            }
        }
        Prediction::Logits(dz) => {
            let nodes = hidden.slice(s![..n, ..]);
            g.head_w = nodes.t().dot(dz);
            g.head_b = dz.sum_axis(Axis(0)).insert_axis(Axis(0));
            dx.slice_mut(s![..n, ..])
                .assign(&dz.dot(&params.head_w.t()));
        }
    }

    let scale = 1.0 / (cfg.d_head as f64).sqrt();
    let t = batch.num_tokens();
    let mut d_bias = vec![Array2::<f64>::zeros((t, t)); cfg.heads];

    for (l, lt) in trace.layers.iter().enumerate().rev() {
        let lp = &params.layers[l];
        let gl = &mut g.layers[l];
        let h1 = &lt.attention.hidden;

        // Second layer norm and feed-forward block.
        let dr2 = ln_backward(
            &dx,
            &lt.ln2,
            &lp.ln2_gain,
            &mut gl.ln2_gain,
            &mut gl.ln2_bias,
        );
        let mut dh1 = &dr2 * cfg.eta;
        let relu = lt.ff_pre.mapv(|v| v.max(0.0));
        gl.ff2_w = relu.t().dot(&dr2);
        gl.ff2_b = col_sum(&dr2);
        let mut du = dr2.dot(&lp.ff2_w.t());
        du.zip_mut_with(&lt.ff_pre, |d, &u| {
            if u <= 0.0 {
                *d = 0.0
            }
        });
        gl.ff1_w = h1.t().dot(&du);
        gl.ff1_b = col_sum(&du);
        dh1 += &du.dot(&lp.ff1_w.t());

        // First layer norm and attention block.
        let dr1 = ln_backward(
            &dh1,
            &lt.attention.ln,
            &lp.ln1_gain,
            &mut gl.ln1_gain,
            &mut gl.ln1_bias,
        );
        let x = &lt.input;
        let mut dx_in = &dr1 * cfg.eta;
        gl.wo = lt.attention.concat.t().dot(&dr1);
        let dconcat = dr1.dot(&lp.wo.t());
        for (h, head) in lt.attention.heads.iter().enumerate() {
            let cols = h * cfg.d_head..(h + 1) * cfg.d_head;
            let dzh = dconcat.slice(s![.., cols.clone()]);
            let da = dzh.dot(&head.v.t());
            let dv = head.attn.t().dot(&dzh);
            let mut ds = &head.attn * &da;
            for (mut row, a_row) in ds.rows_mut().into_iter().zip(head.attn.rows()) {
                let dot: f64 = row.sum();
                row.zip_mut_with(&a_row, |d, &a| *d -= a * dot);
            }
            d_bias[h] += &ds;
            let dq = ds.dot(&head.k) * scale;
            let dk = ds.t().dot(&head.q) * scale;
            gl.wq
                .slice_mut(s![.., cols.clone()])
                .assign(&x.t().dot(&dq));
            gl.wk
                .slice_mut(s![.., cols.clone()])
                .assign(&x.t().dot(&dk));
            gl.wv
                .slice_mut(s![.., cols.clone()])
                .assign(&x.t().dot(&dv));
            dx_in += &dq.dot(&lp.wq.slice(s![.., cols.clone()]).t());
            dx_in += &dk.dot(&lp.wk.slice(s![.., cols.clone()]).t());
            dx_in += &dv.dot(&lp.wv.slice(s![.., cols]).t());
        }
        dx = dx_in;
    }

    // Bias tables are shared by all layers.
    for (h, db) in d_bias.iter().enumerate() {
        for i in 0..t {
            for j in 0..t {
                let v = db[[i, j]];
                if v == 0.0 {
                    continue;
                }
                g.dist_bias[[h, batch.dist_ids[[i, j]]]] += v;
                if i < n && j < n {
                    let feats = batch.sp_feats(i, j);
                    let share = v / feats.len().max(1) as f64;
                    for &f in feats {
                        g.edge_bias[[h, f]] += share;
                    }
                }
            }
        }
    }

    for (i, &f) in batch.node_feat_ids.iter().enumerate() {
        let mut row = g.node_embed.row_mut(f);
        row += &dx.row(i);
    }
    if cfg.substructure_encoding {
        for (a, form) in batch.canon_forms.iter().enumerate() {
            let d_row = dx.row(n + a);
            for (k, &bit) in form.flat_adj.iter().enumerate() {
                if bit != 0 {
                    let mut w = g.sub_embed_w.row_mut(k);
                    w += &d_row;
                }
            }
            let mut b = g.sub_embed_b.row_mut(0);
            b += &d_row;
        }
    }
    g
}

/// Backward through `y = xhat * gain + bias`, returning the gradient of the
/// pre-norm sum `eta * x + f(x)`.
fn ln_backward(
    dy: &Array2<f64>,
    cache: &LnCache,
    gain: &Array2<f64>,
    d_gain: &mut Array2<f64>,
    d_bias: &mut Array2<f64>,
) -> Array2<f64> {
    *d_gain = col_sum(&(dy * &cache.xhat));
    *d_bias = col_sum(dy);
    let dxhat = dy * gain;
    let d = dxhat.ncols() as f64;
    let mut out = Array2::zeros(dy.dim());
    for (((mut o, g), xh), &inv) in out
        .rows_mut()
        .into_iter()
        .zip(dxhat.rows())
        .zip(cache.xhat.rows())
        .zip(cache.inv_std.iter())
    {
        let mean_g = g.sum() / d;
        let mean_gx = g.dot(&xh) / d;
        let row: Array1<f64> = (&g - mean_g - &(&xh * mean_gx)) * inv;
        o.assign(&row);
    }
    out
}

fn col_sum(a: &Array2<f64>) -> Array2<f64> {
    a.sum_axis(Axis(0)).insert_axis(Axis(0))
}
