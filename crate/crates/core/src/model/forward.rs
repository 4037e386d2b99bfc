use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{all_pairs_distances, Graph};
use crate::model::params::{LayerParams, ModelConfig, ModelParams, Task};
use crate::model::tokens::{build_tokens, TokenBatch};
use crate::substructure::Substructure;

/// Variance floor inside the layer-norm square root.
pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Scalar(f64),
    /// `n x classes` node logits.
    Logits(Array2<f64>),
}

#[derive(Debug, Clone)]
pub struct LnCache {
    /// Standardized pre-gain activations.
    pub xhat: Array2<f64>,
    /// Per-token `1 / sqrt(var + eps)`.
    pub inv_std: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct HeadTrace {
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    /// Post-softmax attention, masked entries exactly zero.
    pub attn: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct AttentionOutput {
    pub hidden: Array2<f64>,
    pub heads: Vec<HeadTrace>,
    /// Head outputs `A_h V_h`, concatenated along columns.
    pub concat: Array2<f64>,
    pub ln: LnCache,
}

#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub input: Array2<f64>,
    pub attention: AttentionOutput,
    /// FFN pre-activation.
    pub ff_pre: Array2<f64>,
    pub ln2: LnCache,
    pub output: Array2<f64>,
}

/// Everything the backward pass and capacity probes need from one evaluation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub embeddings: Array2<f64>,
    pub layers: Vec<LayerTrace>,
    /// Structural bias plus mask, one `(n+m) x (n+m)` matrix per head.
    pub logit_bias: Vec<Array2<f64>>,
    pub n: usize,
    pub m: usize,
    pub prediction: Prediction,
}

impl ForwardTrace {
    /// Hidden states entering layer `layer` (0-based); `layer == L` gives the final states.
    pub fn hidden(&self, layer: usize) -> &Array2<f64> {
        if layer < self.layers.len() {
            &self.layers[layer].input
        } else {
            self.final_hidden()
        }
    }

    pub fn final_hidden(&self) -> &Array2<f64> {
        self.layers
            .last()
            .map(|l| &l.output)
            .unwrap_or(&self.embeddings)
    }
}

/// `LN(eta * x + f_x)`: per-token standardization across features, then gain and bias.
pub fn deepnorm_ln(
    x: &ArrayView2<f64>,
    f_x: &ArrayView2<f64>,
    gain: &Array2<f64>,
    bias: &Array2<f64>,
    eta: f64,
) -> (Array2<f64>, LnCache) {
    let mut xhat = x * eta + f_x;
    let d = xhat.ncols() as f64;
    let mut inv_std = Array1::zeros(xhat.nrows());
    for (mut row, inv) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        *inv = 1.0 / (var + LN_EPS).sqrt();
        let scale = *inv;
        row.mapv_inplace(|v| v * scale);
    }
    let out = &xhat * gain + bias;
    (out, LnCache { xhat, inv_std })
}

/// Row-wise softmax; `-inf` entries become exactly zero. A row with no finite
/// entry falls back to uniform weights.
pub fn masked_softmax(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            let w = 1.0 / row.len() as f64;
            row.fill(w);
            continue;
        }
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = if *v == f64::NEG_INFINITY {
                0.0
            } else {
                (*v - max).exp()
            };
            total += *v;
        }
        row.mapv_inplace(|v| v / total);
    }
}

/// Per-head logit bias: distance bias, mean edge bias along the stored
/// shortest path (node pairs only), and the attention mask.
pub fn logit_bias(params: &ModelParams, batch: &TokenBatch) -> Result<Vec<Array2<f64>>> {
    let cfg = &params.config;
    let t = batch.num_tokens();
    let mut out = Vec::with_capacity(cfg.heads);
    for h in 0..cfg.heads {
        let mut b = Array2::zeros((t, t));
        for i in 0..t {
            for j in 0..t {
                let mut v = params.dist_bias[[h, batch.dist_ids[[i, j]]]];
                if i < batch.n && j < batch.n {
                    let feats = batch.sp_feats(i, j);
                    if !feats.is_empty() {
                        let mut acc = 0.0;
                        for &f in feats {
                            if f >= cfg.num_edge_feats {
                                return Err(Error::Shape(format!(
                                    "edge feature {f} outside vocabulary of {}",
                                    cfg.num_edge_feats
                                )));
                            }
                            acc += params.edge_bias[[h, f]];
                        }
                        v += acc / feats.len() as f64;
                    }
                }
                b[[i, j]] = v + batch.mask[[i, j]];
            }
        }
        out.push(b);
    }
    Ok(out)
}

/// Multi-head masked self-attention followed by the deepnorm layer norm.
pub fn attention_forward(
    x: &Array2<f64>,
    layer: &LayerParams,
    bias: &[Array2<f64>],
    cfg: &ModelConfig,
) -> AttentionOutput {
    let dk = cfg.d_head;
    let scale = 1.0 / (dk as f64).sqrt();
    let t = x.nrows();
    let q_all = x.dot(&layer.wq);
    let k_all = x.dot(&layer.wk);
    let v_all = x.dot(&layer.wv);
    let mut concat = Array2::zeros((t, cfg.heads * dk));
    let mut heads = Vec::with_capacity(cfg.heads);
    for (h, b) in bias.iter().enumerate() {
        let cols = h * dk..(h + 1) * dk;
        let q = q_all.slice(s![.., cols.clone()]).to_owned();
        let k = k_all.slice(s![.., cols.clone()]).to_owned();
        let v = v_all.slice(s![.., cols.clone()]).to_owned();
        let mut attn = q.dot(&k.t()) * scale + b;
        masked_softmax(&mut attn);
        concat.slice_mut(s![.., cols]).assign(&attn.dot(&v));
        heads.push(HeadTrace { q, k, v, attn });
    }
    let mixed = concat.dot(&layer.wo);
    let (hidden, ln) = deepnorm_ln(
        &x.view(),
        &mixed.view(),
        &layer.ln1_gain,
        &layer.ln1_bias,
        cfg.eta,
    );
    AttentionOutput {
        hidden,
        heads,
        concat,
        ln,
    }
}

/// Input embeddings: node feature table for node tokens, adjacency encoder
/// (or frozen random rows) for substructure tokens.
pub fn embed(params: &ModelParams, batch: &TokenBatch) -> Result<Array2<f64>> {
    let cfg = &params.config;
    let mut x = Array2::zeros((batch.num_tokens(), cfg.d_hidden));
    for (i, &f) in batch.node_feat_ids.iter().enumerate() {
        if f >= cfg.num_node_feats {
            return Err(Error::Shape(format!(
                "node feature {f} outside vocabulary of {}",
                cfg.num_node_feats
            )));
        }
        x.row_mut(i).assign(&params.node_embed.row(f));
    }
    for (a, form) in batch.canon_forms.iter().enumerate() {
        let row = if cfg.substructure_encoding {
            if form.flat_adj.len() != cfg.flat_adj_len() {
                return Err(Error::Shape(format!(
                    "encoding of length {} for an encoder expecting {}",
                    form.flat_adj.len(),
                    cfg.flat_adj_len()
                )));
            }
            let flat = Array1::from_iter(form.flat_adj.iter().map(|&b| f64::from(b)));
            flat.dot(&params.sub_embed_w) + params.sub_embed_b.row(0)
        } else {
            params.sub_fixed.row(a % cfg.fixed_token_slots).to_owned()
        };
        x.row_mut(batch.n + a).assign(&row);
    }
    Ok(x)
}

/// Full forward pass over prepared tokens.
pub fn forward(params: &ModelParams, batch: &TokenBatch) -> Result<ForwardTrace> {
    let cfg = &params.config;
    if batch.n == 0 {
        return Err(Error::Shape("graph has no nodes".into()));
    }
    let embeddings = embed(params, batch)?;
    let bias = logit_bias(params, batch)?;
    let mut layers = Vec::with_capacity(cfg.layers);
    let mut x = embeddings.clone();
    for layer in &params.layers {
        let attention = attention_forward(&x, layer, &bias, cfg);
        let ff_pre = attention.hidden.dot(&layer.ff1_w) + &layer.ff1_b;
        let ff_out = ff_pre.mapv(|v| v.max(0.0)).dot(&layer.ff2_w) + &layer.ff2_b;
        let (output, ln2) = deepnorm_ln(
            &attention.hidden.view(),
            &ff_out.view(),
            &layer.ln2_gain,
            &layer.ln2_bias,
            cfg.eta,
        );
        let input = std::mem::replace(&mut x, output.clone());
        layers.push(LayerTrace {
            input,
            attention,
            ff_pre,
            ln2,
            output,
        });
    }
    let prediction = readout(params, &x, batch.n);
    Ok(ForwardTrace {
        embeddings,
        layers,
        logit_bias: bias,
        n: batch.n,
        m: batch.m,
        prediction,
    })
}

/// Substructure tokens never reach the readout.
fn readout(params: &ModelParams, hidden: &Array2<f64>, n: usize) -> Prediction {
    let nodes = hidden.slice(s![..n, ..]);
    match params.config.task {
        Task::GraphRegression => {
            let pooled = nodes.mean_axis(Axis(0)).expect("n > 0");
            Prediction::Scalar(pooled.dot(&params.head_w.column(0)) + params.head_b[[0, 0]])
        }
        Task::NodeClassification { .. } => {
            Prediction::Logits(nodes.dot(&params.head_w) + &params.head_b)
        }
    }
}

/// Distances, one DFS encoding per substructure, tokens, then [`forward`].
/// Substructures are ignored when the model has no substructure tokens.
pub fn model_forward<R: Rng + ?Sized>(
    g: &Graph,
    chosen: &[&Substructure],
    params: &ModelParams,
    rng: &mut R,
) -> Result<(Prediction, ForwardTrace)> {
    let batch = prepare_tokens(g, chosen, params, rng)?;
    let trace = forward(params, &batch)?;
    Ok((trace.prediction.clone(), trace))
}

pub fn prepare_tokens<R: Rng + ?Sized>(
    g: &Graph,
    chosen: &[&Substructure],
    params: &ModelParams,
    rng: &mut R,
) -> Result<TokenBatch> {
    let d = all_pairs_distances(g);
    let chosen = if params.config.substructure_tokens {
        chosen
    } else {
        &[]
    };
    build_tokens(g, chosen, &d, rng, params.config.s_max)
}
