use ndarray::{s, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::canonical::flat_len;
use crate::error::{Error, Result};
use crate::graph::MAX_DIST_BUCKET;

/// Bucket used for every pair that involves a substructure token.
pub const SUBTOKEN_BUCKET: usize = MAX_DIST_BUCKET + 1;
/// Rows of the distance bias table: distances 0..63, unreachable, subtoken.
pub const DIST_BUCKETS: usize = MAX_DIST_BUCKET + 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    GraphRegression,
    NodeClassification { classes: usize },
}

impl Task {
    pub fn output_dim(&self) -> usize {
        match self {
            Task::GraphRegression => 1,
            Task::NodeClassification { classes } => *classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub d_hidden: usize,
    /// Per-head query/key/value width.
    pub d_head: usize,
    pub d_ff: usize,
    pub num_node_feats: usize,
    pub num_edge_feats: usize,
    pub s_max: usize,
    /// Residual weight inside the layer norm.
    pub eta: f64,
    /// Initialization scale applied to the value, output and FFN weights.
    pub init_scale: f64,
    pub task: Task,
    /// Whether substructure tokens are appended at all.
    pub substructure_tokens: bool,
    /// When false, substructure tokens get frozen random embeddings instead
    /// of the learned adjacency encoder.
    pub substructure_encoding: bool,
    /// Number of frozen random substructure embeddings, reused cyclically.
    pub fixed_token_slots: usize,
}

impl ModelConfig {
    /// Deepnorm constants for `layers` layers: residual weight (2L)^(1/4) and
    /// init scale (8L)^(-1/4).
    pub fn new(layers: usize, heads: usize, d_hidden: usize, task: Task) -> Self {
        let (eta, init_scale) = deepnorm_constants(layers);
        ModelConfig {
            layers,
            heads,
            d_hidden,
            d_head: (d_hidden / heads.max(1)).max(1),
            d_ff: 2 * d_hidden,
            num_node_feats: 16,
            num_edge_feats: 4,
            s_max: crate::substructure::DEFAULT_S_MAX,
            eta,
            init_scale,
            task,
            substructure_tokens: true,
            substructure_encoding: true,
            fixed_token_slots: 128,
        }
    }

    /// Plain post-norm residuals: eta = 1, unscaled init.
    pub fn without_deepnorm(mut self) -> Self {
        self.eta = 1.0;
        self.init_scale = 1.0;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.heads == 0 || self.d_hidden == 0 || self.d_head == 0 || self.d_ff == 0 {
            return Err(Error::Config(
                "model widths and head count must be positive".into(),
            ));
        }
        if !(self.eta > 0.0) || !(self.init_scale > 0.0) {
            return Err(Error::Config("eta and init_scale must be positive".into()));
        }
        if self.num_node_feats == 0 || self.num_edge_feats == 0 || self.fixed_token_slots == 0 {
            return Err(Error::Config(
                "feature vocabularies must be non-empty".into(),
            ));
        }
        if let Task::NodeClassification { classes } = self.task {
            if classes < 2 {
                return Err(Error::Config(
                    "node classification needs at least two classes".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn flat_adj_len(&self) -> usize {
        flat_len(self.s_max)
    }
}

pub fn deepnorm_constants(layers: usize) -> (f64, f64) {
    let l = layers.max(1) as f64;
    ((2.0 * l).powf(0.25), (8.0 * l).powf(-0.25))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// `d_hidden x (heads * d_head)`, head `h` in columns `h*d_head..`.
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    /// `(heads * d_head) x d_hidden`.
    pub wo: Array2<f64>,
    pub ln1_gain: Array2<f64>,
    pub ln1_bias: Array2<f64>,
    pub ff1_w: Array2<f64>,
    pub ff1_b: Array2<f64>,
    pub ff2_w: Array2<f64>,
    pub ff2_b: Array2<f64>,
    pub ln2_gain: Array2<f64>,
    pub ln2_bias: Array2<f64>,
}

impl LayerParams {
    /// Value-output product `W^V_h W^O_h` of one head.
    pub fn value_output(&self, head: usize, d_head: usize) -> Array2<f64> {
        let cols = head * d_head..(head + 1) * d_head;
        self.wv
            .slice(s![.., cols.clone()])
            .dot(&self.wo.slice(s![cols, ..]))
    }
}

/// Every learnable tensor of the model. Vectors are stored as `1 x d` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub node_embed: Array2<f64>,
    pub sub_embed_w: Array2<f64>,
    pub sub_embed_b: Array2<f64>,
    /// Frozen; receives no gradient.
    pub sub_fixed: Array2<f64>,
    /// `heads x DIST_BUCKETS`.
    pub dist_bias: Array2<f64>,
    /// `heads x num_edge_feats`.
    pub edge_bias: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub head_w: Array2<f64>,
    pub head_b: Array2<f64>,
}

/// Gradient with the same shape tree as [`ModelParams`].
pub type Gradients = ModelParams;

fn gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Array2<f64> {
    let normal = Normal::new(0.0, std).expect("finite std");
    Array2::from_shape_simple_fn((rows, cols), || normal.sample(rng))
}

impl ModelParams {
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.check()?;
        let d = config.d_hidden;
        let hk = config.heads * config.d_head;
        let beta = config.init_scale;
        let glorot = |fan_in: usize, fan_out: usize| (2.0 / (fan_in + fan_out) as f64).sqrt();
        let node_embed = gaussian(config.num_node_feats, d, 1.0, rng);
        let flat = config.flat_adj_len();
        let sub_embed_w = gaussian(flat, d, 1.0 / (flat as f64).sqrt(), rng);
        let sub_embed_b = gaussian(1, d, 1.0, rng);
        let sub_fixed = gaussian(config.fixed_token_slots, d, 1.0, rng);
        let dist_bias = gaussian(config.heads, DIST_BUCKETS, 0.02, rng);
        let edge_bias = gaussian(config.heads, config.num_edge_feats, 0.02, rng);
        let layers = (0..config.layers)
            .map(|_| LayerParams {
                wq: gaussian(d, hk, glorot(d, hk), rng),
                wk: gaussian(d, hk, glorot(d, hk), rng),
                wv: gaussian(d, hk, beta * glorot(d, hk), rng),
                wo: gaussian(hk, d, beta * glorot(hk, d), rng),
                ln1_gain: Array2::ones((1, d)),
                ln1_bias: Array2::zeros((1, d)),
                ff1_w: gaussian(d, config.d_ff, beta * glorot(d, config.d_ff), rng),
                ff1_b: Array2::zeros((1, config.d_ff)),
                ff2_w: gaussian(config.d_ff, d, beta * glorot(config.d_ff, d), rng),
                ff2_b: Array2::zeros((1, d)),
                ln2_gain: Array2::ones((1, d)),
                ln2_bias: Array2::zeros((1, d)),
            })
            .collect();
        let out = config.task.output_dim();
        let head_w = gaussian(d, out, 1.0 / (d as f64).sqrt(), rng);
        let head_b = Array2::zeros((1, out));
        Ok(ModelParams {
            config,
            node_embed,
            sub_embed_w,
            sub_embed_b,
            sub_fixed,
            dist_bias,
            edge_bias,
            layers,
            head_w,
            head_b,
        })
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Every tensor with its checkpoint path, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out: Vec<(String, &Array2<f64>)> = vec![
            ("embed.node".into(), &self.node_embed),
            ("embed.sub.w".into(), &self.sub_embed_w),
            ("embed.sub.b".into(), &self.sub_embed_b),
            ("embed.sub.fixed".into(), &self.sub_fixed),
            ("bias.dist".into(), &self.dist_bias),
            ("bias.edge".into(), &self.edge_bias),
        ];
        for (l, layer) in self.layers.iter().enumerate() {
            out.extend(
                layer
                    .named()
                    .map(|(name, t)| (format!("layer.{l}.{name}"), t)),
            );
        }
        out.push(("head.w".into(), &self.head_w));
        out.push(("head.b".into(), &self.head_b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Array2<f64>)> {
        let mut out: Vec<(String, &mut Array2<f64>)> = vec![
            ("embed.node".into(), &mut self.node_embed),
            ("embed.sub.w".into(), &mut self.sub_embed_w),
            ("embed.sub.b".into(), &mut self.sub_embed_b),
            ("embed.sub.fixed".into(), &mut self.sub_fixed),
            ("bias.dist".into(), &mut self.dist_bias),
            ("bias.edge".into(), &mut self.edge_bias),
        ];
        for (l, layer) in self.layers.iter_mut().enumerate() {
            out.extend(
                layer
                    .named_mut()
                    .map(|(name, t)| (format!("layer.{l}.{name}"), t)),
            );
        }
        out.push(("head.w".into(), &mut self.head_w));
        out.push(("head.b".into(), &mut self.head_b));
        out
    }

    /// Paired traversal over two trees of identical shape.
    pub fn zip_mut(
        &mut self,
        other: &ModelParams,
        mut f: impl FnMut(&str, &mut Array2<f64>, &Array2<f64>),
    ) {
        for ((name, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            f(&name, a, b);
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}

impl LayerParams {
    pub const NAMES: [&'static str; 12] = [
        "wq", "wk", "wv", "wo", "ln1.gain", "ln1.bias", "ff1.w", "ff1.b", "ff2.w", "ff2.b",
        "ln2.gain", "ln2.bias",
    ];

    pub fn named(&self) -> [(&'static str, &Array2<f64>); 12] {
        let n = Self::NAMES;
        [
            (n[0], &self.wq),
            (n[1], &self.wk),
            (n[2], &self.wv),
            (n[3], &self.wo),
            (n[4], &self.ln1_gain),
            (n[5], &self.ln1_bias),
            (n[6], &self.ff1_w),
            (n[7], &self.ff1_b),
            (n[8], &self.ff2_w),
            (n[9], &self.ff2_b),
            (n[10], &self.ln2_gain),
            (n[11], &self.ln2_bias),
        ]
    }

    pub fn named_mut(&mut self) -> [(&'static str, &mut Array2<f64>); 12] {
        let n = Self::NAMES;
        [
            (n[0], &mut self.wq),
            (n[1], &mut self.wk),
            (n[2], &mut self.wv),
            (n[3], &mut self.wo),
            (n[4], &mut self.ln1_gain),
            (n[5], &mut self.ln1_bias),
            (n[6], &mut self.ff1_w),
            (n[7], &mut self.ff1_b),
            (n[8], &mut self.ff2_w),
            (n[9], &mut self.ff2_b),
            (n[10], &mut self.ln2_gain),
            (n[11], &mut self.ln2_bias),
        ]
    }
}
