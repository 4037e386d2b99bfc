use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::Args;
use deepgraph::experiments::{capacity_curve, Variant};
use deepgraph::graph::Target;
use deepgraph::model::{load_checkpoint, save_checkpoint, ModelConfig, ModelParams, Task};
use deepgraph::rng::stream_rng;
use deepgraph::train::{train as fit, write_log_csv, TrainConfig};
use deepgraph::Graph;
use serde::{Deserialize, Serialize};
use toml::Table;

use super::{
    checkpoint_path, default_kinds, default_s_max, load_graphs, load_sets, opt, vocab, write_csv,
    CHECKPOINT_FILE, SNAPSHOT_FILE,
};
use crate::config::{resolve, resolve_global, snapshot_beside, write_snapshot};
use crate::error::CliError;

// Model initialization stream, separate from the per-graph training streams.
const INIT_STREAM: u64 = u64::MAX - 1;

#[derive(Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Held-out graphs scored after every epoch.
    #[arg(long)]
    eval_data: Option<PathBuf>,
    #[arg(long)]
    kinds: Option<String>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    d_hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    thre: Option<usize>,
    /// full, no_local_attention, no_substructure_encoding or no_deepnorm.
    #[arg(long)]
    variant: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    data: Option<PathBuf>,
    cache: Option<PathBuf>,
    eval_data: Option<PathBuf>,
    kinds: String,
    layers: usize,
    heads: usize,
    d_hidden: usize,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    thre: usize,
    variant: String,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            data: None,
            cache: None,
            eval_data: None,
            kinds: default_kinds(),
            layers: 4,
            heads: 4,
            d_hidden: 32,
            epochs: 30,
            batch_size: 16,
            lr: 1e-3,
            thre: 1,
            variant: "full".into(),
        }
    }
}

/// Regression when every graph has a scalar target, node classification
/// when every graph has node labels.
fn infer_task(graphs: &[&Graph]) -> Result<Task, CliError> {
    let mut scalar = 0;
    let mut classes = 0;
    for g in graphs {
        match &g.target {
            Some(Target::Scalar(_)) => scalar += 1,
            Some(Target::NodeLabels(l)) => {
                classes = classes.max(l.iter().map(|&c| c + 1).max().unwrap_or(0))
            }
            None => {
                return Err(deepgraph::Error::Shape("graph has no training target".into()).into())
            }
        }
    }
    match scalar {
        0 => Ok(Task::NodeClassification {
            classes: classes.max(2),
        }),
        s if s == graphs.len() => Ok(Task::GraphRegression),
        _ => Err(deepgraph::Error::Shape("dataset mixes graph and node targets".into()).into()),
    }
}

pub fn train(
    file: &Table,
    seed: Option<u64>,
    out: Option<PathBuf>,
    args: &TrainArgs,
) -> Result<(), CliError> {
    let g = resolve_global(file, seed, out, "run")?;
    let s: TrainSettings = resolve(file, "train", args)?;
    let data = s
        .data
        .as_ref()
        .ok_or_else(|| CliError::Usage("train needs --data".into()))?;
    let variant: Variant = s.variant.parse()?;
    let v = vocab(&s.kinds, 2, 10, default_s_max())?;
    let graphs = load_graphs(data)?;
    let sets = load_sets(&graphs, s.cache.as_deref(), &v, g.seed)?;
    let eval = match &s.eval_data {
        Some(p) => {
            let eg = load_graphs(p)?;
            let es = load_sets(&eg, None, &v, g.seed)?;
            Some((eg, es))
        }
        None => None,
    };
    let all: Vec<&Graph> = graphs
        .iter()
        .chain(eval.iter().flat_map(|(e, _)| e))
        .collect();
    let task = infer_task(&all)?;
    let mut cfg = variant.apply(ModelConfig::new(s.layers, s.heads, s.d_hidden, task));
    cfg.num_node_feats = all
        .iter()
        .flat_map(|g| g.node_feat.iter())
        .map(|&f| f + 1)
        .max()
        .unwrap_or(1)
        .max(cfg.num_node_feats);
    cfg.num_edge_feats = all
        .iter()
        .flat_map(|g| g.edge_feat.iter())
        .map(|&f| f + 1)
        .max()
        .unwrap_or(1)
        .max(cfg.num_edge_feats);
    let mut params = ModelParams::init(cfg, &mut stream_rng(g.seed, INIT_STREAM))?;
    let mut tc = TrainConfig::for_dataset(s.epochs, s.batch_size, s.lr, graphs.len(), g.seed, task);
    tc.thre = s.thre;
    let eval_ref = eval.as_ref().map(|(e, es)| (e.as_slice(), es.as_slice()));
    let logs = fit(&mut params, (&graphs, &sets), eval_ref, &tc, |l| {
        eprintln!(
            "epoch {:>3}  loss {:.5}  eval {}  lr {:.2e}",
            l.epoch,
            l.train_loss,
            opt(l.eval_metric),
            l.lr
        );
    })?;
    std::fs::create_dir_all(&g.out)?;
    save_checkpoint(&params, g.out.join(CHECKPOINT_FILE))?;
    write_log_csv(
        BufWriter::new(File::create(g.out.join("train_log.csv"))?),
        g.seed,
        &logs,
    )?;
    write_snapshot(&g.out.join(SNAPSHOT_FILE), "train", &g, &s)?;
    Ok(())
}

#[derive(Args, Serialize)]
pub struct CapacityArgs {
    /// Checkpoint file, or a directory holding `checkpoint.json`.
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    kinds: Option<String>,
    #[arg(long)]
    thre: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacitySettings {
    ckpt: Option<PathBuf>,
    data: Option<PathBuf>,
    cache: Option<PathBuf>,
    kinds: String,
    thre: usize,
}

impl Default for CapacitySettings {
    fn default() -> Self {
        CapacitySettings {
            ckpt: None,
            data: None,
            cache: None,
            kinds: default_kinds(),
            thre: 1,
        }
    }
}

pub fn capacity(
    file: &Table,
    seed: Option<u64>,
    out: Option<PathBuf>,
    args: &CapacityArgs,
) -> Result<(), CliError> {
    let g = resolve_global(file, seed, out, "capacity.csv")?;
    let s: CapacitySettings = resolve(file, "capacity", args)?;
    let ckpt = s
        .ckpt
        .as_ref()
        .ok_or_else(|| CliError::Usage("capacity needs --ckpt".into()))?;
    let data = s
        .data
        .as_ref()
        .ok_or_else(|| CliError::Usage("capacity needs --data".into()))?;
    let params = load_checkpoint(checkpoint_path(ckpt))?;
    let graphs = load_graphs(data)?;
    let sets = load_sets(
        &graphs,
        s.cache.as_deref(),
        &vocab(&s.kinds, 2, 10, params.config.s_max)?,
        g.seed,
    )?;
    let curve = capacity_curve(&params, &graphs, &sets, g.seed, s.thre)?;
    let rows = curve.iter().map(|l| {
        format!(
            "{},{},{},{}",
            l.layer,
            l.capacity,
            l.normalized,
            opt(l.token_capacity)
        )
    });
    write_csv(
        &g.out,
        g.seed,
        "layer,capacity,normalized,token_capacity",
        rows,
    )?;
    write_snapshot(&snapshot_beside(&g.out), "capacity", &g, &s)?;
    Ok(())
}
