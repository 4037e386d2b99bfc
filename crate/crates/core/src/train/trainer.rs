use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{Graph, Target};
use crate::model::forward::{forward, prepare_tokens, Prediction};
use crate::model::params::{Gradients, ModelParams};
use crate::rng::{epoch_stream, stream_rng};
use crate::sampler::{sample_substructures, SamplerParams};
use crate::substructure::{Substructure, SubstructureSet};
use crate::train::backward::backward;
use crate::train::loss::{accuracy, loss};
use crate::train::optim::{adam_step, learning_rate, AdamState, TrainConfig};

/// Stream reserved for evaluation so that eval inputs do not change between epochs.
const EVAL_EPOCH: u64 = u32::MAX as u64;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    /// MAE for regression, node accuracy for classification.
    pub eval_metric: Option<f64>,
    pub lr: f64,
}

fn sampled<'a, R: Rng + ?Sized>(
    set: &'a SubstructureSet,
    thre: usize,
    rng: &mut R,
) -> Vec<&'a Substructure> {
    let p = SamplerParams::for_graph(set.num_nodes, thre);
    sample_substructures(set, &p, rng)
        .into_iter()
        .map(|i| set.get(i))
        .collect()
}

fn target_of(g: &Graph) -> Result<&Target> {
    g.target
        .as_ref()
        .ok_or_else(|| Error::Shape("graph has no training target".into()))
}

fn graph_gradient(
    params: &ModelParams,
    g: &Graph,
    set: &SubstructureSet,
    thre: usize,
    seed: u64,
    stream: u64,
) -> Result<(f64, Gradients)> {
    let mut rng = stream_rng(seed, stream);
    let chosen = sampled(set, thre, &mut rng);
    let batch = prepare_tokens(g, &chosen, params, &mut rng)?;
    let trace = forward(params, &batch)?;
    backward(&trace, params, &batch, target_of(g)?)
}

/// Mean absolute error (regression) or node accuracy (classification) with
/// one fixed substructure sample per graph.
pub fn evaluate(
    params: &ModelParams,
    graphs: &[Graph],
    sets: &[SubstructureSet],
    seed: u64,
    thre: usize,
) -> Result<f64> {
    check_sets(graphs, sets)?;
    let per_graph: Vec<(f64, usize)> = graphs
        .par_iter()
        .zip(sets.par_iter())
        .enumerate()
        .map(|(i, (g, set))| {
            let mut rng = stream_rng(seed, epoch_stream(EVAL_EPOCH, i));
            let chosen = sampled(set, thre, &mut rng);
            let batch = prepare_tokens(g, &chosen, params, &mut rng)?;
            let trace = forward(params, &batch)?;
            let target = target_of(g)?;
            match (&trace.prediction, target) {
                (Prediction::Logits(z), Target::NodeLabels(labels)) => {
                    Ok((accuracy(z, labels) * labels.len() as f64, labels.len()))
                }
                (pred, target) => Ok((loss(pred, target, params.config.task)?.value, 1)),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let (total, count) = per_graph
        .iter()
        .fold((0.0, 0), |(t, c), &(v, k)| (t + v, c + k));
    Ok(total / count.max(1) as f64)
}

fn check_sets(graphs: &[Graph], sets: &[SubstructureSet]) -> Result<()> {
    if graphs.len() != sets.len() {
        return Err(Error::Shape(format!(
            "{} graphs but {} substructure sets",
            graphs.len(),
            sets.len()
        )));
    }
    for (i, (g, s)) in graphs.iter().zip(sets).enumerate() {
        if g.num_nodes != s.num_nodes {
            return Err(Error::Shape(format!(
                "graph {i} has {} nodes, its substructure set {}",
                g.num_nodes, s.num_nodes
            )));
        }
    }
    Ok(())
}

/// Mini-batch Adam training. Substructures are resampled for every graph in
/// every epoch from a dedicated RNG stream, and per-graph gradients are summed
/// in dataset order, so results do not depend on the thread count.
pub fn train(
    params: &mut ModelParams,
    train_set: (&[Graph], &[SubstructureSet]),
    eval_set: Option<(&[Graph], &[SubstructureSet])>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    cfg.check()?;
    if cfg.task != params.config.task {
        return Err(Error::Config(
            "training task differs from the model task".into(),
        ));
    }
    let (graphs, sets) = train_set;
    check_sets(graphs, sets)?;
    if let Some((g, s)) = eval_set {
        check_sets(g, s)?;
    }
    let mut state = AdamState::new(params);
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    let mut logs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut stream_rng(
            cfg.seed,
            epoch_stream(epoch as u64, usize::MAX >> 32),
        ));
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let results = chunk
                .par_iter()
                .map(|&i| {
                    graph_gradient(
                        params,
                        &graphs[i],
                        &sets[i],
                        cfg.thre,
                        cfg.seed,
                        epoch_stream(epoch as u64, i),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let mut total = params.zeros_like();
            for (value, g) in &results {
                epoch_loss += value;
                total.zip_mut(g, |_, acc, x| *acc += x);
            }
            let scale = 1.0 / chunk.len() as f64;
            for (_, t) in total.tensors_mut() {
                t.mapv_inplace(|v| v * scale);
            }
            if !total.all_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite gradient at step {}",
                    step + 1
                )));
            }
            step += 1;
            adam_step(params, &total, &mut state, step, cfg);
            if !params.all_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite parameters after step {step}"
                )));
            }
        }
        let eval_metric = match eval_set {
            Some((g, s)) => Some(evaluate(params, g, s, cfg.seed, cfg.thre)?),
            None => None,
        };
        let log = EpochLog {
            epoch: epoch + 1,
            train_loss: epoch_loss / graphs.len().max(1) as f64,
            eval_metric,
            lr: learning_rate(step, cfg),
        };
        on_epoch(&log);
        logs.push(log);
    }
    Ok(logs)
}

/// `epoch,train_loss,eval_metric,lr` rows after a seed comment.
pub fn write_log_csv<W: Write>(mut w: W, seed: u64, logs: &[EpochLog]) -> Result<()> {
    writeln!(w, "# seed={seed}")?;
    writeln!(w, "epoch,train_loss,eval_metric,lr")?;
    for l in logs {
        let eval = l.eval_metric.map(|v| v.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{}", l.epoch, l.train_loss, eval, l.lr)?;
    }
    Ok(())
}

/// Mean absolute deviation of regression targets from their mean.
pub fn mean_baseline_mae(graphs: &[Graph]) -> f64 {
    let t: Vec<f64> = graphs.iter().filter_map(Graph::scalar_target).collect();
    let mean = t.iter().sum::<f64>() / t.len().max(1) as f64;
    t.iter().map(|x| (x - mean).abs()).sum::<f64>() / t.len().max(1) as f64
}
