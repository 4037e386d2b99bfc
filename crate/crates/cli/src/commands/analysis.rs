use std::path::PathBuf;

use clap::Args;
use deepgraph::capacity::{verify_theorem1, verify_theorem2, verify_theorem3, ShapeSpec};
use deepgraph::error::Error;
use deepgraph::experiments::{
    ablate as run_ablation, capacity_curve, mean_eval, repro_capacity as random_curves,
    repro_dataset, AblationConfig, LayerStats, ReproConfig, Variant,
};
use deepgraph::model::load_checkpoint;
use serde::{Deserialize, Serialize};
use toml::Table;

use super::{checkpoint_path, opt, write_csv, SNAPSHOT_FILE};
use crate::config::{ensure_parent, resolve, resolve_global, snapshot_beside, write_snapshot};
use crate::error::CliError;

#[derive(Args, Serialize)]
pub struct VerifyArgs {
    /// 1: attention-only depth bound, 2: with feed-forward blocks,
    /// 3: local versus global contraction ordering.
    #[arg(long)]
    theorem: Option<u8>,
    #[arg(long)]
    trials: Option<usize>,
    /// Largest stack depth (theorems 1 and 2).
    #[arg(long)]
    depth: Option<usize>,
    /// Largest node count for theorems 1 and 2, exact node count for theorem 3.
    #[arg(long)]
    n: Option<usize>,
    /// Largest pattern count for theorems 1 and 2, substructures per layout for theorem 3.
    #[arg(long)]
    m: Option<usize>,
    /// Theorem 3: nodes any node may share a substructure with (default n/2).
    #[arg(long)]
    r_max: Option<usize>,
    /// Theorem 3: hidden width (default n).
    #[arg(long)]
    d: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySettings {
    theorem: Option<u8>,
    trials: usize,
    depth: usize,
    n: usize,
    m: usize,
    r_max: Option<usize>,
    d: Option<usize>,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            theorem: None,
            trials: 1000,
            depth: 8,
            n: 16,
            m: 5,
            r_max: None,
            d: None,
        }
    }
}

pub fn verify_bounds(
    file: &Table,
    seed: Option<u64>,
    out: Option<PathBuf>,
    args: &VerifyArgs,
) -> Result<(), CliError> {
    let g = resolve_global(file, seed, out, "report.json")?;
    let s: VerifySettings = resolve(file, "verify_bounds", args)?;
    let spec = ShapeSpec::Random {
        max_depth: s.depth,
        max_n: s.n,
        max_m: s.m,
    };
    let (json, summary) = match s.theorem {
        Some(t @ (1 | 2)) => {
            let r = if t == 1 {
                verify_theorem1(spec, s.trials, g.seed)?
            } else {
                verify_theorem2(spec, s.trials, g.seed)?
            };
            let summary = format!(
                "{} layers checked, {} violations (max ratio {:.4}), {} with the sqrt(2n) prefactor, alpha >= 1 in {}",
                r.layers_checked, r.violations, r.max_ratio, r.violations_sqrt_2n, r.alpha_not_below_one
            );
            (serde_json::to_string_pretty(&r)?, summary)
        }
        Some(3) => {
            let r = verify_theorem3(
                s.n,
                s.m,
                s.r_max.unwrap_or(s.n / 2),
                s.d.unwrap_or(s.n),
                s.trials,
                g.seed,
            )?;
            let summary = format!(
                "global adversarial alpha {:.5}, local minimum {:.5}, ordering {}",
                r.global_adversarial_alpha,
                r.local_min_alpha,
                if r.ordering_holds { "holds" } else { "fails" }
            );
            (serde_json::to_string_pretty(&r)?, summary)
        }
        Some(t) => {
            return Err(CliError::Usage(format!(
                "theorem must be 1, 2 or 3, got {t}"
            )))
        }
        None => return Err(CliError::Usage("verify-bounds needs --theorem".into())),
    };
    ensure_parent(&g.out)?;
    std::fs::write(&g.out, json)?;
    write_snapshot(&snapshot_beside(&g.out), "verify_bounds", &g, &s)?;
    eprintln!("{summary}");
    Ok(())
}

#[derive(Args, Serialize)]
pub struct ReproArgs {
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    d_hidden: Option<usize>,
    /// Random weight draws averaged per variant.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    graphs: Option<usize>,
    #[arg(long)]
    min_nodes: Option<usize>,
    #[arg(long)]
    max_nodes: Option<usize>,
    #[arg(long)]
    edge_prob: Option<f64>,
    #[arg(long)]
    thre: Option<usize>,
    /// Keep deepnorm residual scaling in the unmasked baseline.
    #[arg(long)]
    unmasked_deepnorm: Option<bool>,
    /// Trained masked model; requires --unmasked-ckpt.
    #[arg(long)]
    masked_ckpt: Option<PathBuf>,
    #[arg(long)]
    unmasked_ckpt: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ReproSettings {
    #[serde(flatten)]
    model: ReproConfig,
    masked_ckpt: Option<PathBuf>,
    unmasked_ckpt: Option<PathBuf>,
}

fn curve_rows(curve: &[LayerStats], with_tokens: bool) -> Vec<String> {
    curve
        .iter()
        .map(|l| {
            if with_tokens {
                format!(
                    "{},{},{},{}",
                    l.layer,
                    l.capacity,
                    l.normalized,
                    opt(l.token_capacity)
                )
            } else {
                format!("{},{},{}", l.layer, l.capacity, l.normalized)
            }
        })
        .collect()
}

pub fn repro_capacity(
    file: &Table,
    seed: Option<u64>,
    out: Option<PathBuf>,
    args: &ReproArgs,
) -> Result<(), CliError> {
    let g = resolve_global(file, seed, out, "repro")?;
    let s: ReproSettings = resolve(file, "repro_capacity", args)?;
    let (masked, unmasked) = match (&s.masked_ckpt, &s.unmasked_ckpt) {
        (None, None) => {
            let r = random_curves(&s.model, g.seed)?;
            (r.masked, r.unmasked)
        }
        (Some(mp), Some(up)) => {
            let pm = load_checkpoint(checkpoint_path(mp))?;
            let pu = load_checkpoint(checkpoint_path(up))?;
            if pm.config.layers != pu.config.layers {
                return Err(Error::Checkpoint(format!(
                    "masked checkpoint has {} layers, unmasked has {}",
                    pm.config.layers, pu.config.layers
                ))
                .into());
            }
            let (graphs, sets) = repro_dataset(&s.model, g.seed)?;
            (
                capacity_curve(&pm, &graphs, &sets, g.seed, s.model.thre)?,
                capacity_curve(&pu, &graphs, &sets, g.seed, s.model.thre)?,
            )
        }
        _ => {
            return Err(CliError::Usage(
                "give both --masked-ckpt and --unmasked-ckpt, or neither".into(),
            ))
        }
    };
    std::fs::create_dir_all(&g.out)?;
    write_csv(
        &g.out.join("masked.csv"),
        g.seed,
        "layer,capacity,normalized,token_capacity",
        curve_rows(&masked, true),
    )?;
    write_csv(
        &g.out.join("unmasked.csv"),
        g.seed,
        "layer,capacity,normalized",
        curve_rows(&unmasked, false),
    )?;
    write_snapshot(&g.out.join(SNAPSHOT_FILE), "repro_capacity", &g, &s)?;
    if let (Some(first), Some(last), Some(m_last)) =
        (unmasked.first(), unmasked.last(), masked.last())
    {
        eprintln!(
            "unmasked normalized capacity {:.4} -> {:.4}; masked final {:.4}",
            first.normalized, last.normalized, m_last.normalized
        );
    }
    Ok(())
}

#[derive(Args, Serialize)]
pub struct AblateArgs {
    /// Comma-separated variants; a leading `-` is accepted (`-deepnorm`).
    #[arg(long, allow_hyphen_values = true)]
    variants: Option<String>,
    /// Comma-separated model seeds.
    #[arg(long)]
    model_seeds: Option<String>,
    #[arg(long)]
    train_graphs: Option<usize>,
    #[arg(long)]
    eval_graphs: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateSettings {
    variants: Vec<String>,
    model_seeds: Vec<u64>,
    train_graphs: usize,
    eval_graphs: usize,
    min_nodes: usize,
    max_nodes: usize,
    edge_prob: f64,
    layers: usize,
    heads: usize,
    d_hidden: usize,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    thre: usize,
}

impl Default for AblateSettings {
    fn default() -> Self {
        let c = AblationConfig::default();
        AblateSettings {
            variants: c.variants.iter().map(|v| v.to_string()).collect(),
            model_seeds: c.seeds,
            train_graphs: c.train_graphs,
            eval_graphs: c.eval_graphs,
            min_nodes: c.min_nodes,
            max_nodes: c.max_nodes,
            edge_prob: c.edge_prob,
            layers: c.layers,
            heads: c.heads,
            d_hidden: c.d_hidden,
            epochs: c.epochs,
            batch_size: c.batch_size,
            lr: c.lr_peak,
            thre: c.thre,
        }
    }
}

/// Flag form of the list-valued settings.
#[derive(Serialize)]
struct AblateFlags<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    variants: Option<Vec<&'a str>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model_seeds: Option<Vec<u64>>,
    #[serde(flatten)]
    rest: &'a AblateArgs,
}

fn split(list: &str) -> Vec<&str> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

pub fn ablate(
    file: &Table,
    seed: Option<u64>,
    out: Option<PathBuf>,
    args: &AblateArgs,
) -> Result<(), CliError> {
    let g = resolve_global(file, seed, out, "ablation")?;
    let model_seeds = match &args.model_seeds {
        Some(list) => Some(
            split(list)
                .into_iter()
                .map(|s| {
                    s.parse::<u64>()
                        .map_err(|e| CliError::Usage(format!("model seed `{s}`: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    let flags = AblateFlags {
        variants: args.variants.as_deref().map(split),
        model_seeds,
        rest: &AblateArgs {
            variants: None,
            model_seeds: None,
            ..*args
        },
    };
    let s: AblateSettings = resolve(file, "ablate", &flags)?;
    let variants = s
        .variants
        .iter()
        .map(|v| v.parse::<Variant>())
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = AblationConfig {
        variants: variants.clone(),
        seeds: s.model_seeds.clone(),
        train_graphs: s.train_graphs,
        eval_graphs: s.eval_graphs,
        min_nodes: s.min_nodes,
        max_nodes: s.max_nodes,
        edge_prob: s.edge_prob,
        layers: s.layers,
        heads: s.heads,
        d_hidden: s.d_hidden,
        epochs: s.epochs,
        batch_size: s.batch_size,
        lr_peak: s.lr,
        thre: s.thre,
    };
    let rows = run_ablation(&cfg, g.seed)?;
    std::fs::create_dir_all(&g.out)?;
    write_csv(
        &g.out.join("ablation.csv"),
        g.seed,
        "variant,model_seed,final_train_loss,eval_mae",
        rows.iter().map(|r| {
            format!(
                "{},{},{},{}",
                r.variant, r.seed, r.final_train_loss, r.eval_mae
            )
        }),
    )?;
    let summary: Vec<String> = variants
        .iter()
        .map(|&v| format!("{v},{}", opt(mean_eval(&rows, v))))
        .collect();
    for line in &summary {
        eprintln!("{line}");
    }
    write_csv(
        &g.out.join("summary.csv"),
        g.seed,
        "variant,mean_eval_mae",
        summary,
    )?;
    write_snapshot(&g.out.join(SNAPSHOT_FILE), "ablate", &g, &s)?;
    Ok(())
}
