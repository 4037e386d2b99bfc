use std::path::PathBuf;

use clap::Args;
use deepgraph::cache::{CacheEntry, SubstructureCache};
use deepgraph::experiments::extract_dataset;
use deepgraph::rng::stream_rng;
use deepgraph::sampler::{sample_substructures, SamplerParams};
use deepgraph::train::{gen_community_nodes, gen_cycle_regression};
use serde::{Deserialize, Serialize};
use toml::Table;

use super::{default_kinds, default_s_max, load_graphs, load_sets, vocab, write_csv};
use crate::config::{ensure_parent, resolve, resolve_global, snapshot_beside, write_snapshot};
use crate::error::CliError;

// Graphs are generated from a stream no other command uses.
const GEN_STREAM: u64 = 0;

#[derive(Args, Serialize)]
pub struct GenArgs {
    /// `cycles` (graph regression on induced cycle counts) or `communities`
    /// (two-block node classification).
    #[arg(long)]
    task: Option<String>,
    /// Number of graphs.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    min_nodes: Option<usize>,
    #[arg(long)]
    max_nodes: Option<usize>,
    #[arg(long)]
    edge_prob: Option<f64>,
    #[arg(long)]
    nodes_per_block: Option<usize>,
    #[arg(long)]
    p_in: Option<f64>,
    #[arg(long)]
    p_out: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSettings {
    task: Option<String>,
    n: usize,
    min_nodes: usize,
    max_nodes: usize,
    edge_prob: f64,
    nodes_per_block: usize,
    p_in: f64,
    p_out: f64,
}

impl Default for GenSettings {
    fn default() -> Self {
        GenSettings {
            task: None,
            n: 500,
            min_nodes: 8,
            max_nodes: 16,
            edge_prob: 0.25,
            nodes_per_block: 10,
            p_in: 0.3,
            p_out: 0.05,
        }
    }
}

pub fn gen(
    file: &Table,
    seed: Option<u64>,
    out: Option<PathBuf>,
    args: &GenArgs,
) -> Result<(), CliError> {
    let g = resolve_global(file, seed, out, "graphs.jsonl")?;
    let s: GenSettings = resolve(file, "gen", args)?;
    let mut rng = stream_rng(g.seed, GEN_STREAM);
    let graphs = match s.task.as_deref() {
        Some("cycles") => {
            gen_cycle_regression(s.n, (s.min_nodes, s.max_nodes), s.edge_prob, &mut rng)?
        }
        Some("communities") => {
            gen_community_nodes(s.n, s.nodes_per_block, s.p_in, s.p_out, &mut rng)?
        }
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown task `{other}`; expected cycles or communities"
            )))
        }
        None => {
            return Err(CliError::Usage(
                "gen needs --task (cycles or communities)".into(),
            ))
        }
    };
    ensure_parent(&g.out)?;
    deepgraph::graph::save_jsonl(&g.out, &graphs)?;
    write_snapshot(&snapshot_beside(&g.out), "gen", &g, &s)?;
    eprintln!("wrote {} graphs to {}", graphs.len(), g.out.display());
    Ok(())
}

#[derive(Args, Serialize)]
pub struct ExtractArgs {
    /// Graphs in JSON Lines format.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated subset of cycle,star,path,khop,rwalk.
    #[arg(long)]
    kinds: Option<String>,
    #[arg(long)]
    khop_k: Option<usize>,
    #[arg(long)]
    rwalk_steps: Option<usize>,
    #[arg(long)]
    s_max: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractSettings {
    input: Option<PathBuf>,
    kinds: String,
    khop_k: usize,
    rwalk_steps: usize,
    s_max: usize,
}

impl Default for ExtractSettings {
    fn default() -> Self {
        ExtractSettings {
            input: None,
            kinds: default_kinds(),
            khop_k: 2,
            rwalk_steps: 10,
            s_max: default_s_max(),
        }
    }
}

pub fn extract(
    file: &Table,
    seed: Option<u64>,
    out: Option<PathBuf>,
    args: &ExtractArgs,
) -> Result<(), CliError> {
    let g = resolve_global(file, seed, out, "cache.json")?;
    let s: ExtractSettings = resolve(file, "extract", args)?;
    let input = s
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("extract needs --input".into()))?;
    let v = vocab(&s.kinds, s.khop_k, s.rwalk_steps, s.s_max)?;
    let graphs = load_graphs(input)?;
    let sets = extract_dataset(&graphs, &v, g.seed);
    let cache = SubstructureCache {
        entries: sets.iter().map(CacheEntry::from_set).collect(),
    };
    ensure_parent(&g.out)?;
    cache.save(&g.out)?;
    write_snapshot(&snapshot_beside(&g.out), "extract", &g, &s)?;
    let total: usize = sets.iter().map(|s| s.len()).sum();
    eprintln!(
        "extracted {total} substructures from {} graphs",
        graphs.len()
    );
    Ok(())
}

#[derive(Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    /// Cache written by `extract`; extracted on the fly when absent.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    kinds: Option<String>,
    #[arg(long)]
    thre: Option<usize>,
    #[arg(long)]
    n_init: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    n_sample: Option<usize>,
    #[arg(long)]
    m_max: Option<usize>,
}

/// Unset schedule entries take the per-graph defaults.
#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSettings {
    data: Option<PathBuf>,
    cache: Option<PathBuf>,
    kinds: String,
    thre: usize,
    n_init: Option<usize>,
    top_k: Option<usize>,
    n_sample: Option<usize>,
    m_max: Option<usize>,
}

impl Default for SampleSettings {
    fn default() -> Self {
        SampleSettings {
            data: None,
            cache: None,
            kinds: default_kinds(),
            thre: 1,
            n_init: None,
            top_k: None,
            n_sample: None,
            m_max: None,
        }
    }
}

pub fn sample(
    file: &Table,
    seed: Option<u64>,
    out: Option<PathBuf>,
    args: &SampleArgs,
) -> Result<(), CliError> {
    let g = resolve_global(file, seed, out, "samples.csv")?;
    let s: SampleSettings = resolve(file, "sample", args)?;
    let data = s
        .data
        .as_ref()
        .ok_or_else(|| CliError::Usage("sample needs --data".into()))?;
    let graphs = load_graphs(data)?;
    let sets = load_sets(
        &graphs,
        s.cache.as_deref(),
        &vocab(&s.kinds, 2, 10, default_s_max())?,
        g.seed,
    )?;
    let mut rows = Vec::new();
    for (id, (graph, set)) in graphs.iter().zip(&sets).enumerate() {
        let mut p = SamplerParams::for_graph(graph.num_nodes, s.thre);
        p.n_init = s.n_init.unwrap_or(p.n_init);
        p.top_k = s.top_k.unwrap_or(p.top_k);
        p.n_sample = s.n_sample.unwrap_or(p.n_sample);
        p.m_max = s.m_max.unwrap_or(p.m_max);
        p.check()?;
        let picks = sample_substructures(set, &p, &mut stream_rng(g.seed, id as u64));
        for (rank, idx) in picks.into_iter().enumerate() {
            let item = set.get(idx);
            let nodes: Vec<String> = item.nodes.iter().map(usize::to_string).collect();
            rows.push(format!(
                "{id},{rank},{idx},{},{},{}",
                item.kind,
                item.size(),
                nodes.join(" ")
            ));
        }
    }
    write_csv(&g.out, g.seed, "graph_id,rank,item,kind,size,nodes", rows)?;
    write_snapshot(&snapshot_beside(&g.out), "sample", &g, &s)?;
    Ok(())
}
