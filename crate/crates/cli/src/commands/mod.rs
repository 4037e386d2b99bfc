pub mod analysis;
pub mod data;
pub mod model;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use deepgraph::cache::SubstructureCache;
use deepgraph::experiments::extract_dataset;
use deepgraph::substructure::DEFAULT_S_MAX;
use deepgraph::{Graph, Kind, SubstructureSet, VocabConfig};

use crate::config::ensure_parent;
use crate::error::CliError;

/// File name used when `--ckpt` or a training `--out` names a directory.
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const SNAPSHOT_FILE: &str = "resolved_config.toml";

pub fn vocab(
    kinds: &str,
    khop_k: usize,
    rwalk_steps: usize,
    s_max: usize,
) -> Result<VocabConfig, CliError> {
    let parsed = kinds
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Kind>().map_err(CliError::Usage))
        .collect::<Result<Vec<_>, _>>()?;
    if parsed.is_empty() {
        return Err(CliError::Usage(
            "kinds must name at least one substructure kind".into(),
        ));
    }
    if s_max < 2 {
        return Err(CliError::Usage(format!(
            "s_max must be at least 2, got {s_max}"
        )));
    }
    let mut v = VocabConfig::from_kinds(&parsed);
    if v.khop.is_some() {
        v.khop = Some(khop_k);
    }
    if v.rwalk.is_some() {
        v.rwalk = Some(rwalk_steps);
    }
    v.s_max = s_max;
    Ok(v)
}

pub fn default_kinds() -> String {
    "cycle,star,path".into()
}

pub fn default_s_max() -> usize {
    DEFAULT_S_MAX
}

pub fn load_graphs(path: &Path) -> Result<Vec<Graph>, CliError> {
    Ok(deepgraph::graph::load_jsonl(path)?)
}

/// Substructure sets from a cache file, or extracted on the fly.
pub fn load_sets(
    graphs: &[Graph],
    cache: Option<&Path>,
    vocab: &VocabConfig,
    seed: u64,
) -> Result<Vec<SubstructureSet>, CliError> {
    match cache {
        Some(path) => {
            let cache = SubstructureCache::load(path)?;
            if cache.entries.len() != graphs.len() {
                return Err(CliError::Usage(format!(
                    "cache {} holds {} graphs, dataset has {}",
                    path.display(),
                    cache.entries.len(),
                    graphs.len()
                )));
            }
            Ok(cache.sets(graphs)?)
        }
        None => Ok(extract_dataset(graphs, vocab, seed)),
    }
}

/// A directory gets [`CHECKPOINT_FILE`] appended; anything else is used as is.
pub fn checkpoint_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(CHECKPOINT_FILE)
    } else {
        p.to_path_buf()
    }
}

/// Writes the seed comment, the header and `rows` (already comma-joined).
pub fn write_csv(
    path: &Path,
    seed: u64,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> Result<(), CliError> {
    ensure_parent(path)?;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# seed={seed}")?;
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
