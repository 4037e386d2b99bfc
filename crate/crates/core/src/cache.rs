//! Persistent substructure cache. Items store only kind, nodes and optional
//! center; induced adjacency is rebuilt from the graph on load.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::substructure::{extract_all, Kind, Substructure, SubstructureSet, VocabConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedItem {
    pub kind: Kind,
    pub nodes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub graph_id: usize,
    pub items: Vec<CachedItem>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubstructureCache {
    pub entries: Vec<CacheEntry>,
}

impl SubstructureCache {
    /// Extracts every graph once; graph ids are positions in `graphs`.
    pub fn build<R: Rng + ?Sized>(graphs: &[Graph], cfg: &VocabConfig, rng: &mut R) -> Self {
        let entries = graphs
            .iter()
            .enumerate()
            .map(|(id, g)| CacheEntry::from_set(&extract_all(g, id, cfg, rng)))
            .collect();
        SubstructureCache { entries }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Reuses the cache at `path` when present, otherwise builds and writes it.
    pub fn load_or_build<R: Rng + ?Sized>(
        path: impl AsRef<Path>,
        graphs: &[Graph],
        cfg: &VocabConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let path = path.as_ref();
        if path.exists() {
            let cache = Self::load(path)?;
            if cache.entries.len() != graphs.len() {
                return Err(Error::Config(format!(
                    "cache {} holds {} graphs, dataset has {}",
                    path.display(),
                    cache.entries.len(),
                    graphs.len()
                )));
            }
            return Ok(cache);
        }
        let cache = Self::build(graphs, cfg, rng);
        cache.save(path)?;
        Ok(cache)
    }

    /// Rebuilds the substructure set of `graph_id` against its graph.
    pub fn set_for(&self, graph_id: usize, g: &Graph) -> Result<SubstructureSet> {
        let entry = self
            .entries
            .iter()
            .find(|e| e.graph_id == graph_id)
            .ok_or_else(|| Error::Config(format!("cache has no entry for graph {graph_id}")))?;
        entry.to_set(g)
    }

    /// All sets, in dataset order.
    pub fn sets(&self, graphs: &[Graph]) -> Result<Vec<SubstructureSet>> {
        graphs
            .iter()
            .enumerate()
            .map(|(id, g)| self.set_for(id, g))
            .collect()
    }
}

impl CacheEntry {
    pub fn from_set(set: &SubstructureSet) -> Self {
        CacheEntry {
            graph_id: set.graph_id,
            items: set
                .items()
                .iter()
                .map(|s| CachedItem {
                    kind: s.kind,
                    nodes: s.nodes.clone(),
                    center: s.center,
                })
                .collect(),
        }
    }

    pub fn to_set(&self, g: &Graph) -> Result<SubstructureSet> {
        let adj = g.adjacency();
        let mut set = SubstructureSet::new(self.graph_id, g.num_nodes);
        for item in &self.items {
            if let Some(&bad) = item.nodes.iter().find(|&&v| v >= g.num_nodes) {
                return Err(Error::NodeOutOfRange {
                    node: bad,
                    num_nodes: g.num_nodes,
                });
            }
            set.push(Substructure::new(
                &adj,
                item.nodes.clone(),
                item.kind,
                item.center,
            ));
        }
        Ok(set)
    }
}
