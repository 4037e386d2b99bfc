//! Substructure-token graph transformer with local attention, plus tools to
//! measure and bound how attention capacity evolves with depth.

pub mod cache;
pub mod canonical;
pub mod capacity;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod substructure;
pub mod train;

pub use error::{Error, ErrorClass, Result};
pub use graph::{all_pairs_distances, validate, DistanceTable, Graph, Target};
pub use substructure::{Kind, Substructure, SubstructureSet, VocabConfig};
