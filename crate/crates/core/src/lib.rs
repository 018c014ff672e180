//! Commonsense knowledge graph population from a discourse graph.

pub mod align;
pub mod graph;
pub mod kb;
pub mod lexicon;
pub mod normalize;
pub mod relation;
pub mod snapshot;
pub mod extract;
pub mod sampler;
pub mod encoder;
pub mod model;
pub mod train;
pub mod metrics;
pub mod config;
pub mod pipeline;
