//! Follower graphs from SNAP edge lists and spreading over them.

mod graph;
mod simulate;

pub use graph::{
    degree_stats, load_edge_list, parse_edge_list, read_cache, write_cache, CleaningReport,
    DegreeStats, SocialGraph, CACHE_MAGIC,
};
pub use simulate::{network_monte_carlo, network_simulate};
