//! Network model: miner placement, pairwise latencies, overlay topologies and
//! the minimum block-delivery matrix derived from them.

mod delta;
mod latency;
mod placement;
mod topology;

pub use delta::{delta_matrix, DeltaMatrix};
pub use latency::{load_latency_csv, CityLatency, LatencyMatrix};
pub use placement::{load_placement_csv, Continent, MinerSpec};
pub use topology::{
    build_topology, GroupSpec, InterLink, Intra, LinkRule, Override, Selector, Target, Topology,
    TopologyPolicy,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    Header {
        path: String,
        expected: String,
        found: String,
    },
    #[error("{path} line {line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },
    #[error("latency dataset has no entry for {} city pair(s): {}", .0.len(), format_pairs(.0))]
    MissingPairs(Vec<(String, String)>),
    #[error("unknown city `{0}`")]
    UnknownCity(String),
    #[error("topology configuration: {0}")]
    Config(String),
    #[error("topology is disconnected; component not reachable from miner 0: {0:?}")]
    Disconnected(Vec<u32>),
    #[error("latency matrix covers {latency} miners but topology has {topology}")]
    SizeMismatch { latency: usize, topology: usize },
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    const SHOWN: usize = 10;
    let mut s = pairs
        .iter()
        .take(SHOWN)
        .map(|(a, b)| format!("({a}, {b})"))
        .collect::<Vec<_>>()
        .join(", ");
    if pairs.len() > SHOWN {
        s.push_str(&format!(", ... {} more", pairs.len() - SHOWN));
    }
    s
}
