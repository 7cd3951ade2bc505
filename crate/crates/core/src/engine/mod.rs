//! Event-driven mining simulator.
//!
//! Every miner keeps its own [`BlockTree`](crate::chain::BlockTree), mines on
//! its tip with an exponential timer, floods tip-extending blocks to its
//! neighbors and fetches unknown ancestors with require/response messages.
//!
//! Seeding: a run seed `s` gives miner `i` the generator
//! `ChaCha8Rng::seed_from_u64(s)` on stream `MINER_STREAM_BASE + i`. Topology
//! construction uses the same seed on streams below `2^63`, so the two never
//! overlap.

mod kernel;
mod sim;

pub use kernel::{Event, EventKind, EventQueue, Message};
pub use sim::{MinerState, Simulation};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{Block, BlockId, ChainError, MinerId};
use crate::netmodel::{LatencyMatrix, NetError, Topology};

pub const MINER_STREAM_BASE: u64 = 1 << 63;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("replica of miner {miner}: {source}")]
    Chain {
        miner: MinerId,
        #[source]
        source: ChainError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    /// Mean time between blocks of a single miner, in ms.
    pub mean_interblock: f64,
    /// Per-miner mining rates in blocks per ms; overrides `mean_interblock`.
    pub hash_rates: Option<Vec<f64>>,
    pub validation_delay: f64,
    pub target_chain_length: u32,
    pub discard_tail: u32,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(n: usize, mean_interblock: f64, target_chain_length: u32, seed: u64) -> Self {
        SimConfig {
            n,
            mean_interblock,
            hash_rates: None,
            validation_delay: 1.0,
            target_chain_length,
            discard_tail: 100.min(target_chain_length.saturating_sub(1)),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Config(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if !(self.mean_interblock > 0.0 && self.mean_interblock.is_finite()) {
            return bad(format!(
                "mean_interblock must be positive, got {}",
                self.mean_interblock
            ));
        }
        if !(self.validation_delay >= 0.0 && self.validation_delay.is_finite()) {
            return bad(format!(
                "validation_delay must be non-negative, got {}",
                self.validation_delay
            ));
        }
        if self.target_chain_length <= self.discard_tail {
            return bad(format!(
                "target_chain_length ({}) must exceed discard_tail ({})",
                self.target_chain_length, self.discard_tail
            ));
        }
        if let Some(r) = &self.hash_rates {
            if r.len() != self.n {
                return bad(format!("{} hash rates for {} miners", r.len(), self.n));
            }
            if let Some(x) = r.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
                return bad(format!("hash rates must be positive, got {x}"));
            }
        }
        Ok(())
    }

    /// Mining rate of each miner in blocks per ms.
    pub fn rates(&self) -> Vec<f64> {
        match &self.hash_rates {
            Some(r) => r.clone(),
            None => vec![1.0 / self.mean_interblock; self.n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub per_miner_mined: Vec<u32>,
    /// Observer's longest chain, genesis first.
    pub final_chain: Vec<BlockId>,
    /// Every block of the run indexed by id; genesis at 0.
    pub all_blocks: Vec<Block>,
    /// Mined blocks outside `final_chain`.
    pub fork_count: usize,
    pub wall_events: u64,
    pub observer: MinerId,
    pub protocol_errors: u64,
    /// Miners whose replica disagrees with the observer below the discarded
    /// tail.
    pub inconsistent_replicas: Vec<MinerId>,
    /// Digest of every processed (time, event) pair.
    pub event_digest: u64,
    pub end_time: f64,
}

impl SimResult {
    pub fn fork_rate(&self) -> f64 {
        let mined = self.all_blocks.len() - 1;
        if mined == 0 {
            0.0
        } else {
            self.fork_count as f64 / mined as f64
        }
    }
}

pub fn run_simulation(
    config: &SimConfig,
    topology: &Topology,
    latency: &LatencyMatrix,
) -> Result<SimResult, EngineError> {
    let streams: Vec<u64> = (0..config.n as u64)
        .map(|i| MINER_STREAM_BASE + i)
        .collect();
    Simulation::new(config, topology, latency, &streams)?.run()
}
