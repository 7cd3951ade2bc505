//! Proof-of-work mining over peer-to-peer overlays.
//!
//! The crate pairs a deterministic event-driven simulator ([`engine`]) with
//! closed-form reward formulas and a round-based Monte Carlo model
//! ([`theory`]). [`netmodel`] builds overlays and latency matrices,
//! [`metrics`] turns simulation output into per-miner rewards, and
//! [`experiment`] wires everything to TOML configs and CSV files.

pub mod chain;
pub mod engine;
pub mod experiment;
pub mod metrics;
pub mod netmodel;
pub mod theory;
