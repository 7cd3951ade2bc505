//! Round-model analysis: closed-form rewards for one, two and three
//! clusters, a grid optimum search, the Monte Carlo round oracle and the
//! phase classifier for two-cluster traces.
//!
//! In the round model exactly one miner mines per unit-time round. Latencies
//! are expressed in rounds: `eps` inside a cluster, `delta` across clusters.

mod oracle;
mod phases;
mod three;

pub use oracle::{round_oracle, GroupEstimate, RoundTrace, ORACLE_TAIL};
pub use phases::{classify_phases, phases_from_sequence, Phase, PhaseKind};
pub use three::{
    three_cluster_f, two_equal_dominant_gain, AlphaSystem, ClusterExpectation, ThreeClusterParams,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("parameter outside its domain: {0}")]
    Domain(String),
    #[error("outside the analysed model: {0}")]
    OutOfModel(String),
    #[error("linear system is singular or ill-conditioned (pivot ratio {ratio:.3e})")]
    Singular { ratio: f64 },
    #[error("phase classification failed at round {round}: {msg}")]
    Phase { round: u64, msg: String },
}

/// Per-miner `(F, W)` for a single cluster with pairwise latency `eps`.
pub fn single_cluster(n: usize, eps: f64) -> Result<(f64, f64), TheoryError> {
    if n == 0 {
        return Err(TheoryError::Domain("n must be positive".into()));
    }
    if !(eps > 0.0) {
        return Err(TheoryError::Domain(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if eps >= 2.0 {
        return Err(TheoryError::OutOfModel(format!(
            "eps = {eps} is not below 2"
        )));
    }
    let f = 1.0 / n as f64;
    Ok(if eps <= 1.0 { (f, 0.0) } else { (f, 0.5) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoClusterParams {
    /// Fraction of miners in the dominant cluster.
    pub p: f64,
    pub n: usize,
    pub eps: f64,
    pub delta: f64,
}

impl TwoClusterParams {
    pub fn new(p: f64, n: usize, eps: f64, delta: f64) -> Self {
        TwoClusterParams { p, n, eps, delta }
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        if !(0.5..1.0).contains(&self.p) {
            return Err(TheoryError::Domain(format!(
                "p = {} not in [0.5, 1)",
                self.p
            )));
        }
        if self.n == 0 {
            return Err(TheoryError::Domain("n must be positive".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(TheoryError::Domain(format!(
                "eps = {} not in (0, 1)",
                self.eps
            )));
        }
        if !(self.delta > 1.0 && self.delta < 2.0) {
            return Err(TheoryError::Domain(format!(
                "delta = {} not in (1, 2)",
                self.delta
            )));
        }
        if self.delta - 1.0 <= self.eps {
            return Err(TheoryError::OutOfModel(format!(
                "need delta - 1 > eps, got delta = {}, eps = {}",
                self.delta, self.eps
            )));
        }
        Ok(())
    }
}

/// Expected longest-chain blocks per phase contributed by a cluster holding
/// fraction `q` of the miners, when the other cluster holds `1 - q`.
fn cluster_term(q: f64) -> f64 {
    let d = 1.0 - 2.0 * q * (1.0 - q);
    q / (1.0 - q) + 2.0 * q * q * (1.0 - q) / (d * d)
}

/// Relative gain `n * F` of a miner in a cluster of fraction `q`, for any
/// `q` in `(0, 1)`.
pub fn two_cluster_gain_at(q: f64) -> f64 {
    let (a, b) = (cluster_term(q), cluster_term(1.0 - q));
    a / (q * a + (1.0 - q) * b)
}

/// Per-miner fraction of the longest chain for a dominant-cluster miner.
pub fn two_cluster_f(params: &TwoClusterParams) -> Result<f64, TheoryError> {
    params.validate()?;
    Ok(two_cluster_gain_at(params.p) / params.n as f64)
}

pub fn two_cluster_gain(params: &TwoClusterParams) -> Result<f64, TheoryError> {
    params.validate()?;
    Ok(two_cluster_gain_at(params.p))
}

/// Wastage of a dominant-cluster miner as a function of `p` alone.
pub fn two_cluster_w_at(p: f64) -> f64 {
    let d = 1.0 - 2.0 * p * (1.0 - p);
    let lost = 2.0 * (1.0 - p).powi(3) / (d * d);
    lost / (p / (1.0 - p) + 2.0 * p * p * (1.0 - p) / (d * d) + lost)
}

pub fn two_cluster_w(params: &TwoClusterParams) -> Result<f64, TheoryError> {
    params.validate()?;
    Ok(two_cluster_w_at(params.p))
}

/// Grid argmax of `gain` over `lo, lo + step, ...` up to `hi`; ties go to
/// the smaller `p`. Errors from `gain` propagate.
pub fn optimal_cluster_fraction(
    gain: impl Fn(f64) -> Result<f64, TheoryError>,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<(f64, f64), TheoryError> {
    if !(step > 0.0) {
        return Err(TheoryError::Domain(format!(
            "step must be positive, got {step}"
        )));
    }
    if hi < lo {
        return Err(TheoryError::Domain(format!("empty range [{lo}, {hi}]")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut best = (lo, gain(lo)?);
    for k in 1..=count {
        let p = lo + k as f64 * step;
        let g = gain(p)?;
        if g > best.1 {
            best = (p, g);
        }
    }
    Ok(best)
}
