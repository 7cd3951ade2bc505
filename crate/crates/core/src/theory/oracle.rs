use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TheoryError;
use crate::netmodel::DeltaMatrix;

/// Rounds at the end of a trace left out of every estimate.
pub const ORACLE_TAIL: u64 = 100;

const BATCHES: usize = 20;
const TOL: f64 = 1e-9;

/// A simulated round-model history. Index 0 is genesis; round `r` mined
/// block `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub n: usize,
    pub miner: Vec<u32>,
    pub parent: Vec<u32>,
    pub height: Vec<u32>,
    pub in_chain: Vec<bool>,
    /// Last round included in the estimates.
    pub cutoff: u64,
    pub per_miner_mined: Vec<u64>,
    pub per_miner_in_chain: Vec<u64>,
}

/// A group's per-miner chain fraction and wastage with batch-means
/// standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupEstimate {
    pub f: f64,
    pub f_se: f64,
    pub w: f64,
    pub w_se: f64,
}

impl RoundTrace {
    pub fn rounds(&self) -> u64 {
        self.miner.len() as u64 - 1
    }

    /// Chain blocks mined in rounds `1..=cutoff`.
    pub fn chain_len(&self) -> u64 {
        self.per_miner_in_chain.iter().sum()
    }

    pub fn f_hat(&self) -> Vec<f64> {
        let len = self.chain_len() as f64;
        self.per_miner_in_chain
            .iter()
            .map(|&c| c as f64 / len)
            .collect()
    }

    pub fn w_hat(&self) -> Vec<f64> {
        self.per_miner_mined
            .iter()
            .zip(&self.per_miner_in_chain)
            .map(|(&m, &c)| {
                if m == 0 {
                    0.0
                } else {
                    (m - c) as f64 / m as f64
                }
            })
            .collect()
    }

    /// Blocks off the final chain among rounds `1..=cutoff`.
    pub fn off_chain(&self) -> u64 {
        self.per_miner_mined.iter().sum::<u64>() - self.chain_len()
    }

    /// Pooled estimate for `members`: `f` is the group's chain share divided
    /// by its size; standard errors come from `BATCHES` contiguous batches.
    pub fn group_estimate(&self, members: &[u32]) -> GroupEstimate {
        let mut is_member = vec![false; self.n];
        for &m in members {
            is_member[m as usize] = true;
        }
        let k = members.len() as f64;
        let ratio = |lo: u64, hi: u64| -> (f64, f64) {
            let (mut chain, mut chain_g, mut mined_g, mut wasted_g) = (0u64, 0u64, 0u64, 0u64);
            for r in lo..hi {
                let r = r as usize;
                let g = is_member[self.miner[r] as usize];
                if self.in_chain[r] {
                    chain += 1;
                    chain_g += g as u64;
                }
                if g {
                    mined_g += 1;
                    wasted_g += !self.in_chain[r] as u64;
                }
            }
            let f = if chain == 0 {
                0.0
            } else {
                chain_g as f64 / chain as f64 / k
            };
            let w = if mined_g == 0 {
                0.0
            } else {
                wasted_g as f64 / mined_g as f64
            };
            (f, w)
        };
        let (f, w) = ratio(1, self.cutoff + 1);
        let size = self.cutoff / BATCHES as u64;
        if size == 0 {
            return GroupEstimate {
                f,
                f_se: 0.0,
                w,
                w_se: 0.0,
            };
        }
        let batches: Vec<(f64, f64)> = (0..BATCHES as u64)
            .map(|b| ratio(1 + b * size, 1 + (b + 1) * size))
            .collect();
        let se = |xs: Vec<f64>| {
            let (mean, _) = crate::metrics::mean_ci95(&xs);
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            (var / xs.len() as f64).sqrt()
        };
        GroupEstimate {
            f,
            f_se: se(batches.iter().map(|b| b.0).collect()),
            w,
            w_se: se(batches.iter().map(|b| b.1).collect()),
        }
    }
}

/// Simulates the round model over latencies `delta` given in rounds.
///
/// Round `r` happens at time `r`; its miner is drawn in proportion to
/// `hash_rates`. The miner sees every block mined in round `r'` with
/// `r' + delta(miner(r'), m) <= r` and mines on the highest one, preferring
/// the earliest arrival and then the earliest round. The final chain is the
/// highest block at the horizon, earliest mined on ties.
pub fn round_oracle(
    delta: &DeltaMatrix,
    hash_rates: &[f64],
    rounds: u64,
    seed: u64,
) -> Result<RoundTrace, TheoryError> {
    let n = delta.n();
    if hash_rates.len() != n || n == 0 {
        return Err(TheoryError::Domain(format!(
            "{} hash rates for {} miners",
            hash_rates.len(),
            n
        )));
    }
    if rounds == 0 {
        return Err(TheoryError::Domain("rounds must be at least 1".into()));
    }
    let pick = WeightedIndex::new(hash_rates)
        .map_err(|e| TheoryError::Domain(format!("hash rates: {e}")))?;
    let reach = delta.max().ceil() as usize + 1;

    let len = rounds as usize + 1;
    let mut miner = Vec::with_capacity(len);
    let mut parent = Vec::with_capacity(len);
    let mut height = Vec::with_capacity(len);
    miner.push(u32::MAX);
    parent.push(0);
    height.push(0);

    // Per miner: round of its last turn, and its best visible block as
    // (height, arrival, round).
    let mut last_turn = vec![0usize; n];
    let mut best: Vec<(u32, f64, usize)> = vec![(0, 0.0, 0); n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for r in 1..len {
        let m = pick.sample(&mut rng);
        let from = last_turn[m].saturating_sub(reach).max(1);
        let mut b = best[m];
        let now = r as f64;
        for (q, &mq) in miner.iter().enumerate().take(r).skip(from) {
            let arrival = q as f64 + delta.get(mq as usize, m);
            if arrival > now + TOL {
                continue;
            }
            let h = height[q];
            let better =
                h > b.0 || (h == b.0 && (arrival < b.1 - TOL || (arrival <= b.1 + TOL && q < b.2)));
            if better {
                b = (h, arrival, q);
            }
        }
        best[m] = b;
        last_turn[m] = r;
        miner.push(m as u32);
        parent.push(b.2 as u32);
        height.push(b.0 + 1);
        // own block is visible immediately and is the new best
        best[m] = (b.0 + 1, now, r);
    }

    let tip = (0..len)
        .max_by(|&a, &b| height[a].cmp(&height[b]).then(b.cmp(&a)))
        .unwrap();
    let mut in_chain = vec![false; len];
    let mut cur = tip;
    while cur != 0 {
        in_chain[cur] = true;
        cur = parent[cur] as usize;
    }

    let cutoff = rounds - ORACLE_TAIL.min(rounds - 1);
    let mut per_miner_mined = vec![0u64; n];
    let mut per_miner_in_chain = vec![0u64; n];
    for r in 1..=cutoff as usize {
        per_miner_mined[miner[r] as usize] += 1;
        if in_chain[r] {
            per_miner_in_chain[miner[r] as usize] += 1;
        }
    }
    Ok(RoundTrace {
        n,
        miner,
        parent,
        height,
        in_chain,
        cutoff,
        per_miner_mined,
        per_miner_in_chain,
    })
}
