//! Per-miner rewards from a finished run, and their aggregation over runs.
//!
//! `F_v` is miner `v`'s share of the retained chain (final chain without
//! genesis and without the last `discard_tail` blocks). `W_v` is the share of
//! `v`'s blocks that missed the retained chain, counting only blocks mined no
//! later than the last retained block.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use thiserror::Error;

use crate::engine::SimResult;
use crate::netmodel::{Continent, MinerSpec};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("final chain has {len} blocks, not more than the {discard} to discard")]
    ChainTooShort { len: usize, discard: usize },
    #[error("result covers {result} miners but {given} miner specs were given")]
    MinerCount { result: usize, given: usize },
    #[error("reports do not share the same miner set")]
    MismatchedMiners,
    #[error("no reports to aggregate")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardRow {
    pub miner_id: u32,
    pub city: String,
    pub continent: Continent,
    pub blocks_mined: u64,
    pub blocks_in_chain: u64,
    /// Blocks mined no later than the last retained block.
    pub blocks_eligible: u64,
    pub f_pct: f64,
    pub w_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardReport {
    pub rows: Vec<RewardRow>,
    pub retained_len: u64,
    pub fair_pct: f64,
    pub fork_rate: f64,
}

impl RewardReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), MetricsError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(REWARD_HEADER)?;
        for r in &self.rows {
            out.write_record(reward_fields(r))?;
        }
        out.flush()?;
        Ok(())
    }
}

pub const REWARD_HEADER: [&str; 7] = [
    "miner_id",
    "city",
    "continent",
    "blocks_mined",
    "blocks_in_chain",
    "f_pct",
    "w_pct",
];

fn reward_fields(r: &RewardRow) -> Vec<String> {
    vec![
        r.miner_id.to_string(),
        r.city.clone(),
        r.continent.to_string(),
        r.blocks_mined.to_string(),
        r.blocks_in_chain.to_string(),
        format!("{:.6}", r.f_pct),
        format!("{:.6}", r.w_pct),
    ]
}

pub fn compute_rewards(
    result: &SimResult,
    miners: &[MinerSpec],
    discard_tail: usize,
) -> Result<RewardReport, MetricsError> {
    let n = result.per_miner_mined.len();
    if miners.len() != n {
        return Err(MetricsError::MinerCount {
            result: n,
            given: miners.len(),
        });
    }
    let mined_blocks = result.final_chain.len().saturating_sub(1);
    if mined_blocks <= discard_tail {
        return Err(MetricsError::ChainTooShort {
            len: mined_blocks,
            discard: discard_tail,
        });
    }
    let retained = &result.final_chain[1..result.final_chain.len() - discard_tail];
    let in_chain: HashSet<u32> = retained.iter().map(|b| b.0).collect();
    let cutoff = result.all_blocks[retained.last().unwrap().index()].mined_at;

    let mut mined = vec![0u64; n];
    let mut chained = vec![0u64; n];
    let mut eligible = vec![0u64; n];
    for b in &result.all_blocks[1..] {
        let m = b.miner.expect("non-genesis block has a miner") as usize;
        mined[m] += 1;
        if b.mined_at <= cutoff {
            eligible[m] += 1;
        }
        if in_chain.contains(&b.id.0) {
            chained[m] += 1;
        }
    }

    let len = retained.len() as u64;
    let rows = miners
        .iter()
        .enumerate()
        .map(|(i, spec)| RewardRow {
            miner_id: spec.miner_id,
            city: spec.city.clone(),
            continent: spec.continent,
            blocks_mined: mined[i],
            blocks_in_chain: chained[i],
            blocks_eligible: eligible[i],
            f_pct: 100.0 * chained[i] as f64 / len as f64,
            w_pct: if eligible[i] == 0 {
                0.0
            } else {
                100.0 * (eligible[i] - chained[i]) as f64 / eligible[i] as f64
            },
        })
        .collect();
    Ok(RewardReport {
        rows,
        retained_len: len,
        fair_pct: 100.0 / n as f64,
        fork_rate: result.fork_rate(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub miner_id: u32,
    pub city: String,
    pub continent: Continent,
    pub blocks_mined: u64,
    pub blocks_in_chain: u64,
    /// Pooled over runs: total chain blocks over total retained length.
    pub f_pct: f64,
    /// Pooled over runs: total wasted over total eligible blocks.
    pub w_pct: f64,
    pub f_mean: f64,
    pub f_ci95: f64,
    pub w_mean: f64,
    pub w_ci95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub rows: Vec<AggregateRow>,
    pub runs: usize,
    pub fair_pct: f64,
}

pub const AGGREGATE_EXTRA: [&str; 4] = ["f_mean", "f_ci95", "w_mean", "w_ci95"];

impl AggregateReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), MetricsError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(REWARD_HEADER.iter().chain(AGGREGATE_EXTRA.iter()))?;
        for r in &self.rows {
            let mut f = vec![
                r.miner_id.to_string(),
                r.city.clone(),
                r.continent.to_string(),
                r.blocks_mined.to_string(),
                r.blocks_in_chain.to_string(),
            ];
            for x in [r.f_pct, r.w_pct, r.f_mean, r.f_ci95, r.w_mean, r.w_ci95] {
                f.push(format!("{x:.6}"));
            }
            out.write_record(f)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Sample mean and normal-approximation 95% half-width.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, 1.96 * (var / k).sqrt())
}

pub fn aggregate(reports: &[RewardReport]) -> Result<AggregateReport, MetricsError> {
    let first = reports.first().ok_or(MetricsError::Empty)?;
    for r in reports {
        if r.rows.len() != first.rows.len()
            || r.rows
                .iter()
                .zip(&first.rows)
                .any(|(a, b)| a.miner_id != b.miner_id)
        {
            return Err(MetricsError::MismatchedMiners);
        }
    }
    let total_len: u64 = reports.iter().map(|r| r.retained_len).sum();
    let rows = first
        .rows
        .iter()
        .enumerate()
        .map(|(i, base)| {
            let col = |f: fn(&RewardRow) -> f64| -> Vec<f64> {
                reports.iter().map(|r| f(&r.rows[i])).collect()
            };
            let sum =
                |f: fn(&RewardRow) -> u64| -> u64 { reports.iter().map(|r| f(&r.rows[i])).sum() };
            let (f_mean, f_ci95) = mean_ci95(&col(|r| r.f_pct));
            let (w_mean, w_ci95) = mean_ci95(&col(|r| r.w_pct));
            let chained = sum(|r| r.blocks_in_chain);
            let eligible = sum(|r| r.blocks_eligible);
            AggregateRow {
                miner_id: base.miner_id,
                city: base.city.clone(),
                continent: base.continent,
                blocks_mined: sum(|r| r.blocks_mined),
                blocks_in_chain: chained,
                f_pct: 100.0 * chained as f64 / total_len as f64,
                w_pct: if eligible == 0 {
                    0.0
                } else {
                    100.0 * (eligible - chained) as f64 / eligible as f64
                },
                f_mean,
                f_ci95,
                w_mean,
                w_ci95,
            }
        })
        .collect();
    Ok(AggregateReport {
        rows,
        runs: reports.len(),
        fair_pct: first.fair_pct,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinentSummary {
    pub continent: Continent,
    pub miners: usize,
    pub mean_f_pct: f64,
    /// `mean_f_pct` over the fair value.
    pub gain: f64,
    pub above_fair: usize,
    pub below_fair: usize,
}

/// Groups miners by continent using their mean `f_pct` across runs.
pub fn continent_summary(report: &AggregateReport) -> Vec<ContinentSummary> {
    let mut groups: BTreeMap<Continent, Vec<f64>> = BTreeMap::new();
    for r in &report.rows {
        groups.entry(r.continent).or_default().push(r.f_mean);
    }
    groups
        .into_iter()
        .map(|(continent, fs)| {
            let mean = fs.iter().sum::<f64>() / fs.len() as f64;
            ContinentSummary {
                continent,
                miners: fs.len(),
                mean_f_pct: mean,
                gain: mean / report.fair_pct,
                above_fair: fs.iter().filter(|&&f| f > report.fair_pct).count(),
                below_fair: fs.iter().filter(|&&f| f < report.fair_pct).count(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{Block, BlockId};

    /// Builds a result from (parent, miner, time) triples; ids are 1..
    fn result(n: usize, blocks: &[(u32, u32, f64)], chain: &[u32]) -> SimResult {
        let mut all = vec![Block::genesis()];
        let mut mined = vec![0; n];
        for (i, &(p, m, t)) in blocks.iter().enumerate() {
            all.push(Block::new(BlockId(i as u32 + 1), BlockId(p), m, t));
            mined[m as usize] += 1;
        }
        let mut final_chain = vec![BlockId(0)];
        final_chain.extend(chain.iter().map(|&b| BlockId(b)));
        SimResult {
            per_miner_mined: mined,
            fork_count: all.len() - final_chain.len(),
            final_chain,
            all_blocks: all,
            wall_events: 0,
            observer: 0,
            protocol_errors: 0,
            inconsistent_replicas: vec![],
            event_digest: 0,
            end_time: 0.0,
        }
    }

    #[test]
    fn single_miner_full_share() {
        let blocks: Vec<_> = (0..200).map(|i| (i, 0, i as f64 + 1.0)).collect();
        let chain: Vec<u32> = (1..=200).collect();
        let r =
            compute_rewards(&result(1, &blocks, &chain), &MinerSpec::synthetic(1), 100).unwrap();
        assert_eq!(r.rows[0].f_pct, 100.0);
        assert_eq!(r.rows[0].w_pct, 0.0);
        assert_eq!(r.retained_len, 100);
    }

    #[test]
    fn hand_counted_example() {
        // chain 1..=10; miner 0 mined 2,4,6,8 on chain and 11 off chain
        let mut blocks = Vec::new();
        for i in 1..=10u32 {
            let m = if i % 2 == 0 && i <= 8 { 0 } else { 1 };
            blocks.push((i - 1, m, i as f64));
        }
        blocks.push((4, 0, 5.5)); // id 11, a sibling of block 5
        let chain: Vec<u32> = (1..=10).collect();
        let r = compute_rewards(&result(2, &blocks, &chain), &MinerSpec::synthetic(2), 0).unwrap();
        assert!((r.rows[0].f_pct - 40.0).abs() < 1e-12);
        assert!((r.rows[0].w_pct - 20.0).abs() < 1e-12);
        let total: f64 = r.rows.iter().map(|x| x.f_pct).sum();
        assert!((total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn late_blocks_do_not_count_as_waste() {
        // block 3 is an unresolved tip sibling mined after the cutoff
        let blocks = [(0, 0, 1.0), (1, 0, 2.0), (1, 1, 3.0)];
        let r = compute_rewards(&result(2, &blocks, &[1, 2]), &MinerSpec::synthetic(2), 1).unwrap();
        assert_eq!(r.rows[1].w_pct, 0.0);
        assert_eq!(r.rows[1].blocks_mined, 1);
    }

    #[test]
    fn too_short_is_error() {
        let r = result(1, &[(0, 0, 1.0)], &[1]);
        assert!(matches!(
            compute_rewards(&r, &MinerSpec::synthetic(1), 1),
            Err(MetricsError::ChainTooShort { .. })
        ));
    }

    fn report(fs: &[f64]) -> RewardReport {
        RewardReport {
            rows: fs
                .iter()
                .enumerate()
                .map(|(i, &f)| RewardRow {
                    miner_id: i as u32,
                    city: format!("c{i}"),
                    continent: if i == 0 { Continent::EU } else { Continent::AS },
                    blocks_mined: 10.max((f * 10.0) as u64),
                    blocks_in_chain: (f * 10.0) as u64,
                    blocks_eligible: 10.max((f * 10.0) as u64),
                    f_pct: f,
                    w_pct: 0.0,
                })
                .collect(),
            retained_len: 1000,
            fair_pct: 100.0 / fs.len() as f64,
            fork_rate: 0.0,
        }
    }

    #[test]
    fn aggregate_means_and_ci() {
        let one = aggregate(&[report(&[0.4, 0.6])]).unwrap();
        assert_eq!(one.rows[0].f_mean, 0.4);
        assert_eq!(one.rows[0].f_ci95, 0.0);
        let two = aggregate(&[report(&[0.4, 0.6]), report(&[0.6, 0.4])]).unwrap();
        assert!((two.rows[0].f_mean - 0.5).abs() < 1e-12);
        assert!(two.rows[0].f_ci95 > 0.0);
        assert!(aggregate(&[report(&[1.0]), report(&[0.5, 0.5])]).is_err());
    }

    #[test]
    fn continent_gain_uniform_is_one() {
        let agg = aggregate(&[report(&[50.0, 50.0])]).unwrap();
        for s in continent_summary(&agg) {
            assert!((s.gain - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        report(&[0.4, 0.6]).write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("miner_id,city,continent,blocks_mined,blocks_in_chain,f_pct,w_pct\n"));
        assert!(s.contains("0,c0,EU,10,4,0.400000,0.000000"));
        let mut buf = Vec::new();
        aggregate(&[report(&[0.4, 0.6])])
            .unwrap()
            .write_csv(&mut buf)
            .unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s
            .lines()
            .next()
            .unwrap()
            .ends_with(",w_pct,f_mean,f_ci95,w_mean,w_ci95"));
    }
}
