use super::{RoundTrace, TheoryError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    OneRun,
    TwoRun,
    Fork,
}

/// A maximal span of rounds, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase {
    pub kind: PhaseKind,
    pub start: u64,
    pub end: u64,
    /// Cluster (1 or 2) whose blocks survive; `None` for a fork still open
    /// when the trace ends.
    pub winner: Option<u8>,
}

fn run_kind(c: u8) -> PhaseKind {
    if c == 1 {
        PhaseKind::OneRun
    } else {
        PhaseKind::TwoRun
    }
}

/// Splits a cluster sequence (`seq[0]` is round 1, values 1 or 2) into
/// phases.
///
/// A run lasts until the round before the first cluster switch. A fork then
/// consumes aligned pairs of rounds while the two rounds of a pair come from
/// different clusters; the first same-cluster pair ends it, names the winner
/// and starts the next run.
pub fn phases_from_sequence(seq: &[u8]) -> Vec<Phase> {
    let len = seq.len();
    let c = |r: usize| seq[r - 1];
    let mut out = Vec::new();
    let mut r = 1usize;
    let mut in_fork = len >= 2 && c(1) != c(2);
    while r <= len {
        if in_fork {
            let start = r;
            while r + 1 <= len && c(r) != c(r + 1) {
                r += 2;
            }
            // r is the first round not consumed by opposing pairs
            let winner = if r + 1 <= len { Some(c(r)) } else { None };
            let end = if winner.is_some() { r - 1 } else { len };
            out.push(Phase {
                kind: PhaseKind::Fork,
                start: start as u64,
                end: end as u64,
                winner,
            });
            if winner.is_none() {
                break;
            }
            in_fork = false;
        } else {
            let start = r;
            // the run's first pair is same-cluster, so it has length >= 1
            let mut t = r;
            while t + 1 <= len && c(t) == c(t + 1) {
                t += 1;
            }
            if t == len {
                out.push(Phase {
                    kind: run_kind(c(start)),
                    start: start as u64,
                    end: len as u64,
                    winner: Some(c(start)),
                });
                break;
            }
            // switch between t and t + 1: fork starts at t
            if t > start {
                out.push(Phase {
                    kind: run_kind(c(start)),
                    start: start as u64,
                    end: (t - 1) as u64,
                    winner: Some(c(start)),
                });
            }
            r = t;
            in_fork = true;
        }
    }
    out
}

/// Classifies a two-cluster oracle trace and checks each fork against the
/// two-branch structure: both blocks of a pair share a height, each branch
/// extends its own cluster's previous block, and exactly the winner's blocks
/// reach the final chain.
pub fn classify_phases(trace: &RoundTrace, cluster: &[u8]) -> Result<Vec<Phase>, TheoryError> {
    if cluster.len() != trace.n || cluster.iter().any(|&c| c != 1 && c != 2) {
        return Err(TheoryError::Domain(
            "cluster labels must be 1 or 2 for every miner".into(),
        ));
    }
    let rounds = trace.rounds() as usize;
    let seq: Vec<u8> = (1..=rounds)
        .map(|r| cluster[trace.miner[r] as usize])
        .collect();
    let phases = phases_from_sequence(&seq);
    let err = |round: usize, msg: String| TheoryError::Phase {
        round: round as u64,
        msg,
    };

    let mut covered = 0u64;
    let mut chain_tip = 0usize;
    for ph in &phases {
        if ph.start != covered + 1 {
            return Err(err(
                ph.start as usize,
                "phases do not tile the trace".into(),
            ));
        }
        covered = ph.end;
        let (s, e) = (ph.start as usize, ph.end as usize);
        match (ph.kind, ph.winner) {
            (PhaseKind::Fork, winner) => {
                let base = chain_tip;
                let mut prev = [base, base];
                for k in (s..=e).step_by(2) {
                    if k + 1 > e {
                        break;
                    }
                    let pair = [k, k + 1];
                    if trace.height[k] != trace.height[k + 1] {
                        return Err(err(k, "fork pair at different heights".into()));
                    }
                    for &b in &pair {
                        let side = (seq[b - 1] - 1) as usize;
                        if trace.parent[b] as usize != prev[side] {
                            return Err(err(
                                b,
                                format!(
                                    "block extends {} instead of its branch head {}; a third fork",
                                    trace.parent[b], prev[side]
                                ),
                            ));
                        }
                    }
                    for &b in &pair {
                        prev[(seq[b - 1] - 1) as usize] = b;
                    }
                    if let Some(w) = winner {
                        for &b in &pair {
                            let expect = seq[b - 1] == w;
                            if trace.in_chain[b] != expect {
                                return Err(err(
                                    b,
                                    "final chain disagrees with the fork winner".into(),
                                ));
                            }
                        }
                    }
                }
                if let Some(w) = winner {
                    chain_tip = prev[(w - 1) as usize];
                }
            }
            (_, _) => {
                for b in s..=e {
                    if trace.parent[b] as usize != chain_tip {
                        return Err(err(b, "run block does not extend the chain".into()));
                    }
                    chain_tip = b;
                }
            }
        }
    }
    if covered as usize != rounds {
        return Err(err(covered as usize + 1, "rounds left unclassified".into()));
    }

    // Winner blocks of resolved phases must be exactly the final chain there.
    let resolved_end = phases
        .iter()
        .take_while(|p| p.winner.is_some())
        .last()
        .map_or(0, |p| p.end as usize);
    let mut rebuilt = Vec::new();
    for ph in phases.iter().take_while(|p| p.winner.is_some()) {
        let w = ph.winner.unwrap();
        rebuilt.extend((ph.start as usize..=ph.end as usize).filter(|&b| seq[b - 1] == w));
    }
    let chain: Vec<usize> = (1..=resolved_end).filter(|&b| trace.in_chain[b]).collect();
    if rebuilt != chain {
        let at = rebuilt
            .iter()
            .zip(&chain)
            .find(|(a, b)| a != b)
            .map_or(rebuilt.len().min(chain.len()), |(a, _)| *a);
        return Err(err(at, "winner blocks differ from the final chain".into()));
    }
    Ok(phases)
}
