//! Overlay construction from policies, and the block-delivery latencies they
//! induce on the world dataset.

use std::path::Path;

use topomine::netmodel::{
    build_topology, delta_matrix, load_latency_csv, load_placement_csv, Continent, Selector,
    TopologyPolicy,
};

const BRIDGED: &str = r#"
[[groups]]
name = "dominant"
select = { continents = ["EU", "NA"] }
intra = "complete"

[[groups]]
name = "rest"
select = "rest"
intra = { out_degree = 6 }

[[inter_links]]
from = "dominant"
to = { group = "rest" }
rule = { count = 20 }
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let miners = load_placement_csv(data.join("placement.csv"))?;
    let lat = load_latency_csv(data.join("latency.csv"))?.miner_matrix(&miners, 0.5)?;

    let policies = [
        ("random-6", TopologyPolicy::random(6)),
        ("complete", TopologyPolicy::complete()),
        (
            "two complete clusters, 20 bridges",
            TopologyPolicy::two_complete_clusters(
                Selector::Continents(vec![Continent::EU, Continent::NA]),
                20,
            ),
        ),
        ("EU+NA complete, rest random-6", toml::from_str(BRIDGED)?),
    ];
    for (name, policy) in policies {
        let topo = build_topology(&policy, &miners, 42)?;
        let delta = delta_matrix(&topo, &lat, 1.0)?;
        let n = miners.len();
        let mut pairs: Vec<f64> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .map(|(u, v)| delta.get(u, v))
            .collect();
        pairs.sort_by(f64::total_cmp);
        println!(
            "{name}: {} edges, delivery median {:.1} ms, max {:.1} ms",
            topo.edge_count(),
            pairs[pairs.len() / 2],
            delta.max()
        );
    }
    Ok(())
}
