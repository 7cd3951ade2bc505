use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};

use super::{LatencyMatrix, NetError, Topology};

/// Minimum block-delivery times over the overlay. Each hop costs the link
/// latency plus the receiver's validation delay.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DeltaMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for u in 0..n {
            for v in 0..n {
                if u != v {
                    data[u * n + v] = f(u, v);
                }
            }
        }
        DeltaMatrix { n, data }
    }

    /// Clusters labelled by `cluster[v]`: `eps` inside a cluster, `delta`
    /// across. Values are in whatever unit the caller uses (rounds for the
    /// oracle).
    pub fn clustered(cluster: &[u8], eps: f64, delta: f64) -> Self {
        Self::from_fn(cluster.len(), |u, v| {
            if cluster[u] == cluster[v] {
                eps
            } else {
                delta
            }
        })
    }

    pub fn uniform(n: usize, d: f64) -> Self {
        Self::from_fn(n, |_, _| d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[u * self.n + v]
    }

    pub fn row(&self, u: usize) -> &[f64] {
        &self.data[u * self.n..(u + 1) * self.n]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Every entry multiplied by `factor`, e.g. to convert milliseconds into
    /// rounds.
    pub fn scaled(&self, factor: f64) -> Self {
        DeltaMatrix {
            n: self.n,
            data: self.data.iter().map(|d| d * factor).collect(),
        }
    }
}

pub fn delta_matrix(
    topology: &Topology,
    latency: &LatencyMatrix,
    validation_delay: f64,
) -> Result<DeltaMatrix, NetError> {
    let n = topology.n();
    if latency.n() != n {
        return Err(NetError::SizeMismatch {
            latency: latency.n(),
            topology: n,
        });
    }
    topology.check_connected()?;

    let mut g = UnGraph::<(), f64>::with_capacity(n, topology.edge_count());
    for _ in 0..n {
        g.add_node(());
    }
    for &(u, v) in topology.edges() {
        let w = latency.get(u as usize, v as usize) + validation_delay;
        g.add_edge(NodeIndex::new(u as usize), NodeIndex::new(v as usize), w);
    }

    let mut data = vec![0.0; n * n];
    for u in 0..n {
        let dist = dijkstra(&g, NodeIndex::new(u), None, |e| *e.weight());
        for (node, d) in dist {
            data[u * n + node.index()] = d;
        }
        data[u * n + u] = 0.0;
    }
    // Floating-point sums along reversed paths can differ in the last bit.
    for u in 0..n {
        for v in (u + 1)..n {
            let m = data[u * n + v].min(data[v * n + u]);
            data[u * n + v] = m;
            data[v * n + u] = m;
        }
    }
    Ok(DeltaMatrix { n, data })
}
