use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::{MinerSpec, NetError};

/// Symmetric `n x n` propagation delays in milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyMatrix {
    n: usize,
    data: Vec<f64>,
}

impl LatencyMatrix {
    /// Builds a matrix from a generator; the generator is only called for
    /// `u < v` and the result mirrored.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for u in 0..n {
            for v in (u + 1)..n {
                let d = f(u, v);
                assert!(d.is_finite() && d >= 0.0, "latency ({u},{v}) = {d}");
                data[u * n + v] = d;
                data[v * n + u] = d;
            }
        }
        LatencyMatrix { n, data }
    }

    pub fn uniform(n: usize, latency: f64) -> Self {
        Self::from_fn(n, |_, _| latency)
    }

    /// Two groups: `cluster[v]` labels each miner. Same-label pairs get
    /// `intra`, other pairs `inter`.
    pub fn clustered(cluster: &[u8], intra: f64, inter: f64) -> Self {
        Self::from_fn(cluster.len(), |u, v| {
            if cluster[u] == cluster[v] {
                intra
            } else {
                inter
            }
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[u * self.n + v]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// City-keyed one-way delays (half the measured round trip).
#[derive(Debug, Clone)]
pub struct CityLatency {
    one_way: HashMap<(String, String), f64>,
    cities: BTreeMap<String, ()>,
}

impl CityLatency {
    pub fn cities(&self) -> impl Iterator<Item = &str> {
        self.cities.keys().map(String::as_str)
    }

    pub fn has_city(&self, city: &str) -> bool {
        self.cities.contains_key(city)
    }

    /// One-way delay between two cities; `Some(0.0)` for the same city.
    pub fn delay(&self, a: &str, b: &str) -> Option<f64> {
        if a == b {
            return Some(0.0);
        }
        self.one_way.get(&key(a, b)).copied()
    }

    /// Per-miner matrix. Same-city pairs (delay 0 in the dataset) are raised
    /// to `same_city_floor` ms.
    pub fn miner_matrix(
        &self,
        miners: &[MinerSpec],
        same_city_floor: f64,
    ) -> Result<LatencyMatrix, NetError> {
        let mut missing = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, a) in miners.iter().enumerate() {
            for b in &miners[i + 1..] {
                if self.delay(&a.city, &b.city).is_none() && seen.insert(key(&a.city, &b.city)) {
                    missing.push(key(&a.city, &b.city));
                }
            }
        }
        if !missing.is_empty() {
            missing.sort();
            return Err(NetError::MissingPairs(missing));
        }
        Ok(LatencyMatrix::from_fn(miners.len(), |u, v| {
            let d = self.delay(&miners[u].city, &miners[v].city).unwrap();
            d.max(same_city_floor)
        }))
    }
}

fn key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Reads `source,destination,avg_rtt_ms`. Delay is half the RTT; when both
/// directions of a pair are present their delays are averaged.
pub fn load_latency_csv(path: impl AsRef<Path>) -> Result<CityLatency, NetError> {
    let path = path.as_ref();
    let p = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| NetError::Csv {
            path: p.clone(),
            source,
        })?;
    let headers = rdr
        .headers()
        .map_err(|source| NetError::Csv {
            path: p.clone(),
            source,
        })?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    let expected = "source,destination,avg_rtt_ms";
    if headers != expected {
        return Err(NetError::Header {
            path: p,
            expected: expected.into(),
            found: headers,
        });
    }

    // (sum of one-way delays, number of directed observations)
    let mut acc: HashMap<(String, String), (f64, u32)> = HashMap::new();
    let mut directed = std::collections::HashSet::new();
    let mut cities = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| NetError::Csv {
            path: p.clone(),
            source,
        })?;
        let line = rec.position().map(|pos| pos.line()).unwrap_or(0);
        let (src, dst) = (&rec[0], &rec[1]);
        let rtt: f64 = rec[2].parse().map_err(|e| NetError::Parse {
            path: p.clone(),
            line,
            msg: format!("bad avg_rtt_ms `{}`: {e}", &rec[2]),
        })?;
        if !rtt.is_finite() || rtt < 0.0 {
            return Err(NetError::Parse {
                path: p,
                line,
                msg: format!("avg_rtt_ms must be finite and non-negative, got {rtt}"),
            });
        }
        cities.insert(src.to_string(), ());
        cities.insert(dst.to_string(), ());
        if src == dst {
            continue;
        }
        if !directed.insert((src.to_string(), dst.to_string())) {
            return Err(NetError::Parse {
                path: p,
                line,
                msg: format!("duplicate row for {src} -> {dst}"),
            });
        }
        let e = acc.entry(key(src, dst)).or_insert((0.0, 0));
        e.0 += rtt / 2.0;
        e.1 += 1;
    }
    let one_way = acc
        .into_iter()
        .map(|(k, (sum, cnt))| (k, sum / cnt as f64))
        .collect();
    Ok(CityLatency { one_way, cities })
}
