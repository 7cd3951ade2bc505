use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::engine::SimConfig;
use crate::netmodel::{Selector, TopologyPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "defaults::mean_interblock")]
    pub mean_interblock: f64,
    #[serde(default = "defaults::validation_delay")]
    pub validation_delay: f64,
    #[serde(default = "defaults::target_chain_length")]
    pub target_chain_length: u32,
    #[serde(default = "defaults::discard_tail")]
    pub discard_tail: u32,
    #[serde(default)]
    pub hash_rates: Option<Vec<f64>>,
    /// Floor in ms for miners sharing a city.
    #[serde(default = "defaults::same_city_floor")]
    pub same_city_floor: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            mean_interblock: defaults::mean_interblock(),
            validation_delay: defaults::validation_delay(),
            target_chain_length: defaults::target_chain_length(),
            discard_tail: defaults::discard_tail(),
            hash_rates: None,
            same_city_floor: defaults::same_city_floor(),
        }
    }
}

mod defaults {
    pub fn mean_interblock() -> f64 {
        15_000.0
    }
    pub fn validation_delay() -> f64 {
        1.0
    }
    pub fn target_chain_length() -> u32 {
        20_000
    }
    pub fn discard_tail() -> u32 {
        100
    }
    pub fn same_city_floor() -> f64 {
        0.5
    }
    pub fn runs() -> usize {
        1
    }
    pub fn output_dir() -> std::path::PathBuf {
        "out".into()
    }
    pub fn topology() -> crate::netmodel::TopologyPolicy {
        crate::netmodel::TopologyPolicy::random(6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    /// Miner placement plus a city latency dataset.
    #[default]
    Dataset,
    /// `n` synthetic miners with one latency on every pair.
    Uniform,
    /// Miners `0..round(fraction * n)` form the dominant cluster; pairs
    /// inside a cluster get `eps`, pairs across get `delta`.
    TwoCluster,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    #[serde(default)]
    pub kind: NetworkKind,
    pub placement: Option<PathBuf>,
    pub latency: Option<PathBuf>,
    pub n: Option<usize>,
    /// Pairwise latency in ms for `uniform`.
    pub link_latency: Option<f64>,
    pub fraction: Option<f64>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegreeAxis {
    pub select: Selector,
    pub values: Vec<usize>,
}

/// Grid axes; the sweep visits their cartesian product.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub out_degree: Option<DegreeAxis>,
    pub fraction: Option<Vec<f64>>,
    pub delta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub network: NetworkSpec,
    #[serde(default = "defaults::topology")]
    pub topology: TopologyPolicy,
    #[serde(default = "defaults::runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
    pub sweep: Option<SweepSpec>,
}

fn invalid(path: &str, msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Invalid {
        path: path.into(),
        msg: msg.into(),
    }
}

impl ExperimentConfig {
    /// Parses TOML text. Relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ExperimentError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ExperimentError::Parse {
            path: String::new(),
            msg: e.to_string(),
        })?;
        let mut cfg: ExperimentConfig =
            serde_path_to_error::deserialize(de).map_err(|e| ExperimentError::Parse {
                path: e.path().to_string(),
                msg: e.inner().to_string(),
            })?;
        for p in [&mut cfg.network.placement, &mut cfg.network.latency]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let s = &self.sim;
        if !(s.mean_interblock > 0.0) {
            return Err(invalid("sim.mean_interblock", "must be positive"));
        }
        if !(s.validation_delay >= 0.0) {
            return Err(invalid("sim.validation_delay", "must be non-negative"));
        }
        if s.target_chain_length <= s.discard_tail {
            return Err(invalid(
                "sim.discard_tail",
                format!(
                    "must be below target_chain_length ({} >= {})",
                    s.discard_tail, s.target_chain_length
                ),
            ));
        }
        if !(s.same_city_floor >= 0.0) {
            return Err(invalid("sim.same_city_floor", "must be non-negative"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(invalid("seed", "must fit in a signed 64-bit integer"));
        }
        if self.runs == 0 {
            return Err(invalid("runs", "must be at least 1"));
        }
        let net = &self.network;
        let need = |field: &str, present: bool| -> Result<(), ExperimentError> {
            if present {
                Ok(())
            } else {
                Err(invalid(
                    &format!("network.{field}"),
                    format!("required for kind = {:?}", net.kind),
                ))
            }
        };
        match net.kind {
            NetworkKind::Dataset => {
                need("placement", net.placement.is_some())?;
                need("latency", net.latency.is_some())?;
                for (key, p) in [("placement", &net.placement), ("latency", &net.latency)] {
                    let p = p.as_ref().unwrap();
                    if !p.is_file() {
                        return Err(invalid(
                            &format!("network.{key}"),
                            format!("file {} does not exist", p.display()),
                        ));
                    }
                }
            }
            NetworkKind::Uniform => {
                need("n", net.n.is_some())?;
                need("link_latency", net.link_latency.is_some())?;
            }
            NetworkKind::TwoCluster => {
                need("n", net.n.is_some())?;
                need("fraction", net.fraction.is_some())?;
                need("eps", net.eps.is_some())?;
                need("delta", net.delta.is_some())?;
                let f = net.fraction.unwrap();
                if !(0.0..=1.0).contains(&f) {
                    return Err(invalid("network.fraction", "must be within [0, 1]"));
                }
            }
        }
        if let Some(n) = net.n {
            if n == 0 {
                return Err(invalid("network.n", "must be positive"));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.out_degree.is_none() && sw.fraction.is_none() && sw.delta.is_none() {
                return Err(invalid("sweep", "needs at least one axis"));
            }
            if let Some(a) = &sw.out_degree {
                if a.values.is_empty() {
                    return Err(invalid("sweep.out_degree.values", "must not be empty"));
                }
            }
            for (key, axis) in [("fraction", &sw.fraction), ("delta", &sw.delta)] {
                if let Some(v) = axis {
                    if v.is_empty() {
                        return Err(invalid(&format!("sweep.{key}"), "must not be empty"));
                    }
                    if net.kind != NetworkKind::TwoCluster {
                        return Err(invalid(
                            &format!("sweep.{key}"),
                            "only applies to network kind two_cluster",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Engine config for one run.
    pub fn sim_config(&self, n: usize, seed: u64) -> SimConfig {
        SimConfig {
            n,
            mean_interblock: self.sim.mean_interblock,
            hash_rates: self.sim.hash_rates.clone(),
            validation_delay: self.sim.validation_delay,
            target_chain_length: self.sim.target_chain_length,
            discard_tail: self.sim.discard_tail,
            seed,
        }
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ExperimentError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Invalid {
        path: path.display().to_string(),
        msg: format!("cannot read config: {e}"),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    ExperimentConfig::from_toml(&text, base)
}

/// SHA-256 of the effective config serialized with sorted keys, so field
/// and table order in the source file do not matter. The output directory
/// is left out and data files enter by content rather than by path.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String, ExperimentError> {
    use sha2::{Digest, Sha256};
    let mut c = cfg.clone();
    c.output_dir = PathBuf::new();
    for p in [&mut c.network.placement, &mut c.network.latency]
        .into_iter()
        .flatten()
    {
        let bytes = std::fs::read(&*p).map_err(|e| ExperimentError::Io {
            path: p.display().to_string(),
            source: e,
        })?;
        *p = PathBuf::from(format!("sha256:{}", hex::encode(Sha256::digest(&bytes))));
    }
    let ser = |e: toml::ser::Error| ExperimentError::Invalid {
        path: String::new(),
        msg: format!("config does not serialize: {e}"),
    };
    let table = toml::Table::try_from(&c).map_err(ser)?;
    let canonical = toml::to_string(&table).map_err(ser)?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
    }

    #[test]
    fn minimal_dataset_config_gets_defaults() {
        let text = "[network]\nplacement = \"placement.csv\"\nlatency = \"latency.csv\"\n";
        let cfg = ExperimentConfig::from_toml(text, &data_dir()).unwrap();
        assert_eq!(cfg.sim.mean_interblock, 15_000.0);
        assert_eq!(cfg.sim.validation_delay, 1.0);
        assert_eq!(cfg.sim.discard_tail, 100);
        assert_eq!(cfg.topology, TopologyPolicy::random(6));
        assert_eq!(cfg.runs, 1);
    }

    #[test]
    fn unknown_key_reports_path() {
        let text = "[sim]\nmean_interblok = 3.0\n";
        match ExperimentConfig::from_toml(text, Path::new(".")) {
            Err(ExperimentError::Parse { path, msg }) => {
                assert_eq!(path, "sim.mean_interblok");
                assert!(msg.contains("mean_interblok"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
        let text = "[sim]\ntarget_chain_length = \"long\"\n";
        match ExperimentConfig::from_toml(text, Path::new(".")) {
            Err(ExperimentError::Parse { path, .. }) => assert_eq!(path, "sim.target_chain_length"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn discard_must_be_below_target() {
        let text = "[sim]\ntarget_chain_length = 100\ndiscard_tail = 100\n[network]\nkind = \"uniform\"\nn = 3\nlink_latency = 1.0\n";
        assert!(matches!(
            ExperimentConfig::from_toml(text, Path::new(".")),
            Err(ExperimentError::Invalid { path, .. }) if path == "sim.discard_tail"
        ));
    }

    #[test]
    fn missing_network_fields_are_named() {
        let text = "[network]\nkind = \"two_cluster\"\nn = 10\neps = 1.0\ndelta = 5.0\n";
        assert!(matches!(
            ExperimentConfig::from_toml(text, Path::new(".")),
            Err(ExperimentError::Invalid { path, .. }) if path == "network.fraction"
        ));
    }

    #[test]
    fn hash_ignores_key_order() {
        let net = "[network]\nkind = \"uniform\"\nn = 4\nlink_latency = 2.0\n";
        let a = format!(
            "runs = 3\nseed = 1\n[sim]\nmean_interblock = 5.0\nvalidation_delay = 0.0\n{net}"
        );
        let b = format!(
            "seed = 1\nruns = 3\n{net}[sim]\nvalidation_delay = 0.0\nmean_interblock = 5.0\n"
        );
        let here = Path::new(".");
        let ha = config_hash(&ExperimentConfig::from_toml(&a, here).unwrap()).unwrap();
        let hb = config_hash(&ExperimentConfig::from_toml(&b, here).unwrap()).unwrap();
        assert_eq!(ha, hb);
        let c = a.replace("runs = 3", "runs = 4");
        assert_ne!(
            ha,
            config_hash(&ExperimentConfig::from_toml(&c, here).unwrap()).unwrap()
        );
    }
}
