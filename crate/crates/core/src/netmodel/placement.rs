use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Continent {
    EU,
    NA,
    AS,
    SA,
    AF,
    AU,
}

impl Continent {
    pub const ALL: [Continent; 6] = [
        Continent::EU,
        Continent::NA,
        Continent::AS,
        Continent::SA,
        Continent::AF,
        Continent::AU,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Continent::EU => "EU",
            Continent::NA => "NA",
            Continent::AS => "AS",
            Continent::SA => "SA",
            Continent::AF => "AF",
            Continent::AU => "AU",
        }
    }
}

impl std::str::FromStr for Continent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Continent::ALL
            .into_iter()
            .find(|c| c.code() == s)
            .ok_or_else(|| format!("unknown continent code `{s}`"))
    }
}

impl std::fmt::Display for Continent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinerSpec {
    pub miner_id: u32,
    pub city: String,
    pub continent: Continent,
}

impl MinerSpec {
    /// Placeholder placement for synthetic networks with no geography.
    pub fn synthetic(n: usize) -> Vec<MinerSpec> {
        (0..n as u32)
            .map(|i| MinerSpec {
                miner_id: i,
                city: format!("node{i}"),
                continent: Continent::EU,
            })
            .collect()
    }
}

/// Reads `miner_id,city,continent`. Ids must be exactly `0..n` (any order);
/// the result is sorted by id.
pub fn load_placement_csv(path: impl AsRef<Path>) -> Result<Vec<MinerSpec>, NetError> {
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
        .clone();
    let expected = "miner_id,city,continent";
    if headers.iter().collect::<Vec<_>>().join(",") != expected {
        return Err(NetError::Header {
            path: p,
            expected: expected.into(),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut miners = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| NetError::Csv {
            path: p.clone(),
            source,
        })?;
        let line = rec.position().map(|pos| pos.line()).unwrap_or(0);
        let parse_err = |msg: String| NetError::Parse {
            path: p.clone(),
            line,
            msg,
        };
        let miner_id: u32 = rec[0]
            .parse()
            .map_err(|e| parse_err(format!("bad miner_id `{}`: {e}", &rec[0])))?;
        let continent: Continent = rec[2].parse().map_err(parse_err)?;
        miners.push(MinerSpec {
            miner_id,
            city: rec[1].to_string(),
            continent,
        });
    }
    miners.sort_by_key(|m| m.miner_id);
    for (i, m) in miners.iter().enumerate() {
        if m.miner_id as usize != i {
            return Err(NetError::Parse {
                path: p,
                line: 0,
                msg: format!(
                    "miner ids must be 0..{} without gaps or repeats",
                    miners.len()
                ),
            });
        }
    }
    Ok(miners)
}
