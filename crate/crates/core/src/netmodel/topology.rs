use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Continent, MinerSpec, NetError};

/// Which miners a group or override applies to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Selector {
    /// Every miner not taken by an earlier group.
    All,
    /// Same as `All`; reads better as the last group.
    Rest,
    Continents(Vec<Continent>),
    Ids(Vec<u32>),
    /// `round(p * n)` miners drawn uniformly from those not yet assigned.
    Fraction(f64),
}

impl Selector {
    /// Miners matched on their own, ignoring group assignment. Fractions are
    /// random and rejected here.
    pub fn members(&self, miners: &[MinerSpec]) -> Result<Vec<u32>, NetError> {
        override_members(self, miners)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Intra {
    None,
    Complete,
    OutDegree(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LinkRule {
    /// Exactly `k` distinct cross pairs.
    Count(usize),
    /// Every member of `from` picks this many targets in `to`.
    OutDegree(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Target {
    /// Every miner outside the `from` group.
    Others,
    Group(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub name: String,
    pub select: Selector,
    pub intra: Intra,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterLink {
    pub from: String,
    pub to: Target,
    pub rule: LinkRule,
}

/// Replaces the out-degree of every matching miner in all `OutDegree` rules
/// it draws under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Override {
    pub select: Selector,
    pub out_degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyPolicy {
    pub groups: Vec<GroupSpec>,
    #[serde(default)]
    pub inter_links: Vec<InterLink>,
    #[serde(default)]
    pub overrides: Vec<Override>,
}

impl TopologyPolicy {
    /// One group with random out-degree `d`.
    pub fn random(d: usize) -> Self {
        TopologyPolicy {
            groups: vec![GroupSpec {
                name: "all".into(),
                select: Selector::All,
                intra: Intra::OutDegree(d),
            }],
            inter_links: vec![],
            overrides: vec![],
        }
    }

    pub fn complete() -> Self {
        TopologyPolicy {
            groups: vec![GroupSpec {
                name: "all".into(),
                select: Selector::All,
                intra: Intra::Complete,
            }],
            inter_links: vec![],
            overrides: vec![],
        }
    }

    /// Two complete groups joined by `bridges` random cross links.
    pub fn two_complete_clusters(first: Selector, bridges: usize) -> Self {
        TopologyPolicy {
            groups: vec![
                GroupSpec {
                    name: "dominant".into(),
                    select: first,
                    intra: Intra::Complete,
                },
                GroupSpec {
                    name: "rest".into(),
                    select: Selector::Rest,
                    intra: Intra::Complete,
                },
            ],
            inter_links: vec![InterLink {
                from: "dominant".into(),
                to: Target::Group("rest".into()),
                rule: LinkRule::Count(bridges),
            }],
            overrides: vec![],
        }
    }
}

/// Undirected overlay graph with sorted, deduplicated edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    edges: Vec<(u32, u32)>,
    adjacency: Vec<Vec<u32>>,
    groups: Vec<Vec<u32>>,
}

impl Topology {
    /// Builds from any edge list; self-loops are rejected, duplicates and
    /// orientation are normalized away.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self, NetError> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(NetError::Config(format!("self-loop at miner {u}")));
            }
            if u as usize >= n || v as usize >= n {
                return Err(NetError::Config(format!("edge ({u},{v}) outside 0..{n}")));
            }
            set.insert((u.min(v), u.max(v)));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u as usize].push(v);
            adjacency[v as usize].push(u);
        }
        for a in &mut adjacency {
            a.sort_unstable();
        }
        Ok(Topology {
            n,
            edges,
            adjacency,
            groups: vec![(0..n as u32).collect()],
        })
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n as u32).flat_map(|u| ((u + 1)..n as u32).map(move |v| (u, v)));
        Self::from_edges(n, edges).expect("valid complete graph")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adjacency[v as usize]
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adjacency[v as usize].len()
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adjacency[u as usize].binary_search(&v).is_ok()
    }

    /// Group membership resolved by the policy, in policy order.
    pub fn groups(&self) -> &[Vec<u32>] {
        &self.groups
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<u32>> {
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s as u32];
            let mut i = 0;
            while i < comp.len() {
                for &w in &self.adjacency[comp[i] as usize] {
                    if !seen[w as usize] {
                        seen[w as usize] = true;
                        comp.push(w);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Errors with the smallest component not containing miner 0.
    pub fn check_connected(&self) -> Result<(), NetError> {
        let comps = self.components();
        match comps.get(1) {
            None => Ok(()),
            Some(c) => Err(NetError::Disconnected(c.clone())),
        }
    }
}

const SELECTION_STREAM: u64 = 0;

fn sub_rng(seed: u64, rule: u64, member: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((rule << 32) | member);
    rng
}

fn resolve_selector(
    sel: &Selector,
    miners: &[MinerSpec],
    available: &BTreeSet<u32>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<u32>, NetError> {
    Ok(match sel {
        Selector::All | Selector::Rest => available.iter().copied().collect(),
        Selector::Continents(cs) => available
            .iter()
            .copied()
            .filter(|&m| cs.contains(&miners[m as usize].continent))
            .collect(),
        Selector::Ids(ids) => {
            let mut out = ids.clone();
            out.sort_unstable();
            out.dedup();
            if let Some(&bad) = out.iter().find(|id| !available.contains(id)) {
                return Err(NetError::Config(format!(
                    "miner {bad} is out of range or already in another group"
                )));
            }
            out
        }
        Selector::Fraction(p) => {
            if !(0.0..=1.0).contains(p) {
                return Err(NetError::Config(format!("fraction {p} outside [0, 1]")));
            }
            let k = (p * miners.len() as f64).round() as usize;
            let mut pool: Vec<u32> = available.iter().copied().collect();
            if k > pool.len() {
                return Err(NetError::Config(format!(
                    "fraction {p} needs {k} miners but only {} remain",
                    pool.len()
                )));
            }
            pool.shuffle(rng);
            pool.truncate(k);
            pool.sort_unstable();
            pool
        }
    })
}

/// Miners matched by an override selector; fractions are not meaningful here.
fn override_members(sel: &Selector, miners: &[MinerSpec]) -> Result<Vec<u32>, NetError> {
    match sel {
        Selector::All | Selector::Rest => Ok((0..miners.len() as u32).collect()),
        Selector::Continents(cs) => Ok(miners
            .iter()
            .filter(|m| cs.contains(&m.continent))
            .map(|m| m.miner_id)
            .collect()),
        Selector::Ids(ids) => {
            if let Some(bad) = ids.iter().find(|&&i| i as usize >= miners.len()) {
                return Err(NetError::Config(format!(
                    "override names unknown miner {bad}"
                )));
            }
            Ok(ids.clone())
        }
        Selector::Fraction(_) => Err(NetError::Config(
            "overrides cannot select a random fraction".into(),
        )),
    }
}

/// Builds the overlay. Each random pick is drawn from a sub-stream keyed by
/// (rule, member), so changing one member's degree leaves every other
/// member's picks untouched, and a larger degree extends a smaller one.
pub fn build_topology(
    policy: &TopologyPolicy,
    miners: &[MinerSpec],
    seed: u64,
) -> Result<Topology, NetError> {
    let n = miners.len();
    if policy.groups.is_empty() {
        return Err(NetError::Config("policy has no groups".into()));
    }

    let mut available: BTreeSet<u32> = (0..n as u32).collect();
    let mut groups: Vec<Vec<u32>> = Vec::new();
    let mut by_name: HashMap<&str, usize> = HashMap::new();
    let mut sel_rng = sub_rng(seed, SELECTION_STREAM, 0);
    for g in &policy.groups {
        if by_name.insert(&g.name, groups.len()).is_some() {
            return Err(NetError::Config(format!(
                "duplicate group name `{}`",
                g.name
            )));
        }
        let members = resolve_selector(&g.select, miners, &available, &mut sel_rng)?;
        for m in &members {
            available.remove(m);
        }
        groups.push(members);
    }
    if let Some(&m) = available.iter().next() {
        return Err(NetError::Config(format!(
            "groups do not cover every miner ({} unassigned, first is {m})",
            available.len()
        )));
    }

    let mut degree_override: Vec<Option<usize>> = vec![None; n];
    for o in &policy.overrides {
        for m in override_members(&o.select, miners)? {
            degree_override[m as usize] = Some(o.out_degree);
        }
    }

    let mut edges: Vec<(u32, u32)> = Vec::new();
    let draw =
        |edges: &mut Vec<(u32, u32)>, rule: u64, members: &[u32], targets: &[u32], d: usize| {
            draw_out(edges, seed, &degree_override, rule, members, targets, d)
        };

    for (gi, (spec, members)) in policy.groups.iter().zip(&groups).enumerate() {
        let rule = 1 + gi as u64;
        match spec.intra {
            Intra::None => {}
            Intra::Complete => {
                for (i, &u) in members.iter().enumerate() {
                    for &v in &members[i + 1..] {
                        edges.push((u, v));
                    }
                }
            }
            Intra::OutDegree(d) => draw(&mut edges, rule, members, members, d)?,
        }
    }

    let mut count_pairs: Vec<(u32, u32)> = Vec::new();
    for (li, link) in policy.inter_links.iter().enumerate() {
        let rule = 1_000 + li as u64;
        let gi = *by_name
            .get(link.from.as_str())
            .ok_or_else(|| NetError::Config(format!("unknown group `{}`", link.from)))?;
        let from = &groups[gi];
        let to: Vec<u32> = match &link.to {
            Target::Others => (0..n as u32)
                .filter(|v| from.binary_search(v).is_err())
                .collect(),
            Target::Group(name) => {
                let gj = *by_name
                    .get(name.as_str())
                    .ok_or_else(|| NetError::Config(format!("unknown group `{name}`")))?;
                if gj == gi {
                    return Err(NetError::Config(format!(
                        "inter link from `{name}` to itself; use intra instead"
                    )));
                }
                groups[gj].clone()
            }
        };
        match link.rule {
            LinkRule::OutDegree(d) => draw(&mut edges, rule, from, &to, d)?,
            LinkRule::Count(k) => {
                let total = from.len() * to.len();
                if k > total {
                    return Err(NetError::Config(format!(
                        "{k} links requested between groups with only {total} possible pairs"
                    )));
                }
                let mut pairs: Vec<(u32, u32)> = from
                    .iter()
                    .flat_map(|&u| to.iter().map(move |&v| (u, v)))
                    .collect();
                let mut rng = sub_rng(seed, rule, 0);
                let (chosen, _) = pairs.partial_shuffle(&mut rng, k);
                count_pairs.extend_from_slice(chosen);
            }
        }
    }
    edges.extend(count_pairs);

    let mut topo = Topology::from_edges(n, edges)?;
    topo.groups = groups;
    Ok(topo)
}

fn draw_out(
    edges: &mut Vec<(u32, u32)>,
    seed: u64,
    degree_override: &[Option<usize>],
    rule: u64,
    members: &[u32],
    targets: &[u32],
    d: usize,
) -> Result<(), NetError> {
    for &m in members {
        let d = degree_override[m as usize].unwrap_or(d);
        let mut pool: Vec<u32> = targets.iter().copied().filter(|&t| t != m).collect();
        if d >= pool.len() {
            return Err(NetError::Config(format!(
                "out-degree {d} for miner {m} is not below its {} eligible targets",
                pool.len()
            )));
        }
        let mut rng = sub_rng(seed, rule, m as u64);
        pool.shuffle(&mut rng);
        edges.extend(pool[..d].iter().map(|&t| (m, t)));
    }
    Ok(())
}
