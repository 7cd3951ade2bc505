use std::collections::HashMap;
use std::hash::Hasher;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use super::kernel::{EventKind, EventQueue, Message};
use super::{EngineError, SimConfig, SimResult};
use crate::chain::{Block, BlockId, BlockTree, InsertOutcome, MinerId};
use crate::netmodel::{LatencyMatrix, Topology};

#[derive(Debug, Clone)]
pub struct MinerState {
    pub id: MinerId,
    pub tree: BlockTree,
    pub neighbors: Vec<MinerId>,
    pub timer_deadline: Option<f64>,
    timer_generation: u32,
    rate: f64,
    rng: ChaCha8Rng,
    /// Who sent each block currently held as an orphan.
    orphan_sender: HashMap<BlockId, MinerId>,
}

/// One run's mutable state: miners, the global block arena and the queue.
pub struct Simulation<'a> {
    config: &'a SimConfig,
    latency: &'a LatencyMatrix,
    pub miners: Vec<MinerState>,
    pub blocks: Vec<Block>,
    pub queue: EventQueue,
    per_miner_mined: Vec<u32>,
    stop_at: Option<f64>,
    drain_window: f64,
    protocol_errors: u64,
    wall_events: u64,
    digest: std::collections::hash_map::DefaultHasher,
    now: f64,
}

impl<'a> Simulation<'a> {
    /// Sets up miners with the given generator streams and starts every
    /// mining timer.
    pub fn new(
        config: &'a SimConfig,
        topology: &Topology,
        latency: &'a LatencyMatrix,
        streams: &[u64],
    ) -> Result<Self, EngineError> {
        config.validate()?;
        if topology.n() != config.n || latency.n() != config.n {
            return Err(EngineError::Config(format!(
                "config has {} miners, topology {}, latency matrix {}",
                config.n,
                topology.n(),
                latency.n()
            )));
        }
        topology.check_connected()?;
        for &(u, v) in topology.edges() {
            let l = latency.get(u as usize, v as usize);
            if !(l.is_finite() && l >= 0.0) {
                return Err(EngineError::Config(format!(
                    "no latency for link ({u},{v})"
                )));
            }
        }
        let rates = config.rates();
        let miners = (0..config.n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(streams[i]);
                MinerState {
                    id: i as MinerId,
                    tree: BlockTree::new(),
                    neighbors: topology.neighbors(i as u32).to_vec(),
                    timer_deadline: None,
                    timer_generation: 0,
                    rate: rates[i],
                    rng,
                    orphan_sender: HashMap::new(),
                }
            })
            .collect();
        let max_link = topology
            .edges()
            .iter()
            .map(|&(u, v)| latency.get(u as usize, v as usize))
            .fold(0.0, f64::max);
        let mut sim = Simulation {
            config,
            latency,
            miners,
            blocks: vec![Block::genesis()],
            queue: EventQueue::new(),
            per_miner_mined: vec![0; config.n],
            stop_at: None,
            drain_window: max_link + config.validation_delay,
            protocol_errors: 0,
            wall_events: 0,
            digest: Default::default(),
            now: 0.0,
        };
        for m in 0..config.n as MinerId {
            sim.reset_timer(m, 0.0);
        }
        Ok(sim)
    }

    fn reset_timer(&mut self, m: MinerId, from: f64) {
        let st = &mut self.miners[m as usize];
        let x: f64 = st.rng.sample(Exp1);
        let deadline = from + x / st.rate;
        st.timer_generation = st.timer_generation.wrapping_add(1);
        st.timer_deadline = Some(deadline);
        let generation = st.timer_generation;
        self.queue.schedule(
            deadline,
            EventKind::TimerExpiry {
                miner: m,
                generation,
            },
        );
    }

    fn send(&mut self, from: MinerId, to: MinerId, at: f64, message: Message) {
        let mut t = at + self.latency.get(from as usize, to as usize);
        if !matches!(message, Message::Require(_)) {
            t += self.config.validation_delay;
        }
        self.queue.schedule(
            t,
            EventKind::Arrival {
                sender: from,
                receiver: to,
                message,
            },
        );
    }

    fn broadcast(&mut self, from: MinerId, block: BlockId, except: Option<MinerId>, at: f64) {
        for i in 0..self.miners[from as usize].neighbors.len() {
            let to = self.miners[from as usize].neighbors[i];
            if Some(to) != except {
                self.send(from, to, at, Message::BlockMsg(block));
            }
        }
    }

    /// Mines a block on the current tip and floods it.
    pub fn on_timer_expiry(&mut self, m: MinerId, now: f64) -> Result<(), EngineError> {
        let id = BlockId(self.blocks.len() as u32);
        let st = &mut self.miners[m as usize];
        st.timer_deadline = None;
        let block = Block::new(id, st.tree.tip(), m, now);
        st.tree
            .insert_block(block, now)
            .map_err(|source| EngineError::Chain { miner: m, source })?;
        let height = st.tree.tip_height();
        self.blocks.push(block);
        self.per_miner_mined[m as usize] += 1;
        self.broadcast(m, id, None, now);
        self.reset_timer(m, now);
        if height >= self.config.target_chain_length && self.stop_at.is_none() {
            self.stop_at = Some(now + self.drain_window);
        }
        Ok(())
    }

    /// Handles a block delivered by `sender`, whether flooded or requested.
    /// `now` is the time validation completed.
    pub fn on_block_message(
        &mut self,
        m: MinerId,
        id: BlockId,
        sender: MinerId,
        now: f64,
    ) -> Result<(), EngineError> {
        let block = self.blocks[id.index()];
        let st = &mut self.miners[m as usize];
        let before = st.tree.tip();
        let outcome = st
            .tree
            .insert_block(block, now)
            .map_err(|source| EngineError::Chain { miner: m, source })?;
        match outcome {
            InsertOutcome::Duplicate => Ok(()),
            InsertOutcome::Orphan(missing) => {
                st.orphan_sender.insert(id, sender);
                self.send(m, sender, now, Message::Require(missing));
                Ok(())
            }
            InsertOutcome::ExtendedTip | InsertOutcome::SideBlock => {
                let promoted: Vec<BlockId> = st.tree.last_promoted().to_vec();
                let senders: Vec<Option<MinerId>> = promoted
                    .iter()
                    .map(|b| st.orphan_sender.remove(b))
                    .collect();
                let after = st.tree.tip();
                if after == before {
                    return Ok(());
                }
                // New blocks that lie on the path to the new tip, by height.
                let mut fresh: Vec<(u32, BlockId, Option<MinerId>)> = Vec::new();
                let candidates = std::iter::once((id, Some(sender)))
                    .chain(promoted.iter().copied().zip(senders));
                let lowest = st.tree.get(id).map(|e| e.height).unwrap_or(0);
                let mut on_path = std::collections::HashSet::new();
                let mut cur = Some(after);
                while let Some(c) = cur {
                    let e = st.tree.get(c).expect("tip path is stored");
                    if e.height < lowest {
                        break;
                    }
                    on_path.insert(c);
                    cur = e.block.parent;
                }
                for (b, s) in candidates {
                    if on_path.contains(&b) {
                        fresh.push((st.tree.get(b).unwrap().height, b, s));
                    }
                }
                fresh.sort_by_key(|&(h, b, _)| (h, b));
                self.reset_timer(m, now);
                for (_, b, s) in fresh {
                    self.broadcast(m, b, s, now);
                }
                Ok(())
            }
        }
    }

    /// Answers with the requested block, or counts a protocol error when
    /// this miner never saw it.
    pub fn on_require(&mut self, m: MinerId, id: BlockId, sender: MinerId, now: f64) {
        if self.miners[m as usize].tree.find_block(id).is_some() {
            self.send(
                m,
                sender,
                now + self.config.validation_delay,
                Message::Response(id),
            );
        } else {
            self.protocol_errors += 1;
        }
    }

    pub fn on_response(
        &mut self,
        m: MinerId,
        id: BlockId,
        sender: MinerId,
        now: f64,
    ) -> Result<(), EngineError> {
        self.on_block_message(m, id, sender, now)
    }

    /// Processes one event; returns `false` once the run is over.
    pub fn step(&mut self) -> Result<bool, EngineError> {
        let Some(ev) = self.queue.pop() else {
            return Ok(false);
        };
        if let Some(stop) = self.stop_at {
            if ev.time > stop {
                return Ok(false);
            }
        }
        match ev.kind {
            EventKind::TimerExpiry { miner, generation } => {
                let st = &self.miners[miner as usize];
                if generation != st.timer_generation || self.stop_at.is_some() {
                    return Ok(true);
                }
                self.record(ev.time, 0, miner, 0);
                self.on_timer_expiry(miner, ev.time)?;
            }
            EventKind::Arrival {
                sender,
                receiver,
                message,
            } => {
                let (tag, b) = match message {
                    Message::BlockMsg(b) => (1, b),
                    Message::Require(b) => (2, b),
                    Message::Response(b) => (3, b),
                };
                self.record(ev.time, tag, receiver, b.0);
                match message {
                    Message::BlockMsg(b) => self.on_block_message(receiver, b, sender, ev.time)?,
                    Message::Require(b) => self.on_require(receiver, b, sender, ev.time),
                    Message::Response(b) => self.on_response(receiver, b, sender, ev.time)?,
                }
            }
        }
        Ok(true)
    }

    fn record(&mut self, time: f64, tag: u8, miner: MinerId, block: u32) {
        self.now = time;
        self.wall_events += 1;
        self.digest.write_u64(time.to_bits());
        self.digest.write_u8(tag);
        self.digest.write_u32(miner);
        self.digest.write_u32(block);
    }

    pub fn run(mut self) -> Result<SimResult, EngineError> {
        while self.step()? {}
        Ok(self.finish())
    }

    /// Tallies the result from the current state.
    pub fn finish(self) -> SimResult {
        let observer = self
            .miners
            .iter()
            .max_by(|a, b| {
                a.tree
                    .tip_height()
                    .cmp(&b.tree.tip_height())
                    .then(b.id.cmp(&a.id))
            })
            .map(|m| m.id)
            .unwrap_or(0);
        let final_chain = self.miners[observer as usize].tree.longest_chain();
        let fork_count = self.blocks.len() - final_chain.len();
        let check_height =
            (final_chain.len() - 1).saturating_sub(self.config.discard_tail as usize);
        let anchor = final_chain[check_height];
        let inconsistent_replicas = self
            .miners
            .iter()
            .filter(|m| m.tree.ancestor_at_height(check_height as u32) != Some(anchor))
            .map(|m| m.id)
            .collect();
        SimResult {
            per_miner_mined: self.per_miner_mined,
            final_chain,
            all_blocks: self.blocks,
            fork_count,
            wall_events: self.wall_events,
            observer,
            protocol_errors: self.protocol_errors,
            inconsistent_replicas,
            event_digest: self.digest.finish(),
            end_time: self.now,
        }
    }
}
