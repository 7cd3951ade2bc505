//! Blocks and a miner's local replica of the block tree.
//!
//! A [`BlockTree`] follows the longest-chain rule: the mining tip is the block
//! of greatest height, and among equal heights the one this replica received
//! first. Exact arrival-time ties fall back to the order in which the replica
//! processed the blocks.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

/// Index of a miner in `[0, n)`.
pub type MinerId = u32;

/// Block identifier. Identifiers are used as dense indices by [`BlockTree`],
/// so callers should allocate them sequentially.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub u32);

impl BlockId {
    pub const GENESIS: BlockId = BlockId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for BlockId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub id: BlockId,
    /// `None` only for the genesis block.
    pub parent: Option<BlockId>,
    /// `None` only for the genesis block.
    pub miner: Option<MinerId>,
    /// Simulation time in milliseconds.
    pub mined_at: f64,
}

impl Block {
    pub fn genesis() -> Self {
        Block {
            id: BlockId::GENESIS,
            parent: None,
            miner: None,
            mined_at: 0.0,
        }
    }

    pub fn new(id: BlockId, parent: BlockId, miner: MinerId, mined_at: f64) -> Self {
        Block {
            id,
            parent: Some(parent),
            miner: Some(miner),
            mined_at,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockEntry {
    pub block: Block,
    pub height: u32,
    /// Time this replica first held the block (validated).
    pub arrival_time: f64,
    /// Processing order within this replica; breaks exact arrival-time ties.
    pub arrival_index: u32,
}

impl BlockEntry {
    /// Longest-chain preference: greater height, then earlier arrival, then
    /// earlier processing.
    #[inline]
    fn beats(&self, other: &BlockEntry) -> bool {
        if self.height != other.height {
            return self.height > other.height;
        }
        match self.arrival_time.total_cmp(&other.arrival_time) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => self.arrival_index < other.arrival_index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    /// The block became the new mining tip.
    ExtendedTip,
    /// Stored, but the tip is unchanged.
    SideBlock,
    /// Parent unknown. Carries the nearest missing ancestor (the parent
    /// itself unless the parent is already held as an orphan).
    Orphan(BlockId),
    /// Already held with identical content.
    Duplicate,
}

#[derive(Debug, Error, PartialEq)]
pub enum ChainError {
    #[error("block {id} conflicts with a previously stored block of the same id")]
    ConflictingDuplicate { id: BlockId },
    #[error("arrival time {got} precedes the previous arrival {last}")]
    NonMonotoneArrival { got: f64, last: f64 },
    #[error("block {id} has no parent")]
    MissingParentLink { id: BlockId },
}

#[derive(Debug, Clone, Copy)]
struct PendingOrphan {
    block: Block,
    arrival_time: f64,
    arrival_index: u32,
}

/// A miner's local replica.
#[derive(Debug, Clone)]
pub struct BlockTree {
    // Dense by block id; slots not held have `arrival_index == VACANT`.
    slots: Vec<BlockEntry>,
    len: usize,
    tip: BlockId,
    orphans: HashMap<BlockId, Vec<PendingOrphan>>,
    orphan_ids: HashMap<BlockId, Block>,
    next_index: u32,
    last_arrival: f64,
    promoted: Vec<BlockId>,
}

const VACANT: u32 = u32::MAX;

impl Default for BlockTree {
    fn default() -> Self {
        Self::new()
    }
}

impl BlockTree {
    /// A tree holding only the genesis block.
    pub fn new() -> Self {
        let genesis = BlockEntry {
            block: Block::genesis(),
            height: 0,
            arrival_time: 0.0,
            arrival_index: 0,
        };
        BlockTree {
            slots: vec![genesis],
            len: 1,
            tip: BlockId::GENESIS,
            orphans: HashMap::new(),
            orphan_ids: HashMap::new(),
            next_index: 1,
            last_arrival: f64::NEG_INFINITY,
            promoted: Vec::new(),
        }
    }

    pub fn tip(&self) -> BlockId {
        self.tip
    }

    pub fn tip_height(&self) -> u32 {
        self.slots[self.tip.index()].height
    }

    pub fn tip_entry(&self) -> &BlockEntry {
        &self.slots[self.tip.index()]
    }

    pub fn get(&self, id: BlockId) -> Option<&BlockEntry> {
        self.slots
            .get(id.index())
            .filter(|e| e.arrival_index != VACANT)
    }

    pub fn contains(&self, id: BlockId) -> bool {
        self.get(id).is_some()
    }

    pub fn is_orphan(&self, id: BlockId) -> bool {
        self.orphan_ids.contains_key(&id)
    }

    /// Looks a block up among entries and orphans.
    pub fn find_block(&self, id: BlockId) -> Option<Block> {
        self.get(id)
            .map(|e| e.block)
            .or_else(|| self.orphan_ids.get(&id).copied())
    }

    /// Number of entries, genesis included.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn orphan_count(&self) -> usize {
        self.orphan_ids.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = &BlockEntry> {
        self.slots.iter().filter(|e| e.arrival_index != VACANT)
    }

    pub fn orphans(&self) -> impl Iterator<Item = &Block> {
        self.orphan_ids.values()
    }

    /// Blocks moved out of the orphan set by the most recent insertion, in
    /// the order they were attached.
    pub fn last_promoted(&self) -> &[BlockId] {
        &self.promoted
    }

    /// Inserts `block` as received at `arrival_time`. Arrival times must be
    /// supplied in non-decreasing order.
    pub fn insert_block(
        &mut self,
        block: Block,
        arrival_time: f64,
    ) -> Result<InsertOutcome, ChainError> {
        self.promoted.clear();
        if arrival_time < self.last_arrival {
            return Err(ChainError::NonMonotoneArrival {
                got: arrival_time,
                last: self.last_arrival,
            });
        }

        if let Some(existing) = self.find_block(block.id) {
            return if existing == block {
                Ok(InsertOutcome::Duplicate)
            } else {
                Err(ChainError::ConflictingDuplicate { id: block.id })
            };
        }
        let parent = block
            .parent
            .ok_or(ChainError::MissingParentLink { id: block.id })?;
        self.last_arrival = arrival_time;

        let arrival_index = self.next_index;
        self.next_index += 1;

        if !self.contains(parent) {
            self.orphan_ids.insert(block.id, block);
            self.orphans.entry(parent).or_default().push(PendingOrphan {
                block,
                arrival_time,
                arrival_index,
            });
            return Ok(InsertOutcome::Orphan(self.nearest_missing(parent)));
        }

        let became_tip = self.attach(block, arrival_time, arrival_index);
        self.promote_descendants(block.id);
        Ok(if became_tip {
            InsertOutcome::ExtendedTip
        } else {
            InsertOutcome::SideBlock
        })
    }

    fn nearest_missing(&self, mut id: BlockId) -> BlockId {
        while let Some(b) = self.orphan_ids.get(&id) {
            match b.parent {
                Some(p) => id = p,
                None => break,
            }
        }
        id
    }

    /// Stores a block whose parent is present; returns whether it became tip.
    fn attach(&mut self, block: Block, arrival_time: f64, arrival_index: u32) -> bool {
        let parent = block.parent.expect("non-genesis block");
        let height = self.slots[parent.index()].height + 1;
        let entry = BlockEntry {
            block,
            height,
            arrival_time,
            arrival_index,
        };
        let idx = block.id.index();
        if idx >= self.slots.len() {
            let vacant = BlockEntry {
                block: Block::genesis(),
                height: 0,
                arrival_time: 0.0,
                arrival_index: VACANT,
            };
            self.slots.resize(idx + 1, vacant);
        }
        self.slots[idx] = entry;
        self.len += 1;
        if entry.beats(&self.slots[self.tip.index()]) {
            self.tip = block.id;
            true
        } else {
            false
        }
    }

    fn promote_descendants(&mut self, root: BlockId) {
        let Some(first) = self.orphans.remove(&root) else {
            return;
        };
        let mut queue: std::collections::VecDeque<PendingOrphan> = first.into();
        while let Some(p) = queue.pop_front() {
            self.orphan_ids.remove(&p.block.id);
            self.attach(p.block, p.arrival_time, p.arrival_index);
            self.promoted.push(p.block.id);
            if let Some(children) = self.orphans.remove(&p.block.id) {
                queue.extend(children);
            }
        }
    }

    /// Block ids from genesis to tip.
    pub fn longest_chain(&self) -> Vec<BlockId> {
        self.chain_to(self.tip)
    }

    /// Block ids from genesis to `id`, which must be an entry.
    pub fn chain_to(&self, id: BlockId) -> Vec<BlockId> {
        let mut out = Vec::with_capacity(self.slots[id.index()].height as usize + 1);
        let mut cur = Some(id);
        while let Some(c) = cur {
            out.push(c);
            cur = self.slots[c.index()].block.parent;
        }
        out.reverse();
        out
    }

    /// The block at `height` on the path from genesis to the tip.
    pub fn ancestor_at_height(&self, height: u32) -> Option<BlockId> {
        let mut cur = self.tip;
        let mut entry = &self.slots[cur.index()];
        if entry.height < height {
            return None;
        }
        while entry.height > height {
            cur = entry.block.parent?;
            entry = &self.slots[cur.index()];
        }
        Some(cur)
    }

    /// Ids held as entries (genesis included), for diagnostics and tests.
    pub fn entry_ids(&self) -> HashSet<BlockId> {
        self.entries().map(|e| e.block.id).collect()
    }
}
