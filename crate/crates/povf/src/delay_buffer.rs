//! The delay buffer: incoming blocks form a parent-linked tree, and the best
//! block per height is confirmed only once the highest received height is a
//! fixed delay beyond it. Priority at a height is smallest timestamp, then
//! most transactions, then smallest hash; given time for all blocks to
//! arrive, every node confirms the same chain.

use std::collections::HashMap;
use std::sync::Arc;

use crate::chain::Block;

/// Bound on the unattached-orphan pool; oldest arrivals evict first.
pub const DEFAULT_ORPHAN_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    Orphaned,
    Duplicate,
    BelowConfirmed,
}

#[derive(Debug, Clone)]
struct TreeNode {
    block: Arc<Block>,
    children: Vec<[u8; 32]>,
}

/// The total ordering key: timestamp ascending, transaction count
/// descending, hash ascending.
fn priority_key(block: &Block) -> (i64, std::cmp::Reverse<usize>, [u8; 32]) {
    (
        block.header.timestamp,
        std::cmp::Reverse(block.transactions.len()),
        block.header.hash,
    )
}

#[derive(Debug, Clone)]
pub struct DelayBuffer {
    tree: HashMap<[u8; 32], TreeNode>,
    by_height: HashMap<u64, Vec<[u8; 32]>>,
    confirmed: Vec<Arc<Block>>,
    orphans: Vec<Arc<Block>>,
    delay_height: u64,
    orphan_cap: usize,
}

impl DelayBuffer {
    pub fn new(genesis: Arc<Block>, delay_height: u64) -> Self {
        assert!(delay_height >= 1, "delay height must be positive");
        Self {
            tree: HashMap::new(),
            by_height: HashMap::new(),
            confirmed: vec![genesis],
            orphans: Vec::new(),
            delay_height,
            orphan_cap: DEFAULT_ORPHAN_CAP,
        }
    }

    pub fn with_orphan_cap(mut self, cap: usize) -> Self {
        self.orphan_cap = cap;
        self
    }

    pub fn delay_height(&self) -> u64 {
        self.delay_height
    }

    /// The confirmed canonical chain, genesis first.
    pub fn confirmed(&self) -> &[Arc<Block>] {
        &self.confirmed
    }

    pub fn confirmed_tip(&self) -> &Arc<Block> {
        self.confirmed.last().expect("genesis always confirmed")
    }

    pub fn confirmed_height(&self) -> u64 {
        self.confirmed_tip().header.height
    }

    /// Highest height present in the unconfirmed tree, or the confirmed tip.
    pub fn max_height(&self) -> u64 {
        self.by_height
            .keys()
            .copied()
            .max()
            .unwrap_or(0)
            .max(self.confirmed_height())
    }

    pub fn contains(&self, hash: &[u8; 32]) -> bool {
        self.tree.contains_key(hash) || self.orphans.iter().any(|b| b.header.hash == *hash)
    }

    /// Looks up an unconfirmed tree block or the confirmed tip by hash, the
    /// positions a new block may attach under.
    pub fn attach_parent(&self, hash: &[u8; 32]) -> Option<&Arc<Block>> {
        if let Some(node) = self.tree.get(hash) {
            return Some(&node.block);
        }
        let tip = self.confirmed_tip();
        (tip.header.hash == *hash).then_some(tip)
    }

    pub fn insert(&mut self, block: Arc<Block>) -> InsertOutcome {
        let hash = block.header.hash;
        if block.header.height <= self.confirmed_height() {
            return InsertOutcome::BelowConfirmed;
        }
        if self.contains(&hash) {
            return InsertOutcome::Duplicate;
        }
        let parent_hash = block.header.prev_hash;
        let attachable =
            self.tree.contains_key(&parent_hash) || self.confirmed_tip().header.hash == parent_hash;
        if !attachable {
            if self.orphans.len() >= self.orphan_cap {
                self.orphans.remove(0);
            }
            self.orphans.push(block);
            return InsertOutcome::Orphaned;
        }
        if let Some(parent) = self.tree.get_mut(&parent_hash) {
            parent.children.push(hash);
        }
        self.by_height
            .entry(block.header.height)
            .or_default()
            .push(hash);
        self.tree.insert(
            hash,
            TreeNode {
                block,
                children: Vec::new(),
            },
        );
        InsertOutcome::Inserted
    }

    /// Removes and returns stashed orphans whose parent is `parent_hash`, so
    /// the caller can validate and re-insert them.
    pub fn claim_orphans_of(&mut self, parent_hash: &[u8; 32]) -> Vec<Arc<Block>> {
        let mut claimed = Vec::new();
        let mut index = 0;
        while index < self.orphans.len() {
            if self.orphans[index].header.prev_hash == *parent_hash {
                claimed.push(self.orphans.remove(index));
            } else {
                index += 1;
            }
        }
        claimed
    }

    /// The highest-priority block at a height, or None when the height is
    /// empty. Every tree block at a height is connected to the confirmed tip
    /// by construction.
    pub fn best_at_height(&self, height: u64) -> Option<&Arc<Block>> {
        self.by_height
            .get(&height)?
            .iter()
            .filter_map(|h| self.tree.get(h))
            .map(|node| &node.block)
            .min_by_key(|b| priority_key(b))
    }

    /// Confirms heights while the received frontier is at least
    /// `delay_height` beyond the next unconfirmed height; prunes losing
    /// branches. Returns newly confirmed blocks in height order.
    pub fn try_confirm(&mut self, max_received_height: u64) -> Vec<Arc<Block>> {
        let mut newly = Vec::new();
        loop {
            let next = self.confirmed_height() + 1;
            if max_received_height < next + self.delay_height {
                break;
            }
            let Some(best) = self.best_at_height(next).cloned() else {
                break; // gap: confirmation stalls until the height fills
            };
            let best_hash = best.header.hash;
            let siblings = self.by_height.remove(&next).unwrap_or_default();
            for sibling in siblings {
                if sibling != best_hash {
                    self.remove_subtree(sibling);
                }
            }
            let node = self.tree.remove(&best_hash).expect("winner in tree");
            debug_assert!(node.block.header.hash == best_hash);
            self.confirmed.push(best.clone());
            newly.push(best);
        }
        newly
    }

    fn remove_subtree(&mut self, root: [u8; 32]) {
        let Some(node) = self.tree.remove(&root) else {
            return;
        };
        if let Some(at_height) = self.by_height.get_mut(&node.block.header.height) {
            at_height.retain(|h| *h != root);
        }
        for child in node.children {
            self.remove_subtree(child);
        }
    }

    /// The leaf a proposer builds on: from the confirmed tip, greedily follow
    /// the best child at each height.
    pub fn best_tip(&self) -> &Arc<Block> {
        let mut current_hash = self.confirmed_tip().header.hash;
        let mut current = self.confirmed_tip();
        let mut height = self.confirmed_height() + 1;
        loop {
            let next = self
                .by_height
                .get(&height)
                .into_iter()
                .flatten()
                .filter_map(|h| self.tree.get(h))
                .filter(|node| node.block.header.prev_hash == current_hash)
                .map(|node| &node.block)
                .min_by_key(|b| priority_key(b));
            match next {
                Some(block) => {
                    current_hash = block.header.hash;
                    current = block;
                    height += 1;
                }
                None => return current,
            }
        }
    }

    /// Count of buffered (unconfirmed) tree blocks.
    pub fn pending_len(&self) -> usize {
        self.tree.len()
    }

    pub fn orphan_len(&self) -> usize {
        self.orphans.len()
    }
}
