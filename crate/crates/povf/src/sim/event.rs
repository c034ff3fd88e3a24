//! The deterministic event queue: a min-heap ordered by scheduled time with
//! a monotone sequence number breaking ties, so identical configs replay the
//! identical event order.

use num_bigint::BigUint;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::chain::{Block, Transaction};

pub(crate) type NodeId = usize;

#[derive(Debug)]
pub(crate) enum Event {
    Register { node: NodeId },
    EpochDone { node: NodeId, epoch: u64 },
    HeartbeatDue { node: NodeId, identity: usize },
    SyncClock { node: NodeId },
    Deliver { to: NodeId, msg: Arc<Msg> },
    TxInject,
    ChurnJoin,
    ChurnLeave,
    Sample,
    AdversaryRegister { epoch: u64 },
    AdversaryPropose { epoch: u64 },
    AdversaryReplayBurst,
}

#[derive(Debug)]
pub(crate) enum Msg {
    Register {
        public_key: Vec<u8>,
        st: i64,
        seed: [u8; 32],
        /// Sim-side marker for adversary replay accounting; not part of the
        /// gossip payload.
        replayed: bool,
    },
    Heartbeat {
        public_key: Vec<u8>,
        value: BigUint,
        proof: BigUint,
        msg_seq: u64,
        replayed: bool,
    },
    Block(Arc<Block>),
    Tx(Arc<Transaction>),
}

pub(crate) struct Scheduled {
    pub at: i64,
    pub seq: u64,
    pub event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap, we want earliest first
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

#[derive(Default)]
pub(crate) struct EventQueue {
    heap: BinaryHeap<Scheduled>,
    next_seq: u64,
}

impl EventQueue {
    pub fn push(&mut self, at: i64, event: Event) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Scheduled { at, seq, event });
    }

    pub fn pop(&mut self) -> Option<Scheduled> {
        self.heap.pop()
    }

}
