//! Per-node simulation state: one virtual PoVF participant with its own
//! clock, registry view, delay buffer, mempool, and one or more identities
//! (honest nodes hold exactly one).

use num_bigint::BigUint;
use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use crate::chain::Transaction;
use crate::clocksync::ClockState;
use crate::delay_buffer::DelayBuffer;
use crate::heartbeat::Registry;
use crate::vrf::VrfKeyPair;

use super::event::NodeId;

/// One registered keypair with its heartbeat chain position (prover side).
pub(crate) struct Identity {
    pub keypair: VrfKeyPair,
    pub pk: Vec<u8>,
    pub st: i64,
    pub seed: [u8; 32],
    pub chain_value: BigUint,
    /// Whether this identity keeps computing heartbeats.
    pub beating: bool,
    pub beats_sent: u64,
}

pub(crate) struct SimNode {
    pub id: NodeId,
    pub honest: bool,
    pub alive: bool,
    pub joined_at: i64,
    pub left_at: Option<i64>,
    pub speed: f64,
    pub clock: ClockState,
    pub registry: Registry,
    pub buffer: DelayBuffer,
    /// Pool ordered by (timestamp, id), the block inclusion order.
    pub mempool: BTreeMap<(i64, [u8; 32]), Arc<Transaction>>,
    /// Ids already in this node's confirmed chain.
    pub confirmed_txs: HashSet<[u8; 32]>,
    pub identities: Vec<Identity>,
    /// Highest epoch whose VDF this node has completed.
    pub latest_epoch: u64,
    /// Highest validated block height received; drives confirmation.
    pub max_seen_height: u64,
    pub proposed: u64,
    pub heartbeat_misses: u64,
    /// Memoized registry.active_count keyed by a coarse time bucket; the
    /// validator band tolerates far more churn than one bucket holds.
    pub active_count_cache: (i64, u64),
}

impl SimNode {
    pub fn logical_now(&self, global_ms: i64) -> i64 {
        self.clock.logical_at(global_ms)
    }
}
