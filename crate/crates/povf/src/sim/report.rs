//! The measurement trace a run produces. Identical configs (including the
//! seed) serialize to bytewise identical reports.

use serde::{Deserialize, Serialize};

/// One record per consensus epoch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    /// Epoch VDF output, hex.
    pub value: String,
    /// Active identities at the first completion of this epoch.
    pub active: u64,
    /// Identities whose VRF value fell under their threshold.
    pub selected: u64,
    /// Blocks actually proposed for this epoch.
    pub proposed: u64,
}

/// One record per canonically confirmed block (genesis excluded).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub height: u64,
    pub hash: String,
    pub proposer_node: Option<usize>,
    pub timestamp_ms: i64,
    pub tx_count: u64,
    pub epoch_index: u64,
    /// Global time at which the reporting node confirmed it.
    pub confirmed_at_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node: usize,
    pub honest: bool,
    pub joined_at_ms: i64,
    pub left_at_ms: Option<i64>,
    pub proposed_blocks: u64,
    pub confirmed_blocks: u64,
    pub heartbeat_misses: u64,
}

/// A node's confirmed chain as block-hash hex strings, genesis first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub node: usize,
    pub hashes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockSample {
    pub t_ms: i64,
    pub max_pairwise_offset_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeClockSeries {
    pub node: usize,
    /// (global time, logical clock error vs global) pairs.
    pub series: Vec<(i64, i64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarySample {
    pub t_ms: i64,
    /// Adversary identities active in an honest node's registry view.
    pub active_identities: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryReport {
    pub scenario: String,
    pub identities_registered: u64,
    pub proposed_blocks: u64,
    pub confirmed_blocks: u64,
    /// Confirmed share of the canonical chain.
    pub confirmed_share: f64,
    pub replayed_registrations: u64,
    pub replayed_registrations_rejected: u64,
    pub replayed_heartbeats: u64,
    pub replayed_heartbeats_rejected: u64,
    pub active_series: Vec<AdversarySample>,
}

/// Aggregates computed by the `metrics` module over the canonical chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    /// 12-significant-digit decimal strings; None when undefined.
    pub average_tps: Option<String>,
    pub max_instantaneous_tps: Option<String>,
    pub gini: Option<String>,
    pub std_dev: Option<f64>,
    pub average_tps_f64: Option<f64>,
    pub max_instantaneous_tps_f64: Option<f64>,
    pub gini_f64: Option<f64>,
    pub confirmed_heights: u64,
    pub total_confirmed_txs: u64,
    pub elapsed_ms: i64,
    pub max_clock_offset_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub duration_epochs: u64,
    pub honest_nodes_final: u64,
    pub events_processed: u64,
    /// Honest heartbeats rejected anywhere in the network; zero under
    /// loss-free gossip.
    pub honest_heartbeat_rejections: u64,
    pub epochs: Vec<EpochRecord>,
    pub blocks: Vec<BlockRecord>,
    pub nodes: Vec<NodeRecord>,
    pub confirmed_chains: Vec<ChainRecord>,
    pub clock_samples: Vec<ClockSample>,
    pub node_clock_series: Vec<NodeClockSeries>,
    pub adversary: Option<AdversaryReport>,
    pub summary: MetricsSummary,
}

impl SimReport {
    /// Proposer block counts over the canonical chain, one entry per node
    /// that proposed at least once plus zero entries for silent honest nodes.
    pub fn proposer_counts(&self) -> Vec<u64> {
        self.nodes
            .iter()
            .map(|n| n.confirmed_blocks)
            .collect()
    }
}
