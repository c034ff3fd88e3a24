//! Simulation configuration: one document (TOML or JSON, same schema)
//! describes the whole experiment. Every field has a default so minimal
//! configs stay short; validation reports field-level messages.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

fn err(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field,
        message: message.into(),
    }
}

/// Per-link gossip latency distribution, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "lowercase")]
pub enum LatencyModel {
    Lognormal { median_ms: f64, sigma: f64 },
    Uniform { min_ms: f64, max_ms: f64 },
    Constant { ms: f64 },
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel::Lognormal {
            median_ms: 50.0,
            sigma: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GossipConfig {
    #[serde(flatten)]
    pub latency: LatencyModel,
    pub drop_probability: f64,
}

impl Default for GossipConfig {
    fn default() -> Self {
        Self {
            latency: LatencyModel::default(),
            drop_probability: 0.0,
        }
    }
}

/// Poisson join/leave rates per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ChurnConfig {
    pub join_rate_per_epoch: f64,
    pub leave_rate_per_epoch: f64,
}

/// Adversary behavior; at most one adversary node joins the network on top
/// of `node_count` honest nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "scenario", rename_all = "lowercase")]
pub enum AdversaryScenario {
    #[default]
    None,
    /// Registers `identities` keys but can advance only `compute_units`
    /// heartbeat chains concurrently.
    Sybil { identities: u64, compute_units: u64 },
    /// Computes the epoch chain `speed` times faster than honest nodes and
    /// registers keypairs pre-filtered against future epoch values.
    Prophecy { speed: f64 },
    /// Replays its original registration seed and recorded chain outputs
    /// after deliberately timing out.
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Honest node count at simulation start.
    pub node_count: u64,
    /// Expected maximum consensus nodes per epoch.
    pub omega: u64,
    /// Epoch VDF rounds (T).
    pub vdf_rounds: u64,
    /// Heartbeat VDF rounds (t).
    pub heartbeat_rounds: u64,
    /// Heartbeat response deadline.
    pub t_max_ms: i64,
    /// Delay buffer confirmation depth.
    pub delay_height: u64,
    pub block_tx_limit: usize,
    /// Group modulus width used for real VDF arithmetic.
    pub modulus_bits: u32,
    /// VRF value width; the construction fixes this at 256.
    pub randlen: u32,
    pub duration_epochs: u64,
    /// Wall-clock duration one epoch VDF models.
    pub epoch_ms: i64,
    /// Per-(node, epoch) completion jitter, uniform in [0, this).
    pub epoch_jitter_ms: i64,
    pub tx_rate_per_s: f64,
    pub tx_payload_bytes: usize,
    pub gossip: GossipConfig,
    /// Initial physical clock offsets drawn uniform in [-x, +x].
    pub clock_offset_range_ms: i64,
    pub clock_sync_interval_ms: i64,
    /// Honest per-node speed factors drawn uniform in this interval.
    pub node_speed_range: (f64, f64),
    pub churn: ChurnConfig,
    pub adversary: AdversaryScenario,
    /// VRF key modulus width for simulated identities.
    pub vrf_key_bits: u32,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            node_count: 20,
            omega: 10,
            vdf_rounds: 1000,
            heartbeat_rounds: 800,
            t_max_ms: 6000,
            delay_height: 32,
            block_tx_limit: 500,
            modulus_bits: 48,
            randlen: 256,
            duration_epochs: 100,
            epoch_ms: 2000,
            epoch_jitter_ms: 100,
            tx_rate_per_s: 0.0,
            tx_payload_bytes: 16,
            gossip: GossipConfig::default(),
            clock_offset_range_ms: 500,
            clock_sync_interval_ms: 1000,
            node_speed_range: (1.0, 1.0),
            churn: ChurnConfig::default(),
            adversary: AdversaryScenario::None,
            vrf_key_bits: 256,
            rng_seed: 0x706f_7666,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.node_count == 0 {
            return Err(err("node_count", "must be at least 1"));
        }
        if self.omega == 0 {
            return Err(err("omega", "must be at least 1"));
        }
        if self.vdf_rounds == 0 {
            return Err(err("vdf_rounds", "must be at least 1"));
        }
        if self.heartbeat_rounds == 0 {
            return Err(err("heartbeat_rounds", "must be at least 1"));
        }
        if self.t_max_ms <= 0 {
            return Err(err("t_max_ms", "must be positive"));
        }
        if self.delay_height == 0 {
            return Err(err("delay_height", "must be at least 1"));
        }
        if !(16..=4096).contains(&self.modulus_bits) {
            return Err(err("modulus_bits", "must be in [16, 4096]"));
        }
        if self.randlen != 256 {
            return Err(err("randlen", "this build fixes randlen at 256"));
        }
        if self.duration_epochs == 0 {
            return Err(err("duration_epochs", "must be at least 1"));
        }
        if self.epoch_ms <= 0 {
            return Err(err("epoch_ms", "must be positive"));
        }
        if self.epoch_jitter_ms < 0 || self.epoch_jitter_ms >= self.epoch_ms {
            return Err(err("epoch_jitter_ms", "must be in [0, epoch_ms)"));
        }
        if self.tx_rate_per_s < 0.0 || !self.tx_rate_per_s.is_finite() {
            return Err(err("tx_rate_per_s", "must be finite and non-negative"));
        }
        match self.gossip.latency {
            LatencyModel::Lognormal { median_ms, sigma } => {
                if median_ms <= 0.0 || sigma < 0.0 {
                    return Err(err("gossip", "lognormal needs median_ms > 0, sigma >= 0"));
                }
            }
            LatencyModel::Uniform { min_ms, max_ms } => {
                if min_ms < 0.0 || max_ms < min_ms {
                    return Err(err("gossip", "uniform needs 0 <= min_ms <= max_ms"));
                }
            }
            LatencyModel::Constant { ms } => {
                if ms < 0.0 {
                    return Err(err("gossip", "constant latency must be non-negative"));
                }
            }
        }
        if !(0.0..1.0).contains(&self.gossip.drop_probability) {
            return Err(err("gossip", "drop_probability must be in [0, 1)"));
        }
        if self.clock_offset_range_ms < 0 {
            return Err(err("clock_offset_range_ms", "must be non-negative"));
        }
        if self.clock_sync_interval_ms <= 0 {
            return Err(err("clock_sync_interval_ms", "must be positive"));
        }
        let (lo, hi) = self.node_speed_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(err("node_speed_range", "must satisfy 0 < lo <= hi"));
        }
        if self.churn.join_rate_per_epoch < 0.0 || self.churn.leave_rate_per_epoch < 0.0 {
            return Err(err("churn", "rates must be non-negative"));
        }
        match self.adversary {
            AdversaryScenario::Sybil {
                identities,
                compute_units,
            } => {
                if identities == 0 || compute_units == 0 {
                    return Err(err("adversary", "sybil needs identities >= 1, compute_units >= 1"));
                }
            }
            AdversaryScenario::Prophecy { speed }
                if !(speed > 1.0 && speed.is_finite()) => {
                    return Err(err("adversary", "prophecy needs speed > 1"));
                }
            _ => {}
        }
        if self.vrf_key_bits < 64 {
            return Err(err("vrf_key_bits", "must be at least 64"));
        }
        Ok(())
    }

    /// Milliseconds between heartbeat completions for a node at unit speed:
    /// t rounds at the per-round pace implied by T rounds per epoch.
    pub fn heartbeat_period_ms(&self) -> i64 {
        let period =
            self.epoch_ms as f64 * self.heartbeat_rounds as f64 / self.vdf_rounds as f64;
        (period as i64).max(1)
    }

    /// End of simulated time.
    pub fn end_ms(&self) -> i64 {
        self.duration_epochs as i64 * self.epoch_ms
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }
}
