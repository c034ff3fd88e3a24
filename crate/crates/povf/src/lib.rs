//! PoVF consensus: VDF-paced epochs, VRF-threshold leader selection,
//! heartbeat-based identity control, delay-buffer fork resolution, and NTP
//! clock synchronization, plus a deterministic network simulator that
//! measures throughput and decentralization at desk scale.

mod numutil;

pub mod chain;
pub mod clocksync;
pub mod delay_buffer;
pub mod heartbeat;
pub mod metrics;
pub mod selection;
pub mod sim;
pub mod vdf;
pub mod vrf;

pub use chain::{Block, BlockHeader, GenesisParams, RegularParams, Transaction};
pub use heartbeat::{HeartbeatMessage, Registry, RegistryEntry, RegistrationMessage, RejectReason};
pub use selection::{Probability, SelectionParams};
pub use vdf::{CancelToken, EpochChain, VdfError, VdfOutput, VdfParams};
pub use vrf::{VrfKeyPair, VrfOutput, VrfPublicKey, VrfSecretKey};
