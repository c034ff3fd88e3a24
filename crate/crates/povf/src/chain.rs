//! Block construction, canonical serialization, hashing, and full validity
//! checking; genesis construction.
//!
//! The header hash covers a canonical byte string: every header field except
//! the hash itself, in table order (timestamp, prev hash, merkle root,
//! height, public key, params), each length-prefixed with a 32-bit
//! big-endian length. Big integers inside the params payload serialize as
//! lowercase big-endian hex.

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::heartbeat::Registry;
use crate::selection::{self, Probability};
use crate::vdf::{self, EpochChain, VdfParams};
use crate::vrf::{self, VrfKeyPair, VrfOutput, VrfPublicKey, RANDLEN};

/// Validator tolerance on block timestamps relative to its own clock: the
/// clock-sync bound.
pub const DEFAULT_TIMESTAMP_TOLERANCE_MS: i64 = 1000;

/// Default cap on transactions per block.
pub const DEFAULT_BLOCK_TX_LIMIT: usize = 500;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("invalid genesis parameters: {0}")]
    InvalidGenesis(String),
    #[error("epoch {epoch} is not ahead of the parent's epoch {parent_epoch}")]
    StaleEpoch { epoch: u64, parent_epoch: u64 },
    #[error(transparent)]
    Vrf(#[from] vrf::VrfError),
}

/// Why a block failed validation; the first failed check is reported.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum InvalidReason {
    #[error("header hash does not recompute")]
    BadHeaderHash,
    #[error("prev hash or height does not link to the parent")]
    BadLinkage,
    #[error("merkle root does not recompute")]
    BadMerkleRoot,
    #[error("transaction id does not match its content")]
    BadTransaction,
    #[error("params payload does not parse")]
    MalformedParams,
    #[error("epoch is not ahead of the parent's epoch")]
    StaleEpoch,
    #[error("epoch is outside the validator's view")]
    UnknownEpoch,
    #[error("epoch VDF proof does not verify")]
    BadEpochProof,
    #[error("proposer public key does not parse")]
    MalformedPublicKey,
    #[error("VRF output does not verify")]
    BadVrf,
    #[error("VRF value is not under the selection threshold")]
    NotSelected,
    #[error("proposer identity is expired or unknown")]
    ExpiredIdentity,
    #[error("timestamp is outside the tolerated window")]
    BadTimestamp,
}

/// An opaque payload with its arrival timestamp; the id binds both.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    #[serde(with = "hex_array")]
    pub id: [u8; 32],
    #[serde(with = "hex_vec")]
    pub payload: Vec<u8>,
    pub timestamp: i64,
}

impl Transaction {
    pub fn new(payload: Vec<u8>, timestamp: i64) -> Self {
        let id = Self::compute_id(&payload, timestamp);
        Self {
            id,
            payload,
            timestamp,
        }
    }

    pub fn compute_id(payload: &[u8], timestamp: i64) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(payload);
        hasher.update(timestamp.to_be_bytes());
        hasher.finalize().into()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockHeader {
    pub timestamp: i64,
    pub prev_hash: [u8; 32],
    pub hash: [u8; 32],
    pub merkle_root: [u8; 32],
    pub height: u64,
    pub public_key: Vec<u8>,
    pub params: Vec<u8>,
}

impl BlockHeader {
    /// Canonical bytes covered by the header hash.
    fn signing_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut field = |bytes: &[u8]| {
            out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
            out.extend_from_slice(bytes);
        };
        field(&self.timestamp.to_be_bytes());
        field(&self.prev_hash);
        field(&self.merkle_root);
        field(&self.height.to_be_bytes());
        field(&self.public_key);
        field(&self.params);
        out
    }

    pub fn compute_hash(&self) -> [u8; 32] {
        Sha256::digest(self.signing_bytes()).into()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
}

impl Block {
    pub fn hash(&self) -> &[u8; 32] {
        &self.header.hash
    }

    pub fn height(&self) -> u64 {
        self.header.height
    }

    pub fn tx_count(&self) -> usize {
        self.transactions.len()
    }

    /// Consensus epoch this block was proposed in; 0 for genesis, None when
    /// the params payload does not parse.
    pub fn epoch_index(&self) -> Option<u64> {
        if self.header.height == 0 {
            Some(0)
        } else {
            RegularParams::from_bytes(&self.header.params).map(|p| p.epoch_index)
        }
    }

    pub fn regular_params(&self) -> Option<RegularParams> {
        RegularParams::from_bytes(&self.header.params)
    }

    pub fn genesis_params(&self) -> Option<GenesisParams> {
        GenesisParams::from_bytes(&self.header.params)
    }
}

/// Genesis `params` payload: the public parameters every node needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenesisParams {
    pub vdf: VdfParams,
    pub t_max_ms: i64,
    pub x0: BigUint,
    pub omega: u64,
}

#[derive(Serialize, Deserialize)]
struct GenesisParamsWire {
    modulus_n: String,
    proof_prime_l: String,
    epoch_rounds_t: u64,
    heartbeat_rounds_t: u64,
    t_max_ms: i64,
    x0: String,
    omega: u64,
}

impl GenesisParams {
    pub fn validate(&self) -> Result<(), ChainError> {
        if self.omega == 0 {
            return Err(ChainError::InvalidGenesis("omega must be positive".into()));
        }
        if self.t_max_ms <= 0 {
            return Err(ChainError::InvalidGenesis("t_max must be positive".into()));
        }
        if self.x0 <= BigUint::one() || &self.x0 >= self.vdf.modulus() {
            return Err(ChainError::InvalidGenesis(
                "x0 outside the group range".into(),
            ));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let wire = GenesisParamsWire {
            modulus_n: to_hex(self.vdf.modulus()),
            proof_prime_l: to_hex(self.vdf.proof_prime()),
            epoch_rounds_t: self.vdf.epoch_rounds(),
            heartbeat_rounds_t: self.vdf.heartbeat_rounds(),
            t_max_ms: self.t_max_ms,
            x0: to_hex(&self.x0),
            omega: self.omega,
        };
        serde_json::to_vec(&wire).expect("genesis params serialize")
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let wire: GenesisParamsWire = serde_json::from_slice(bytes).ok()?;
        let vdf = VdfParams::new(
            from_hex(&wire.modulus_n)?,
            from_hex(&wire.proof_prime_l)?,
            wire.epoch_rounds_t,
            wire.heartbeat_rounds_t,
        )
        .ok()?;
        let gp = Self {
            vdf,
            t_max_ms: wire.t_max_ms,
            x0: from_hex(&wire.x0)?,
            omega: wire.omega,
        };
        gp.validate().ok()?;
        Some(gp)
    }
}

/// Regular-block `params` payload: the epoch VDF result and the proposer's
/// VRF output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegularParams {
    pub epoch_index: u64,
    pub epoch_value: BigUint,
    pub epoch_proof: BigUint,
    pub vrf_value: BigUint,
    pub vrf_proof: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct RegularParamsWire {
    epoch_index: u64,
    epoch_x: String,
    epoch_pi: String,
    vrf_r: String,
    vrf_pi: String,
}

impl RegularParams {
    pub fn to_bytes(&self) -> Vec<u8> {
        let wire = RegularParamsWire {
            epoch_index: self.epoch_index,
            epoch_x: to_hex(&self.epoch_value),
            epoch_pi: to_hex(&self.epoch_proof),
            vrf_r: to_hex(&self.vrf_value),
            vrf_pi: hex::encode(&self.vrf_proof),
        };
        serde_json::to_vec(&wire).expect("regular params serialize")
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let wire: RegularParamsWire = serde_json::from_slice(bytes).ok()?;
        Some(Self {
            epoch_index: wire.epoch_index,
            epoch_value: from_hex(&wire.epoch_x)?,
            epoch_proof: from_hex(&wire.epoch_pi)?,
            vrf_value: from_hex(&wire.vrf_r)?,
            vrf_proof: hex::decode(&wire.vrf_pi).ok()?,
        })
    }
}

fn to_hex(value: &BigUint) -> String {
    value.to_str_radix(16)
}

fn from_hex(text: &str) -> Option<BigUint> {
    BigUint::parse_bytes(text.as_bytes(), 16)
}

/// The VRF message for an epoch: the epoch VDF output serialized as hex.
pub fn epoch_vrf_message(epoch_value: &BigUint) -> Vec<u8> {
    to_hex(epoch_value).into_bytes()
}

/// Binary merkle tree over transaction ids with SHA-256 pairwise combination;
/// an odd node is promoted unchanged; an empty list hashes the empty string.
pub fn merkle_root(transactions: &[Transaction]) -> [u8; 32] {
    if transactions.is_empty() {
        return Sha256::digest([]).into();
    }
    let mut level: Vec<[u8; 32]> = transactions.iter().map(|tx| tx.id).collect();
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        for pair in level.chunks(2) {
            if pair.len() == 2 {
                let mut hasher = Sha256::new();
                hasher.update(pair[0]);
                hasher.update(pair[1]);
                next.push(hasher.finalize().into());
            } else {
                next.push(pair[0]);
            }
        }
        level = next;
    }
    level[0]
}

/// Builds the height-0 block: all-zero prev hash, no transactions, params
/// carrying the genesis table.
pub fn build_genesis(genesis: &GenesisParams, timestamp: i64) -> Result<Block, ChainError> {
    genesis.validate()?;
    let mut header = BlockHeader {
        timestamp,
        prev_hash: [0u8; 32],
        hash: [0u8; 32],
        merkle_root: merkle_root(&[]),
        height: 0,
        public_key: Vec::new(),
        params: genesis.to_bytes(),
    };
    header.hash = header.compute_hash();
    Ok(Block {
        header,
        transactions: Vec::new(),
    })
}

/// The epoch result a proposer includes in its block.
#[derive(Debug, Clone)]
pub struct EpochClaim {
    pub index: u64,
    pub value: BigUint,
    pub proof: BigUint,
}

/// Runs the node-selection VRF for this epoch and, when selected, assembles
/// a block on `parent` holding the earliest `tx_limit` pool transactions.
/// Returns None when the VRF value misses the threshold.
#[allow(clippy::too_many_arguments)]
pub fn propose_block(
    parent: &Block,
    pool: &[Transaction],
    keypair: &VrfKeyPair,
    epoch: &EpochClaim,
    p_prime: &Probability,
    tx_limit: usize,
    now: i64,
) -> Result<Option<Block>, ChainError> {
    let parent_epoch = parent.epoch_index().unwrap_or(0);
    if epoch.index <= parent_epoch {
        return Err(ChainError::StaleEpoch {
            epoch: epoch.index,
            parent_epoch,
        });
    }
    let vrf_out = vrf::eval(&keypair.secret, &epoch_vrf_message(&epoch.value))?;
    let selected = selection::is_selected(&vrf_out.value, RANDLEN, p_prime).unwrap_or(false);
    if !selected {
        return Ok(None);
    }

    let mut txs: Vec<Transaction> = pool.to_vec();
    txs.sort_by_key(|a| (a.timestamp, a.id));
    txs.truncate(tx_limit);

    let params = RegularParams {
        epoch_index: epoch.index,
        epoch_value: epoch.value.clone(),
        epoch_proof: epoch.proof.clone(),
        vrf_value: vrf_out.value,
        vrf_proof: vrf_out.proof,
    };
    let mut header = BlockHeader {
        timestamp: now.max(parent.header.timestamp),
        prev_hash: parent.header.hash,
        hash: [0u8; 32],
        merkle_root: merkle_root(&txs),
        height: parent.header.height + 1,
        public_key: keypair.public.to_bytes(),
        params: params.to_bytes(),
    };
    header.hash = header.compute_hash();
    Ok(Some(Block {
        header,
        transactions: txs,
    }))
}

/// Where a validator looks up the epoch VDF input x_{i-1} for a claimed
/// epoch i; None when the epoch is outside its locally computed view.
pub trait EpochSource {
    fn epoch_input(&self, epoch: u64) -> Option<BigUint>;
}

impl EpochSource for EpochChain {
    fn epoch_input(&self, epoch: u64) -> Option<BigUint> {
        self.input_for(epoch).cloned()
    }
}

/// Everything a validator consults besides the block and its parent.
pub struct ValidationContext<'a> {
    pub registry: &'a Registry,
    pub genesis: &'a GenesisParams,
    pub epochs: &'a dyn EpochSource,
    pub now_ms: i64,
    /// The validator's own active-identity count (callers may cache it).
    pub active_count: u64,
    pub timestamp_tolerance_ms: i64,
}

/// Full validity check; never panics on arbitrary input — every malformed
/// block maps to a reason.
pub fn validate_block(
    block: &Block,
    parent: &Block,
    ctx: &ValidationContext<'_>,
) -> Result<(), InvalidReason> {
    let params = validate_block_static(block, parent, ctx.genesis, ctx.epochs)?;
    validate_block_dynamic(block, parent, &params, ctx)
}

/// The validator-independent checks: header hash, linkage, merkle binding,
/// epoch staleness, the epoch VDF proof, and the proposer VRF proof. Their
/// verdict is a pure function of the block, its parent, and the shared epoch
/// chain, so callers may cache it per block hash. Returns the parsed params
/// for the dynamic half.
pub fn validate_block_static(
    block: &Block,
    parent: &Block,
    genesis: &GenesisParams,
    epochs: &dyn EpochSource,
) -> Result<RegularParams, InvalidReason> {
    // (1) header hash
    if block.header.hash != block.header.compute_hash() {
        return Err(InvalidReason::BadHeaderHash);
    }
    // (2) linkage
    if block.header.prev_hash != parent.header.hash
        || block.header.height != parent.header.height + 1
    {
        return Err(InvalidReason::BadLinkage);
    }
    // (3) merkle root, with ids bound to transaction content
    if block.header.merkle_root != merkle_root(&block.transactions) {
        return Err(InvalidReason::BadMerkleRoot);
    }
    for tx in &block.transactions {
        if tx.id != Transaction::compute_id(&tx.payload, tx.timestamp) {
            return Err(InvalidReason::BadTransaction);
        }
    }
    // (4) epoch VDF proof against the locally computed chain
    let params = block
        .regular_params()
        .ok_or(InvalidReason::MalformedParams)?;
    let parent_epoch = parent.epoch_index().unwrap_or(0);
    if params.epoch_index <= parent_epoch {
        return Err(InvalidReason::StaleEpoch);
    }
    let epoch_input = epochs
        .epoch_input(params.epoch_index)
        .ok_or(InvalidReason::UnknownEpoch)?;
    if !vdf::verify(
        &genesis.vdf,
        &epoch_input,
        &params.epoch_value,
        &params.epoch_proof,
        genesis.vdf.epoch_rounds(),
    ) {
        return Err(InvalidReason::BadEpochProof);
    }
    // (5) proposer VRF over the epoch value
    let public_key = VrfPublicKey::from_bytes(&block.header.public_key)
        .ok_or(InvalidReason::MalformedPublicKey)?;
    let vrf_out = VrfOutput {
        value: params.vrf_value.clone(),
        proof: params.vrf_proof.clone(),
        randlen: RANDLEN,
    };
    if !vrf::verify(
        &public_key,
        &epoch_vrf_message(&params.epoch_value),
        &vrf_out,
    ) {
        return Err(InvalidReason::BadVrf);
    }
    Ok(params)
}

/// The validator-dependent checks: selection under the local probability
/// band, proposer liveness in the local registry, and the timestamp window.
pub fn validate_block_dynamic(
    block: &Block,
    parent: &Block,
    params: &RegularParams,
    ctx: &ValidationContext<'_>,
) -> Result<(), InvalidReason> {
    // (6) selection under the validator's tolerated probability band
    let band = selection::tolerated_probability(ctx.active_count, ctx.genesis.omega);
    if !selection::is_selected(&params.vrf_value, RANDLEN, &band).unwrap_or(false) {
        return Err(InvalidReason::NotSelected);
    }
    // (7) proposer identity must be current in the registry
    if !ctx.registry.is_active(&block.header.public_key, ctx.now_ms) {
        return Err(InvalidReason::ExpiredIdentity);
    }
    // (8) timestamp window
    if block.header.timestamp < parent.header.timestamp
        || block.header.timestamp > ctx.now_ms + ctx.timestamp_tolerance_ms
    {
        return Err(InvalidReason::BadTimestamp);
    }
    Ok(())
}

/// One JSON object per block, the trace format appended to block-log files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockTraceRecord {
    pub height: u64,
    pub hash: String,
    pub prev_hash: String,
    pub timestamp: i64,
    pub proposer: String,
    pub epoch_index: u64,
    pub tx_count: u64,
    pub merkle_root: String,
}

impl BlockTraceRecord {
    pub fn from_block(block: &Block) -> Self {
        Self {
            height: block.header.height,
            hash: hex::encode(block.header.hash),
            prev_hash: hex::encode(block.header.prev_hash),
            timestamp: block.header.timestamp,
            proposer: hex::encode(&block.header.public_key),
            epoch_index: block.epoch_index().unwrap_or(0),
            tx_count: block.transactions.len() as u64,
            merkle_root: hex::encode(block.header.merkle_root),
        }
    }
}

mod hex_array {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 32], ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<[u8; 32], D::Error> {
        let text = String::deserialize(de)?;
        let bytes = hex::decode(&text).map_err(serde::de::Error::custom)?;
        bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("expected 32 bytes"))
    }
}

mod hex_vec {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &Vec<u8>, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(de)?;
        hex::decode(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heartbeat::registration_seed;
    use crate::vdf::CancelToken;

    fn genesis_params() -> GenesisParams {
        GenesisParams {
            vdf: VdfParams::new(BigUint::from(101u32), BigUint::from(41u32), 10, 5).unwrap(),
            t_max_ms: 10_000,
            x0: BigUint::from(2u32),
            omega: 4,
        }
    }

    struct Harness {
        genesis: GenesisParams,
        genesis_block: Block,
        chain: EpochChain,
        registry: Registry,
        keypair: VrfKeyPair,
    }

    fn harness() -> Harness {
        let genesis = genesis_params();
        let genesis_block = build_genesis(&genesis, 0).unwrap();
        let mut chain = EpochChain::new(genesis.vdf.clone(), genesis.x0.clone());
        chain.extend_to(4, &CancelToken::never()).unwrap();
        let mut registry = Registry::new(genesis.vdf.clone(), genesis.t_max_ms);
        let keypair = vrf::keygen_with_bits(b"proposer", 128).unwrap();
        let pk = keypair.public.to_bytes();
        let seed = registration_seed(&pk, 0);
        registry.register(&pk, 0, &seed, 0).unwrap();
        Harness {
            genesis,
            genesis_block,
            chain,
            registry,
            keypair,
        }
    }

    fn claim(chain: &EpochChain, epoch: u64) -> EpochClaim {
        EpochClaim {
            index: epoch,
            value: chain.value(epoch).unwrap().clone(),
            proof: chain.proof(epoch).unwrap().clone(),
        }
    }

    fn propose_at(h: &Harness, epoch: u64, txs: &[Transaction], now: i64) -> Block {
        propose_block(
            &h.genesis_block,
            txs,
            &h.keypair,
            &claim(&h.chain, epoch),
            &Probability::one(),
            DEFAULT_BLOCK_TX_LIMIT,
            now,
        )
        .unwrap()
        .expect("selected at probability one")
    }

    fn ctx<'a>(h: &'a Harness, now: i64) -> ValidationContext<'a> {
        ValidationContext {
            registry: &h.registry,
            genesis: &h.genesis,
            epochs: &h.chain,
            now_ms: now,
            active_count: h.registry.active_count(now),
            timestamp_tolerance_ms: DEFAULT_TIMESTAMP_TOLERANCE_MS,
        }
    }

    #[test]
    fn empty_merkle_root_is_sha256_of_empty_input() {
        assert_eq!(
            hex::encode(merkle_root(&[])),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn single_leaf_is_its_own_root() {
        let tx = Transaction::new(b"hello".to_vec(), 7);
        assert_eq!(merkle_root(std::slice::from_ref(&tx)), tx.id);
    }

    #[test]
    fn two_leaves_combine_with_sha256() {
        let a = Transaction::new(b"a".to_vec(), 1);
        let b = Transaction::new(b"b".to_vec(), 2);
        let mut hasher = Sha256::new();
        hasher.update(a.id);
        hasher.update(b.id);
        let expected: [u8; 32] = hasher.finalize().into();
        assert_eq!(merkle_root(&[a, b]), expected);
    }

    #[test]
    fn odd_leaf_promotes_unchanged() {
        let txs: Vec<Transaction> = (0..3)
            .map(|i| Transaction::new(vec![i as u8], i))
            .collect();
        let mut hasher = Sha256::new();
        hasher.update(txs[0].id);
        hasher.update(txs[1].id);
        let left: [u8; 32] = hasher.finalize().into();
        let mut hasher = Sha256::new();
        hasher.update(left);
        hasher.update(txs[2].id);
        let expected: [u8; 32] = hasher.finalize().into();
        assert_eq!(merkle_root(&txs), expected);
    }

    #[test]
    fn transaction_id_binds_payload_and_timestamp() {
        let tx = Transaction::new(b"pay".to_vec(), 99);
        assert_eq!(tx.id, Transaction::compute_id(b"pay", 99));
        assert_ne!(tx.id, Transaction::compute_id(b"pay", 100));
    }

    #[test]
    fn genesis_block_shape() {
        let block = build_genesis(&genesis_params(), 1234).unwrap();
        assert_eq!(block.header.height, 0);
        assert_eq!(block.header.prev_hash, [0u8; 32]);
        assert!(block.transactions.is_empty());
        assert_eq!(block.epoch_index(), Some(0));
        let again = build_genesis(&genesis_params(), 1234).unwrap();
        assert_eq!(block.header.hash, again.header.hash);
        // params payload round-trips
        let parsed = block.genesis_params().unwrap();
        assert_eq!(parsed, genesis_params());
    }

    #[test]
    fn zero_omega_genesis_rejected() {
        let mut gp = genesis_params();
        gp.omega = 0;
        assert!(matches!(
            build_genesis(&gp, 0),
            Err(ChainError::InvalidGenesis(_))
        ));
    }

    #[test]
    fn honest_block_validates() {
        let h = harness();
        let txs: Vec<Transaction> = (0..5).map(|i| Transaction::new(vec![i], i as i64)).collect();
        let block = propose_at(&h, 1, &txs, 2000);
        assert_eq!(block.header.height, 1);
        assert_eq!(block.tx_count(), 5);
        assert_eq!(validate_block(&block, &h.genesis_block, &ctx(&h, 2100)), Ok(()));
    }

    #[test]
    fn proposal_respects_tx_limit_and_ordering() {
        let h = harness();
        // shuffled pool: later timestamps first
        let mut txs: Vec<Transaction> =
            (0..20).map(|i| Transaction::new(vec![i], (100 - i) as i64)).collect();
        txs.push(Transaction::new(vec![99], 1));
        let block = propose_block(
            &h.genesis_block,
            &txs,
            &h.keypair,
            &claim(&h.chain, 1),
            &Probability::one(),
            8,
            2000,
        )
        .unwrap()
        .unwrap();
        assert_eq!(block.tx_count(), 8);
        let stamps: Vec<i64> = block.transactions.iter().map(|t| t.timestamp).collect();
        let mut sorted = stamps.clone();
        sorted.sort_unstable();
        assert_eq!(stamps, sorted);
        assert_eq!(stamps[0], 1); // earliest first
    }

    #[test]
    fn zero_probability_never_selects() {
        let h = harness();
        let out = propose_block(
            &h.genesis_block,
            &[],
            &h.keypair,
            &claim(&h.chain, 1),
            &Probability::zero(),
            DEFAULT_BLOCK_TX_LIMIT,
            2000,
        )
        .unwrap();
        assert!(out.is_none());
    }

    #[test]
    fn stale_epoch_is_a_domain_error() {
        let h = harness();
        let block = propose_at(&h, 2, &[], 2000);
        // proposing on that block with the same epoch index fails
        let err = propose_block(
            &block,
            &[],
            &h.keypair,
            &claim(&h.chain, 2),
            &Probability::one(),
            DEFAULT_BLOCK_TX_LIMIT,
            4000,
        )
        .unwrap_err();
        assert!(matches!(err, ChainError::StaleEpoch { .. }));
    }

    #[test]
    fn validation_rejects_each_perturbation() {
        let h = harness();
        let txs: Vec<Transaction> = (0..3).map(|i| Transaction::new(vec![i], i as i64)).collect();
        let block = propose_at(&h, 1, &txs, 2000);
        let c = ctx(&h, 2100);

        let mut tampered = block.clone();
        tampered.header.timestamp += 1;
        assert_eq!(
            validate_block(&tampered, &h.genesis_block, &c),
            Err(InvalidReason::BadHeaderHash)
        );

        let mut wrong_link = block.clone();
        wrong_link.header.prev_hash[0] ^= 1;
        wrong_link.header.hash = wrong_link.header.compute_hash();
        assert_eq!(
            validate_block(&wrong_link, &h.genesis_block, &c),
            Err(InvalidReason::BadLinkage)
        );

        let mut dropped_tx = block.clone();
        dropped_tx.transactions.pop();
        dropped_tx.header.hash = dropped_tx.header.compute_hash();
        assert_eq!(
            validate_block(&dropped_tx, &h.genesis_block, &c),
            Err(InvalidReason::BadMerkleRoot)
        );

        let mut forged_tx = block.clone();
        forged_tx.transactions[0].payload = b"swapped".to_vec();
        // keep the merkle root consistent with the forged id
        forged_tx.transactions[0].id = [7u8; 32];
        forged_tx.header.merkle_root = merkle_root(&forged_tx.transactions);
        forged_tx.header.hash = forged_tx.header.compute_hash();
        assert_eq!(
            validate_block(&forged_tx, &h.genesis_block, &c),
            Err(InvalidReason::BadTransaction)
        );

        let mut garbage_params = block.clone();
        garbage_params.header.params = b"not json".to_vec();
        garbage_params.header.hash = garbage_params.header.compute_hash();
        assert_eq!(
            validate_block(&garbage_params, &h.genesis_block, &c),
            Err(InvalidReason::MalformedParams)
        );

        let mut bad_epoch = block.regular_params().unwrap();
        bad_epoch.epoch_proof += BigUint::one();
        let mut bad_epoch_block = block.clone();
        bad_epoch_block.header.params = bad_epoch.to_bytes();
        bad_epoch_block.header.hash = bad_epoch_block.header.compute_hash();
        assert_eq!(
            validate_block(&bad_epoch_block, &h.genesis_block, &c),
            Err(InvalidReason::BadEpochProof)
        );

        let mut bad_vrf = block.regular_params().unwrap();
        bad_vrf.vrf_proof[3] ^= 1;
        let mut bad_vrf_block = block.clone();
        bad_vrf_block.header.params = bad_vrf.to_bytes();
        bad_vrf_block.header.hash = bad_vrf_block.header.compute_hash();
        assert_eq!(
            validate_block(&bad_vrf_block, &h.genesis_block, &c),
            Err(InvalidReason::BadVrf)
        );

        let mut far_future = block.clone();
        far_future.header.timestamp = 10_000_000;
        far_future.header.hash = far_future.header.compute_hash();
        assert_eq!(
            validate_block(&far_future, &h.genesis_block, &c),
            Err(InvalidReason::BadTimestamp)
        );
    }

    #[test]
    fn expired_proposer_rejected() {
        let h = harness();
        let block = propose_at(&h, 1, &[], 2000);
        // validate long after the proposer's registration went stale
        let stale_now = h.genesis.t_max_ms + 5000;
        let mut c = ctx(&h, stale_now);
        c.timestamp_tolerance_ms = i64::MAX / 2; // isolate the identity check
        assert_eq!(
            validate_block(&block, &h.genesis_block, &c),
            Err(InvalidReason::ExpiredIdentity)
        );
    }

    #[test]
    fn unknown_epoch_rejected() {
        let h = harness();
        let block = propose_at(&h, 4, &[], 2000);
        struct Empty;
        impl EpochSource for Empty {
            fn epoch_input(&self, _epoch: u64) -> Option<BigUint> {
                None
            }
        }
        let c = ValidationContext {
            registry: &h.registry,
            genesis: &h.genesis,
            epochs: &Empty,
            now_ms: 2100,
            active_count: 1,
            timestamp_tolerance_ms: DEFAULT_TIMESTAMP_TOLERANCE_MS,
        };
        assert_eq!(
            validate_block(&block, &h.genesis_block, &c),
            Err(InvalidReason::UnknownEpoch)
        );
    }

    #[test]
    fn validation_is_total_on_arbitrary_bytes() {
        let h = harness();
        let c = ctx(&h, 2100);
        // a "block" assembled from garbage never panics
        let mut header = BlockHeader {
            timestamp: -5,
            prev_hash: [9u8; 32],
            hash: [0u8; 32],
            merkle_root: [1u8; 32],
            height: 3,
            public_key: vec![0xff; 7],
            params: vec![0x00, 0xfe, 0x01],
        };
        header.hash = header.compute_hash();
        let garbage = Block {
            header,
            transactions: vec![Transaction {
                id: [4u8; 32],
                payload: vec![1, 2, 3],
                timestamp: -9,
            }],
        };
        assert!(validate_block(&garbage, &h.genesis_block, &c).is_err());
    }

    #[test]
    fn self_consistency_across_epochs() {
        let h = harness();
        let mut parent = h.genesis_block.clone();
        for epoch in 1..=4 {
            let block = propose_block(
                &parent,
                &[],
                &h.keypair,
                &claim(&h.chain, epoch),
                &Probability::one(),
                DEFAULT_BLOCK_TX_LIMIT,
                epoch as i64 * 2000,
            )
            .unwrap()
            .unwrap();
            assert_eq!(
                validate_block(&block, &parent, &ctx(&h, epoch as i64 * 2000 + 100)),
                Ok(())
            );
            parent = block;
        }
    }
}
