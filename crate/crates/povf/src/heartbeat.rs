//! The heartbeat identity registry: nodes register with a timestamped hash
//! seed, then keep their identity alive by broadcasting successive VDF chain
//! outputs. An identity whose latest update is older than `t_max` is invalid,
//! so holding k identities costs k concurrent VDF chains.

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{HashMap, HashSet};
use thiserror::Error;

use crate::vdf::{self, VdfParams};

/// Default acceptance window for registration timestamps: twice the clock
/// sync bound.
pub const DEFAULT_REGISTRATION_WINDOW_MS: i64 = 2000;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    #[error("seed does not match SHA-256(pk || st)")]
    HashMismatch,
    #[error("registration timestamp outside the acceptance window")]
    StaleTimestamp,
    #[error("this (pk, st) seed was already used")]
    DuplicateSeed,
    #[error("identity is already registered and active")]
    AlreadyRegistered,
    #[error("identity is not registered")]
    UnknownIdentity,
    #[error("identity missed its update deadline")]
    ExpiredIdentity,
    #[error("VDF chain proof does not verify")]
    BadProof,
}

/// Per-identity state: the tuple (pk, x', st, timestamp, x).
#[derive(Debug, Clone)]
pub struct RegistryEntry {
    pub public_key: Vec<u8>,
    pub seed: [u8; 32],
    pub registered_at: i64,
    pub last_update: i64,
    pub latest: BigUint,
    pub chain_length: u64,
}

/// The global active-identity list, as seen by one node.
#[derive(Debug, Clone)]
pub struct Registry {
    entries: HashMap<Vec<u8>, RegistryEntry>,
    seen_seeds: HashSet<(Vec<u8>, i64)>,
    params: VdfParams,
    t_max: i64,
    registration_window: i64,
}

/// The broadcast registration tuple (pk, x', st) as a JSON object with hex
/// fields; the gossip and trace-log wire format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationMessage {
    pub pk: String,
    pub x_prime: String,
    pub st: i64,
}

impl RegistrationMessage {
    pub fn new(public_key: &[u8], seed: &[u8; 32], st: i64) -> Self {
        Self {
            pk: hex::encode(public_key),
            x_prime: hex::encode(seed),
            st,
        }
    }

    pub fn public_key(&self) -> Option<Vec<u8>> {
        hex::decode(&self.pk).ok()
    }

    pub fn seed(&self) -> Option<[u8; 32]> {
        hex::decode(&self.x_prime).ok()?.try_into().ok()
    }
}

/// The broadcast heartbeat tuple (pk, x_i, pi_i) as a JSON object with hex
/// fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeartbeatMessage {
    pub pk: String,
    pub x: String,
    pub pi: String,
}

impl HeartbeatMessage {
    pub fn new(public_key: &[u8], value: &BigUint, proof: &BigUint) -> Self {
        Self {
            pk: hex::encode(public_key),
            x: value.to_str_radix(16),
            pi: proof.to_str_radix(16),
        }
    }

    pub fn public_key(&self) -> Option<Vec<u8>> {
        hex::decode(&self.pk).ok()
    }

    pub fn value(&self) -> Option<BigUint> {
        BigUint::parse_bytes(self.x.as_bytes(), 16)
    }

    pub fn proof(&self) -> Option<BigUint> {
        BigUint::parse_bytes(self.pi.as_bytes(), 16)
    }
}

/// x' = SHA-256(pk || st), st encoded as 8 big-endian bytes.
pub fn registration_seed(public_key: &[u8], st: i64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(public_key);
    hasher.update(st.to_be_bytes());
    hasher.finalize().into()
}

/// The VDF input derived from a registration seed, reduced into the group.
pub fn seed_group_element(seed: &[u8; 32], params: &VdfParams) -> BigUint {
    vdf::to_group_element(&BigUint::from_bytes_be(seed), params.modulus())
}

impl Registry {
    pub fn new(params: VdfParams, t_max: i64) -> Self {
        Self::with_registration_window(params, t_max, DEFAULT_REGISTRATION_WINDOW_MS)
    }

    pub fn with_registration_window(params: VdfParams, t_max: i64, window: i64) -> Self {
        Self {
            entries: HashMap::new(),
            seen_seeds: HashSet::new(),
            params,
            t_max,
            registration_window: window,
        }
    }

    pub fn params(&self) -> &VdfParams {
        &self.params
    }

    pub fn t_max(&self) -> i64 {
        self.t_max
    }

    /// Handles a broadcast tuple (pk, x', st). Accepts a fresh identity whose
    /// seed hashes correctly and whose timestamp is inside the window; stores
    /// it with the chain position at the seed element.
    pub fn register(
        &mut self,
        public_key: &[u8],
        st: i64,
        x_prime: &[u8; 32],
        now: i64,
    ) -> Result<(), RejectReason> {
        if *x_prime != registration_seed(public_key, st) {
            return Err(RejectReason::HashMismatch);
        }
        if (st - now).abs() > self.registration_window {
            return Err(RejectReason::StaleTimestamp);
        }
        let seed_key = (public_key.to_vec(), st);
        if self.seen_seeds.contains(&seed_key) {
            return Err(RejectReason::DuplicateSeed);
        }
        if let Some(existing) = self.entries.get(public_key) {
            if now - existing.last_update <= self.t_max {
                return Err(RejectReason::AlreadyRegistered);
            }
            // expired identity re-registering with a fresh seed
        }
        self.seen_seeds.insert(seed_key);
        self.entries.insert(
            public_key.to_vec(),
            RegistryEntry {
                public_key: public_key.to_vec(),
                seed: *x_prime,
                registered_at: st,
                last_update: now,
                latest: seed_group_element(x_prime, &self.params),
                chain_length: 0,
            },
        );
        Ok(())
    }

    /// Handles a broadcast tuple (pk, x_i, pi_i): the chain output must prove
    /// one heartbeat step from the identity's current position. On accept the
    /// timestamp and chain position advance.
    pub fn process_heartbeat(
        &mut self,
        public_key: &[u8],
        x: &BigUint,
        proof: &BigUint,
        now: i64,
    ) -> Result<(), RejectReason> {
        self.process_heartbeat_with(public_key, x, proof, now, |params, prev| {
            vdf::verify(params, prev, x, proof, params.heartbeat_rounds())
        })
    }

    /// `process_heartbeat` with the proof check supplied by the caller, which
    /// receives the chain position the output must extend. Lets a simulator
    /// memoize verification of one broadcast across many receivers; the
    /// verifier must be equivalent to `vdf::verify` at heartbeat rounds.
    pub fn process_heartbeat_with(
        &mut self,
        public_key: &[u8],
        x: &BigUint,
        _proof: &BigUint,
        now: i64,
        verify: impl FnOnce(&VdfParams, &BigUint) -> bool,
    ) -> Result<(), RejectReason> {
        let t_max = self.t_max;
        let entry = self
            .entries
            .get_mut(public_key)
            .ok_or(RejectReason::UnknownIdentity)?;
        if now - entry.last_update > t_max {
            return Err(RejectReason::ExpiredIdentity);
        }
        if !verify(&self.params, &entry.latest) {
            return Err(RejectReason::BadProof);
        }
        entry.last_update = now;
        entry.latest = x.clone();
        entry.chain_length += 1;
        Ok(())
    }

    /// True iff the identity is registered and updated within t_max
    /// (boundary inclusive).
    pub fn is_active(&self, public_key: &[u8], now: i64) -> bool {
        self.entries
            .get(public_key)
            .is_some_and(|e| now - e.last_update <= self.t_max)
    }

    /// Number of active identities; the `n` feeding the dynamic probability.
    pub fn active_count(&self, now: i64) -> u64 {
        self.entries
            .values()
            .filter(|e| now - e.last_update <= self.t_max)
            .count() as u64
    }

    pub fn entry(&self, public_key: &[u8]) -> Option<&RegistryEntry> {
        self.entries.get(public_key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vdf::CancelToken;

    fn test_params() -> VdfParams {
        VdfParams::new(BigUint::from(101u32), BigUint::from(41u32), 10, 5).unwrap()
    }

    fn registry() -> Registry {
        Registry::new(test_params(), 1000)
    }

    #[test]
    fn honest_registration_accepted() {
        let mut reg = registry();
        let seed = registration_seed(b"pk-a", 500);
        assert_eq!(reg.register(b"pk-a", 500, &seed, 500), Ok(()));
        assert!(reg.is_active(b"pk-a", 500));
        assert_eq!(reg.entry(b"pk-a").unwrap().chain_length, 0);
    }

    #[test]
    fn wrong_seed_hash_rejected() {
        let mut reg = registry();
        let mut seed = registration_seed(b"pk-a", 500);
        seed[7] ^= 1;
        assert_eq!(
            reg.register(b"pk-a", 500, &seed, 500),
            Err(RejectReason::HashMismatch)
        );
    }

    #[test]
    fn stale_timestamp_rejected() {
        let mut reg = registry();
        let seed = registration_seed(b"pk-a", 0);
        assert_eq!(
            reg.register(b"pk-a", 0, &seed, 5000),
            Err(RejectReason::StaleTimestamp)
        );
    }

    #[test]
    fn replayed_registration_rejected() {
        // re-registering the same (pk, st) after expiry is the replay attack
        let mut reg = registry();
        let seed = registration_seed(b"pk-a", 500);
        reg.register(b"pk-a", 500, &seed, 500).unwrap();
        // identity expires...
        assert!(!reg.is_active(b"pk-a", 2000));
        // window would allow st=500 at now=501..2500, but the seed is burned
        assert_eq!(
            reg.register(b"pk-a", 500, &seed, 2000),
            Err(RejectReason::DuplicateSeed)
        );
    }

    #[test]
    fn active_identity_cannot_reregister() {
        let mut reg = registry();
        let seed = registration_seed(b"pk-a", 500);
        reg.register(b"pk-a", 500, &seed, 500).unwrap();
        let seed2 = registration_seed(b"pk-a", 600);
        assert_eq!(
            reg.register(b"pk-a", 600, &seed2, 600),
            Err(RejectReason::AlreadyRegistered)
        );
    }

    #[test]
    fn expired_identity_reregisters_with_fresh_seed() {
        let mut reg = registry();
        let seed = registration_seed(b"pk-a", 500);
        reg.register(b"pk-a", 500, &seed, 500).unwrap();
        let fresh = registration_seed(b"pk-a", 3000);
        assert_eq!(reg.register(b"pk-a", 3000, &fresh, 3000), Ok(()));
        assert!(reg.is_active(b"pk-a", 3000));
    }

    fn beat(reg: &Registry, pk: &[u8]) -> (BigUint, BigUint) {
        let entry = reg.entry(pk).unwrap();
        let out = vdf::eval(
            reg.params(),
            &entry.latest,
            reg.params().heartbeat_rounds(),
            &CancelToken::never(),
        )
        .unwrap();
        (out.output, out.proof)
    }

    #[test]
    fn chained_heartbeats_accepted() {
        let mut reg = registry();
        let seed = registration_seed(b"pk-a", 0);
        reg.register(b"pk-a", 0, &seed, 0).unwrap();
        for i in 1..=5 {
            let (x, pi) = beat(&reg, b"pk-a");
            let now = i * 800;
            assert_eq!(reg.process_heartbeat(b"pk-a", &x, &pi, now), Ok(()));
            assert_eq!(reg.entry(b"pk-a").unwrap().chain_length, i as u64);
            assert_eq!(reg.entry(b"pk-a").unwrap().last_update, now);
        }
    }

    #[test]
    fn late_heartbeat_rejected() {
        let mut reg = registry();
        let seed = registration_seed(b"pk-a", 0);
        reg.register(b"pk-a", 0, &seed, 0).unwrap();
        let (x, pi) = beat(&reg, b"pk-a");
        assert_eq!(
            reg.process_heartbeat(b"pk-a", &x, &pi, 1001),
            Err(RejectReason::ExpiredIdentity)
        );
    }

    #[test]
    fn replayed_chain_element_rejected() {
        let mut reg = registry();
        let seed = registration_seed(b"pk-a", 0);
        reg.register(b"pk-a", 0, &seed, 0).unwrap();
        let (x1, pi1) = beat(&reg, b"pk-a");
        reg.process_heartbeat(b"pk-a", &x1, &pi1, 500).unwrap();
        let (x2, pi2) = beat(&reg, b"pk-a");
        reg.process_heartbeat(b"pk-a", &x2, &pi2, 900).unwrap();
        // replaying the first element no longer verifies against latest
        assert_eq!(
            reg.process_heartbeat(b"pk-a", &x1, &pi1, 1000),
            Err(RejectReason::BadProof)
        );
    }

    #[test]
    fn unknown_identity_rejected() {
        let mut reg = registry();
        assert_eq!(
            reg.process_heartbeat(b"ghost", &BigUint::from(2u32), &BigUint::from(2u32), 0),
            Err(RejectReason::UnknownIdentity)
        );
    }

    #[test]
    fn activity_boundary_is_inclusive() {
        let mut reg = registry();
        let seed = registration_seed(b"pk-a", 0);
        reg.register(b"pk-a", 0, &seed, 0).unwrap();
        assert!(reg.is_active(b"pk-a", 1000)); // exactly t_max later
        assert!(!reg.is_active(b"pk-a", 1001));
    }

    #[test]
    fn active_count_skips_expired() {
        let mut reg = registry();
        for (pk, st) in [(b"a" as &[u8], 0i64), (b"b", 0), (b"c", 0)] {
            let seed = registration_seed(pk, st);
            reg.register(pk, st, &seed, st).unwrap();
        }
        for (pk, st) in [(b"d" as &[u8], 900i64), (b"e", 900)] {
            let seed = registration_seed(pk, st);
            reg.register(pk, st, &seed, 900).unwrap();
        }
        // at t=1500 the first three are expired, the last two active
        assert_eq!(reg.active_count(1500), 2);
        assert_eq!(reg.active_count(900), 5);
        assert_eq!(Registry::new(test_params(), 1000).active_count(0), 0);
    }

    #[test]
    fn liveness_over_a_thousand_rounds() {
        // heartbeats at a cadence below t_max never expire
        let mut reg = registry();
        let seed = registration_seed(b"pk-a", 0);
        reg.register(b"pk-a", 0, &seed, 0).unwrap();
        for i in 1..=1000i64 {
            let (x, pi) = beat(&reg, b"pk-a");
            assert_eq!(reg.process_heartbeat(b"pk-a", &x, &pi, i * 700), Ok(()));
        }
        assert!(reg.is_active(b"pk-a", 1000 * 700));
    }

    #[test]
    fn gossip_tuples_round_trip_as_json() {
        let mut reg = registry();
        let seed = registration_seed(b"pk-a", 0);
        reg.register(b"pk-a", 0, &seed, 0).unwrap();
        let msg = RegistrationMessage::new(b"pk-a", &seed, 0);
        let json = serde_json::to_string(&msg).unwrap();
        let parsed: RegistrationMessage = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.public_key().unwrap(), b"pk-a");
        assert_eq!(parsed.seed().unwrap(), seed);

        let (x, pi) = beat(&reg, b"pk-a");
        let msg = HeartbeatMessage::new(b"pk-a", &x, &pi);
        let json = serde_json::to_string(&msg).unwrap();
        let parsed: HeartbeatMessage = serde_json::from_str(&json).unwrap();
        let mut other = registry();
        let seed2 = registration_seed(b"pk-a", 0);
        other.register(b"pk-a", 0, &seed2, 0).unwrap();
        assert_eq!(
            other.process_heartbeat(
                &parsed.public_key().unwrap(),
                &parsed.value().unwrap(),
                &parsed.proof().unwrap(),
                500
            ),
            Ok(())
        );
    }

    #[test]
    fn compute_bound_limits_sustained_identities() {
        // an adversary with c compute units advancing k > c chains round-robin
        // keeps at most c identities alive past one t_max window
        let mut reg = registry();
        let (k, c) = (8usize, 2usize);
        let pks: Vec<Vec<u8>> = (0..k).map(|i| format!("sybil-{i}").into_bytes()).collect();
        for pk in &pks {
            let seed = registration_seed(pk, 0);
            reg.register(pk, 0, &seed, 0).unwrap();
        }
        // each unit sustains one chain per heartbeat period (400ms here);
        // dedicating the units to the first c chains is the adversary's best play
        let mut now = 0;
        while now <= 3000 {
            now += 400;
            for pk in pks.iter().take(c) {
                let (x, pi) = beat(&reg, pk);
                reg.process_heartbeat(pk, &x, &pi, now).unwrap();
            }
        }
        let alive = pks.iter().filter(|pk| reg.is_active(pk, now)).count();
        assert_eq!(alive, c);
    }
}
