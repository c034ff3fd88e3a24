//! Verifiable random function: a deterministic unique signature over the
//! message serves as the proof, and the pseudorandom value is the SHA-256
//! digest of that proof.
//!
//! The signature is full-domain-hash RSA: the message digest is expanded to
//! the modulus width, and the proof is its e-th root, which is unique for a
//! fixed public key. Anyone holding the public key checks the root and
//! recomputes the value, so no secret key admits two distinct valid outputs
//! for one message.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::numutil;

/// Bit width of the pseudorandom value.
pub const RANDLEN: u32 = 256;

/// Default modulus width for generated keys. Desk-scale: the simulator
/// overrides this downward for bulk identity generation.
pub const DEFAULT_KEY_BITS: u32 = 512;

const PUBLIC_EXPONENT: u32 = 65537;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VrfError {
    #[error("seed must be nonempty")]
    EmptySeed,
    #[error("key width must be at least 64 bits, got {0}")]
    KeyTooSmall(u32),
    #[error("key generation failed after bounded retries")]
    KeygenFailure,
    #[error("malformed secret key")]
    MalformedSecretKey,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VrfPublicKey {
    modulus: BigUint,
    exponent: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VrfSecretKey {
    modulus: BigUint,
    exponent: BigUint,
    private_exponent: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VrfKeyPair {
    pub public: VrfPublicKey,
    pub secret: VrfSecretKey,
}

/// A pseudorandom value in [0, 2^randlen) with its proof.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VrfOutput {
    pub value: BigUint,
    pub proof: Vec<u8>,
    pub randlen: u32,
}

impl VrfPublicKey {
    /// Length-prefixed (modulus, exponent) encoding; the byte string used as
    /// a node identity in registries and block headers.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.modulus.to_bytes_be();
        let e = self.exponent.to_bytes_be();
        let mut out = Vec::with_capacity(8 + n.len() + e.len());
        out.extend_from_slice(&(n.len() as u32).to_be_bytes());
        out.extend_from_slice(&n);
        out.extend_from_slice(&(e.len() as u32).to_be_bytes());
        out.extend_from_slice(&e);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        let mut cursor = bytes;
        let mut take = |dest: &mut Vec<u8>| -> Option<()> {
            if cursor.len() < 4 {
                return None;
            }
            let len = u32::from_be_bytes(cursor[..4].try_into().unwrap()) as usize;
            cursor = &cursor[4..];
            if cursor.len() < len {
                return None;
            }
            dest.extend_from_slice(&cursor[..len]);
            cursor = &cursor[len..];
            Some(())
        };
        let mut n = Vec::new();
        let mut e = Vec::new();
        take(&mut n)?;
        take(&mut e)?;
        if !cursor.is_empty() {
            return None;
        }
        Some(Self {
            modulus: BigUint::from_bytes_be(&n),
            exponent: BigUint::from_bytes_be(&e),
        })
    }

    pub fn modulus_bytes(&self) -> usize {
        (self.modulus.bits() as usize).div_ceil(8)
    }
}

/// Deterministic keypair from a seed at the default key width.
pub fn keygen(seed: &[u8]) -> Result<VrfKeyPair, VrfError> {
    keygen_with_bits(seed, DEFAULT_KEY_BITS)
}

/// Deterministic keypair from a seed with an explicit modulus width.
pub fn keygen_with_bits(seed: &[u8], bits: u32) -> Result<VrfKeyPair, VrfError> {
    if seed.is_empty() {
        return Err(VrfError::EmptySeed);
    }
    if bits < 64 {
        return Err(VrfError::KeyTooSmall(bits));
    }
    let mut hasher = Sha256::new();
    hasher.update(b"povf-vrf-keygen");
    hasher.update(seed);
    let mut rng = ChaCha20Rng::from_seed(hasher.finalize().into());

    let e = BigUint::from(PUBLIC_EXPONENT);
    let one = BigUint::from(1u32);
    let half = (bits as u64) / 2;
    for _ in 0..64 {
        let p = numutil::gen_prime(half, &mut rng, 100_000).ok_or(VrfError::KeygenFailure)?;
        let q = numutil::gen_prime(half, &mut rng, 100_000).ok_or(VrfError::KeygenFailure)?;
        if p == q {
            continue;
        }
        let lambda = (&p - &one).lcm(&(&q - &one));
        let Some(d) = numutil::modinv(&e, &lambda) else {
            continue;
        };
        let n = &p * &q;
        return Ok(VrfKeyPair {
            public: VrfPublicKey {
                modulus: n.clone(),
                exponent: e.clone(),
            },
            secret: VrfSecretKey {
                modulus: n,
                exponent: e,
                private_exponent: d,
            },
        });
    }
    Err(VrfError::KeygenFailure)
}

/// Full-domain hash: expand SHA-256 blocks over (message, counter) to the
/// modulus width, then reduce.
fn domain_hash(message: &[u8], modulus: &BigUint) -> BigUint {
    let target = (modulus.bits() as usize).div_ceil(8) + 8;
    let mut expanded = Vec::with_capacity(target + 32);
    let mut counter: u32 = 0;
    while expanded.len() < target {
        let mut hasher = Sha256::new();
        hasher.update(b"povf-vrf-fdh");
        hasher.update((message.len() as u64).to_be_bytes());
        hasher.update(message);
        hasher.update(counter.to_be_bytes());
        expanded.extend_from_slice(&hasher.finalize());
        counter += 1;
    }
    expanded.truncate(target);
    BigUint::from_bytes_be(&expanded) % modulus
}

fn value_from_proof(proof: &[u8]) -> BigUint {
    let mut hasher = Sha256::new();
    hasher.update(b"povf-vrf-value");
    hasher.update(proof);
    BigUint::from_bytes_be(&hasher.finalize())
}

/// Deterministic evaluation: proof = FDH(m)^d mod n, value = digest(proof).
pub fn eval(secret: &VrfSecretKey, message: &[u8]) -> Result<VrfOutput, VrfError> {
    if secret.modulus.is_zero() || secret.private_exponent.is_zero() {
        return Err(VrfError::MalformedSecretKey);
    }
    let digest = domain_hash(message, &secret.modulus);
    let signature = digest.modpow(&secret.private_exponent, &secret.modulus);
    let width = (secret.modulus.bits() as usize).div_ceil(8);
    let mut proof = vec![0u8; width];
    let sig_bytes = signature.to_bytes_be();
    proof[width - sig_bytes.len()..].copy_from_slice(&sig_bytes);
    Ok(VrfOutput {
        value: value_from_proof(&proof),
        proof,
        randlen: RANDLEN,
    })
}

/// True iff the output was produced by `eval` under the secret key matching
/// `public` on `message`. Total: malformed input returns false.
pub fn verify(public: &VrfPublicKey, message: &[u8], output: &VrfOutput) -> bool {
    if output.randlen != RANDLEN || public.modulus.is_zero() {
        return false;
    }
    if output.proof.len() != public.modulus_bytes() {
        return false;
    }
    let signature = BigUint::from_bytes_be(&output.proof);
    if signature >= public.modulus {
        return false;
    }
    let recovered = signature.modpow(&public.exponent, &public.modulus);
    if recovered != domain_hash(message, &public.modulus) {
        return false;
    }
    value_from_proof(&output.proof) == output.value
}
