//! Wesolowski-style verifiable delay function over a multiplicative integer
//! group.
//!
//! Evaluation performs `rounds` sequential modular squarings of the input
//! while maintaining the proof accumulator in the same pass: per round, with
//! remainder state `r` starting at 1 and proof state `pi` starting at 1,
//!
//! ```text
//! b  = floor(2r / l)
//! r  = 2r mod l
//! pi = pi^2 * x^b mod N
//! x  = x^2 mod N
//! ```
//!
//! After `T` rounds this leaves `y = x^(2^T) mod N` and
//! `pi = x^floor(2^T / l) mod N`. Verification recomputes
//! `r = 2^T mod l` and accepts iff `y == pi^l * x^r mod N`, which costs
//! O(log T + log N) modular multiplications regardless of `T`.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use thiserror::Error;

use crate::numutil;

/// How often the evaluation loop polls the cancellation token.
const CANCEL_CHECK_INTERVAL: u64 = 1 << 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VdfError {
    #[error("modulus must exceed 3, got {0}")]
    ModulusTooSmall(BigUint),
    #[error("proof parameter {0} is not prime")]
    ProofParamNotPrime(BigUint),
    #[error("round count must be at least 1")]
    ZeroRounds,
    #[error("input {value} outside the group range (1, {modulus})")]
    InputOutOfRange { value: BigUint, modulus: BigUint },
    #[error("input {value} shares a factor with the modulus")]
    InputNotCoprime { value: BigUint },
    #[error("prime generation failed after bounded retries")]
    SetupFailure,
    #[error("evaluation cancelled after {rounds_completed} rounds")]
    Cancelled { rounds_completed: u64 },
}

/// Public parameters: group modulus `N`, proof prime `l`, epoch round count
/// `T`, and heartbeat round count `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VdfParams {
    modulus: BigUint,
    proof_prime: BigUint,
    epoch_rounds: u64,
    heartbeat_rounds: u64,
}

impl VdfParams {
    pub fn new(
        modulus: BigUint,
        proof_prime: BigUint,
        epoch_rounds: u64,
        heartbeat_rounds: u64,
    ) -> Result<Self, VdfError> {
        if modulus <= BigUint::from(3u32) {
            return Err(VdfError::ModulusTooSmall(modulus));
        }
        if epoch_rounds == 0 || heartbeat_rounds == 0 {
            return Err(VdfError::ZeroRounds);
        }
        let mut rng = ChaCha20Rng::seed_from_u64(0x70f5);
        if !numutil::is_prime(&proof_prime, 24, &mut rng) {
            return Err(VdfError::ProofParamNotPrime(proof_prime));
        }
        Ok(Self {
            modulus,
            proof_prime,
            epoch_rounds,
            heartbeat_rounds,
        })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn proof_prime(&self) -> &BigUint {
        &self.proof_prime
    }

    /// Squaring rounds per consensus epoch (`T`).
    pub fn epoch_rounds(&self) -> u64 {
        self.epoch_rounds
    }

    /// Squaring rounds per heartbeat step (`t`).
    pub fn heartbeat_rounds(&self) -> u64 {
        self.heartbeat_rounds
    }
}

/// An evaluation result together with its proof.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VdfOutput {
    pub input: BigUint,
    pub output: BigUint,
    pub proof: BigUint,
    pub rounds: u64,
}

/// Cooperative cancellation handle shared with a running evaluation.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    /// A token that never fires; for callers that do not need cancellation.
    pub fn never() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::Relaxed)
    }
}

/// Generates public parameters deterministically from a seed: `N` is a
/// product of two distinct primes of `security_bits / 2` bits each (factors
/// discarded), `l` is a prime of `min(security_bits, 128)` bits.
pub fn setup(
    security_bits: u32,
    epoch_rounds: u64,
    heartbeat_rounds: u64,
    rng_seed: &[u8],
) -> Result<VdfParams, VdfError> {
    assert!(security_bits >= 16, "security_bits must be at least 16");
    assert!(!rng_seed.is_empty(), "rng_seed must be nonempty");
    let mut hasher = Sha256::new();
    hasher.update(b"povf-vdf-setup");
    hasher.update(rng_seed);
    let mut rng = ChaCha20Rng::from_seed(hasher.finalize().into());

    let half = (security_bits as u64) / 2;
    let p = numutil::gen_prime(half, &mut rng, 100_000).ok_or(VdfError::SetupFailure)?;
    let mut q = numutil::gen_prime(half, &mut rng, 100_000).ok_or(VdfError::SetupFailure)?;
    let mut guard = 0;
    while q == p {
        q = numutil::gen_prime(half, &mut rng, 100_000).ok_or(VdfError::SetupFailure)?;
        guard += 1;
        if guard > 64 {
            return Err(VdfError::SetupFailure);
        }
    }
    let proof_bits = security_bits.min(128) as u64;
    let proof_prime =
        numutil::gen_prime(proof_bits, &mut rng, 100_000).ok_or(VdfError::SetupFailure)?;
    VdfParams::new(&p * &q, proof_prime, epoch_rounds, heartbeat_rounds)
}

fn check_eval_input(params: &VdfParams, x: &BigUint) -> Result<(), VdfError> {
    if x <= &BigUint::one() || x >= &params.modulus {
        return Err(VdfError::InputOutOfRange {
            value: x.clone(),
            modulus: params.modulus.clone(),
        });
    }
    if !x.gcd(&params.modulus).is_one() {
        return Err(VdfError::InputNotCoprime { value: x.clone() });
    }
    Ok(())
}

/// Evaluates `x^(2^rounds) mod N` with the proof computed in the same pass.
/// The token is polled every 2^10 rounds; cancellation reports how many
/// rounds completed.
pub fn eval(
    params: &VdfParams,
    x: &BigUint,
    rounds: u64,
    cancel: &CancelToken,
) -> Result<VdfOutput, VdfError> {
    if rounds == 0 {
        return Err(VdfError::ZeroRounds);
    }
    check_eval_input(params, x)?;
    let (output, proof) = match (
        numutil::to_u64(&params.modulus),
        numutil::to_u64(&params.proof_prime),
        numutil::to_u64(x),
    ) {
        (Some(n), Some(l), Some(x_small)) => {
            let (y, pi) = eval_loop_u64(n, l, x_small, rounds, cancel)?;
            (BigUint::from(y), BigUint::from(pi))
        }
        _ => eval_loop_big(&params.modulus, &params.proof_prime, x, rounds, cancel)?,
    };
    Ok(VdfOutput {
        input: x.clone(),
        output,
        proof,
        rounds,
    })
}

fn eval_loop_u64(
    modulus: u64,
    proof_prime: u64,
    x0: u64,
    rounds: u64,
    cancel: &CancelToken,
) -> Result<(u64, u64), VdfError> {
    let mut x = x0;
    let mut pi: u64 = 1;
    let mut r: u64 = 1;
    for round in 0..rounds {
        if round % CANCEL_CHECK_INTERVAL == 0 && cancel.is_cancelled() {
            return Err(VdfError::Cancelled {
                rounds_completed: round,
            });
        }
        // b = floor(2r/l) is 0 or 1 since r < l before doubling.
        let doubled = (r as u128) << 1;
        let b_is_one = doubled >= proof_prime as u128;
        r = if b_is_one {
            (doubled - proof_prime as u128) as u64
        } else {
            doubled as u64
        };
        pi = numutil::mulmod_u64(pi, pi, modulus);
        if b_is_one {
            pi = numutil::mulmod_u64(pi, x0, modulus);
        }
        x = numutil::mulmod_u64(x, x, modulus);
    }
    Ok((x, pi))
}

fn eval_loop_big(
    modulus: &BigUint,
    proof_prime: &BigUint,
    x0: &BigUint,
    rounds: u64,
    cancel: &CancelToken,
) -> Result<(BigUint, BigUint), VdfError> {
    let mut x = x0.clone();
    let mut pi = BigUint::one();
    let mut r = BigUint::one();
    for round in 0..rounds {
        if round % CANCEL_CHECK_INTERVAL == 0 && cancel.is_cancelled() {
            return Err(VdfError::Cancelled {
                rounds_completed: round,
            });
        }
        r <<= 1;
        // b = floor(2r/l) is 0 or 1 since r < l before doubling.
        let b_is_one = r >= *proof_prime;
        if b_is_one {
            r -= proof_prime;
        }
        pi = &pi * &pi % modulus;
        if b_is_one {
            pi = pi * x0 % modulus;
        }
        x = &x * &x % modulus;
    }
    Ok((x, pi))
}

/// Checks `y == pi^l * x_prev^(2^rounds mod l) mod N`. Total over arbitrary
/// inputs: anything malformed simply returns false.
pub fn verify(params: &VdfParams, x_prev: &BigUint, y: &BigUint, pi: &BigUint, rounds: u64) -> bool {
    if rounds == 0 {
        return false;
    }
    let n = &params.modulus;
    let in_domain = |v: &BigUint| !v.is_zero() && v < n;
    if !in_domain(x_prev) || !in_domain(y) || !in_domain(pi) {
        return false;
    }
    let two = BigUint::from(2u32);
    let r = two.modpow(&BigUint::from(rounds), &params.proof_prime);
    let h = pi.modpow(&params.proof_prime, n) * x_prev.modpow(&r, n) % n;
    h == *y
}

/// Maps an arbitrary integer (e.g. a 256-bit digest) into the evaluation
/// domain [2, N-2], skipping the degenerate residues 0, 1, and N-1.
pub fn to_group_element(value: &BigUint, modulus: &BigUint) -> BigUint {
    let span = modulus - BigUint::from(3u32);
    value % span + BigUint::from(2u32)
}

/// The epoch chain x_0 -> x_1 -> x_2 ... obtained by feeding each epoch's
/// output back in as the next input. Deterministic: independent evaluators
/// starting from the same seed produce identical sequences.
#[derive(Debug, Clone)]
pub struct EpochChain {
    params: VdfParams,
    values: Vec<BigUint>,
    proofs: Vec<BigUint>,
}

impl EpochChain {
    pub fn new(params: VdfParams, x0: BigUint) -> Self {
        Self {
            params,
            values: vec![x0],
            proofs: Vec::new(),
        }
    }

    pub fn params(&self) -> &VdfParams {
        &self.params
    }

    /// Highest epoch index whose output is available (0 = only the seed).
    pub fn computed_up_to(&self) -> u64 {
        (self.values.len() - 1) as u64
    }

    /// Extends the chain so `value(epoch)` is available.
    pub fn extend_to(&mut self, epoch: u64, cancel: &CancelToken) -> Result<(), VdfError> {
        while self.computed_up_to() < epoch {
            let last = self.values.last().expect("chain is never empty").clone();
            let out = eval(&self.params, &last, self.params.epoch_rounds, cancel)?;
            self.values.push(out.output);
            self.proofs.push(out.proof);
        }
        Ok(())
    }

    /// x_i for epoch `i` (x_0 is the genesis seed).
    pub fn value(&self, epoch: u64) -> Option<&BigUint> {
        self.values.get(epoch as usize)
    }

    /// pi_i proving x_i from x_{i-1}; defined for epoch >= 1.
    pub fn proof(&self, epoch: u64) -> Option<&BigUint> {
        if epoch == 0 {
            None
        } else {
            self.proofs.get(epoch as usize - 1)
        }
    }

    /// The VDF input for epoch `i`, i.e. x_{i-1}.
    pub fn input_for(&self, epoch: u64) -> Option<&BigUint> {
        if epoch == 0 {
            None
        } else {
            self.value(epoch - 1)
        }
    }
}
