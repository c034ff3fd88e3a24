//! Per-epoch consensus-node selection: the network-wide dynamic probability
//! `prob(n) = min(omega/n, 1)` and the VRF threshold test `p <= p'`.
//!
//! The threshold comparison runs in exact integer arithmetic — the VRF value
//! is compared against `floor(p' * 2^randlen)` — so block validity never
//! depends on platform float behavior.

use num_bigint::BigUint;
use num_integer::Integer;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectionError {
    #[error("vrf value has {got} bits, exceeding randlen {randlen}")]
    ValueOutOfRange { got: u64, randlen: u32 },
}

/// Genesis-fixed selection parameters: expected maximum consensus nodes and
/// the VRF value width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionParams {
    pub omega: u64,
    pub randlen: u32,
}

/// An exact rational probability in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probability {
    numerator: u64,
    denominator: u64,
}

impl Probability {
    pub fn one() -> Self {
        Self {
            numerator: 1,
            denominator: 1,
        }
    }

    pub fn zero() -> Self {
        Self {
            numerator: 0,
            denominator: 1,
        }
    }

    /// Reduced ratio; panics on a zero denominator or a ratio above 1.
    pub fn from_ratio(numerator: u64, denominator: u64) -> Self {
        assert!(denominator > 0, "probability denominator must be nonzero");
        assert!(numerator <= denominator, "probability cannot exceed 1");
        let g = numerator.gcd(&denominator);
        Self {
            numerator: numerator / g,
            denominator: denominator / g,
        }
    }

    pub fn as_f64(&self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    /// floor(p * 2^randlen): the largest VRF value that still selects.
    pub fn threshold(&self, randlen: u32) -> BigUint {
        (BigUint::from(self.numerator) << randlen) / BigUint::from(self.denominator)
    }
}

/// Eq.-style dynamic probability min(omega/n, 1); n = 0 yields 1 so a lone
/// bootstrapping node can propose.
pub fn consensus_probability(active_n: u64, omega: u64) -> Probability {
    assert!(omega >= 1, "omega must be positive");
    if active_n == 0 || active_n <= omega {
        Probability::one()
    } else {
        Probability::from_ratio(omega, active_n)
    }
}

/// The threshold test: selected iff vrf_value / 2^randlen <= p', evaluated as
/// the integer comparison vrf_value <= floor(p' * 2^randlen).
pub fn is_selected(
    vrf_value: &BigUint,
    randlen: u32,
    p_prime: &Probability,
) -> Result<bool, SelectionError> {
    if vrf_value.bits() > randlen as u64 {
        return Err(SelectionError::ValueOutOfRange {
            got: vrf_value.bits(),
            randlen,
        });
    }
    Ok(*vrf_value <= p_prime.threshold(randlen))
}

/// How far a proposer's registry view may lag the validator's before its
/// blocks are rejected: one churn event on small registries, 5% on large.
pub fn view_tolerance(n_local: u64) -> u64 {
    2.max(n_local.div_ceil(20))
}

/// The most permissive in-band probability a validator accepts: the dynamic
/// probability computed at the low end of the tolerated count band.
pub fn tolerated_probability(n_local: u64, omega: u64) -> Probability {
    consensus_probability(n_local.saturating_sub(view_tolerance(n_local)), omega)
}
