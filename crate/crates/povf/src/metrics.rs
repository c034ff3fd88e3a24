//! Quantitative measures over confirmed chains: average and instantaneous
//! TPS, the population standard deviation of per-proposer block counts, and
//! the Gini coefficient. Gini and TPS run in exact rational arithmetic;
//! conversion to decimal happens only at report emission.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("metric undefined: {0}")]
    Undefined(&'static str),
    #[error("domain error: {0}")]
    Domain(&'static str),
}

/// Per-proposer confirmed-block counts, one entry per distinct proposer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockCountSet(pub Vec<u64>);

impl BlockCountSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

/// A (timestamp, transaction count) view of a confirmed block, enough for
/// every throughput metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockStat {
    pub height: u64,
    pub timestamp_ms: i64,
    pub tx_count: u64,
}

fn ratio(num: BigInt, den: BigInt) -> BigRational {
    BigRational::new(num, den)
}

/// Total transactions (the genesis block contributes none) over elapsed
/// seconds between the first and last block of the window.
pub fn average_tps(blocks: &[BlockStat]) -> Result<BigRational, MetricsError> {
    if blocks.len() < 2 {
        return Err(MetricsError::Undefined("need at least two blocks"));
    }
    let first = &blocks[0];
    let last = &blocks[blocks.len() - 1];
    let elapsed_ms = last.timestamp_ms - first.timestamp_ms;
    if elapsed_ms <= 0 {
        return Err(MetricsError::Undefined("zero elapsed time"));
    }
    let total: u64 = blocks
        .iter()
        .filter(|b| b.height != 0)
        .map(|b| b.tx_count)
        .sum();
    Ok(ratio(
        BigInt::from(total) * 1000,
        BigInt::from(elapsed_ms),
    ))
}

/// Transactions in the later of two adjacent blocks over the time between
/// them.
pub fn instantaneous_tps(a: &BlockStat, b: &BlockStat) -> Result<BigRational, MetricsError> {
    if b.height != a.height + 1 {
        return Err(MetricsError::Domain("blocks are not height-adjacent"));
    }
    if b.timestamp_ms <= a.timestamp_ms {
        return Err(MetricsError::Domain("timestamps are not increasing"));
    }
    Ok(ratio(
        BigInt::from(b.tx_count) * 1000,
        BigInt::from(b.timestamp_ms - a.timestamp_ms),
    ))
}

/// Population standard deviation (divisor n) of the counts.
pub fn std_dev(counts: &BlockCountSet) -> Result<f64, MetricsError> {
    if counts.is_empty() {
        return Err(MetricsError::Domain("empty count set"));
    }
    let n = counts.len() as f64;
    let mean = counts.total() as f64 / n;
    let variance = counts
        .0
        .iter()
        .map(|&b| {
            let d = b as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    Ok(variance.sqrt())
}

/// The Gini coefficient by the quadratic double sum
/// `sum_ij |b_i - b_j| / (2 n sum_j b_j)`, exact. This is the oracle form;
/// `gini` computes the same value in O(n log n).
pub fn gini_quadratic(counts: &BlockCountSet) -> Result<BigRational, MetricsError> {
    let total = check_gini_domain(counts)?;
    let mut numerator = BigInt::zero();
    for &a in &counts.0 {
        for &b in &counts.0 {
            numerator += BigInt::from(a.abs_diff(b));
        }
    }
    Ok(ratio(
        numerator,
        BigInt::from(2u64) * BigInt::from(counts.len() as u64) * BigInt::from(total),
    ))
}

/// The Gini coefficient via the sorted-form identity
/// `sum_i (2i - n + 1) b_(i) / (n sum b)` with ascending 0-indexed ranks.
pub fn gini(counts: &BlockCountSet) -> Result<BigRational, MetricsError> {
    let total = check_gini_domain(counts)?;
    let mut sorted = counts.0.clone();
    sorted.sort_unstable();
    let n = sorted.len() as i64;
    let mut numerator = BigInt::zero();
    for (rank, &b) in sorted.iter().enumerate() {
        let weight = 2 * rank as i64 - n + 1;
        numerator += BigInt::from(weight) * BigInt::from(b);
    }
    Ok(ratio(
        numerator,
        BigInt::from(n) * BigInt::from(total),
    ))
}

fn check_gini_domain(counts: &BlockCountSet) -> Result<u64, MetricsError> {
    if counts.is_empty() {
        return Err(MetricsError::Domain("empty count set"));
    }
    let total = counts.total();
    if total == 0 {
        return Err(MetricsError::Domain("all counts are zero"));
    }
    Ok(total)
}

/// Decimal rendering at 12 significant digits, the report emission format.
pub fn to_decimal(value: &BigRational) -> String {
    format_significant(value, 12)
}

fn format_significant(value: &BigRational, digits: u32) -> String {
    if value.is_zero() {
        return "0".to_string();
    }
    let negative = value.is_negative();
    let mut v = value.abs();
    let one = BigRational::from_integer(BigInt::from(1));
    let ten = BigRational::from_integer(BigInt::from(10));
    let mut exponent: i32 = 0;
    while v >= ten {
        v /= &ten;
        exponent += 1;
    }
    while v < one {
        v *= &ten;
        exponent -= 1;
    }
    // v in [1, 10): round to `digits` significant digits
    let scale = BigInt::from(10u32).pow(digits - 1);
    let scaled = (&v * BigRational::from_integer(scale)).round();
    let mut mantissa = scaled.to_integer().to_string();
    if mantissa.len() as u32 > digits {
        // rounding overflowed into the next power of ten
        mantissa.truncate(digits as usize);
        exponent += 1;
    }
    let mantissa = mantissa.trim_end_matches('0');
    let mantissa = if mantissa.is_empty() { "1" } else { mantissa };
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if exponent >= 0 && (exponent as usize) < mantissa.len() {
        out.push_str(&mantissa[..=exponent as usize]);
        if (exponent as usize) < mantissa.len() - 1 {
            out.push('.');
            out.push_str(&mantissa[exponent as usize + 1..]);
        }
    } else if exponent >= 0 {
        out.push_str(mantissa);
        out.extend(std::iter::repeat_n('0', exponent as usize + 1 - mantissa.len()));
    } else {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exponent - 1) as usize));
        out.push_str(mantissa);
    }
    out
}
