//! NTP-style pairwise clock offset estimation and logical-clock state.
//!
//! A sync round produces four timestamps: client send t1, server receive t2,
//! server reply t3, client receive t4, all on the respective logical clocks.
//! The measured offset is ((t2 - t1) + (t3 - t4)) / 2, and the node folds a
//! damped fraction of it into its logical-clock correction.

use thiserror::Error;

/// Per-round damping on measured offsets. Full-step updates oscillate under
/// asymmetric delays.
pub const DEFAULT_SMOOTHING: f64 = 0.5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClockError {
    #[error("timestamp ordering violated: expected t1 <= t4 and t2 <= t3")]
    BadOrdering,
}

/// One node's clock: its fixed physical drift from the global clock (ground
/// truth in simulation) and the accumulated logical correction theta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockState {
    /// Physical clock offset from the global clock, in ms.
    pub physical_offset: i64,
    /// Accumulated correction applied on top of the physical clock, in ms.
    pub logical_offset_theta: i64,
    /// Optional linear drift per simulated second.
    pub drift_per_second: f64,
}

impl ClockState {
    pub fn new(physical_offset: i64) -> Self {
        Self {
            physical_offset,
            logical_offset_theta: 0,
            drift_per_second: 0.0,
        }
    }

    /// The node's physical clock reading at a global instant.
    pub fn physical_at(&self, global_ms: i64) -> i64 {
        let drift = (self.drift_per_second * global_ms as f64 / 1000.0) as i64;
        global_ms + self.physical_offset + drift
    }

    /// logical = physical + theta.
    pub fn logical_at(&self, global_ms: i64) -> i64 {
        self.physical_at(global_ms) + self.logical_offset_theta
    }

    /// How far the logical clock sits from the global clock.
    pub fn logical_error_at(&self, global_ms: i64) -> i64 {
        self.logical_at(global_ms) - global_ms
    }
}

/// The NTP offset equation over one request-response exchange, rounding
/// toward zero on odd sums.
pub fn ntp_offset(t1: i64, t2: i64, t3: i64, t4: i64) -> Result<i64, ClockError> {
    if t1 > t4 || t2 > t3 {
        return Err(ClockError::BadOrdering);
    }
    Ok(((t2 - t1) + (t3 - t4)) / 2)
}

/// Folds a measured offset into the state with the default smoothing factor.
pub fn apply_sync_round(state: &ClockState, measured_theta: i64) -> ClockState {
    apply_sync_round_with(state, measured_theta, DEFAULT_SMOOTHING)
}

pub fn apply_sync_round_with(state: &ClockState, measured_theta: i64, alpha: f64) -> ClockState {
    let step = (alpha * measured_theta as f64) as i64;
    ClockState {
        logical_offset_theta: state.logical_offset_theta + step,
        ..*state
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_offset() {
        assert_eq!(ntp_offset(100, 150, 160, 120), Ok(45));
    }

    #[test]
    fn symmetric_delays_measure_zero() {
        assert_eq!(ntp_offset(0, 10, 20, 30), Ok(0));
        for d in [1i64, 7, 50, 1000] {
            assert_eq!(ntp_offset(0, d, d, 2 * d), Ok(0));
        }
    }

    #[test]
    fn odd_sums_round_toward_zero() {
        assert_eq!(ntp_offset(0, 5, 10, 12), Ok(1)); // (5 + -2)/2 = 1.5
        assert_eq!(ntp_offset(0, 2, 10, 15), Ok(-1)); // (2 + -5)/2 = -1.5
    }

    #[test]
    fn ordering_violations_are_errors() {
        assert_eq!(ntp_offset(10, 0, 5, 5), Err(ClockError::BadOrdering));
        assert_eq!(ntp_offset(0, 9, 8, 10), Err(ClockError::BadOrdering));
    }

    #[test]
    fn zero_measurement_leaves_state_unchanged() {
        let state = ClockState::new(120);
        assert_eq!(apply_sync_round(&state, 0), state);
    }

    #[test]
    fn full_step_applies_whole_offset() {
        let state = ClockState::new(0);
        let updated = apply_sync_round_with(&state, 45, 1.0);
        assert_eq!(updated.logical_offset_theta, 45);
    }

    #[test]
    fn symmetric_pair_converges_geometrically() {
        // +500 / -500 nodes syncing alternately with alpha = 0.5: the pairwise
        // logical gap decays to under 100ms within 10 rounds (closed form:
        // each one-sided sync halves the gap).
        let mut a = ClockState::new(500);
        let mut b = ClockState::new(-500);
        let mut rounds = 0;
        loop {
            // a measures against b with symmetric delays: theta = b_logical - a_logical
            let gap_ba = b.logical_at(0) - a.logical_at(0);
            a = apply_sync_round(&a, gap_ba);
            let gap_ab = a.logical_at(0) - b.logical_at(0);
            b = apply_sync_round(&b, gap_ab);
            rounds += 1;
            let gap = (a.logical_at(0) - b.logical_at(0)).abs();
            if gap < 100 {
                break;
            }
            assert!(rounds < 10, "gap {gap} after {rounds} rounds");
        }
        assert!(rounds <= 10);
    }

    #[test]
    fn ntp_recovers_true_difference_under_symmetric_delays() {
        // ground truth: b runs 130ms ahead of a; both links take 40ms
        let a = ClockState::new(-70);
        let b = ClockState::new(60);
        let send = 1000;
        let t1 = a.logical_at(send);
        let t2 = b.logical_at(send + 40);
        let t3 = b.logical_at(send + 40);
        let t4 = a.logical_at(send + 80);
        assert_eq!(ntp_offset(t1, t2, t3, t4), Ok(130));
    }

    #[test]
    fn drift_accumulates_linearly() {
        let mut state = ClockState::new(0);
        state.drift_per_second = 2.0;
        assert_eq!(state.physical_at(10_000), 10_020);
    }
}
