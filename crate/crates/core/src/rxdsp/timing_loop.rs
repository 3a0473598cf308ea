use crate::error::{Error, Result};

/// Number of trailing blocks the lock detector looks at.
pub const LOCK_WINDOW: usize = 20;
/// Raw-error magnitude (symbols) every block in the window must stay below.
pub const LOCK_THRESHOLD_SYMBOLS: f64 = 0.02;

/// Memory of the feedback loop between blocks.
///
/// The applied timing correction is `basepoint + mu` samples: `mu` is kept
/// in `[0, 1)` and whole-sample carries move into `basepoint`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingLoopState {
    pub mu: f64,
    pub basepoint: i64,
    pub integrator: f64,
    pub block_index: usize,
    pub locked: bool,
    recent: [f64; LOCK_WINDOW],
    filled: usize,
}

impl Default for TimingLoopState {
    fn default() -> Self {
        TimingLoopState {
            mu: 0.0,
            basepoint: 0,
            integrator: 0.0,
            block_index: 0,
            locked: false,
            recent: [0.0; LOCK_WINDOW],
            filled: 0,
        }
    }
}

impl TimingLoopState {
    /// Current correction in symbols.
    pub fn phase_symbols(&self, sps: usize) -> f64 {
        (self.basepoint as f64 + self.mu) / sps as f64
    }

    fn push_error(&mut self, e: f64) {
        self.recent[self.block_index % LOCK_WINDOW] = e;
        self.filled = (self.filled + 1).min(LOCK_WINDOW);
        self.locked = self.filled == LOCK_WINDOW && self.recent.iter().all(|v| libm::fabs(*v) < LOCK_THRESHOLD_SYMBOLS);
    }

    /// Skips a block whose detector output was unreliable.
    pub fn hold(mut self) -> Self {
        self.block_index += 1;
        self
    }
}

/// Proportional-integral loop gains, per block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopGains {
    pub kp: f64,
    pub ki: f64,
}

impl Default for LoopGains {
    fn default() -> Self {
        LoopGains { kp: 0.05, ki: 1e-3 }
    }
}

/// One PI update from a raw error in symbols (positive = sampled late).
pub fn loop_step(state: TimingLoopState, error_symbols: f64, gains: LoopGains, sps: usize) -> Result<TimingLoopState> {
    if !error_symbols.is_finite() {
        return Err(Error::LoopFault {
            block: state.block_index,
        });
    }
    let mut next = state;
    next.integrator += gains.ki * error_symbols;
    let correction = gains.kp * error_symbols + next.integrator;
    let mut mu = next.mu + correction * sps as f64;
    if !(mu.is_finite() && next.integrator.is_finite()) {
        return Err(Error::LoopFault {
            block: state.block_index,
        });
    }
    let carry = libm::floor(mu);
    mu -= carry;
    if mu >= 1.0 {
        // floor of values just below an integer can round mu up to 1.0
        mu -= 1.0;
        next.basepoint += 1;
    }
    next.mu = mu;
    next.basepoint += carry as i64;
    next.push_error(error_symbols);
    next.block_index += 1;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_error_only_advances_block() {
        let s = TimingLoopState::default();
        let n = loop_step(s, 0.0, LoopGains::default(), 2).unwrap();
        assert_eq!(n.mu, s.mu);
        assert_eq!(n.basepoint, s.basepoint);
        assert_eq!(n.integrator, s.integrator);
        assert_eq!(n.block_index, 1);
    }

    #[test]
    fn proportional_only_advances_linearly() {
        let gains = LoopGains { kp: 0.05, ki: 0.0 };
        let mut s = TimingLoopState::default();
        for i in 1..=5 {
            s = loop_step(s, 0.1, gains, 2).unwrap();
            assert!((s.mu - 0.01 * i as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn wraps_into_basepoint() {
        let gains = LoopGains { kp: 1.0, ki: 0.0 };
        let s = loop_step(TimingLoopState::default(), 0.4, gains, 2).unwrap();
        assert_eq!(s.basepoint, 0);
        let s = loop_step(s, 0.4, gains, 2).unwrap();
        assert_eq!(s.basepoint, 1);
        assert!((s.mu - 0.6).abs() < 1e-12);
        let s = loop_step(s, -0.45, gains, 2).unwrap();
        assert_eq!(s.basepoint, 0);
        assert!((s.mu - 0.7).abs() < 1e-12);
        assert!((0.0..1.0).contains(&s.mu));
        let s = loop_step(s, -0.49, gains, 2).unwrap();
        assert_eq!(s.basepoint, -1);
        assert!((s.phase_symbols(2) - (0.7 - 0.98) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn lock_needs_full_quiet_window() {
        let gains = LoopGains::default();
        let mut s = TimingLoopState::default();
        for _ in 0..LOCK_WINDOW - 1 {
            s = loop_step(s, 0.001, gains, 2).unwrap();
            assert!(!s.locked);
        }
        s = loop_step(s, 0.001, gains, 2).unwrap();
        assert!(s.locked);
        s = loop_step(s, 0.05, gains, 2).unwrap();
        assert!(!s.locked);
    }

    #[test]
    fn non_finite_error_faults() {
        let s = TimingLoopState::default();
        assert_eq!(
            loop_step(s, f64::NAN, LoopGains::default(), 2),
            Err(Error::LoopFault { block: 0 })
        );
        assert!(loop_step(s, f64::INFINITY, LoopGains::default(), 2).is_err());
    }

    #[test]
    fn step_response_settles() {
        // noiseless plant: the detector reports exactly the residual delay
        let gains = LoopGains::default();
        let mut s = TimingLoopState::default();
        let target = 0.25;
        let mut settled = None;
        for b in 0..400 {
            let e = target - s.phase_symbols(2);
            s = loop_step(s, e, gains, 2).unwrap();
            if settled.is_none() && s.locked {
                settled = Some(b);
            }
        }
        let settled = settled.expect("loop locks");
        // golden value for kp = 0.05, ki = 1e-3: lock declared at block 138
        assert_eq!(settled, 138);
        assert!((s.phase_symbols(2) - target).abs() < 1e-4);
    }
}
