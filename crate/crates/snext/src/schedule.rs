//! Diminishing step-size schedules.
//!
//! Both sequences follow the recurrence `s^t = s^{t-1} (1 - eps * s^{t-1})`,
//! which is positive, strictly decreasing, non-summable and square-summable
//! for `s^0 in (0, 1]` and `eps in (0, 1)`. Asymptotically `s^t ~ 1/(eps t)`,
//! so the ratio `alpha^t / rho^t` converges to `eps_rho / eps_alpha` rather
//! than zero; [`StepSchedule::validate_theorem_conditions`] reports each
//! convergence-theory condition separately so callers can see which hold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA0: f64 = 0.01;
pub const DEFAULT_EPS_ALPHA: f64 = 1e-3;
pub const DEFAULT_RHO0: f64 = 0.9;
pub const DEFAULT_EPS_RHO: f64 = 5e-4;

/// Coupled diminishing sequences `(alpha^t, rho^t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub alpha0: f64,
    pub eps_alpha: f64,
    pub rho0: f64,
    pub eps_rho: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            alpha0: DEFAULT_ALPHA0,
            eps_alpha: DEFAULT_EPS_ALPHA,
            rho0: DEFAULT_RHO0,
            eps_rho: DEFAULT_EPS_RHO,
        }
    }
}

impl StepSchedule {
    pub fn new(alpha0: f64, eps_alpha: f64, rho0: f64, eps_rho: f64) -> Result<Self> {
        let check = |key: &str, v: f64, lo_open: f64, hi: f64| -> Result<()> {
            if v > lo_open && v <= hi {
                Ok(())
            } else {
                Err(Error::ConfigValue {
                    key: key.into(),
                    reason: format!("must be in ({lo_open}, {hi}], got {v}"),
                })
            }
        };
        check("alpha0", alpha0, 0.0, 1.0)?;
        check("rho0", rho0, 0.0, 1.0)?;
        check("eps_alpha", eps_alpha, 0.0, 1.0)?;
        check("eps_rho", eps_rho, 0.0, 1.0)?;
        Ok(Self {
            alpha0,
            eps_alpha,
            rho0,
            eps_rho,
        })
    }

    /// One recurrence update `s <- s (1 - eps s)`.
    pub fn advance(value: f64, eps: f64) -> f64 {
        value * (1.0 - eps * value)
    }

    /// Iterator over `alpha^t` starting at `alpha^0`.
    pub fn alphas(&self) -> impl Iterator<Item = f64> {
        let eps = self.eps_alpha;
        std::iter::successors(Some(self.alpha0), move |&s| Some(Self::advance(s, eps)))
    }

    /// Iterator over `rho^t` starting at `rho^0`.
    pub fn rhos(&self) -> impl Iterator<Item = f64> {
        let eps = self.eps_rho;
        std::iter::successors(Some(self.rho0), move |&s| Some(Self::advance(s, eps)))
    }

    /// Checks the convergence-theory step-size conditions numerically over
    /// `horizon` steps. Range and monotonicity are exact properties of the
    /// recurrence; the vanishing-ratio condition is proxied by a tenfold
    /// decrease of `alpha^t / rho^t` over the horizon.
    pub fn validate_theorem_conditions(&self, horizon: usize) -> ScheduleReport {
        let mut in_range = true;
        let mut strictly_decreasing = true;
        let mut ratio_nonincreasing = true;
        let mut prev_a = f64::INFINITY;
        let mut prev_r = f64::INFINITY;
        let mut prev_ratio = f64::INFINITY;
        let mut final_ratio = 0.0;
        for (a, r) in self.alphas().zip(self.rhos()).take(horizon + 1) {
            in_range &= a > 0.0 && a <= 1.0 && r > 0.0 && r <= 1.0;
            strictly_decreasing &= a < prev_a && r < prev_r;
            let ratio = a / r;
            ratio_nonincreasing &= ratio <= prev_ratio;
            prev_a = a;
            prev_r = r;
            prev_ratio = ratio;
            final_ratio = ratio;
        }
        let initial_ratio = self.alpha0 / self.rho0;
        ScheduleReport {
            in_range,
            strictly_decreasing,
            ratio_nonincreasing,
            initial_ratio,
            final_ratio,
            ratio_vanishes: ratio_nonincreasing && final_ratio < initial_ratio * 0.1,
        }
    }
}

/// Numerical check of the step-size hypotheses behind the convergence
/// theory.
#[derive(Debug, Clone, Copy)]
pub struct ScheduleReport {
    pub in_range: bool,
    pub strictly_decreasing: bool,
    pub ratio_nonincreasing: bool,
    pub initial_ratio: f64,
    pub final_ratio: f64,
    /// Proxy for `lim alpha^t / rho^t = 0`: the ratio never increases and
    /// ends at least tenfold below its initial value.
    pub ratio_vanishes: bool,
}
