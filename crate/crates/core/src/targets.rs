//! Final target and the calibrated interim target curve.
//!
//! Interim targets compound the initial fund and the contributions at a
//! single rate `r*`, chosen so the curve lands exactly on the final target
//! at retirement.

use crate::model::SalarySpec;
use crate::numerics::bisect;
use crate::{Error, Result};

const NEWTON_STEP_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 100;

/// Lump sum needed at retirement to buy the missing pension:
/// `(P_o − P_n) · ä`. May be non-positive when the gap is already closed.
pub fn final_target(old_pension: f64, new_pension: f64, annuity: f64) -> f64 {
    (old_pension - new_pension) * annuity
}

/// `x0 e^{r t} + ∫_0^t k S(s) e^{r (t − s)} ds`.
fn accumulated(x0: f64, spec: &SalarySpec, rate: f64, t: f64) -> f64 {
    x0 * (rate * t).exp() + spec.k() * spec.accumulate(rate, t)
}

fn accumulated_derivative(x0: f64, spec: &SalarySpec, rate: f64, t: f64) -> f64 {
    x0 * t * (rate * t).exp() + spec.k() * spec.accumulate_rate_derivative(rate, t)
}

/// Finds the rate at which the initial fund plus contributions accumulate
/// to `final_target` over `horizon` years.
///
/// Newton–Raphson from `guess` with the analytic derivative; if it fails to
/// settle, falls back to bisection on a geometrically grown bracket. The
/// accumulated value is increasing in the rate so the root is unique.
pub fn solve_r_star(
    x0: f64,
    spec: &SalarySpec,
    horizon: f64,
    final_target: f64,
    guess: f64,
) -> Result<f64> {
    if !(final_target > 0.0) {
        return Err(Error::NonPositiveGap { target: final_target });
    }
    if x0 < 0.0 {
        return Err(Error::invalid("x0", format!("must be >= 0, got {x0}")));
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon", format!("must be > 0, got {horizon}")));
    }
    let residual = |r: f64| accumulated(x0, spec, r, horizon) - final_target;
    let tol = 1e-10 * final_target.max(1.0);

    let mut r = guess;
    for _ in 0..NEWTON_MAX_ITER {
        let f = residual(r);
        let df = accumulated_derivative(x0, spec, r, horizon);
        let step = f / df;
        if !step.is_finite() {
            break;
        }
        r -= step;
        if !(-5.0..5.0).contains(&r) {
            break;
        }
        if step.abs() < NEWTON_STEP_TOL {
            if residual(r).abs() < tol {
                return Ok(r);
            }
            break;
        }
    }

    let (mut lo, mut hi) = (-0.5, 1.0);
    let mut grown = 0;
    while residual(lo) > 0.0 || residual(hi) < 0.0 {
        if grown == 60 {
            return Err(Error::NoConvergence { what: "r* calibration", iterations: NEWTON_MAX_ITER });
        }
        lo *= 2.0;
        hi *= 2.0;
        grown += 1;
    }
    bisect(residual, lo, hi, 1e-15)
}

/// Calibrated target curve `F(t)` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSchedule {
    x0: f64,
    r_star: f64,
    horizon: f64,
    final_target: f64,
    spec: SalarySpec,
}

impl TargetSchedule {
    /// Calibrates `r*` for the given final target.
    pub fn calibrate(
        x0: f64,
        spec: SalarySpec,
        horizon: f64,
        final_target: f64,
        guess: f64,
    ) -> Result<Self> {
        let r_star = solve_r_star(x0, &spec, horizon, final_target, guess)?;
        Ok(Self { x0, r_star, horizon, final_target, spec })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn r_star(&self) -> f64 {
        self.r_star
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn final_target(&self) -> f64 {
        self.final_target
    }

    pub fn spec(&self) -> &SalarySpec {
        &self.spec
    }

    /// Initial fund and contributions compounded at `r*` up to `t`, without
    /// snapping to the final target.
    pub fn compounded_value(&self, t: f64) -> f64 {
        accumulated(self.x0, &self.spec, self.r_star, t)
    }

    /// Target `F(t)`; returns the final target from `t = T` on.
    pub fn interim_target(&self, t: f64) -> f64 {
        if t >= self.horizon {
            self.final_target
        } else {
            self.compounded_value(t)
        }
    }
}
