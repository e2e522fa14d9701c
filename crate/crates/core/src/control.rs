//! Value-function coefficients and the optimal feedback strategy.
//!
//! The value function is `V(t, x) = e^{−ρt} [α(t) x² + β(t) x + γ(t)]` with
//!
//! ```text
//! α' = a α − 1                                   α(T) = 1
//! β' = ã β + 2F(t) − 2c(t) α                      β(T) = −2F(T)
//! γ' = ρ γ − F(t)² − c(t) β + λ² β² / (4α)        γ(T) = F(T)²
//! ```
//!
//! and the unconstrained optimal fraction in the risky asset is
//! `y*(t, x) = −(λ/σ) (1/x) (x + β(t) / (2α(t)))`.
//!
//! β is always integrated backward with fixed-step RK4 on a fine grid; the
//! closed-form expressions for the two salary shapes are a fast path that
//! must reproduce that grid before a solution in [`RiccatiMode::ClosedForm`]
//! is handed out.

use crate::model::{MarketModel, SalaryKind, SalarySpec};
use crate::numerics::{exprel, integrate, rk4_backward};
use crate::targets::TargetSchedule;
use crate::{Error, Result};

/// RK4 steps over the horizon for the β ground truth.
pub const ODE_STEPS: usize = 10_000;
/// Relative agreement required between closed-form β and the ODE grid.
pub const CLOSED_FORM_TOL: f64 = 1e-6;
const DEGENERATE: f64 = 1e-12;

/// Fraction applied when wealth is zero or negative.
pub const ZERO_WEALTH_FRACTION: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiccatiMode {
    ClosedForm,
    NumericalOde,
}

/// Which reading of the `e^{(r−ã)(·)}` factor in the first line of the
/// linear-salary β expression reproduced the ODE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExponentReading {
    /// `e^{(r−ã)(T−t)}`
    HorizonMinusTime,
    /// `e^{(r−ã)(t−t)} = 1`, taken literally.
    Literal,
}

/// `α(t) = (1 − 1/a) e^{−a(T−t)} + 1/a`, written as
/// `e^{−aτ} + τ·exprel(−aτ)` so that `a → 0` tends to `1 + τ`.
pub fn alpha_closed_form(a: f64, horizon: f64, t: f64) -> f64 {
    let tau = horizon - t;
    if a.abs() < DEGENERATE {
        return 1.0 + tau;
    }
    (-a * tau).exp() + tau * exprel(-a * tau)
}

#[derive(Debug, Clone, Copy)]
struct ClosedFormBeta {
    kind: SalaryKind,
    reading: ExponentReading,
    horizon: f64,
    final_target: f64,
    r: f64,
    r_star: f64,
    a: f64,
    a_tilde: f64,
    g: f64,
    k1: f64,
    k2: f64,
    k3: f64,
    k4: f64,
    k5: f64,
    k3_tilde: f64,
    k4_tilde: f64,
}

impl ClosedFormBeta {
    fn new(market: &MarketModel, sched: &TargetSchedule, reading: ExponentReading) -> Result<Self> {
        let spec = sched.spec();
        let (r, a, a_tilde) = (market.r(), market.a(), market.a_tilde());
        let (r_star, g, k, s0, x0) = (sched.r_star(), spec.g(), spec.k(), spec.s0(), sched.x0());
        let small = |v: f64| v.abs() < DEGENERATE;
        if small(a) {
            return Err(Error::DegenerateClosedForm { reason: "a = 0" });
        }
        match spec.kind() {
            SalaryKind::Linear => {
                if small(r) || small(r_star) || small(a_tilde) {
                    return Err(Error::DegenerateClosedForm { reason: "r, r* or ã = 0" });
                }
            }
            SalaryKind::Exponential => {
                if small(g - r) || small(g - a_tilde) || small(g - r_star) {
                    return Err(Error::DegenerateClosedForm {
                        reason: "g coincides with r, ã or r*",
                    });
                }
            }
        }
        let k1 = 2.0 * k * s0;
        let (k2, k3, k5) = if spec.kind() == SalaryKind::Linear {
            let k2 = 2.0 * k * s0 / r_star;
            let k3 = 2.0 * x0 + k2 + 2.0 * k * g * s0 / (r_star * r_star);
            let k5 = k1 / a + k2 * (1.0 + g / r_star);
            (k2, k3, k5)
        } else {
            (f64::NAN, f64::NAN, f64::NAN)
        };
        let k4 = k1 - k1 / a;
        let (k3_tilde, k4_tilde) = if spec.kind() == SalaryKind::Exponential {
            let k2_tilde = 2.0 * k * s0 / (g - r_star);
            (2.0 * x0 - k2_tilde, k1 / a - k2_tilde)
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok(Self {
            kind: spec.kind(),
            reading,
            horizon: sched.horizon(),
            final_target: sched.final_target(),
            r,
            r_star,
            a,
            a_tilde,
            g,
            k1,
            k2,
            k3,
            k4,
            k5,
            k3_tilde,
            k4_tilde,
        })
    }

    /// `k/(r*−ã)·[e^{r* t} − e^{ã t + (r*−ã) T}]`, continuous at `r* = ã`.
    fn target_term(&self, k: f64, t: f64) -> f64 {
        let tau = self.horizon - t;
        -k * (self.r_star * t).exp() * tau * exprel((self.r_star - self.a_tilde) * tau)
    }

    fn eval(&self, t: f64) -> f64 {
        let Self { horizon: big_t, r, a, a_tilde: at, g, k1, k2, k3, k4, k5, .. } = *self;
        let tau = big_t - t;
        let terminal = -2.0 * self.final_target * (-at * tau).exp();
        match self.kind {
            SalaryKind::Linear => {
                let first = match self.reading {
                    ExponentReading::HorizonMinusTime => ((r - at) * tau).exp(),
                    ExponentReading::Literal => 1.0,
                };
                let bracket = k4 / r
                    + k5 / at
                    + k4 * g / (r * r)
                    + k1 * g / (a * at * at)
                    + k2 * g / (at * at)
                    + (k4 * g / r + k1 * g / (a * at) + k2 * g / at) * big_t;
                terminal + k4 / r * (1.0 + g / r) * first
                    + (k5 + k1 * g / (a * at) + k2 * g / at) / at
                    + k4 * g / r * t * ((r - at) * tau).exp()
                    + g / at * (k1 / a + k2) * t
                    + self.target_term(k3, t)
                    - bracket * (-at * tau).exp()
            }
            SalaryKind::Exponential => {
                let (kt3, kt4) = (self.k3_tilde, self.k4_tilde);
                terminal - k4 / (g - r) * ((g + a) * t - a * big_t).exp()
                    - kt4 / (g - at) * (g * t).exp()
                    + (k4 / (g - r) + kt4 / (g - at)) * (at * t + (g - at) * big_t).exp()
                    + self.target_term(kt3, t)
            }
        }
    }
}

/// β on a uniform backward-RK4 grid with cubic Hermite interpolation.
#[derive(Debug, Clone)]
struct BetaGrid {
    horizon: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl BetaGrid {
    fn solve<F, C>(a: f64, a_tilde: f64, horizon: f64, target: F, contribution: C, steps: usize) -> Self
    where
        F: Fn(f64) -> f64,
        C: Fn(f64) -> f64,
    {
        let rhs = |t: f64, beta: f64| {
            a_tilde * beta + 2.0 * target(t) - 2.0 * contribution(t) * alpha_closed_form(a, horizon, t)
        };
        let end = [-2.0 * target(horizon)];
        let grid = rk4_backward(|t, y: &[f64; 1]| [rhs(t, y[0])], 0.0, horizon, end, steps);
        let h = horizon / steps as f64;
        let values: Vec<f64> = grid.into_iter().map(|y| y[0]).collect();
        let slopes = values.iter().enumerate().map(|(i, &b)| rhs(i as f64 * h, b)).collect();
        Self { horizon, values, slopes }
    }

    fn steps(&self) -> usize {
        self.values.len() - 1
    }

    fn node(&self, i: usize) -> f64 {
        if i == self.steps() {
            self.horizon
        } else {
            self.horizon * i as f64 / self.steps() as f64
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.steps();
        let h = self.horizon / n as f64;
        let pos = (t / h).clamp(0.0, n as f64);
        let i = (pos.floor() as usize).min(n - 1);
        let s = pos - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1
    }
}

/// Evaluable α, β, γ for one member, market and target schedule.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    market: MarketModel,
    schedule: TargetSchedule,
    mode: RiccatiMode,
    grid: BetaGrid,
    closed: Option<ClosedFormBeta>,
}

impl RiccatiSolution {
    /// Integrates β backward and, in [`RiccatiMode::ClosedForm`], checks the
    /// closed form against it at every grid node.
    pub fn new(market: MarketModel, schedule: TargetSchedule, mode: RiccatiMode) -> Result<Self> {
        let spec = *schedule.spec();
        let grid = BetaGrid::solve(
            market.a(),
            market.a_tilde(),
            schedule.horizon(),
            |t| schedule.interim_target(t),
            |t| spec.contribution_at(t),
            ODE_STEPS,
        );
        let closed = match mode {
            RiccatiMode::NumericalOde => None,
            RiccatiMode::ClosedForm => Some(Self::validated_closed_form(&market, &schedule, &grid)?),
        };
        Ok(Self { market, schedule, mode, grid, closed })
    }

    fn validated_closed_form(
        market: &MarketModel,
        schedule: &TargetSchedule,
        grid: &BetaGrid,
    ) -> Result<ClosedFormBeta> {
        let readings: &[ExponentReading] = match schedule.spec().kind() {
            SalaryKind::Linear => &[ExponentReading::HorizonMinusTime, ExponentReading::Literal],
            SalaryKind::Exponential => &[ExponentReading::HorizonMinusTime],
        };
        let mut first_failure = None;
        for &reading in readings {
            let cf = ClosedFormBeta::new(market, schedule, reading)?;
            let mismatch = (0..=grid.steps()).find_map(|i| {
                let t = grid.node(i);
                let (closed, oracle) = (cf.eval(t), grid.values[i]);
                let ok = (closed - oracle).abs() <= CLOSED_FORM_TOL * oracle.abs().max(1.0);
                (!ok).then_some(Error::ClosedFormMismatch { coefficient: "beta", t, closed, oracle })
            });
            match mismatch {
                None => return Ok(cf),
                Some(e) => {
                    first_failure.get_or_insert(e);
                }
            }
        }
        Err(first_failure.expect("at least one reading tried"))
    }

    pub fn mode(&self) -> RiccatiMode {
        self.mode
    }

    pub fn market(&self) -> &MarketModel {
        &self.market
    }

    pub fn schedule(&self) -> &TargetSchedule {
        &self.schedule
    }

    pub fn horizon(&self) -> f64 {
        self.schedule.horizon()
    }

    /// Reading of the linear-salary exponent that matched the ODE, if the
    /// closed form is in use for a linear salary.
    pub fn closed_form_reading(&self) -> Option<ExponentReading> {
        self.closed.filter(|c| c.kind == SalaryKind::Linear).map(|c| c.reading)
    }

    fn spec(&self) -> &SalarySpec {
        self.schedule.spec()
    }

    pub fn alpha_at(&self, t: f64) -> f64 {
        alpha_closed_form(self.market.a(), self.horizon(), t)
    }

    pub fn beta_at(&self, t: f64) -> f64 {
        match &self.closed {
            Some(cf) => cf.eval(t),
            None => self.grid.eval(t),
        }
    }

    /// β from the RK4 grid regardless of mode.
    pub fn beta_ode_at(&self, t: f64) -> f64 {
        self.grid.eval(t)
    }

    fn gamma_source(&self, s: f64) -> f64 {
        let f = self.schedule.interim_target(s);
        let beta = self.beta_at(s);
        let lambda = self.market.lambda();
        f * f + self.spec().contribution_at(s) * beta
            - lambda * lambda * beta * beta / (4.0 * self.alpha_at(s))
    }

    /// γ by quadrature:
    /// `γ(t) = F(T)² e^{−ρ(T−t)} + ∫_t^T e^{−ρ(s−t)} [F² + cβ − λ²β²/(4α)] ds`.
    ///
    /// Only the value function needs γ; the strategy never does.
    pub fn gamma_at(&self, t: f64) -> f64 {
        let rho = self.market.rho();
        let big_t = self.horizon();
        let ft = self.schedule.final_target();
        let terminal = ft * ft * (-rho * (big_t - t)).exp();
        terminal
            + integrate(|s| (-rho * (s - t)).exp() * self.gamma_source(s), t, big_t, 1e-12, 1e-14)
    }

    /// γ by backward RK4 of its ODE from `T` to `t`.
    pub fn gamma_ode_at(&self, t: f64) -> f64 {
        let big_t = self.horizon();
        if t >= big_t {
            return self.schedule.final_target().powi(2);
        }
        let steps = ((ODE_STEPS as f64 * (big_t - t) / big_t).ceil() as usize).max(16);
        let rho = self.market.rho();
        let ft = self.schedule.final_target();
        let grid = rk4_backward(
            |s, y: &[f64; 1]| [rho * y[0] - self.gamma_source(s)],
            t,
            big_t,
            [ft * ft],
            steps,
        );
        grid[0][0]
    }

    /// `e^{−ρt} [α x² + β x + γ]`.
    pub fn value_function(&self, t: f64, x: f64) -> f64 {
        (-self.market.rho() * t).exp()
            * (self.alpha_at(t) * x * x + self.beta_at(t) * x + self.gamma_at(t))
    }

    /// Wealth at which the optimal fraction is zero, `−β/(2α)`.
    pub fn neutral_wealth(&self, t: f64) -> f64 {
        -self.beta_at(t) / (2.0 * self.alpha_at(t))
    }

    /// Unconstrained optimal fraction in the risky asset.
    pub fn optimal_fraction(&self, t: f64, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Err(Error::ZeroWealth);
        }
        let m = &self.market;
        Ok(-m.lambda() / (x * m.sigma()) * (x - self.neutral_wealth(t)))
    }

    /// Optimal fraction restricted to `[0, 1]`; wealth `≤ 0` gets
    /// [`ZERO_WEALTH_FRACTION`].
    pub fn clamped_fraction(&self, t: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return ZERO_WEALTH_FRACTION;
        }
        self.optimal_fraction(t, x).map_or(ZERO_WEALTH_FRACTION, clamp_fraction)
    }

    pub fn strategy_point(&self, t: f64, x: f64) -> StrategyPoint {
        StrategyPoint {
            t,
            x,
            y_unconstrained: self.optimal_fraction(t, x).ok(),
            y_clamped: self.clamped_fraction(t, x),
        }
    }
}

/// No short selling, no borrowing.
pub fn clamp_fraction(y: f64) -> f64 {
    y.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyPoint {
    pub t: f64,
    pub x: f64,
    /// `None` at zero wealth.
    pub y_unconstrained: Option<f64>,
    pub y_clamped: f64,
}
