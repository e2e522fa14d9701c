//! One member's full parameter set and the pension figures derived from it.

use crate::control::{RiccatiMode, RiccatiSolution};
use crate::model::{
    annuity_factor, new_pension, old_pension, replacement_ratios, AnnuitySource, MarketModel,
    PensionRules, PreferenceParams, SalaryKind, SalarySpec,
};
use crate::targets::{final_target, TargetSchedule};
use crate::{Error, Result};

/// Annuity price at 65 discounted at 1.5% used by the base case.
pub const BASE_ANNUITY_65: f64 = 17.875;

#[derive(Debug, Clone, PartialEq)]
pub struct PlanParams {
    pub market: MarketModel,
    pub salary: SalarySpec,
    pub rules: PensionRules,
    /// Initial fund.
    pub x0: f64,
    pub entry_age: u32,
    pub retirement_age: u32,
    pub annuity: AnnuitySource,
    /// Discount rate for table-based annuity prices.
    pub annuity_rate: f64,
}

/// Pension figures at retirement for one plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PensionSummary {
    pub kind: SalaryKind,
    pub horizon: f64,
    pub annuity: f64,
    /// Conversion coefficient `1/ä`.
    pub beta: f64,
    pub final_salary: f64,
    pub old_pension: f64,
    pub new_pension: f64,
    pub old_ratio: f64,
    pub new_ratio: f64,
    /// `(P_o − P_n) ä`; non-positive when the gap is closed.
    pub final_target: f64,
}

impl PlanParams {
    /// The base case: 30-year-old member retiring at 65, unit initial fund
    /// and salary, r = 1.5%, μ = 6%, σ = 12%, ρ = 3%, w = 1.5%, c = 33%.
    /// Exponential salaries grow at 6% with 10% saved, linear ones at 8%
    /// with 4% saved.
    pub fn base_case(kind: SalaryKind) -> Self {
        let prefs = PreferenceParams::new(0.03).expect("valid base rho");
        let market = MarketModel::new(0.015, 0.06, 0.12, prefs).expect("valid base market");
        let salary = match kind {
            SalaryKind::Exponential => SalarySpec::new(kind, 1.0, 0.06, 0.10),
            SalaryKind::Linear => SalarySpec::new(kind, 1.0, 0.08, 0.04),
        }
        .expect("valid base salary");
        Self {
            market,
            salary,
            rules: PensionRules::default(),
            x0: 1.0,
            entry_age: 30,
            retirement_age: 65,
            annuity: AnnuitySource::overrides([(65, BASE_ANNUITY_65)]).expect("positive"),
            annuity_rate: 0.015,
        }
    }

    pub fn horizon(&self) -> Result<f64> {
        if self.retirement_age <= self.entry_age {
            return Err(Error::invalid(
                "retirement_age",
                format!(
                    "must exceed entry age {} (got {})",
                    self.entry_age, self.retirement_age
                ),
            ));
        }
        if !(self.x0 >= 0.0 && self.x0.is_finite()) {
            return Err(Error::invalid("x0", format!("must be >= 0, got {}", self.x0)));
        }
        Ok((self.retirement_age - self.entry_age) as f64)
    }

    pub fn annuity_price(&self) -> Result<f64> {
        annuity_factor(&self.annuity, self.retirement_age, self.annuity_rate)
    }

    /// Old and new pension computed with an explicit conversion coefficient.
    pub fn pensions_with_beta(&self, beta: f64) -> Result<(f64, f64)> {
        let horizon = self.horizon()?;
        let s_t = self.salary.salary_at(horizon);
        Ok((
            old_pension(&self.rules, horizon, s_t),
            new_pension(&self.salary, &self.rules, horizon, beta),
        ))
    }

    pub fn pensions(&self) -> Result<PensionSummary> {
        let horizon = self.horizon()?;
        let annuity = self.annuity_price()?;
        if !(annuity > 0.0) {
            return Err(Error::invalid(
                "annuity",
                format!("price at age {} is {annuity}", self.retirement_age),
            ));
        }
        let beta = 1.0 / annuity;
        let final_salary = self.salary.salary_at(horizon);
        let (old, new) = self.pensions_with_beta(beta)?;
        let (old_ratio, new_ratio) = replacement_ratios(old, new, final_salary);
        Ok(PensionSummary {
            kind: self.salary.kind(),
            horizon,
            annuity,
            beta,
            final_salary,
            old_pension: old,
            new_pension: new,
            old_ratio,
            new_ratio,
            final_target: final_target(old, new, annuity),
        })
    }

    /// Calibrated target curve; fails with `NonPositiveGap` when the new
    /// pension already matches the old one.
    pub fn schedule(&self) -> Result<TargetSchedule> {
        let summary = self.pensions()?;
        TargetSchedule::calibrate(
            self.x0,
            self.salary,
            summary.horizon,
            summary.final_target,
            self.market.r(),
        )
    }

    pub fn riccati(&self, mode: RiccatiMode) -> Result<RiccatiSolution> {
        RiccatiSolution::new(self.market, self.schedule()?, mode)
    }
}
