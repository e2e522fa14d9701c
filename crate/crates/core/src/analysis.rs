//! Break-even points, retirement-age sweeps and histograms.

use crate::plan::{PensionSummary, PlanParams};
use crate::numerics::bisect;
use crate::targets::TargetSchedule;
use crate::model::SalaryKind;
use crate::{Error, Result};

const BREAK_EVEN_TOL: f64 = 1e-8;

/// Parameter varied when looking for `P_o = P_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BreakEvenParam {
    /// Lump-sum to annuity conversion coefficient `β`.
    ConversionBeta,
    /// Mean real GDP growth `w`.
    GdpGrowth,
    /// Mean real salary growth `g`; moves both pensions.
    SalaryGrowth,
}

impl BreakEvenParam {
    pub fn name(self) -> &'static str {
        match self {
            BreakEvenParam::ConversionBeta => "beta",
            BreakEvenParam::GdpGrowth => "w",
            BreakEvenParam::SalaryGrowth => "g",
        }
    }

    pub fn default_bracket(self) -> (f64, f64) {
        match self {
            BreakEvenParam::ConversionBeta => (0.01, 0.3),
            BreakEvenParam::GdpGrowth => (0.0, 0.15),
            BreakEvenParam::SalaryGrowth => (0.0, 0.1),
        }
    }
}

impl std::str::FromStr for BreakEvenParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "beta" => Ok(BreakEvenParam::ConversionBeta),
            "w" => Ok(BreakEvenParam::GdpGrowth),
            "g" => Ok(BreakEvenParam::SalaryGrowth),
            other => Err(Error::invalid("break-even parameter", format!("`{other}` (expected beta, w or g)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakEvenQuery {
    pub parameter: BreakEvenParam,
    /// Every other parameter is taken from here.
    pub plan: PlanParams,
    pub lo: f64,
    pub hi: f64,
}

impl BreakEvenQuery {
    pub fn new(parameter: BreakEvenParam, plan: PlanParams) -> Self {
        let (lo, hi) = parameter.default_bracket();
        Self { parameter, plan, lo, hi }
    }

    pub fn with_bracket(mut self, lo: f64, hi: f64) -> Self {
        self.lo = lo;
        self.hi = hi;
        self
    }

    pub fn salary_kind(&self) -> SalaryKind {
        self.plan.salary.kind()
    }

    /// `P_o − P_n` with the queried parameter set to `value`.
    pub fn gap_at(&self, value: f64) -> Result<f64> {
        let plan = &self.plan;
        let (old, new) = match self.parameter {
            BreakEvenParam::ConversionBeta => plan.pensions_with_beta(value)?,
            BreakEvenParam::GdpGrowth => {
                let beta = 1.0 / plan.annuity_price()?;
                let varied = PlanParams { rules: plan.rules.with_gdp_growth(value), ..plan.clone() };
                varied.pensions_with_beta(beta)?
            }
            BreakEvenParam::SalaryGrowth => {
                let beta = 1.0 / plan.annuity_price()?;
                let varied = PlanParams { salary: plan.salary.with_growth(value), ..plan.clone() };
                varied.pensions_with_beta(beta)?
            }
        };
        Ok(old - new)
    }

    /// `P_o − P_n` on `n` equally spaced points of the bracket.
    pub fn gap_curve(&self, n: usize) -> Result<Vec<(f64, f64)>> {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let p = self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64;
                Ok((p, self.gap_at(p)?))
            })
            .collect()
    }
}

/// Parameter value at which the old and new pensions coincide, by
/// bisection to `1e-8`.
pub fn break_even(q: &BreakEvenQuery) -> Result<f64> {
    if !(q.lo < q.hi) {
        return Err(Error::invalid("bracket", format!("[{}, {}] is empty", q.lo, q.hi)));
    }
    // validate once so bisection only sees finite values
    q.gap_at(q.lo)?;
    bisect(|p| q.gap_at(p).unwrap_or(f64::NAN), q.lo, q.hi, BREAK_EVEN_TOL)
}

/// One retirement age of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeSweepRow {
    pub retirement_age: u32,
    pub summary: PensionSummary,
    /// Recalibrated target rate; `None` when the gap is already closed.
    pub r_star: Option<f64>,
}

impl AgeSweepRow {
    pub fn horizon(&self) -> f64 {
        self.summary.horizon
    }
}

/// Pension figures for each retirement age, all else as in `base`.
pub fn age_sweep(ages: &[u32], base: &PlanParams) -> Result<Vec<AgeSweepRow>> {
    ages.iter()
        .map(|&age| {
            let plan = PlanParams { retirement_age: age, ..base.clone() };
            let summary = plan.pensions()?;
            let r_star = match TargetSchedule::calibrate(
                plan.x0,
                plan.salary,
                summary.horizon,
                summary.final_target,
                plan.market.r(),
            ) {
                Ok(s) => Some(s.r_star()),
                Err(Error::NonPositiveGap { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(AgeSweepRow { retirement_age: age, summary, r_star })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `counts.len() + 1` strictly increasing edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub total: usize,
}

impl Histogram {
    /// Share of samples in bins lying entirely inside `[lo, hi]`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let inside: usize = self
            .counts
            .iter()
            .enumerate()
            .filter(|(i, _)| self.edges[*i] >= lo && self.edges[*i + 1] <= hi)
            .map(|(_, c)| c)
            .sum();
        inside as f64 / self.total as f64
    }
}

/// Equal-width bins over `[min, max]`; every bin is half-open except the
/// last, which also takes the maximum.
pub fn histogram(samples: &[f64], n_bins: usize) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if n_bins == 0 {
        return Err(Error::invalid("n_bins", "must be at least 1"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("samples", "contain non-finite values"));
    }
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if min < max { (min, max) } else { (min - 0.5, max + 0.5) };
    let width = (hi - lo) / n_bins as f64;
    let edges: Vec<f64> = (0..=n_bins)
        .map(|i| if i == n_bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0; n_bins];
    for &v in samples {
        let bin = (((v - lo) / width).floor() as usize).min(n_bins - 1);
        counts[bin] += 1;
    }
    Ok(Histogram { edges, counts, total: samples.len() })
}
