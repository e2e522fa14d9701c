//! Market, salary, actuarial and pension-rule primitives.
//!
//! All rates are real (inflation-adjusted) per-year decimals.

use std::collections::BTreeMap;
use std::io::Read;

use crate::numerics::exp_moment;
use crate::{Error, Result};

/// Subjective preferences of the member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreferenceParams {
    rho: f64,
}

impl PreferenceParams {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::invalid("rho", format!("must be > 0, got {rho}")));
        }
        Ok(Self { rho })
    }

    /// Intertemporal discount rate.
    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Riskless bond plus one lognormal risky asset.
///
/// The Sharpe ratio and the Riccati constants `a`, `ã` are always derived
/// from the stored primitives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketModel {
    r: f64,
    mu: f64,
    sigma: f64,
    rho: f64,
}

impl MarketModel {
    pub fn new(r: f64, mu: f64, sigma: f64, prefs: PreferenceParams) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma", format!("must be > 0, got {sigma}")));
        }
        if !r.is_finite() || !mu.is_finite() {
            return Err(Error::invalid("r/mu", "must be finite"));
        }
        Ok(Self { r, mu, sigma, rho: prefs.rho() })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Sharpe ratio `(μ − r)/σ`.
    pub fn lambda(&self) -> f64 {
        (self.mu - self.r) / self.sigma
    }

    /// `ρ + λ² − 2r`, the growth rate of the quadratic coefficient.
    pub fn a(&self) -> f64 {
        let l = self.lambda();
        self.rho + l * l - 2.0 * self.r
    }

    /// `a + r`, the growth rate of the linear coefficient.
    pub fn a_tilde(&self) -> f64 {
        self.a() + self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SalaryKind {
    Linear,
    Exponential,
}

impl SalaryKind {
    pub fn name(self) -> &'static str {
        match self {
            SalaryKind::Linear => "linear",
            SalaryKind::Exponential => "exponential",
        }
    }
}

impl std::fmt::Display for SalaryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SalaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" | "lin" | "l" => Ok(SalaryKind::Linear),
            "exponential" | "exp" | "e" => Ok(SalaryKind::Exponential),
            other => Err(Error::invalid("salary kind", format!("unknown kind `{other}`"))),
        }
    }
}

/// Salary path and the share of it paid into the fund.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SalarySpec {
    kind: SalaryKind,
    s0: f64,
    g: f64,
    k: f64,
}

impl SalarySpec {
    pub fn new(kind: SalaryKind, s0: f64, g: f64, k: f64) -> Result<Self> {
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::invalid("s0", format!("must be > 0, got {s0}")));
        }
        if !(g >= 0.0 && g.is_finite()) {
            return Err(Error::invalid("g", format!("must be >= 0, got {g}")));
        }
        if !(k > 0.0 && k < 1.0) {
            return Err(Error::invalid("k", format!("must lie in (0, 1), got {k}")));
        }
        Ok(Self { kind, s0, g, k })
    }

    pub fn kind(&self) -> SalaryKind {
        self.kind
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Same spec with a different growth rate (unvalidated; used by sweeps).
    pub(crate) fn with_growth(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    pub fn salary_at(&self, t: f64) -> f64 {
        match self.kind {
            SalaryKind::Linear => self.s0 * (1.0 + self.g * t),
            SalaryKind::Exponential => self.s0 * (self.g * t).exp(),
        }
    }

    /// Fund contribution `k·S(t)`.
    pub fn contribution_at(&self, t: f64) -> f64 {
        self.k * self.salary_at(t)
    }

    /// `∫_0^t S(s) (t − s)^j e^{rate (t − s)} ds` in closed form.
    fn salary_moment(&self, j: u32, rate: f64, t: f64) -> f64 {
        match self.kind {
            // S(t − u) = s0 e^{g t} e^{−g u}
            SalaryKind::Exponential => {
                self.s0 * (self.g * t).exp() * exp_moment(j, rate - self.g, t)
            }
            // S(t − u) = s0 (1 + g t) − s0 g u
            SalaryKind::Linear => {
                self.s0
                    * ((1.0 + self.g * t) * exp_moment(j, rate, t)
                        - self.g * exp_moment(j + 1, rate, t))
            }
        }
    }

    /// Salary mass compounded at `rate`: `∫_0^t S(s) e^{rate (t − s)} ds`.
    pub fn accumulate(&self, rate: f64, t: f64) -> f64 {
        self.salary_moment(0, rate, t)
    }

    /// Derivative of [`accumulate`](Self::accumulate) with respect to `rate`.
    pub fn accumulate_rate_derivative(&self, rate: f64, t: f64) -> f64 {
        self.salary_moment(1, rate, t)
    }
}

/// Public pension rules before and after the reform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PensionRules {
    accrual: f64,
    c: f64,
    w: f64,
}

impl Default for PensionRules {
    fn default() -> Self {
        Self { accrual: 0.02, c: 0.33, w: 0.015 }
    }
}

impl PensionRules {
    pub fn new(accrual: f64, c: f64, w: f64) -> Result<Self> {
        if !(accrual > 0.0 && accrual.is_finite()) {
            return Err(Error::invalid("accrual", format!("must be > 0, got {accrual}")));
        }
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::invalid("c", format!("must lie in (0, 1), got {c}")));
        }
        if !w.is_finite() {
            return Err(Error::invalid("w", "must be finite"));
        }
        Ok(Self { accrual, c, w })
    }

    pub fn accrual(&self) -> f64 {
        self.accrual
    }

    /// Public contribution fraction.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Mean real GDP growth used to revalue contributions.
    pub fn w(&self) -> f64 {
        self.w
    }

    pub(crate) fn with_gdp_growth(mut self, w: f64) -> Self {
        self.w = w;
        self
    }
}

/// Salary-related pension `accrual · T · S(T)`.
pub fn old_pension(rules: &PensionRules, horizon: f64, final_salary: f64) -> f64 {
    rules.accrual * horizon * final_salary
}

/// Contribution-based pension `β c ∫_0^T S(t) e^{w (T − t)} dt`.
pub fn new_pension(spec: &SalarySpec, rules: &PensionRules, horizon: f64, beta: f64) -> f64 {
    beta * rules.c * spec.accumulate(rules.w, horizon)
}

/// Discrete-sum variant `β c Σ_{t=0}^{T−1} S(t) (1 + w)^{T−t}` over whole
/// years. Kept for comparison with [`new_pension`]; the pipeline does not
/// use it.
pub fn new_pension_discrete(spec: &SalarySpec, rules: &PensionRules, years: u32, beta: f64) -> f64 {
    let sum: f64 = (0..years)
        .map(|t| spec.salary_at(t as f64) * (1.0 + rules.w).powi((years - t) as i32))
        .sum();
    beta * rules.c * sum
}

/// Net replacement ratios `(P_o / S(T), P_n / S(T))`.
pub fn replacement_ratios(old: f64, new: f64, final_salary: f64) -> (f64, f64) {
    (old / final_salary, new / final_salary)
}

/// One-year survival probabilities for contiguous integer ages.
#[derive(Debug, Clone, PartialEq)]
pub struct MortalityTable {
    min_age: u32,
    survival: Vec<f64>,
}

impl MortalityTable {
    pub fn new(min_age: u32, survival: Vec<f64>) -> Result<Self> {
        if survival.is_empty() {
            return Err(Error::MalformedRow { line: 1, reason: "table has no rows".into() });
        }
        for (i, &p) in survival.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ProbabilityOutOfRange { age: min_age + i as u32, value: p });
            }
        }
        Ok(Self { min_age, survival })
    }

    /// Parses the `age,p` (or `age,q` with `p = 1 − q`) CSV layout.
    pub fn from_csv<R: Read>(source: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(source);
        let headers = reader
            .headers()
            .map_err(|e| Error::MalformedRow { line: 1, reason: e.to_string() })?
            .clone();
        let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let age_col = column("age")
            .ok_or_else(|| Error::MalformedRow { line: 1, reason: "missing `age` column".into() })?;
        let (prob_col, is_death) = match (column("p"), column("q")) {
            (Some(c), _) => (c, false),
            (None, Some(c)) => (c, true),
            (None, None) => {
                return Err(Error::MalformedRow {
                    line: 1,
                    reason: "missing `p` or `q` column".into(),
                })
            }
        };

        let mut min_age = None;
        let mut survival = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record =
                record.map_err(|e| Error::MalformedRow { line, reason: e.to_string() })?;
            let field = |c: usize| {
                record.get(c).ok_or_else(|| Error::MalformedRow {
                    line,
                    reason: format!("missing column {}", c + 1),
                })
            };
            let age: u32 = field(age_col)?
                .parse()
                .map_err(|e| Error::MalformedRow { line, reason: format!("age: {e}") })?;
            let value: f64 = field(prob_col)?
                .parse()
                .map_err(|e| Error::MalformedRow { line, reason: format!("probability: {e}") })?;
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ProbabilityOutOfRange { age, value });
            }
            let expected = *min_age.get_or_insert(age) + survival.len() as u32;
            if age != expected {
                return Err(Error::NonContiguousAges { expected, found: age });
            }
            survival.push(if is_death { 1.0 - value } else { value });
        }
        let min_age = min_age
            .ok_or_else(|| Error::MalformedRow { line: 2, reason: "table has no rows".into() })?;
        Self::new(min_age, survival)
    }

    pub fn min_age(&self) -> u32 {
        self.min_age
    }

    /// Extreme age ω.
    pub fn max_age(&self) -> u32 {
        self.min_age + self.survival.len() as u32 - 1
    }

    pub fn survival(&self, age: u32) -> Option<f64> {
        age.checked_sub(self.min_age).and_then(|i| self.survival.get(i as usize)).copied()
    }

    /// `Σ_{n=1}^{ω−x} ₙp_x vⁿ` with `v = 1/(1 + rate)`.
    pub fn annuity_factor(&self, age: u32, rate: f64) -> Result<f64> {
        if age < self.min_age || age > self.max_age() {
            return Err(Error::AgeOutOfTable { age });
        }
        let v = 1.0 / (1.0 + rate);
        let start = (age - self.min_age) as usize;
        let mut survive = 1.0;
        let mut discount = 1.0;
        let mut total = 0.0;
        for &p in &self.survival[start..self.survival.len() - 1] {
            survive *= p;
            discount *= v;
            total += survive * discount;
        }
        Ok(total)
    }
}

/// Where annuity prices come from.
#[derive(Debug, Clone, PartialEq)]
pub enum AnnuitySource {
    Table(MortalityTable),
    /// Explicit age → annuity price; the discount rate is ignored.
    Override(BTreeMap<u32, f64>),
}

impl AnnuitySource {
    pub fn overrides<I: IntoIterator<Item = (u32, f64)>>(values: I) -> Result<Self> {
        let map: BTreeMap<u32, f64> = values.into_iter().collect();
        if let Some((&age, &v)) = map.iter().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("annuity override", format!("age {age}: {v} is not > 0")));
        }
        if map.is_empty() {
            return Err(Error::invalid("annuity override", "no values given"));
        }
        Ok(AnnuitySource::Override(map))
    }
}

/// Annuity price at `age`. Table mode discounts at `rate`; override mode
/// returns the stored value.
pub fn annuity_factor(source: &AnnuitySource, age: u32, rate: f64) -> Result<f64> {
    match source {
        AnnuitySource::Table(table) => table.annuity_factor(age, rate),
        AnnuitySource::Override(map) => map.get(&age).copied().ok_or(Error::AgeOutOfTable { age }),
    }
}
