//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key has a default equal
//! to the base case, so an empty file is a valid configuration.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use pengap::model::{
    AnnuitySource, MarketModel, MortalityTable, PensionRules, PreferenceParams, SalaryKind,
    SalarySpec,
};
use pengap::plan::PlanParams;
use pengap::simulation::{SimulationConfig, DEFAULT_DT, DEFAULT_SCENARIOS};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: cannot parse `{value}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("`{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Salary shapes a run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SalarySelection {
    Both,
    Only(SalaryKind),
}

impl SalarySelection {
    pub fn kinds(self) -> Vec<SalaryKind> {
        match self {
            SalarySelection::Both => vec![SalaryKind::Exponential, SalaryKind::Linear],
            SalarySelection::Only(k) => vec![k],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiccatiChoice {
    ClosedForm,
    Ode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub x0: f64,
    pub c: f64,
    pub w: f64,
    pub accrual: f64,
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
    pub rho: f64,
    pub entry_age: u32,
    pub retirement_age: u32,
    pub s0: f64,
    pub salary: SalarySelection,
    pub g_exponential: f64,
    pub k_exponential: f64,
    pub g_linear: f64,
    pub k_linear: f64,
    pub dt: f64,
    pub n_scenarios: usize,
    pub seed: u64,
    pub mortality: Option<PathBuf>,
    pub annuity_rate: f64,
    pub annuities: Vec<(u32, f64)>,
    pub ages: Vec<u32>,
    pub hist_bins: usize,
    pub riccati: RiccatiChoice,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            x0: 1.0,
            c: 0.33,
            w: 0.015,
            accrual: 0.02,
            r: 0.015,
            mu: 0.06,
            sigma: 0.12,
            rho: 0.03,
            entry_age: 30,
            retirement_age: 65,
            s0: 1.0,
            salary: SalarySelection::Both,
            g_exponential: 0.06,
            k_exponential: 0.10,
            g_linear: 0.08,
            k_linear: 0.04,
            dt: DEFAULT_DT,
            n_scenarios: DEFAULT_SCENARIOS,
            seed: 20_190_101,
            mortality: None,
            annuity_rate: 0.015,
            annuities: vec![(60, 20.95), (63, 19.11), (65, 17.875), (67, 16.64), (70, 14.81)],
            ages: vec![60, 63, 65, 67, 70],
            hist_bins: 30,
            riccati: RiccatiChoice::ClosedForm,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn bad(key: &str, value: &str, reason: impl ToString) -> ConfigError {
    ConfigError::BadValue { key: key.into(), value: value.into(), reason: reason.to_string() }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    // accepts plain decimals and `a/b` fractions such as `1/26`
    let parsed = match value.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|e| bad(key, value, e))?;
            let d: f64 = d.trim().parse().map_err(|e| bad(key, value, e))?;
            n / d
        }
        None => value.parse().map_err(|e| bad(key, value, e))?,
    };
    if !parsed.is_finite() {
        return Err(bad(key, value, "not a finite number"));
    }
    Ok(parsed)
}

fn parse_int<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| bad(key, value, e))
}

/// Parses `age:value` pairs separated by commas.
pub fn parse_annuities(key: &str, value: &str) -> Result<Vec<(u32, f64)>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (age, v) = pair.split_once(':').ok_or_else(|| bad(key, pair, "expected AGE:VALUE"))?;
            Ok((parse_int(key, age.trim())?, parse_f64(key, v.trim())?))
        })
        .collect()
}

fn parse_ages(key: &str, value: &str) -> Result<Vec<u32>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|a| parse_int(key, a))
        .collect()
}

impl RunConfig {
    /// Base case with the entries of `text` applied on top.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "x0" => self.x0 = parse_f64(key, value)?,
            "c" => self.c = parse_f64(key, value)?,
            "w" => self.w = parse_f64(key, value)?,
            "accrual" => self.accrual = parse_f64(key, value)?,
            "r" => self.r = parse_f64(key, value)?,
            "mu" => self.mu = parse_f64(key, value)?,
            "sigma" => self.sigma = parse_f64(key, value)?,
            "rho" => self.rho = parse_f64(key, value)?,
            "entry_age" => self.entry_age = parse_int(key, value)?,
            "retirement_age" => self.retirement_age = parse_int(key, value)?,
            "s0" => self.s0 = parse_f64(key, value)?,
            "salary" => {
                self.salary = match value.to_ascii_lowercase().as_str() {
                    "both" => SalarySelection::Both,
                    other => SalarySelection::Only(other.parse().map_err(|e| bad(key, value, e))?),
                }
            }
            "g_exponential" => self.g_exponential = parse_f64(key, value)?,
            "k_exponential" => self.k_exponential = parse_f64(key, value)?,
            "g_linear" => self.g_linear = parse_f64(key, value)?,
            "k_linear" => self.k_linear = parse_f64(key, value)?,
            "dt" => self.dt = parse_f64(key, value)?,
            "n_scenarios" => self.n_scenarios = parse_int(key, value)?,
            "seed" => self.seed = parse_int(key, value)?,
            "mortality" => {
                self.mortality = (!value.is_empty()).then(|| PathBuf::from(value));
            }
            "annuity_rate" => self.annuity_rate = parse_f64(key, value)?,
            "annuities" => self.annuities = parse_annuities(key, value)?,
            "ages" => self.ages = parse_ages(key, value)?,
            "hist_bins" => self.hist_bins = parse_int(key, value)?,
            "riccati" => {
                self.riccati = match value {
                    "closed_form" => RiccatiChoice::ClosedForm,
                    "ode" => RiccatiChoice::Ode,
                    _ => return Err(bad(key, value, "expected closed_form or ode")),
                }
            }
            "output_dir" => self.output_dir = PathBuf::from(value),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad("--set", kv, "expected KEY=VALUE"))?;
        self.set(k.trim(), v.trim())
    }

    fn invalid(key: &str, e: impl ToString) -> ConfigError {
        ConfigError::Invalid { key: key.into(), reason: e.to_string() }
    }

    pub fn market(&self) -> Result<MarketModel, ConfigError> {
        let prefs = PreferenceParams::new(self.rho).map_err(|e| Self::invalid("rho", e))?;
        MarketModel::new(self.r, self.mu, self.sigma, prefs).map_err(|e| {
            let key = if self.sigma > 0.0 { "r/mu" } else { "sigma" };
            Self::invalid(key, e)
        })
    }

    pub fn rules(&self) -> Result<PensionRules, ConfigError> {
        PensionRules::new(self.accrual, self.c, self.w).map_err(|e| {
            let key = if self.accrual > 0.0 { "c" } else { "accrual" };
            Self::invalid(key, e)
        })
    }

    pub fn salary_spec(&self, kind: SalaryKind) -> Result<SalarySpec, ConfigError> {
        let (g, k, suffix) = match kind {
            SalaryKind::Exponential => (self.g_exponential, self.k_exponential, "exponential"),
            SalaryKind::Linear => (self.g_linear, self.k_linear, "linear"),
        };
        SalarySpec::new(kind, self.s0, g, k).map_err(|e| match e {
            pengap::Error::InvalidParameter { name, reason } => {
                let key = if name == "s0" { name.to_string() } else { format!("{name}_{suffix}") };
                ConfigError::Invalid { key, reason }
            }
            other => Self::invalid(suffix, other),
        })
    }

    pub fn annuity_source(&self) -> Result<AnnuitySource, ConfigError> {
        match &self.mortality {
            Some(path) => {
                let file = File::open(path)
                    .map_err(|source| ConfigError::Io { path: path.clone(), source })?;
                let table = MortalityTable::from_csv(file).map_err(|e| Self::invalid("mortality", e))?;
                Ok(AnnuitySource::Table(table))
            }
            None => AnnuitySource::overrides(self.annuities.iter().copied())
                .map_err(|e| Self::invalid("annuities", e)),
        }
    }

    /// Fully validated plan for one salary kind at the configured
    /// retirement age.
    pub fn plan(&self, kind: SalaryKind) -> Result<PlanParams, ConfigError> {
        let plan = PlanParams {
            market: self.market()?,
            salary: self.salary_spec(kind)?,
            rules: self.rules()?,
            x0: self.x0,
            entry_age: self.entry_age,
            retirement_age: self.retirement_age,
            annuity: self.annuity_source()?,
            annuity_rate: self.annuity_rate,
        };
        if !(self.x0 >= 0.0) {
            return Err(Self::invalid("x0", format!("must be >= 0, got {}", self.x0)));
        }
        plan.horizon().map_err(|e| Self::invalid("retirement_age", e))?;
        plan.annuity_price().map_err(|e| Self::invalid("annuities", e))?;
        Ok(plan)
    }

    pub fn plans(&self) -> Result<Vec<PlanParams>, ConfigError> {
        self.salary.kinds().into_iter().map(|k| self.plan(k)).collect()
    }

    pub fn simulation(&self, horizon: f64) -> Result<SimulationConfig, ConfigError> {
        SimulationConfig::new(self.dt, self.n_scenarios, self.seed, horizon, self.x0).map_err(|e| {
            let key = if self.n_scenarios == 0 { "n_scenarios" } else { "dt" };
            Self::invalid(key, e)
        })
    }

    /// Checks everything a command may touch before it starts computing.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let plans = self.plans()?;
        self.simulation(plans[0].horizon().map_err(|e| Self::invalid("retirement_age", e))?)?;
        if self.hist_bins == 0 {
            return Err(Self::invalid("hist_bins", "must be at least 1"));
        }
        if !(self.annuity_rate > -1.0) {
            return Err(Self::invalid("annuity_rate", "must exceed -1"));
        }
        Ok(())
    }

    /// Entries as `key = value` text, including defaults.
    pub fn to_text(&self) -> String {
        let mut m = BTreeMap::new();
        let salary = match self.salary {
            SalarySelection::Both => "both".to_string(),
            SalarySelection::Only(k) => k.name().to_string(),
        };
        let annuities =
            self.annuities.iter().map(|(a, v)| format!("{a}:{v}")).collect::<Vec<_>>().join(",");
        let ages = self.ages.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        for (k, v) in [
            ("x0", self.x0.to_string()),
            ("c", self.c.to_string()),
            ("w", self.w.to_string()),
            ("accrual", self.accrual.to_string()),
            ("r", self.r.to_string()),
            ("mu", self.mu.to_string()),
            ("sigma", self.sigma.to_string()),
            ("rho", self.rho.to_string()),
            ("entry_age", self.entry_age.to_string()),
            ("retirement_age", self.retirement_age.to_string()),
            ("s0", self.s0.to_string()),
            ("salary", salary),
            ("g_exponential", self.g_exponential.to_string()),
            ("k_exponential", self.k_exponential.to_string()),
            ("g_linear", self.g_linear.to_string()),
            ("k_linear", self.k_linear.to_string()),
            ("dt", self.dt.to_string()),
            ("n_scenarios", self.n_scenarios.to_string()),
            ("seed", self.seed.to_string()),
            ("annuity_rate", self.annuity_rate.to_string()),
            ("annuities", annuities),
            ("ages", ages),
            ("hist_bins", self.hist_bins.to_string()),
        ] {
            m.insert(k, v);
        }
        m.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
