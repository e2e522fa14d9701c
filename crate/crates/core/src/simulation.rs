//! Monte Carlo evolution of the fund under a feedback investment strategy.
//!
//! The wealth SDE `dX = {[(μ − r) y + r] X + c(t)} dt + σ y X dW` is stepped
//! with Euler–Maruyama. Every scenario draws its normals from its own
//! ChaCha8 stream keyed by `(master_seed, scenario index)`, so an ensemble
//! does not depend on how scenarios are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::control::{clamp_fraction, RiccatiSolution};
use crate::model::{MarketModel, SalarySpec};
use crate::{Error, Result};

pub const DEFAULT_DT: f64 = 1.0 / 26.0;
pub const DEFAULT_SCENARIOS: usize = 1000;
pub const DEFAULT_PERCENTILES: [f64; 5] = [5.0, 25.0, 50.0, 75.0, 95.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    dt: f64,
    n_scenarios: usize,
    master_seed: u64,
    horizon: f64,
    x0: f64,
}

impl SimulationConfig {
    pub fn new(dt: f64, n_scenarios: usize, master_seed: u64, horizon: f64, x0: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
        }
        if n_scenarios == 0 {
            return Err(Error::invalid("n_scenarios", "must be at least 1"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("horizon", format!("must be > 0, got {horizon}")));
        }
        if !(horizon / dt).round().ge(&1.0) {
            return Err(Error::invalid("dt", format!("larger than the horizon {horizon}")));
        }
        if !x0.is_finite() {
            return Err(Error::invalid("x0", "must be finite"));
        }
        Ok(Self { dt, n_scenarios, master_seed, horizon, x0 })
    }

    /// Number of time steps; the grid is stretched so the last point is `T`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Step actually used, `T / steps`.
    pub fn step_size(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn time_grid(&self) -> Vec<f64> {
        let n = self.steps();
        let h = self.step_size();
        (0..=n).map(|i| if i == n { self.horizon } else { i as f64 * h }).collect()
    }
}

/// How the risky fraction is chosen at each step.
#[derive(Debug, Clone, Copy)]
pub enum Strategy<'a> {
    /// Optimal feedback fraction clamped to `[0, 1]`.
    Clamped(&'a RiccatiSolution),
    /// Fixed fraction, e.g. `0` for riskless-only investment.
    Constant(f64),
}

impl Strategy<'_> {
    fn fraction(&self, t: f64, x: f64) -> f64 {
        match self {
            Strategy::Clamped(sol) => sol.clamped_fraction(t, x),
            Strategy::Constant(y) => *y,
        }
    }
}

/// Fund and fraction paths for every scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub config: SimulationConfig,
    pub times: Vec<f64>,
    /// `n_scenarios × (steps + 1)`
    pub fund: Vec<Vec<f64>>,
    /// `n_scenarios × steps`; the fraction applied over `[t_n, t_{n+1})`.
    pub fraction: Vec<Vec<f64>>,
}

impl PathEnsemble {
    pub fn master_seed(&self) -> u64 {
        self.config.master_seed
    }

    pub fn final_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.fund.iter().map(|p| *p.last().expect("non-empty path"))
    }
}

/// Simulates under the clamped optimal strategy of `sol`.
pub fn simulate_paths(
    cfg: &SimulationConfig,
    sol: &RiccatiSolution,
    spec: &SalarySpec,
    market: &MarketModel,
) -> Result<PathEnsemble> {
    if (cfg.horizon - sol.horizon()).abs() > 1e-9 {
        return Err(Error::ConfigMismatch(format!(
            "simulation horizon {} differs from strategy horizon {}",
            cfg.horizon,
            sol.horizon()
        )));
    }
    if sol.schedule().spec() != spec || sol.market() != market {
        return Err(Error::ConfigMismatch(
            "strategy was built for a different salary or market".into(),
        ));
    }
    simulate_with_strategy(cfg, Strategy::Clamped(sol), spec, market)
}

pub fn simulate_with_strategy(
    cfg: &SimulationConfig,
    strategy: Strategy<'_>,
    spec: &SalarySpec,
    market: &MarketModel,
) -> Result<PathEnsemble> {
    if let Strategy::Constant(y) = strategy {
        if clamp_fraction(y) != y {
            return Err(Error::invalid("fraction", format!("{y} is outside [0, 1]")));
        }
    }
    let times = cfg.time_grid();
    let paths: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.n_scenarios)
        .into_par_iter()
        .map(|scenario| simulate_one(cfg, &times, strategy, spec, market, scenario as u64))
        .collect();
    let (fund, fraction) = paths.into_iter().unzip();
    Ok(PathEnsemble { config: *cfg, times, fund, fraction })
}

fn simulate_one(
    cfg: &SimulationConfig,
    times: &[f64],
    strategy: Strategy<'_>,
    spec: &SalarySpec,
    market: &MarketModel,
    scenario: u64,
) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
    rng.set_stream(scenario);
    let (r, premium, sigma) = (market.r(), market.mu() - market.r(), market.sigma());
    let steps = times.len() - 1;
    let mut fund = Vec::with_capacity(steps + 1);
    let mut fraction = Vec::with_capacity(steps);
    let mut x = cfg.x0;
    fund.push(x);
    for n in 0..steps {
        let (t, dt) = (times[n], times[n + 1] - times[n]);
        let y = strategy.fraction(t, x);
        let z: f64 = StandardNormal.sample(&mut rng);
        x += ((premium * y + r) * x + spec.contribution_at(t)) * dt + sigma * y * x * dt.sqrt() * z;
        fraction.push(y);
        fund.push(x);
    }
    (fund, fraction)
}

/// Per-step order statistics and moments of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesStats {
    pub times: Vec<f64>,
    /// `quantiles[j][n]` is percentile `j` at step `n`.
    pub quantiles: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Sample standard deviation (`n − 1` denominator; 0 for one scenario).
    pub std_dev: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub percentiles: Vec<f64>,
    pub fund: SeriesStats,
    pub fraction: SeriesStats,
}

/// Percentile of sorted data with linear interpolation between order
/// statistics at position `p/100 · (n − 1)`.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn series_stats(paths: &[Vec<f64>], times: &[f64], percentiles: &[f64]) -> SeriesStats {
    let steps = times.len();
    let n = paths.len() as f64;
    let mut quantiles = vec![Vec::with_capacity(steps); percentiles.len()];
    let mut mean = Vec::with_capacity(steps);
    let mut std_dev = Vec::with_capacity(steps);
    let mut column = Vec::with_capacity(paths.len());
    for step in 0..steps {
        column.clear();
        column.extend(paths.iter().map(|p| p[step]));
        let m = column.iter().sum::<f64>() / n;
        let var = if paths.len() > 1 {
            column.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        mean.push(m);
        std_dev.push(var.sqrt());
        column.sort_by(f64::total_cmp);
        for (q, &p) in quantiles.iter_mut().zip(percentiles) {
            q.push(percentile_sorted(&column, p));
        }
    }
    SeriesStats { times: times.to_vec(), quantiles, mean, std_dev }
}

pub fn ensemble_stats(ens: &PathEnsemble, percentiles: &[f64]) -> Result<EnsembleStats> {
    if ens.fund.is_empty() {
        return Err(Error::EmptySamples);
    }
    if let Some(&p) = percentiles.iter().find(|p| !(0.0..=100.0).contains(*p)) {
        return Err(Error::invalid("percentile", format!("{p} is outside [0, 100]")));
    }
    let mut sorted = percentiles.to_vec();
    sorted.sort_by(f64::total_cmp);
    let steps = ens.times.len() - 1;
    Ok(EnsembleStats {
        fund: series_stats(&ens.fund, &ens.times, &sorted),
        fraction: series_stats(&ens.fraction, &ens.times[..steps], &sorted),
        percentiles: sorted,
    })
}

/// Total pension per scenario, `P_n + X(T) / ä`.
pub fn final_pension_distribution(ens: &PathEnsemble, new_pension: f64, annuity: f64) -> Result<Vec<f64>> {
    if !(annuity > 0.0) {
        return Err(Error::invalid("annuity", format!("must be > 0, got {annuity}")));
    }
    Ok(ens.final_values().map(|x| new_pension + x / annuity).collect())
}
