//! The five batch commands. Each one validates the configuration, computes
//! every artifact in memory and only then writes them.

use std::path::PathBuf;

use log::{info, warn};
use pengap::analysis::{age_sweep, break_even, histogram, AgeSweepRow, BreakEvenParam, BreakEvenQuery, Histogram};
use pengap::control::{RiccatiMode, RiccatiSolution};
use pengap::model::SalaryKind;
use pengap::plan::{PensionSummary, PlanParams};
use pengap::simulation::{
    ensemble_stats, final_pension_distribution, simulate_paths, simulate_with_strategy, EnsembleStats,
    PathEnsemble, SeriesStats, Strategy, DEFAULT_PERCENTILES,
};
use thiserror::Error;

use crate::config::{ConfigError, RiccatiChoice, RunConfig};
use crate::output::{fmt_num, write_all, CsvFile};

/// Points of the sampled `P_o − P_n` curve in break-even artifacts.
pub const BREAK_EVEN_CURVE_POINTS: usize = 101;

/// Spacing of the target curve rows, in years.
const TARGET_STEP: f64 = 0.25;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Model { context: String, source: pengap::Error },
    #[error("writing artifacts: {0}")]
    Io(#[from] std::io::Error),
    #[error("no break-even point for `{parameter}` on [{lo}, {hi}] ({kinds}); sampled curve written to {path}")]
    NoRoot { parameter: &'static str, lo: f64, hi: f64, kinds: String, path: PathBuf },
}

trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for pengap::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Model { context: what(), source })
    }
}

/// Strategy for a plan; a closed form that cannot be evaluated for these
/// parameters falls back to integrating the ODE.
pub fn riccati_for(plan: &PlanParams, choice: RiccatiChoice) -> Result<RiccatiSolution, CliError> {
    let kind = plan.salary.kind();
    let mode = match choice {
        RiccatiChoice::ClosedForm => RiccatiMode::ClosedForm,
        RiccatiChoice::Ode => RiccatiMode::NumericalOde,
    };
    match plan.riccati(mode) {
        Err(pengap::Error::DegenerateClosedForm { reason }) => {
            warn!("{kind}: closed form unavailable ({reason}); integrating the ODE instead");
            plan.riccati(RiccatiMode::NumericalOde).context(|| format!("{kind} strategy"))
        }
        other => other.context(|| format!("{kind} strategy")),
    }
}

/// One row of the pensions table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PensionRow {
    pub summary: PensionSummary,
    /// `None` when the new pension already covers the old one.
    pub r_star: Option<f64>,
}

pub struct PensionsReport {
    pub rows: Vec<PensionRow>,
    pub files: Vec<CsvFile>,
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

pub fn pensions_table(cfg: &RunConfig) -> Result<PensionsReport, CliError> {
    cfg.validate()?;
    let mut csv = CsvFile::new(
        "pensions.csv",
        &["salary", "P_o", "P_n", "Pi_o", "Pi_n", "r_star", "S_T", "annuity", "final_target"],
    );
    let mut rows = Vec::new();
    for plan in cfg.plans()? {
        let kind = plan.salary.kind();
        let summary = plan.pensions().context(|| format!("{kind} pensions"))?;
        let r_star = match plan.schedule() {
            Ok(s) => Some(s.r_star()),
            Err(pengap::Error::NonPositiveGap { .. }) => None,
            Err(e) => return Err(CliError::Model { context: format!("{kind} target rate"), source: e }),
        };
        csv.push_row([
            kind.name().to_string(),
            fmt_num(summary.old_pension),
            fmt_num(summary.new_pension),
            fmt_num(summary.old_ratio),
            fmt_num(summary.new_ratio),
            opt(r_star),
            fmt_num(summary.final_salary),
            fmt_num(summary.annuity),
            fmt_num(summary.final_target),
        ]);
        rows.push(PensionRow { summary, r_star });
    }
    Ok(PensionsReport { rows, files: vec![csv] })
}

pub fn cmd_pensions(cfg: &RunConfig) -> Result<PensionsReport, CliError> {
    let report = pensions_table(cfg)?;
    write_all(&cfg.output_dir, &report.files)?;
    Ok(report)
}

/// Target curve and control coefficients on a quarterly grid.
pub fn targets_table(cfg: &RunConfig) -> Result<CsvFile, CliError> {
    cfg.validate()?;
    let mut csv = CsvFile::new(
        "targets.csv",
        &["salary", "t", "F", "alpha", "beta", "gamma", "neutral_wealth"],
    );
    for plan in cfg.plans()? {
        let sol = riccati_for(&plan, cfg.riccati)?;
        let horizon = sol.horizon();
        let n = (horizon / TARGET_STEP).round() as usize;
        for i in 0..=n {
            let t = if i == n { horizon } else { i as f64 * TARGET_STEP };
            csv.push_row([
                plan.salary.kind().name().to_string(),
                fmt_num(t),
                fmt_num(sol.schedule().interim_target(t)),
                fmt_num(sol.alpha_at(t)),
                fmt_num(sol.beta_at(t)),
                fmt_num(sol.gamma_at(t)),
                fmt_num(sol.neutral_wealth(t)),
            ]);
        }
    }
    Ok(csv)
}

pub fn cmd_targets(cfg: &RunConfig) -> Result<CsvFile, CliError> {
    let csv = targets_table(cfg)?;
    write_all(&cfg.output_dir, std::slice::from_ref(&csv))?;
    Ok(csv)
}

/// Simulated ensemble of one salary kind.
pub struct SimulationRun {
    pub kind: SalaryKind,
    pub summary: PensionSummary,
    pub ensemble: PathEnsemble,
    pub stats: EnsembleStats,
    /// `P_tot` per scenario.
    pub total_pensions: Vec<f64>,
    pub histogram: Histogram,
}

pub struct SimulationReport {
    pub runs: Vec<SimulationRun>,
    pub files: Vec<CsvFile>,
}

fn stats_header() -> Vec<String> {
    let mut h = vec!["salary".to_string(), "t".to_string()];
    h.extend(DEFAULT_PERCENTILES.iter().map(|p| format!("p{p}")));
    h.push("mean".into());
    h.push("std".into());
    h
}

fn push_stats(csv: &mut CsvFile, kind: SalaryKind, s: &SeriesStats) {
    for (n, &t) in s.times.iter().enumerate() {
        let mut row = vec![kind.name().to_string(), fmt_num(t)];
        row.extend(s.quantiles.iter().map(|q| fmt_num(q[n])));
        row.push(fmt_num(s.mean[n]));
        row.push(fmt_num(s.std_dev[n]));
        csv.push_row(row);
    }
}

/// Runs the ensemble for every configured salary kind. With
/// `force_riskless` the whole fund stays in the riskless asset.
pub fn simulation(cfg: &RunConfig, force_riskless: bool) -> Result<SimulationReport, CliError> {
    cfg.validate()?;
    let header = stats_header();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut strategy_csv = CsvFile::new("strategy_stats.csv", &header);
    let mut fund_csv = CsvFile::new("fund_stats.csv", &header);
    let mut hist_csv = CsvFile::new("pension_hist.csv", &["salary", "bin_lo", "bin_hi", "count", "share"]);
    let mut runs = Vec::new();
    for plan in cfg.plans()? {
        let kind = plan.salary.kind();
        let summary = plan.pensions().context(|| format!("{kind} pensions"))?;
        let sim = cfg.simulation(summary.horizon)?;
        let ensemble = if force_riskless {
            simulate_with_strategy(&sim, Strategy::Constant(0.0), &plan.salary, &plan.market)
        } else {
            let sol = riccati_for(&plan, cfg.riccati)?;
            simulate_paths(&sim, &sol, &plan.salary, &plan.market)
        }
        .context(|| format!("{kind} simulation"))?;
        info!("{kind}: simulated {} scenarios of {} steps", sim.n_scenarios(), sim.steps());
        let stats = ensemble_stats(&ensemble, &DEFAULT_PERCENTILES).context(|| format!("{kind} statistics"))?;
        let total_pensions = final_pension_distribution(&ensemble, summary.new_pension, summary.annuity)
            .context(|| format!("{kind} final pensions"))?;
        let hist = histogram(&total_pensions, cfg.hist_bins).context(|| format!("{kind} histogram"))?;

        push_stats(&mut strategy_csv, kind, &stats.fraction);
        push_stats(&mut fund_csv, kind, &stats.fund);
        for (i, &count) in hist.counts.iter().enumerate() {
            hist_csv.push_row([
                kind.name().to_string(),
                fmt_num(hist.edges[i]),
                fmt_num(hist.edges[i + 1]),
                count.to_string(),
                fmt_num(count as f64 / hist.total as f64),
            ]);
        }
        runs.push(SimulationRun { kind, summary, ensemble, stats, total_pensions, histogram: hist });
    }
    Ok(SimulationReport { runs, files: vec![strategy_csv, fund_csv, hist_csv] })
}

pub fn cmd_simulate(cfg: &RunConfig, force_riskless: bool) -> Result<SimulationReport, CliError> {
    let report = simulation(cfg, force_riskless)?;
    write_all(&cfg.output_dir, &report.files)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakEvenResult {
    pub kind: SalaryKind,
    /// `None` when `P_o − P_n` keeps its sign on the bracket.
    pub root: Option<f64>,
    pub curve: Vec<(f64, f64)>,
}

pub struct BreakEvenReport {
    pub parameter: BreakEvenParam,
    pub bracket: (f64, f64),
    pub results: Vec<BreakEvenResult>,
    pub file: CsvFile,
}

pub fn break_even_table(
    cfg: &RunConfig,
    parameter: BreakEvenParam,
    bracket: Option<(f64, f64)>,
) -> Result<BreakEvenReport, CliError> {
    cfg.validate()?;
    let (lo, hi) = bracket.unwrap_or_else(|| parameter.default_bracket());
    if !(lo < hi) {
        return Err(ConfigError::Invalid { key: "bracket".into(), reason: format!("[{lo}, {hi}] is empty") }.into());
    }
    let mut csv = CsvFile::new(
        format!("break_even_{}.csv", parameter.name()),
        &["salary", "parameter", "row", "value", "gap"],
    );
    let mut results = Vec::new();
    for plan in cfg.plans()? {
        let kind = plan.salary.kind();
        let q = BreakEvenQuery::new(parameter, plan).with_bracket(lo, hi);
        let curve = q.gap_curve(BREAK_EVEN_CURVE_POINTS).context(|| format!("{kind} gap curve"))?;
        let root = match break_even(&q) {
            Ok(r) => Some(r),
            Err(pengap::Error::NoSignChange { .. }) => None,
            Err(e) => return Err(CliError::Model { context: format!("{kind} break-even"), source: e }),
        };
        for &(p, gap) in &curve {
            csv.push_row([kind.name(), parameter.name(), "curve", &fmt_num(p), &fmt_num(gap)]);
        }
        match root {
            Some(r) => csv.push_row([kind.name(), parameter.name(), "root", &fmt_num(r), "0"]),
            None => csv.push_row([kind.name(), parameter.name(), "no_root", "", ""]),
        }
        results.push(BreakEvenResult { kind, root, curve });
    }
    Ok(BreakEvenReport { parameter, bracket: (lo, hi), results, file: csv })
}

/// Writes the curve in every case; fails afterwards when some salary kind
/// has no root on the bracket.
pub fn cmd_break_even(
    cfg: &RunConfig,
    parameter: BreakEvenParam,
    bracket: Option<(f64, f64)>,
) -> Result<BreakEvenReport, CliError> {
    let report = break_even_table(cfg, parameter, bracket)?;
    let paths = write_all(&cfg.output_dir, std::slice::from_ref(&report.file))?;
    let missing: Vec<&str> =
        report.results.iter().filter(|r| r.root.is_none()).map(|r| r.kind.name()).collect();
    if !missing.is_empty() {
        return Err(CliError::NoRoot {
            parameter: parameter.name(),
            lo: report.bracket.0,
            hi: report.bracket.1,
            kinds: missing.join(", "),
            path: paths[0].clone(),
        });
    }
    Ok(report)
}

pub struct AgeSweepReport {
    pub exponential: Vec<AgeSweepRow>,
    pub linear: Vec<AgeSweepRow>,
    pub file: CsvFile,
}

/// Table of pensions by retirement age for both salary kinds.
pub fn age_sweep_table(cfg: &RunConfig, ages: &[u32]) -> Result<AgeSweepReport, CliError> {
    if ages.is_empty() {
        return Err(ConfigError::Invalid { key: "ages".into(), reason: "no ages given".into() }.into());
    }
    if let Some(&bad) = ages.iter().find(|&&a| a <= cfg.entry_age) {
        return Err(ConfigError::Invalid {
            key: "ages".into(),
            reason: format!("retirement age {bad} must exceed entry age {}", cfg.entry_age),
        }
        .into());
    }
    // the sweep covers both kinds regardless of `salary`
    let mut both = cfg.clone();
    both.salary = crate::config::SalarySelection::Both;
    both.validate()?;
    let exp_plan = both.plan(SalaryKind::Exponential)?;
    let lin_plan = both.plan(SalaryKind::Linear)?;
    let exponential = age_sweep(ages, &exp_plan).context(|| "exponential age sweep".into())?;
    let linear = age_sweep(ages, &lin_plan).context(|| "linear age sweep".into())?;

    let mut csv = CsvFile::new(
        "age_sweep.csv",
        &[
            "x_T", "T", "annuity", "beta", "P_o_e", "P_n_e", "Pi_o_e", "Pi_n_e", "P_o_l", "P_n_l", "Pi_o_l",
            "Pi_n_l", "r_star_e", "r_star_l",
        ],
    );
    for (e, l) in exponential.iter().zip(&linear) {
        let (se, sl) = (e.summary, l.summary);
        csv.push_row([
            e.retirement_age.to_string(),
            fmt_num(se.horizon),
            fmt_num(se.annuity),
            fmt_num(se.beta),
            fmt_num(se.old_pension),
            fmt_num(se.new_pension),
            fmt_num(se.old_ratio),
            fmt_num(se.new_ratio),
            fmt_num(sl.old_pension),
            fmt_num(sl.new_pension),
            fmt_num(sl.old_ratio),
            fmt_num(sl.new_ratio),
            opt(e.r_star),
            opt(l.r_star),
        ]);
    }
    Ok(AgeSweepReport { exponential, linear, file: csv })
}

pub fn cmd_sweep_age(cfg: &RunConfig, ages: &[u32]) -> Result<AgeSweepReport, CliError> {
    let report = age_sweep_table(cfg, ages)?;
    write_all(&cfg.output_dir, std::slice::from_ref(&report.file))?;
    Ok(report)
}
