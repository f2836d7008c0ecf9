//! Seeded, config-driven Monte Carlo experiments.

pub mod stats;
pub mod verify;

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{
    deviation_zs_to_z, find_stationary_points, write_reports_csv, LandscapeConfig, StationaryPointReport,
};
use crate::linalg::norm;
use crate::models::{draw_dataset, CompositeModel, DistributionSpec};
use crate::rng::{derive_seed, rng_from};
use crate::scalar_loss;
use crate::subgradient_maps::{pointwise_gap, sup_gap_over_ball, EmpiricalObjective, OracleStrategy, PopulationOracle};

pub use stats::{fit_loglog, median, spearman, CellSummary, RateFit};
pub use verify::{run_verify, run_verify_with, CheckResult, HausdorffFn, VerifyReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RateM,
    RateD,
    Peeling,
    Landscape,
    Verify,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::RateM => "rate_m",
            ExperimentKind::RateD => "rate_d",
            ExperimentKind::Peeling => "peeling",
            ExperimentKind::Landscape => "landscape",
            ExperimentKind::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleChoice {
    #[default]
    ClosedForm,
    MegaSample {
        m_pop: usize,
    },
}

fn default_model() -> CompositeModel {
    CompositeModel::PhaseRetrieval { d: 10 }
}
fn default_loss() -> String {
    "abs".into()
}
fn default_one() -> usize {
    1
}
fn default_radius() -> f64 {
    1.0
}
fn default_budget() -> usize {
    64
}
fn default_sigma() -> f64 {
    1.0
}
fn default_norms() -> Vec<f64> {
    (0..=4).map(|k| 2f64.powi(k - 4)).collect()
}
fn default_probes() -> usize {
    16
}
fn default_starts() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_model")]
    pub model: CompositeModel,
    #[serde(default = "default_loss")]
    pub loss: String,
    /// Dimension sweep for `rate_d`.
    #[serde(default)]
    pub d_grid: Vec<usize>,
    /// Sample sizes; `rate_d` and `peeling` use exactly one.
    #[serde(default)]
    pub m_grid: Vec<usize>,
    #[serde(default = "default_one")]
    pub trials: usize,
    /// Ball center; the origin when absent.
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_budget")]
    pub probe_budget: usize,
    #[serde(default)]
    pub oracle: OracleChoice,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Probe norms for `peeling`.
    #[serde(default = "default_norms")]
    pub norm_grid: Vec<f64>,
    #[serde(default = "default_probes")]
    pub probes_per_norm: usize,
    /// Random starts per landscape trial.
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub landscape: LandscapeConfig,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.kind == ExperimentKind::Verify {
            return Ok(());
        }
        self.model.validate().map_err(|e| Error::Config(e.to_string()))?;
        scalar_loss::builtin(&self.loss).map_err(|e| Error::Config(e.to_string()))?;
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.m_grid.is_empty() || self.m_grid.contains(&0) {
            return bad("m_grid must be nonempty with positive entries".into());
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma {} must be positive", self.sigma));
        }
        if let OracleChoice::MegaSample { m_pop } = self.oracle {
            if m_pop == 0 {
                return bad("m_pop must be positive".into());
            }
        }
        match self.kind {
            ExperimentKind::RateM => {}
            ExperimentKind::RateD => {
                if self.d_grid.is_empty() || self.d_grid.contains(&0) {
                    return bad("rate_d needs a nonempty d_grid of positive dimensions".into());
                }
                if self.m_grid.len() != 1 {
                    return bad("rate_d uses a single m".into());
                }
                if self.center.is_some() {
                    return bad("rate_d balls are centered at the origin".into());
                }
            }
            ExperimentKind::Peeling => {
                if self.m_grid.len() != 1 {
                    return bad("peeling uses a single m".into());
                }
                if self.norm_grid.is_empty() || self.norm_grid.iter().any(|r| !(*r > 0.0)) {
                    return bad("norm_grid must be nonempty and positive".into());
                }
                if self.probes_per_norm == 0 {
                    return bad("probes_per_norm must be positive".into());
                }
            }
            ExperimentKind::Landscape => {
                if !matches!(self.model, CompositeModel::PhaseRetrieval { .. }) || self.loss != "abs" {
                    return bad("landscape runs phase retrieval with the abs loss".into());
                }
                if self.starts == 0 {
                    return bad("starts must be positive".into());
                }
                self.landscape.validate()?;
            }
            ExperimentKind::Verify => unreachable!(),
        }
        if matches!(self.kind, ExperimentKind::RateM | ExperimentKind::RateD) {
            if !(self.radius > 0.0 && self.radius.is_finite()) {
                return bad(format!("radius {} must be positive", self.radius));
            }
            if self.probe_budget == 0 {
                return bad("probe_budget must be positive".into());
            }
        }
        if let Some(c) = &self.center {
            if c.len() != self.model.param_dim() {
                return bad(format!(
                    "center has length {}, model needs {}",
                    c.len(),
                    self.model.param_dim()
                ));
            }
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        Ok(())
    }
}

/// One row of `records.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub kind: ExperimentKind,
    pub model: String,
    pub loss: String,
    pub d: usize,
    pub m: usize,
    pub x_norm: f64,
    pub trial: usize,
    pub master_seed: u64,
    pub trial_seed: u64,
    pub value: f64,
    pub oracle_err: f64,
    pub accepted: usize,
    pub terminals: usize,
}

pub const RECORD_HEADER: &str =
    "kind,model,loss,d,m,x_norm,trial,master_seed,trial_seed,value,oracle_err,accepted,terminals";

pub fn write_records_csv(records: &[Record], mut w: impl Write) -> Result<()> {
    writeln!(w, "{RECORD_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.kind.name(),
            r.model,
            r.loss,
            r.d,
            r.m,
            r.x_norm,
            r.trial,
            r.master_seed,
            r.trial_seed,
            r.value,
            r.oracle_err,
            r.accepted,
            r.terminals
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub kind: ExperimentKind,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r2: Option<f64>,
    pub cells: Vec<CellSummary>,
    /// Rank correlation of cell medians with the grid coordinate.
    pub spearman: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub records: Vec<Record>,
    pub cells: Vec<CellSummary>,
    pub fit: Option<RateFit>,
    pub spearman: Option<f64>,
    pub stationary: Vec<(usize, usize, u64, Vec<StationaryPointReport>)>,
    pub verify: Option<VerifyReport>,
}

impl ExperimentOutcome {
    fn from_records(records: Vec<Record>, cell_of: impl Fn(&Record) -> f64) -> Result<Self> {
        let mut xs: Vec<f64> = records.iter().map(&cell_of).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let cells = xs
            .iter()
            .map(|&x| {
                let vals: Vec<f64> = records
                    .iter()
                    .filter(|r| cell_of(r) == x)
                    .map(|r| r.value)
                    .filter(|v| v.is_finite())
                    .collect();
                CellSummary::new(x, &vals)
            })
            .collect::<Result<Vec<_>>>()?;
        let fit = if cells.len() >= stats::MIN_CELLS && cells.iter().all(|c| c.median > 0.0) {
            Some(fit_loglog(&cells)?)
        } else {
            None
        };
        let spearman = (cells.len() >= 2).then(|| {
            let x: Vec<f64> = cells.iter().map(|c| c.x).collect();
            let y: Vec<f64> = cells.iter().map(|c| c.median).collect();
            spearman(&x, &y)
        });
        Ok(ExperimentOutcome {
            records,
            cells,
            fit,
            spearman,
            stationary: Vec::new(),
            verify: None,
        })
    }

    pub fn fit_report(&self, kind: ExperimentKind) -> FitReport {
        FitReport {
            kind,
            slope: self.fit.as_ref().map(|f| f.slope),
            intercept: self.fit.as_ref().map(|f| f.intercept),
            r2: self.fit.as_ref().map(|f| f.r2),
            cells: self.cells.clone(),
            spearman: self.spearman,
        }
    }
}

/// Runs `cfg` on a pool of `threads` workers (all cores when `None`).
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads.or(cfg.threads) {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| match cfg.kind {
        ExperimentKind::RateM => run_rate_m(cfg),
        ExperimentKind::RateD => run_rate_d(cfg),
        ExperimentKind::Peeling => run_peeling(cfg),
        ExperimentKind::Landscape => run_landscape(cfg),
        ExperimentKind::Verify => {
            let report = run_verify(cfg.seed);
            Ok(ExperimentOutcome {
                records: Vec::new(),
                cells: Vec::new(),
                fit: None,
                spearman: None,
                stationary: Vec::new(),
                verify: Some(report),
            })
        }
    })
}

fn unit_xbar(d: usize, trial_seed: u64) -> Vec<f64> {
    let mut rng = rng_from(trial_seed, &[0]);
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = norm(&v);
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn oracle_for(
    cfg: &ExperimentConfig,
    model: CompositeModel,
    dist: &DistributionSpec,
    xbar: &[f64],
    trial_seed: u64,
) -> Result<PopulationOracle> {
    let strategy = match cfg.oracle {
        OracleChoice::ClosedForm => OracleStrategy::ClosedForm,
        OracleChoice::MegaSample { m_pop } => OracleStrategy::MegaSample {
            m_pop,
            seed: derive_seed(trial_seed, &[2]),
        },
    };
    PopulationOracle::new(strategy, model, scalar_loss::builtin(&cfg.loss)?, dist, xbar)
}

fn with_dim(model: CompositeModel, d: usize) -> CompositeModel {
    match model {
        CompositeModel::PhaseRetrieval { .. } => CompositeModel::PhaseRetrieval { d },
        CompositeModel::Linear { .. } => CompositeModel::Linear { d },
        CompositeModel::MatrixSensing { rank, .. } => CompositeModel::MatrixSensing {
            dim: d,
            rank: rank.min(d),
        },
        CompositeModel::BlindDeconv { .. } => CompositeModel::BlindDeconv { d1: d, d2: d },
    }
}

fn sup_gap_trial(
    cfg: &ExperimentConfig,
    model: CompositeModel,
    m: usize,
    trial: usize,
    trial_seed: u64,
    x_norm: f64,
) -> Result<Record> {
    let dist = DistributionSpec::gaussian(cfg.sigma);
    let d = model.param_dim();
    let xbar = unit_xbar(d, trial_seed);
    let data = draw_dataset(&model, &dist, &xbar, m, derive_seed(trial_seed, &[1]))?;
    let obj = EmpiricalObjective::new(model, scalar_loss::builtin(&cfg.loss)?, data)?;
    let oracle = oracle_for(cfg, model, &dist, &xbar, trial_seed)?;
    let center = cfg.center.clone().unwrap_or_else(|| vec![0.0; d]);
    let sup = sup_gap_over_ball(
        &obj,
        &oracle,
        &center,
        cfg.radius,
        cfg.probe_budget,
        derive_seed(trial_seed, &[3]),
    )?;
    Ok(Record {
        kind: cfg.kind,
        model: model.tag().to_string(),
        loss: cfg.loss.clone(),
        d,
        m,
        x_norm,
        trial,
        master_seed: cfg.seed,
        trial_seed,
        value: sup.value,
        oracle_err: sup.oracle_err,
        accepted: 0,
        terminals: 0,
    })
}

/// `(cell, trial)` work items run in parallel and collected in order.
fn grid_map<T: Send>(cells: usize, trials: usize, f: impl Fn(usize, usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..cells * trials)
        .into_par_iter()
        .map(|k| f(k / trials, k % trials))
        .collect()
}

pub fn run_rate_m(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let records = grid_map(cfg.m_grid.len(), cfg.trials, |c, t| {
        let seed = derive_seed(cfg.seed, &[c as u64, t as u64]);
        sup_gap_trial(cfg, cfg.model, cfg.m_grid[c], t, seed, cfg.radius)
    })?;
    ExperimentOutcome::from_records(records, |r| r.m as f64)
}

pub fn run_rate_d(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let m = cfg.m_grid[0];
    let records = grid_map(cfg.d_grid.len(), cfg.trials, |c, t| {
        let seed = derive_seed(cfg.seed, &[c as u64, t as u64]);
        sup_gap_trial(cfg, with_dim(cfg.model, cfg.d_grid[c]), m, t, seed, cfg.radius)
    })?;
    ExperimentOutcome::from_records(records, |r| r.d as f64)
}

/// Per trial and probe norm: the largest selection gap over
/// `probes_per_norm` random directions at that norm, plus one row at `x = 0`.
pub fn run_peeling(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let m = cfg.m_grid[0];
    let model = cfg.model;
    let d = model.param_dim();
    let per_trial = grid_map(1, cfg.trials, |_, t| {
        let trial_seed = derive_seed(cfg.seed, &[0, t as u64]);
        let dist = DistributionSpec::gaussian(cfg.sigma);
        let xbar = unit_xbar(d, trial_seed);
        let data = draw_dataset(&model, &dist, &xbar, m, derive_seed(trial_seed, &[1]))?;
        let obj = EmpiricalObjective::new(model, scalar_loss::builtin(&cfg.loss)?, data)?;
        let oracle = oracle_for(cfg, model, &dist, &xbar, trial_seed)?;
        let record = |x_norm: f64, value: f64, oracle_err: f64| Record {
            kind: cfg.kind,
            model: model.tag().to_string(),
            loss: cfg.loss.clone(),
            d,
            m,
            x_norm,
            trial: t,
            master_seed: cfg.seed,
            trial_seed,
            value,
            oracle_err,
            accepted: 0,
            terminals: 0,
        };
        let origin = pointwise_gap(&obj, &oracle, &vec![0.0; d])?;
        let mut rows = vec![record(0.0, origin.gap_selection, origin.oracle_err)];
        for (k, &rho) in cfg.norm_grid.iter().enumerate() {
            let mut rng = rng_from(trial_seed, &[4, k as u64]);
            let (mut best, mut err) = (0.0f64, 0.0f64);
            for _ in 0..cfg.probes_per_norm {
                let u: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let n = norm(&u);
                let x: Vec<f64> = u.iter().map(|v| rho * v / n).collect();
                let g = pointwise_gap(&obj, &oracle, &x)?;
                if g.gap_selection > best {
                    (best, err) = (g.gap_selection, g.oracle_err);
                }
            }
            rows.push(record(rho, best, err));
        }
        Ok(rows)
    })?;
    let records: Vec<Record> = per_trial.into_iter().flatten().collect();
    let probes: Vec<Record> = records.iter().filter(|r| r.x_norm > 0.0).cloned().collect();
    let mut outcome = ExperimentOutcome::from_records(probes, |r| r.x_norm)?;
    let mut all = records;
    all.sort_by(|a, b| a.x_norm.total_cmp(&b.x_norm).then(a.trial.cmp(&b.trial)));
    outcome.records = all;
    Ok(outcome)
}

/// Per `(m, trial)`: multistart stationary-point search on noiseless data
/// and the deviation `D(Z_S, Z)` of the accepted terminals.
pub fn run_landscape(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let model = cfg.model;
    let d = model.param_dim();
    let rows = grid_map(cfg.m_grid.len(), cfg.trials, |c, t| {
        let m = cfg.m_grid[c];
        let trial_seed = derive_seed(cfg.seed, &[c as u64, t as u64]);
        let dist = DistributionSpec::gaussian(cfg.sigma);
        let xbar = unit_xbar(d, trial_seed);
        let data = draw_dataset(&model, &dist, &xbar, m, derive_seed(trial_seed, &[1]))?;
        let obj = EmpiricalObjective::new(model, scalar_loss::ScalarConvexLoss::abs(), data)?;
        let mut rng = rng_from(trial_seed, &[4]);
        let starts: Vec<Vec<f64>> = (0..cfg.starts)
            .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let reports = find_stationary_points(&obj, &xbar, &starts, &cfg.landscape)?;
        let accepted = reports.iter().filter(|r| r.accepted).count();
        let value = if accepted > 0 {
            deviation_zs_to_z(&reports, &xbar, cfg.landscape.cluster_rel)?
        } else {
            f64::NAN
        };
        let record = Record {
            kind: cfg.kind,
            model: model.tag().to_string(),
            loss: cfg.loss.clone(),
            d,
            m,
            x_norm: 0.0,
            trial: t,
            master_seed: cfg.seed,
            trial_seed,
            value,
            oracle_err: 0.0,
            accepted,
            terminals: reports.len(),
        };
        Ok((record, (c, t, trial_seed, reports)))
    })?;
    let (records, stationary): (Vec<Record>, Vec<_>) = rows.into_iter().unzip();
    let mut outcome = ExperimentOutcome::from_records(records, |r| r.m as f64)?;
    outcome.stationary = stationary;
    Ok(outcome)
}

/// Writes `records.csv`, `fit.json` and `config.echo.json` (plus
/// `stationary_points.csv` for landscape runs and `verify.json` for verify).
pub fn write_outputs(cfg: &ExperimentConfig, outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    if let Some(report) = &outcome.verify {
        let mut w = std::io::BufWriter::new(fs::File::create(dir.join("records.csv"))?);
        writeln!(w, "module,check,passed,detail")?;
        for c in &report.checks {
            writeln!(
                w,
                "{},{},{},\"{}\"",
                c.module,
                c.check,
                c.passed,
                c.detail.replace('"', "'")
            )?;
        }
        w.flush()?;
        fs::write(dir.join("verify.json"), to_json(report)?)?;
    } else {
        let mut w = std::io::BufWriter::new(fs::File::create(dir.join("records.csv"))?);
        write_records_csv(&outcome.records, &mut w)?;
        w.flush()?;
        fs::write(dir.join("fit.json"), to_json(&outcome.fit_report(cfg.kind))?)?;
    }
    if !outcome.stationary.is_empty() {
        let mut w = std::io::BufWriter::new(fs::File::create(dir.join("stationary_points.csv"))?);
        for (i, (_, _, seed, reports)) in outcome.stationary.iter().enumerate() {
            let mut buf = Vec::new();
            write_reports_csv(reports, *seed, &mut buf)?;
            let text = String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))?;
            let body = if i == 0 {
                text.as_str()
            } else {
                text.split_once('\n').map_or("", |(_, rest)| rest)
            };
            w.write_all(body.as_bytes())?;
        }
        w.flush()?;
    }
    fs::write(dir.join("config.echo.json"), to_json(cfg)?)?;
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))
}
