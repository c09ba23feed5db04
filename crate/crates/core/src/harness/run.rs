use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind, OutputFormat};
use super::edges::{convergence_table, edge_trials};
use super::HarnessError;
use crate::lower::{run_lower_walk, LowerShiftParams, LowerWalkReport};
use crate::mp::{ks_distance, write_table_csv, Esd, MpParams};
use crate::samplers::SamplerModel;
use crate::spectral::eigendecompose;
use crate::tail::{check_stp, check_wtp_a, decoupled_moment_check, random_projection, TailFunctions};
use crate::upper::{run_upper_walk, UpperWalkReport};
use crate::walk::{Violation, WalkOptions};

/// What a finished run wrote and which invariants it saw fail.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub invariant_failures: Vec<String>,
}

impl RunSummary {
    /// 0, or 2 when an invariant failed.
    pub fn exit_code(&self) -> i32 {
        if self.invariant_failures.is_empty() {
            0
        } else {
            2
        }
    }
}

struct Output {
    dir: PathBuf,
    format: OutputFormat,
    files: Vec<PathBuf>,
}

impl Output {
    fn create(dir: &Path, format: OutputFormat) -> Result<Self, HarnessError> {
        fs::create_dir_all(dir)
            .map_err(|e| HarnessError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            files: Vec::new(),
        })
    }

    fn open(&mut self, name: &str) -> Result<BufWriter<File>, HarnessError> {
        let path = self.dir.join(name);
        let file = File::create(&path)
            .map_err(|e| HarnessError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(path);
        Ok(BufWriter::new(file))
    }

    fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(self.open(name)?);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), HarnessError> {
        let mut w = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        std::io::Write::write_all(&mut w, b"\n")?;
        Ok(())
    }

    /// `summary.csv` from flat rows, or `summary.json` from the full record.
    fn summary<R: Serialize, F: Serialize + ?Sized>(&mut self, rows: &[R], full: &F) -> Result<(), HarnessError> {
        match self.format {
            OutputFormat::Csv => self.csv("summary.csv", rows),
            OutputFormat::Json => self.json("summary.json", full),
        }
    }
}

#[derive(Serialize)]
struct Meta<'a> {
    experiment: &'a str,
    version: &'a str,
    seed: u64,
    m: usize,
    rho: f64,
    config_hash: String,
    config: &'a ExperimentConfig,
    files: Vec<String>,
    invariant_failures: &'a [String],
}

/// Runs one experiment and writes its outputs under `config.out`.
///
/// Invariant failures do not abort the run: outputs are still written and
/// the failures are returned for the caller to turn into exit code 2.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let model = config.sampler_model()?;
    let mut out = Output::create(&config.out, config.format)?;
    let failures = pool.install(|| match config.experiment {
        ExperimentKind::EdgesMc => edges_mc(config, &model, &mut out),
        ExperimentKind::WalkLower => walk_lower(config, &model, &mut out),
        ExperimentKind::WalkUpper => walk_upper(config, &model, &mut out),
        ExperimentKind::TailStp => tail_stp(config, &model, &mut out),
        ExperimentKind::TailWtpa => tail_wtpa(config, &model, &mut out),
        ExperimentKind::Decoupling => decoupling(config, &model, &mut out),
        ExperimentKind::MpCompare => mp_compare(config, &model, &mut out),
    })?;
    let mut names: Vec<String> = out
        .files
        .iter()
        .filter_map(|p| p.file_name().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    names.push("meta.json".into());
    let meta = Meta {
        experiment: config.experiment.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        m: config.m,
        rho: config.rho,
        config_hash: config.content_hash(),
        config,
        files: names,
        invariant_failures: &failures,
    };
    out.json("meta.json", &meta)?;
    Ok(RunSummary {
        files: out.files,
        invariant_failures: failures,
    })
}

type Failures = Result<Vec<String>, HarnessError>;

#[derive(Serialize)]
struct EdgeSummaryRow<'a> {
    model: &'a str,
    n: usize,
    m: usize,
    rho: f64,
    trials: usize,
    mean_lambda_min: f64,
    std_lambda_min: f64,
    mean_lambda_max: f64,
    std_lambda_max: f64,
    target_min: f64,
    target_max: f64,
    error_min: f64,
    error_max: f64,
}

fn edges_mc(config: &ExperimentConfig, model: &SamplerModel, out: &mut Output) -> Failures {
    let result = edge_trials(model, config.m, config.trials)?;
    let row = EdgeSummaryRow {
        model: &result.model,
        n: result.n,
        m: result.m,
        rho: result.rho,
        trials: result.trials.len(),
        mean_lambda_min: result.lambda_min.mean,
        std_lambda_min: result.lambda_min.std,
        mean_lambda_max: result.lambda_max.mean,
        std_lambda_max: result.lambda_max.std,
        target_min: result.target_min,
        target_max: result.target_max,
        error_min: result.error_min,
        error_max: result.error_max,
    };
    out.summary(&[row], &result)?;
    out.csv("trials.csv", &result.trials)?;
    if !config.n_grid.is_empty() {
        let rho = config.n as f64 / config.m as f64;
        let table = convergence_table(model, rho, &config.n_grid, config.trials)?;
        out.csv("convergence.csv", &table)?;
    }
    Ok(result.invariant_failures())
}

#[derive(Serialize)]
struct ViolationRow<'a> {
    trial: usize,
    step: usize,
    kind: &'a str,
    hard: bool,
    detail: &'a str,
}

fn violation_rows<'a>(reports: &[&'a [Violation]]) -> Vec<ViolationRow<'a>> {
    reports
        .iter()
        .enumerate()
        .flat_map(|(trial, vs)| {
            vs.iter().map(move |v| ViolationRow {
                trial,
                step: v.step,
                kind: v.kind.name(),
                hard: v.kind.is_hard(),
                detail: &v.detail,
            })
        })
        .collect()
}

fn hard_failures(trial: usize, violations: &[Violation]) -> impl Iterator<Item = String> + '_ {
    violations
        .iter()
        .filter(|v| v.kind.is_hard())
        .map(move |v| format!("trial {trial} step {}: {} ({})", v.step, v.kind, v.detail))
}

/// Runs `trials` walks in parallel; trial t uses stream t.
fn fan_out<R: Send>(
    trials: usize,
    run: impl Fn(u64) -> crate::Result<R> + Sync,
) -> Result<Vec<R>, HarnessError> {
    let results: Vec<crate::Result<R>> = (0..trials).into_par_iter().map(|t| run(t as u64)).collect();
    Ok(results.into_iter().collect::<crate::Result<Vec<R>>>()?)
}

#[derive(Serialize)]
struct LowerSummaryRow {
    trial: usize,
    n: usize,
    m: usize,
    eps: f64,
    u0: f64,
    u_final: f64,
    lambda_min: f64,
    ratio: f64,
    lambda_ratio: f64,
    potential_bound: f64,
    final_potential: f64,
    regularity_budget: f64,
    total_regularity: f64,
    concentration_eligible: usize,
    concentration_hits: usize,
    concentration_frequency: f64,
    hard_violations: usize,
    soft_violations: usize,
}

impl LowerSummaryRow {
    fn new(trial: usize, r: &LowerWalkReport) -> Self {
        let hard = r.hard_violations().count();
        Self {
            trial,
            n: r.n,
            m: r.m,
            eps: r.eps,
            u0: r.u0,
            u_final: r.u_final,
            lambda_min: r.lambda_min,
            ratio: r.ratio,
            lambda_ratio: r.lambda_ratio,
            potential_bound: r.potential_bound,
            final_potential: r.final_potential,
            regularity_budget: r.regularity_budget,
            total_regularity: r.total_regularity,
            concentration_eligible: r.concentration.eligible,
            concentration_hits: r.concentration.hits,
            concentration_frequency: r.concentration.frequency(),
            hard_violations: hard,
            soft_violations: r.violations.len() - hard,
        }
    }
}

fn walk_lower(config: &ExperimentConfig, model: &SamplerModel, out: &mut Output) -> Failures {
    let params = LowerShiftParams::new(config.eps)?;
    let reports = fan_out(config.trials, |stream| {
        run_lower_walk(model, config.m, stream, params, WalkOptions::default())
    })?;
    let rows: Vec<_> = reports.iter().enumerate().map(|(t, r)| LowerSummaryRow::new(t, r)).collect();
    out.summary(&rows, &reports)?;
    for (t, r) in reports.iter().enumerate() {
        r.write_trajectory_csv(out.open(&format!("trajectory_{t}.csv"))?)?;
    }
    let logs: Vec<&[Violation]> = reports.iter().map(|r| r.violations.as_slice()).collect();
    out.csv("violations.csv", &violation_rows(&logs))?;
    Ok(reports
        .iter()
        .enumerate()
        .flat_map(|(t, r)| hard_failures(t, &r.violations))
        .collect())
}

#[derive(Serialize)]
struct UpperSummaryRow {
    trial: usize,
    n: usize,
    m: usize,
    eps: f64,
    alpha: f64,
    u0: f64,
    u_final: f64,
    lambda_max: f64,
    ratio: f64,
    lambda_ratio: f64,
    final_potential: f64,
    regularity_budget: f64,
    total_regularity: f64,
    mean_delta1: f64,
    delta1_bound: f64,
    mean_delta2: f64,
    mean_delta2_bound: f64,
    mean_repair: f64,
    repairs: usize,
    hard_violations: usize,
    soft_violations: usize,
}

impl UpperSummaryRow {
    fn new(trial: usize, r: &UpperWalkReport) -> Self {
        let hard = r.hard_violations().count();
        Self {
            trial,
            n: r.n,
            m: r.m,
            eps: r.eps,
            alpha: r.alpha,
            u0: r.u0,
            u_final: r.u_final,
            lambda_max: r.lambda_max,
            ratio: r.ratio,
            lambda_ratio: r.lambda_ratio,
            final_potential: r.final_potential,
            regularity_budget: r.regularity_budget,
            total_regularity: r.total_regularity,
            mean_delta1: r.mean_delta1,
            delta1_bound: r.delta1_bound,
            mean_delta2: r.mean_delta2,
            mean_delta2_bound: r.mean_delta2_bound,
            mean_repair: r.mean_repair,
            repairs: r.count(crate::walk::ViolationKind::Repair),
            hard_violations: hard,
            soft_violations: r.violations.len() - hard,
        }
    }
}

fn walk_upper(config: &ExperimentConfig, model: &SamplerModel, out: &mut Output) -> Failures {
    let reports = fan_out(config.trials, |stream| {
        run_upper_walk(model, config.m, stream, config.eps, WalkOptions::default())
    })?;
    let rows: Vec<_> = reports.iter().enumerate().map(|(t, r)| UpperSummaryRow::new(t, r)).collect();
    out.summary(&rows, &reports)?;
    for (t, r) in reports.iter().enumerate() {
        r.write_trajectory_csv(out.open(&format!("trajectory_{t}.csv"))?)?;
    }
    let logs: Vec<&[Violation]> = reports.iter().map(|r| r.violations.as_slice()).collect();
    out.csv("violations.csv", &violation_rows(&logs))?;
    Ok(reports
        .iter()
        .enumerate()
        .flat_map(|(t, r)| hard_failures(t, &r.violations))
        .collect())
}

/// Report-only: failing cells are data, not invariant violations.
fn tail_stp(config: &ExperimentConfig, model: &SamplerModel, out: &mut Output) -> Failures {
    let report = check_stp(model, &config.ranks, &config.t_factors, config.trials, &TailFunctions::default())?;
    out.summary(&report.rows, &report)?;
    Ok(Vec::new())
}

fn tail_wtpa(config: &ExperimentConfig, model: &SamplerModel, out: &mut Output) -> Failures {
    let grid = if config.n_grid.is_empty() {
        vec![config.n]
    } else {
        config.n_grid.clone()
    };
    let report = check_wtp_a(model, &grid, &config.levels, config.directions, config.trials)?;
    out.summary(&report.rows, &report)?;
    Ok(Vec::new())
}

#[derive(Serialize)]
struct DecouplingRow<'a> {
    model: &'a str,
    n: usize,
    rank: usize,
    trials: usize,
    second_moment: f64,
    second_moment_stderr: f64,
    second_moment_exact: f64,
    moment_bound: f64,
    moment_pass: bool,
    tail_frequency: f64,
    tail_stderr: f64,
    tail_level: f64,
    tail_bound: f64,
    tail_pass: bool,
}

fn decoupling(config: &ExperimentConfig, model: &SamplerModel, out: &mut Output) -> Failures {
    let proj = random_projection(config.n, config.rank, config.seed ^ 0xdec0_0b1e)?;
    let report = decoupled_moment_check(model, &proj, config.trials, 0)?;
    let row = DecouplingRow {
        model: &config.model,
        n: config.n,
        rank: report.rank,
        trials: config.trials,
        second_moment: report.second_moment.mean,
        second_moment_stderr: report.second_moment.stderr,
        second_moment_exact: report.second_moment_exact,
        moment_bound: report.moment_bound,
        moment_pass: report.moment_pass,
        tail_frequency: report.tail.p,
        tail_stderr: report.tail.stderr,
        tail_level: report.tail_level,
        tail_bound: report.tail_bound,
        tail_pass: report.tail_pass,
    };
    out.summary(&[row], &report)?;
    Ok(Vec::new())
}

#[derive(Debug, Clone, Serialize)]
struct MpTrialRow {
    trial: usize,
    n: usize,
    m: usize,
    rho: f64,
    ks: f64,
    lambda_min: f64,
    lambda_max: f64,
}

#[derive(Serialize)]
struct EsdRow {
    x: f64,
    esd_cdf: f64,
    mp_cdf: f64,
}

fn mp_compare(config: &ExperimentConfig, model: &SamplerModel, out: &mut Output) -> Failures {
    let m = config.m;
    let rho = config.n as f64 / m as f64;
    let law = MpParams::new(rho)?;
    let esds = fan_out(config.trials, |stream| {
        let gram = model.batch(m, stream)?.gram_matrix()?;
        let eigs = eigendecompose(&gram)?.eigenvalues().iter().map(|v| v / m as f64).collect();
        Esd::new(eigs, m)
    })?;
    let rows: Vec<MpTrialRow> = esds
        .iter()
        .enumerate()
        .map(|(trial, esd)| {
            let values = esd.eigenvalues();
            MpTrialRow {
                trial,
                n: config.n,
                m,
                rho,
                ks: ks_distance(esd, &law),
                lambda_min: values[0],
                lambda_max: values[values.len() - 1],
            }
        })
        .collect();
    out.summary(&rows, &rows)?;
    write_table_csv(&law.table(401), out.open("mp_table.csv")?)?;
    let first = &esds[0];
    let dim = first.dim() as f64;
    let esd_rows: Vec<EsdRow> = first
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(i, &x)| EsdRow {
            x,
            esd_cdf: (i + 1) as f64 / dim,
            mp_cdf: law.cdf(x),
        })
        .collect();
    out.csv("esd.csv", &esd_rows)?;
    Ok(Vec::new())
}
