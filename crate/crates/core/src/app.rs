// Copyright 2026 The qtraj Authors
// SPDX-License-Identifier: Apache-2.0

//! `simulate`, `sweep` and `validate` runners behind the command-line tool.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ModelConfig};
use crate::ensemble::{
    compare_with_master_equation, integrate_master_equation, EnsembleAccumulator,
};
use crate::entropy::{appendix_var1_expansion, exact_drift_var1, ledger_with, EntropyLedger};
use crate::error::Error;
use crate::hilbert::{c, StateVector};
use crate::ift::{
    estimate, estimate_from_log_weights, map_trajectories, point_seed, IFTEstimate, RunSpec,
    SweepCoordinate,
};
use crate::model::{build_eigenstate_jump_model, build_pure_decay, LindbladModel, Transition};
use crate::pdp::InitialState;

/// Command-line and environment overrides applied on top of a config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub dump_trajectories: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(Error),
    #[error("runtime error: {0}")]
    Runtime(Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("validation failed: {0}")]
    Validation(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 1,
            AppError::Runtime(_) | AppError::Io(_) => 2,
            AppError::Validation(_) => 3,
        }
    }
}

fn runtime(e: Error) -> AppError {
    AppError::Runtime(e)
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, AppError> {
    let mut cfg = ExperimentConfig::load(path).map_err(AppError::Config)?;
    if let Some(seed) = overrides.seed {
        cfg.run.master_seed = seed;
    }
    if let Some(out) = &overrides.out {
        cfg.outputs.dir = out.clone();
    }
    cfg.outputs.dump_trajectories |= overrides.dump_trajectories;
    Ok(cfg)
}

/// Full-precision float formatting used in every output file.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x + 0.0)
}

/// One row of the summary table.
#[derive(Clone, Debug, PartialEq)]
pub struct PointResult {
    pub coordinate: Option<(&'static str, f64)>,
    pub outcome: Result<IFTEstimate, String>,
}

pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub points: Vec<PointResult>,
}

impl RunReport {
    pub fn failed_points(&self) -> usize {
        self.points.iter().filter(|p| p.outcome.is_err()).count()
    }
}

fn point_spec(
    cfg: &ExperimentConfig,
    index: usize,
    threads: Option<usize>,
) -> Result<RunSpec, AppError> {
    let mut spec = cfg.run_spec().map_err(AppError::Config)?;
    if cfg.sweep.is_some() {
        spec.master_seed = point_seed(cfg.run.master_seed, index as u64);
    }
    spec.threads = threads;
    Ok(spec)
}

fn out_path(cfg: &ExperimentConfig, suffix: &str) -> PathBuf {
    cfg.outputs.dir.join(format!("{}{suffix}", cfg.name))
}

fn ledger_row(index: u64, ledger: &EntropyLedger, log_weight: f64) -> Vec<String> {
    vec![
        index.to_string(),
        ledger.n_jumps().to_string(),
        fmt_f64(ledger.jump_flux),
        fmt_f64(ledger.drift_flux),
        fmt_f64(ledger.thermal_total()),
        fmt_f64(ledger.nonthermal_jump_total()),
        fmt_f64(ledger.kappa_sum()),
        fmt_f64(log_weight.exp()),
    ]
}

pub const LEDGER_HEADER: [&str; 8] = [
    "traj_id",
    "N_jumps",
    "jump_flux",
    "drift_flux",
    "thermal_total",
    "nonthermal_jump_total",
    "kappa_sum",
    "weight_W",
];

pub const SUMMARY_HEADER: [&str; 10] = [
    "coordinate_label",
    "coordinate_value",
    "mean",
    "std_error",
    "zeta",
    "n",
    "n_discarded",
    "quantile_95",
    "unreliable",
    "error",
];

struct TrajectoryOutput {
    log_weight: f64,
    ledger_row: Vec<String>,
    dump: Option<String>,
}

/// Per-trajectory ledger CSV (and optional JSONL dump) plus the summary.
pub fn run_simulate(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<RunReport, AppError> {
    fs::create_dir_all(&cfg.outputs.dir)?;
    let mut files = Vec::new();
    let mut points = Vec::new();
    let mut dump = if cfg.outputs.dump_trajectories {
        let path = out_path(cfg, "_trajectories.jsonl");
        files.push(path.clone());
        Some(BufWriter::new(File::create(path)?))
    } else {
        None
    };
    let sweep = cfg.sweep.is_some();
    for (index, coordinate) in cfg.points().into_iter().enumerate() {
        let model = cfg
            .build_model(coordinate.map(|c| c.1))
            .map_err(AppError::Config)?;
        let spec = point_spec(cfg, index, threads)?;
        let want_dump = dump.is_some();
        let rows = map_trajectories(&model, &spec, |sim, pair| {
            let Some(pair) = pair else { return Ok(None) };
            let ledger = ledger_with(sim, &pair.forward, &pair.backward, spec.drift_mode)?;
            let dump = want_dump.then(|| {
                json!({
                    "point": index,
                    "index": pair.index,
                    "log_weight": pair.log_weight,
                    "forward": pair.forward,
                    "backward": pair.backward,
                })
                .to_string()
            });
            Ok(Some(TrajectoryOutput {
                log_weight: pair.log_weight,
                ledger_row: ledger_row(pair.index, &ledger, pair.log_weight),
                dump,
            }))
        });
        let rows = match rows {
            Ok(rows) => rows,
            Err(e) if sweep && !matches!(e, Error::InvalidParameter { .. }) => {
                points.push(PointResult {
                    coordinate,
                    outcome: Err(e.to_string()),
                });
                continue;
            }
            Err(e) => return Err(runtime(e)),
        };
        let suffix = if sweep {
            format!("_ledger_{index}.csv")
        } else {
            "_ledger.csv".to_string()
        };
        let path = out_path(cfg, &suffix);
        let mut w = csv::Writer::from_path(&path).map_err(csv_io)?;
        w.write_record(LEDGER_HEADER).map_err(csv_io)?;
        for row in rows.iter().flatten() {
            w.write_record(&row.ledger_row).map_err(csv_io)?;
        }
        w.flush()?;
        files.push(path);
        if let Some(d) = dump.as_mut() {
            for row in rows.iter().flatten() {
                writeln!(d, "{}", row.dump.as_deref().unwrap_or_default())?;
            }
        }
        let logs: Vec<Option<f64>> = rows
            .iter()
            .map(|r| r.as_ref().map(|r| r.log_weight))
            .collect();
        let outcome = estimate_from_log_weights(&logs).map(|mut e| {
            e.sweep_coordinate = coordinate.map(|(label, value)| SweepCoordinate {
                label: label.into(),
                value,
            });
            e
        });
        points.push(PointResult {
            coordinate,
            outcome: outcome.map_err(|e| e.to_string()),
        });
    }
    if let Some(mut d) = dump {
        d.flush()?;
    }
    files.extend(write_summary(cfg, "simulate", &points)?);
    Ok(RunReport { files, points })
}

fn csv_io(e: csv::Error) -> AppError {
    AppError::Io(std::io::Error::other(e))
}

/// Summary CSV, plot data and JSON summary for a sweep.
pub fn run_sweep(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<RunReport, AppError> {
    if cfg.sweep.is_none() {
        return Err(AppError::Config(Error::param(
            "sweep",
            "the sweep command needs a sweep block",
        )));
    }
    if cfg.outputs.dump_trajectories {
        let mut report = run_simulate(cfg, threads)?;
        report.files.push(write_plot_data(cfg, &report.points)?);
        return Ok(report);
    }
    fs::create_dir_all(&cfg.outputs.dir)?;
    let mut points = Vec::new();
    for (index, coordinate) in cfg.points().into_iter().enumerate() {
        let model = cfg
            .build_model(coordinate.map(|c| c.1))
            .map_err(AppError::Config)?;
        let spec = point_spec(cfg, index, threads)?;
        let outcome = estimate(&model, &spec).map(|mut e| {
            e.sweep_coordinate = coordinate.map(|(label, value)| SweepCoordinate {
                label: label.into(),
                value,
            });
            e
        });
        if let Err(e @ Error::InvalidParameter { .. }) = &outcome {
            return Err(AppError::Config(e.clone()));
        }
        points.push(PointResult {
            coordinate,
            outcome: outcome.map_err(|e| e.to_string()),
        });
    }
    let mut files = write_summary(cfg, "sweep", &points)?;
    files.push(write_plot_data(cfg, &points)?);
    Ok(RunReport { files, points })
}

fn write_plot_data(cfg: &ExperimentConfig, points: &[PointResult]) -> Result<PathBuf, AppError> {
    let dat = out_path(cfg, ".dat");
    let mut w = BufWriter::new(File::create(&dat)?);
    writeln!(w, "# x mean std_error")?;
    for p in points {
        if let (Some((_, x)), Ok(e)) = (p.coordinate, &p.outcome) {
            writeln!(
                w,
                "{} {} {}",
                fmt_f64(x),
                fmt_f64(e.mean),
                fmt_f64(e.std_error)
            )?;
        }
    }
    w.flush()?;
    Ok(dat)
}

fn write_summary(
    cfg: &ExperimentConfig,
    command: &str,
    points: &[PointResult],
) -> Result<Vec<PathBuf>, AppError> {
    let csv_path = out_path(cfg, "_summary.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_io)?;
    w.write_record(SUMMARY_HEADER).map_err(csv_io)?;
    let mut docs = Vec::new();
    for p in points {
        let (label, value) = match p.coordinate {
            Some((l, v)) => (l.to_string(), fmt_f64(v)),
            None => (String::new(), String::new()),
        };
        match &p.outcome {
            Ok(e) => {
                w.write_record([
                    label,
                    value,
                    fmt_f64(e.mean),
                    fmt_f64(e.std_error),
                    fmt_f64(e.zeta),
                    e.n_trajectories.to_string(),
                    e.n_discarded.to_string(),
                    fmt_f64(e.quantile_95),
                    e.unreliable.to_string(),
                    String::new(),
                ])
                .map_err(csv_io)?;
                docs.push(json!({ "coordinate": p.coordinate.map(|c| c.1), "estimate": e }));
            }
            Err(msg) => {
                let mut row = vec![label, value];
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.push(msg.clone());
                w.write_record(&row).map_err(csv_io)?;
                docs.push(json!({ "coordinate": p.coordinate.map(|c| c.1), "error": msg }));
            }
        }
    }
    w.flush()?;
    let audit: serde_json::Map<String, Value> = cfg
        .audit()
        .into_iter()
        .map(|(k, v)| (k, json!(v)))
        .collect();
    let doc = json!({
        "command": command,
        "config": cfg,
        "audit": audit,
        "points": docs,
    });
    let json_path = out_path(cfg, "_summary.json");
    fs::write(
        &json_path,
        serde_json::to_string_pretty(&doc).expect("summary serializes") + "\n",
    )?;
    Ok(vec![csv_path, json_path])
}

/// Outcome of one validation check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Random (channel, state, time) pairs checked against the jump-flux decomposition.
pub fn decomposition_check(
    model: &LindbladModel,
    horizon: f64,
    samples: usize,
    seed: u64,
) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = model.dim();
    let (mut worst_split, mut worst_eta, mut tested) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..samples {
        let amps: Vec<_> = (0..dim)
            .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let Ok(chi) = StateVector::new(amps).and_then(|s| s.normalize()) else {
            continue;
        };
        let i = rng.random_range(0..model.channels().len());
        let t = rng.random::<f64>() * horizon;
        let ch = &model.channels()[i];
        if ch.rate(t) == 0.0 || ch.backward_rate(t) == 0.0 {
            continue;
        }
        let (Ok(rd), Ok(rr), Ok(eta)) = (
            crate::entropy::direct_rate(ch, t, &chi),
            crate::entropy::reversed_rate(ch, t, &chi),
            crate::entropy::eta(ch, &chi),
        ) else {
            continue;
        };
        let mut ledger = EntropyLedger::new();
        let jump = crate::pdp::JumpEvent {
            step: 0,
            time: t,
            channel: i,
            pre_state: chi.clone(),
            post_state: chi,
        };
        if ledger.push_jump(model, &jump).is_err() {
            continue;
        }
        let e = &ledger.per_jump[0];
        worst_split = worst_split.max((e.thermal + e.nonthermal + (rd / rr).ln()).abs());
        worst_eta =
            worst_eta.max((eta - (1.0 - ch.rate(t) * rr / (ch.backward_rate(t) * rd))).abs());
        tested += 1;
    }
    Check {
        name: "decomposition identity",
        passed: tested > 0 && worst_split <= 1e-10 && worst_eta <= 1e-10,
        detail: format!(
            "{tested} pairs, max split error {worst_split:.3e}, max eta error {worst_eta:.3e}"
        ),
    }
}

/// Ratio of expansion errors on a constant-rate decay when `dt` halves.
pub fn order_of_accuracy_check() -> Check {
    let model = build_pure_decay(1.0).expect("valid model");
    let psi = StateVector::from_real(&[1.0, 1.0])
        .and_then(|s| s.normalize())
        .expect("valid state");
    let err = |dt: f64| {
        let exact = exact_drift_var1(&model, 0.0, dt, &psi).expect("normalized");
        let approx = appendix_var1_expansion(&model, 0.0, dt, &psi).expect("normalized");
        (exact - approx).abs()
    };
    let e: Vec<f64> = [1e-2, 5e-3, 2.5e-3].into_iter().map(err).collect();
    let ratios = [e[0] / e[1], e[1] / e[2]];
    Check {
        name: "appendix order of accuracy",
        passed: ratios.iter().all(|r| (6.0..=10.0).contains(r)),
        detail: format!("error ratios {:.3}, {:.3}", ratios[0], ratios[1]),
    }
}

/// Every trajectory of an eigenstate-jump model has unit weight.
pub fn eigenstate_weight_check(model: &LindbladModel, spec: &RunSpec) -> Result<Check, Error> {
    let logs = map_trajectories(model, spec, |_, p| Ok(p.map(|p| p.log_weight)))?;
    let worst = logs
        .iter()
        .flatten()
        .fold(0.0f64, |m, l| m.max(l.exp() - 1.0).max(1.0 - l.exp()));
    let est = estimate_from_log_weights(&logs)?;
    Ok(Check {
        name: "eigenstate-jump unit weight",
        passed: worst <= 1e-9 && est.zeta.abs() <= 1e-9,
        detail: format!(
            "{} trajectories, max |W - 1| = {worst:.3e}, zeta = {:.3e}",
            est.n_trajectories, est.zeta
        ),
    })
}

/// Three-level model used when the config itself is not an eigenstate-jump model.
pub fn reference_eigenstate_model() -> LindbladModel {
    build_eigenstate_jump_model(
        &[0.0, 1e-3, 2.6e-3],
        &[
            Transition {
                lower: 0,
                upper: 1,
                down_rate: 1.2e-3,
                up_rate: 4e-4,
            },
            Transition {
                lower: 0,
                upper: 2,
                down_rate: 6e-4,
                up_rate: 1e-4,
            },
            Transition {
                lower: 1,
                upper: 2,
                down_rate: 9e-4,
                up_rate: 3e-4,
            },
        ],
    )
    .expect("valid reference model")
}

/// Trace distance between the trajectory ensemble and the master equation at
/// each sample time, starting both from the empirical initial ensemble.
pub fn ensemble_trace_distances(
    model: &LindbladModel,
    spec: &RunSpec,
    stride: usize,
) -> Result<(Vec<f64>, Vec<f64>, usize), Error> {
    let spec = RunSpec {
        snapshot_stride: Some(stride),
        ..spec.clone()
    };
    let snaps = map_trajectories(model, &spec, |_, p| Ok(p.map(|p| p.forward.snapshots)))?;
    let mut acc = EnsembleAccumulator::new(model.dim(), spec.dt, spec.horizon, stride)?;
    let mut discarded = 0;
    for s in &snaps {
        match s {
            Some(s) => acc.add_snapshots(s)?,
            None => discarded += 1,
        }
    }
    let ens = acc.average()?;
    let sol = integrate_master_equation(model, &ens[0], spec.dt, spec.horizon)?;
    let d = compare_with_master_equation(&ens, &sol, stride)?;
    Ok((acc.times(), d, discarded))
}

pub fn run_validate(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<ValidationReport, AppError> {
    fs::create_dir_all(&cfg.outputs.dir)?;
    let first = cfg.points()[0];
    let model = cfg
        .build_model(first.map(|c| c.1))
        .map_err(AppError::Config)?;
    let mut spec = point_spec(cfg, 0, threads)?;
    if let Some(n) = cfg.validate.n_trajectories {
        spec.n_trajectories = n;
    }
    let mut checks = Vec::new();

    let stride = cfg.validate.sample_stride;
    let (times, dist, discarded) =
        ensemble_trace_distances(&model, &spec, stride).map_err(runtime)?;
    let csv_path = out_path(cfg, "_validation.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_io)?;
    w.write_record(["t", "trace_distance"]).map_err(csv_io)?;
    for (t, d) in times.iter().zip(&dist) {
        w.write_record([fmt_f64(*t), fmt_f64(*d)]).map_err(csv_io)?;
    }
    w.flush()?;
    let worst = dist.iter().copied().fold(0.0, f64::max);
    checks.push(Check {
        name: "ensemble vs master equation",
        passed: worst <= cfg.validate.trace_distance_threshold,
        detail: format!(
            "{} trajectories ({discarded} discarded), max trace distance {worst:.4} (threshold {})",
            spec.n_trajectories, cfg.validate.trace_distance_threshold
        ),
    });

    checks.push(decomposition_check(
        &model,
        spec.horizon,
        10_000,
        spec.master_seed,
    ));
    checks.push(order_of_accuracy_check());

    let eig_check = match &cfg.model {
        ModelConfig::EigenstateJump { .. } => eigenstate_weight_check(&model, &spec),
        _ => {
            let reference = reference_eigenstate_model();
            let psi = StateVector::new(vec![c(0.6, 0.1), c(0.2, -0.5), c(0.4, 0.4)])
                .and_then(|s| s.normalize())
                .expect("valid state");
            let spec = RunSpec {
                initial_state: InitialState::Fixed(psi),
                ..RunSpec::new(1000, 1.0, 1000.0, spec.master_seed)
            };
            eigenstate_weight_check(&reference, &RunSpec { threads, ..spec })
        }
    };
    checks.push(eig_check.map_err(runtime)?);

    Ok(ValidationReport {
        checks,
        files: vec![csv_path],
    })
}
