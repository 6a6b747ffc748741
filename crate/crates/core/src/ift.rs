// Copyright 2026 The qtraj Authors
// SPDX-License-Identifier: Apache-2.0

//! Monte-Carlo estimate of `<exp(-sigma_f)> = 1 + zeta_f`.
//!
//! Forward trajectories are sampled; each is paired with its deterministic
//! backward partner and contributes the weight
//!
//! ```text
//! W = prod_k R^R[chi_k^f] / R^D[chi_k^b]  *  prod_k D^R_k / D^D_k
//! ```
//!
//! where the backward direct rate uses `A^dagger` with the backward rate, so
//! the backward rate cancels against the one in `R^R`. Everything is
//! accumulated in log space.

use rayon::prelude::*;
use serde::Serialize;

use crate::entropy::{check_pair, reversed_drift_logs, DriftMode};
use crate::error::{Error, Result};
use crate::hilbert::ZERO_NORM_GUARD;
use crate::model::LindbladModel;
use crate::pdp::{trajectory_rng, InitialState, RecordOptions, Simulator, TrajectoryRecord};

/// Fraction of discarded trajectories above which an estimate is flagged.
pub const UNRELIABLE_DISCARD_FRACTION: f64 = 0.01;

/// `ln W` for a forward trajectory and its backward partner.
pub fn log_trajectory_weight(
    sim: &Simulator<'_>,
    fwd: &TrajectoryRecord,
    bwd: &TrajectoryRecord,
    mode: DriftMode,
) -> Result<f64> {
    check_pair(fwd, bwd)?;
    let channels = sim.model().channels();
    let mut log_w = 0.0;
    for (f, b) in fwd.jumps.iter().zip(&bwd.jumps) {
        let ch = &channels[f.channel];
        let a_chi = ch.operator().apply(&f.pre_state)?.norm_sq();
        let adj_chi = ch.adjoint_operator().apply(&b.pre_state)?.norm_sq();
        for n in [a_chi, adj_chi] {
            if !(n > ZERO_NORM_GUARD) {
                return Err(Error::NearZeroNorm { norm_sq: n });
            }
        }
        let l2 = ch.lambda().apply(&f.pre_state)?.norm_sq();
        log_w += (l2 / a_chi).ln() - adj_chi.ln();
    }
    let rev = reversed_drift_logs(sim, fwd, bwd, mode)?;
    for (log_rev, b) in rev.iter().zip(&bwd.drifts) {
        log_w += log_rev - b.log_survival;
    }
    if !log_w.is_finite() {
        return Err(Error::InvariantViolation(format!(
            "non-finite log weight {log_w}"
        )));
    }
    Ok(log_w)
}

pub fn trajectory_weight(
    sim: &Simulator<'_>,
    fwd: &TrajectoryRecord,
    bwd: &TrajectoryRecord,
    mode: DriftMode,
) -> Result<f64> {
    log_trajectory_weight(sim, fwd, bwd, mode).map(f64::exp)
}

/// Run parameters shared by [`estimate`] and [`sweep`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub n_trajectories: usize,
    pub dt: f64,
    pub horizon: f64,
    pub initial_state: InitialState,
    pub master_seed: u64,
    pub drift_mode: DriftMode,
    /// Worker count; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    pub snapshot_stride: Option<usize>,
}

impl RunSpec {
    pub fn new(n_trajectories: usize, dt: f64, horizon: f64, master_seed: u64) -> Self {
        Self {
            n_trajectories,
            dt,
            horizon,
            initial_state: InitialState::RandomTwoLevel,
            master_seed,
            drift_mode: DriftMode::default(),
            threads: None,
            snapshot_stride: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCoordinate {
    pub label: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IFTEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub zeta: f64,
    /// Trajectories contributing to the mean.
    pub n_trajectories: usize,
    pub n_discarded: usize,
    pub quantile_95: f64,
    pub unreliable: bool,
    pub sweep_coordinate: Option<SweepCoordinate>,
}

impl IFTEstimate {
    /// Builds the estimate from weights in trajectory order.
    pub fn from_weights(weights: &[f64], n_discarded: usize) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::InvariantViolation(
                "every trajectory was discarded".into(),
            ));
        }
        let mean = neumaier_sum(weights.iter().copied()) / n as f64;
        let var = if n > 1 {
            neumaier_sum(weights.iter().map(|w| (w - mean) * (w - mean))) / (n - 1) as f64
        } else {
            0.0
        };
        let mut sorted = weights.to_vec();
        sorted.sort_by(f64::total_cmp);
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        let total = n + n_discarded;
        Ok(Self {
            mean,
            std_error: (var / n as f64).sqrt(),
            zeta: mean - 1.0,
            n_trajectories: n,
            n_discarded,
            quantile_95: sorted[rank - 1],
            unreliable: n_discarded as f64 > UNRELIABLE_DISCARD_FRACTION * total as f64,
            sweep_coordinate: None,
        })
    }
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// One simulated forward/backward pair.
#[derive(Clone, Debug)]
pub struct TrajectoryPair {
    pub index: u64,
    pub forward: TrajectoryRecord,
    pub backward: TrajectoryRecord,
    pub log_weight: f64,
}

/// Simulates trajectory `index` of a run. `Ok(None)` marks a discarded pair.
pub fn simulate_pair(
    sim: &Simulator<'_>,
    spec: &RunSpec,
    index: u64,
) -> Result<Option<TrajectoryPair>> {
    let mut rng = trajectory_rng(spec.master_seed, index);
    let psi0 = spec.initial_state.sample(sim.model().dim(), &mut rng)?;
    let opts = RecordOptions {
        snapshot_stride: spec.snapshot_stride,
    };
    let mut attempt = || -> Result<TrajectoryPair> {
        let forward = sim.forward(&psi0, &mut rng, opts, spec.master_seed, index)?;
        let backward = sim.backward(&forward)?;
        let log_weight = log_trajectory_weight(sim, &forward, &backward, spec.drift_mode)?;
        Ok(TrajectoryPair {
            index,
            forward,
            backward,
            log_weight,
        })
    };
    match attempt() {
        Ok(pair) => Ok(Some(pair)),
        Err(Error::NearZeroNorm { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Runs `f` on every trajectory of the run, in index order, on `spec.threads` workers.
pub fn map_trajectories<T, F>(model: &LindbladModel, spec: &RunSpec, f: F) -> Result<Vec<Option<T>>>
where
    T: Send,
    F: Fn(&Simulator<'_>, Option<TrajectoryPair>) -> Result<Option<T>> + Sync,
{
    if spec.n_trajectories == 0 {
        return Err(Error::param("n_trajectories", "must be >= 1"));
    }
    let sim = Simulator::new(model, spec.dt, spec.horizon)?;
    let work = || {
        (0..spec.n_trajectories as u64)
            .into_par_iter()
            .map(|i| f(&sim, simulate_pair(&sim, spec, i)?))
            .collect::<Result<Vec<_>>>()
    };
    match spec.threads {
        None => work(),
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::param("threads", e.to_string()))?
            .install(work),
    }
}

pub fn estimate(model: &LindbladModel, spec: &RunSpec) -> Result<IFTEstimate> {
    let logs = map_trajectories(model, spec, |_, pair| Ok(pair.map(|p| p.log_weight)))?;
    estimate_from_log_weights(&logs)
}

/// Estimate from per-trajectory `ln W` values, `None` marking discards.
pub fn estimate_from_log_weights(logs: &[Option<f64>]) -> Result<IFTEstimate> {
    let weights: Vec<f64> = logs.iter().flatten().map(|l| l.exp()).collect();
    let discarded = logs.len() - weights.len();
    IFTEstimate::from_weights(&weights, discarded)
}

/// Seed of sweep point `index`, decorrelated from `master_seed` by a splitmix64 round.
pub fn point_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One estimate per coordinate, in coordinate order. A failing point keeps its
/// error in place; the other points still run.
pub fn sweep<B>(
    label: &str,
    coordinates: &[f64],
    build: B,
    spec: &RunSpec,
) -> Result<Vec<Result<IFTEstimate>>>
where
    B: Fn(f64) -> Result<LindbladModel>,
{
    if coordinates.is_empty() {
        return Err(Error::param("sweep.values", "must not be empty"));
    }
    Ok(coordinates
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let point = RunSpec {
                master_seed: point_seed(spec.master_seed, i as u64),
                ..spec.clone()
            };
            let mut est = estimate(&build(x)?, &point)?;
            est.sweep_coordinate = Some(SweepCoordinate {
                label: label.to_string(),
                value: x,
            });
            Ok(est)
        })
        .collect())
}
