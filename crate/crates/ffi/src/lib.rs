// Copyright 2026 The qtraj Authors
// SPDX-License-Identifier: Apache-2.0

//! C ABI over `qtraj-core`.
//!
//! Every fallible call returns a [`QtStatus`]; on failure the message is
//! available from [`qt_last_error`] on the same thread. Objects are opaque
//! handles released with their `_free` function. Panics never cross the
//! boundary and are reported as [`QtStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use qtraj_core::config::ExperimentConfig;
use qtraj_core::entropy::ledger_with;
use qtraj_core::ift::{estimate, simulate_pair, TrajectoryPair};
use qtraj_core::model::{
    build_eigenstate_jump_model, build_two_level_direct, build_two_level_homodyne,
    build_two_level_thermal, Transition, TwoLevelParams,
};
use qtraj_core::{
    DriftMode, EntropyLedger, Error, InitialState, LindbladModel, RunSpec, Simulator,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NearZeroNorm = 4,
    StepTooLarge = 5,
    NonHermitian = 6,
    /// The trajectory was discarded because a state norm vanished.
    Discarded = 7,
    Internal = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QtDriftMode {
    BackwardWalk = 0,
    Verbatim = 1,
}

/// Driven two-level atom, all times and rates in the same units.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct QtTwoLevelParams {
    pub omega0: f64,
    pub tau: f64,
    pub g1: f64,
    pub tau1: f64,
    pub g2: f64,
    pub tau2: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct QtTransition {
    pub lower: usize,
    pub upper: usize,
    pub down_rate: f64,
    pub up_rate: f64,
}

/// Run parameters. `initial_basis < 0` draws the random two-level state;
/// `threads == 0` uses every core.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct QtRunSpec {
    pub n_trajectories: usize,
    pub dt: f64,
    pub horizon: f64,
    pub master_seed: u64,
    pub drift_mode: QtDriftMode,
    pub initial_basis: i64,
    pub threads: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct QtEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub zeta: f64,
    pub quantile_95: f64,
    pub n_trajectories: usize,
    pub n_discarded: usize,
    pub unreliable: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct QtJump {
    pub step: usize,
    pub time: f64,
    pub channel: usize,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct QtLedger {
    pub n_jumps: usize,
    pub jump_flux: f64,
    pub drift_flux: f64,
    pub thermal_total: f64,
    pub nonthermal_jump_total: f64,
    pub kappa_sum: f64,
}

/// Opaque Lindblad model.
pub struct QtModel(LindbladModel);

/// Opaque forward/backward trajectory pair with its entropy ledger.
pub struct QtTrajectory {
    pair: TrajectoryPair,
    ledger: EntropyLedger,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> QtStatus {
    match e {
        Error::DimensionMismatch { .. } => QtStatus::DimensionMismatch,
        Error::NearZeroNorm { .. } => QtStatus::NearZeroNorm,
        Error::StepTooLarge { .. } => QtStatus::StepTooLarge,
        Error::NonHermitian { .. } => QtStatus::NonHermitian,
        Error::InvalidParameter { .. }
        | Error::IntervalMismatch { .. }
        | Error::GridMismatch(_) => QtStatus::InvalidArgument,
        Error::InvariantViolation(_) | Error::InvalidRecord(_) => QtStatus::Internal,
    }
}

struct Failure(QtStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(QtStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            QtStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(&format!("panic: {msg}"));
            QtStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed_model(
    out: *mut *mut QtModel,
    model: qtraj_core::Result<LindbladModel>,
) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    let model = model?;
    unsafe { out.write(Box::into_raw(Box::new(QtModel(model)))) };
    Ok(())
}

fn params(p: &QtTwoLevelParams) -> TwoLevelParams {
    TwoLevelParams {
        omega0: p.omega0,
        tau: p.tau,
        g1: p.g1,
        tau1: p.tau1,
        g2: p.g2,
        tau2: p.tau2,
    }
}

fn run_spec(s: &QtRunSpec) -> RunSpec {
    RunSpec {
        initial_state: if s.initial_basis < 0 {
            InitialState::RandomTwoLevel
        } else {
            InitialState::Basis(s.initial_basis as usize)
        },
        drift_mode: match s.drift_mode {
            QtDriftMode::BackwardWalk => DriftMode::BackwardWalk,
            QtDriftMode::Verbatim => DriftMode::Verbatim,
        },
        threads: (s.threads > 0).then_some(s.threads),
        ..RunSpec::new(s.n_trajectories, s.dt, s.horizon, s.master_seed)
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn qt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fills `out` with the defaults: random two-level initial state, backward-walk
/// drift, all cores.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qt_run_spec_default(
    n_trajectories: usize,
    dt: f64,
    horizon: f64,
    master_seed: u64,
    out: *mut QtRunSpec,
) -> QtStatus {
    guard(|| {
        let spec = QtRunSpec {
            n_trajectories,
            dt,
            horizon,
            master_seed,
            drift_mode: QtDriftMode::BackwardWalk,
            initial_basis: -1,
            threads: 0,
        };
        write_out(out, spec, "out")
    })
}

/// # Safety
/// `p` must point to a valid struct and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qt_model_two_level_direct(
    p: *const QtTwoLevelParams,
    out: *mut *mut QtModel,
) -> QtStatus {
    guard(|| {
        let p = deref(p, "params")?;
        boxed_model(out, build_two_level_direct(&params(p)))
    })
}

/// # Safety
/// `p` must point to a valid struct and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qt_model_two_level_homodyne(
    p: *const QtTwoLevelParams,
    beta_re: f64,
    beta_im: f64,
    out: *mut *mut QtModel,
) -> QtStatus {
    guard(|| {
        let p = deref(p, "params")?;
        boxed_model(
            out,
            build_two_level_homodyne(&params(p), Complex64::new(beta_re, beta_im)),
        )
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qt_model_two_level_thermal(
    omega0: f64,
    tau: f64,
    mean_photon_number: f64,
    rate_scale: f64,
    out: *mut *mut QtModel,
) -> QtStatus {
    guard(|| {
        boxed_model(
            out,
            build_two_level_thermal(omega0, tau, mean_photon_number, rate_scale),
        )
    })
}

/// # Safety
/// `energies` must hold `n_levels` doubles, `transitions` must hold
/// `n_transitions` entries, and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qt_model_eigenstate_jump(
    energies: *const f64,
    n_levels: usize,
    transitions: *const QtTransition,
    n_transitions: usize,
    out: *mut *mut QtModel,
) -> QtStatus {
    guard(|| {
        if energies.is_null() {
            return Err(null("energies"));
        }
        if transitions.is_null() && n_transitions > 0 {
            return Err(null("transitions"));
        }
        let energies = std::slice::from_raw_parts(energies, n_levels);
        let transitions: Vec<Transition> = if n_transitions == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(transitions, n_transitions)
                .iter()
                .map(|t| Transition {
                    lower: t.lower,
                    upper: t.upper,
                    down_rate: t.down_rate,
                    up_rate: t.up_rate,
                })
                .collect()
        };
        boxed_model(out, build_eigenstate_jump_model(energies, &transitions))
    })
}

/// Builds the model described by a JSON experiment config at sweep point
/// `point` (ignored without a sweep block) and fills `spec` from its run block.
/// `spec` may be null.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qt_model_from_config(
    json: *const c_char,
    point: usize,
    out: *mut *mut QtModel,
    spec: *mut QtRunSpec,
) -> QtStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| {
            Failure(
                QtStatus::InvalidArgument,
                format!("config is not UTF-8: {e}"),
            )
        })?;
        let cfg = ExperimentConfig::from_json(text)?;
        let points = cfg.points();
        let coordinate = points.get(point).ok_or_else(|| {
            Failure(
                QtStatus::InvalidArgument,
                format!("point {point} out of range"),
            )
        })?;
        boxed_model(out, cfg.build_model(coordinate.map(|c| c.1)))?;
        if let Some(spec) = spec.as_mut() {
            let rs = cfg.run_spec()?;
            *spec = QtRunSpec {
                n_trajectories: rs.n_trajectories,
                dt: rs.dt,
                horizon: rs.horizon,
                master_seed: if cfg.sweep.is_some() {
                    qtraj_core::ift::point_seed(rs.master_seed, point as u64)
                } else {
                    rs.master_seed
                },
                drift_mode: match rs.drift_mode {
                    DriftMode::BackwardWalk => QtDriftMode::BackwardWalk,
                    DriftMode::Verbatim => QtDriftMode::Verbatim,
                },
                initial_basis: match rs.initial_state {
                    InitialState::Basis(i) => i as i64,
                    InitialState::RandomTwoLevel => -1,
                    InitialState::Fixed(_) => {
                        return Err(Failure(
                            QtStatus::InvalidArgument,
                            "fixed initial states cannot be expressed in QtRunSpec".into(),
                        ))
                    }
                },
                threads: 0,
            };
        }
        Ok(())
    })
}

/// Hilbert-space dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qt_model_dim(model: *const QtModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.dim())
}

/// Number of jump channels, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qt_model_n_channels(model: *const QtModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.channels().len())
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qt_model_free(model: *mut QtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Estimates `<W>` over `spec->n_trajectories` trajectory pairs.
///
/// # Safety
/// `model` must be a live handle, `spec` valid, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qt_estimate(
    model: *const QtModel,
    spec: *const QtRunSpec,
    out: *mut QtEstimate,
) -> QtStatus {
    guard(|| {
        let model = deref(model, "model")?;
        let spec = deref(spec, "spec")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let e = estimate(&model.0, &run_spec(spec))?;
        out.write(QtEstimate {
            mean: e.mean,
            std_error: e.std_error,
            zeta: e.zeta,
            quantile_95: e.quantile_95,
            n_trajectories: e.n_trajectories,
            n_discarded: e.n_discarded,
            unreliable: e.unreliable,
        });
        Ok(())
    })
}

/// Simulates trajectory `index` of the run described by `spec`, the same pair
/// that [`qt_estimate`] uses. Returns [`QtStatus::Discarded`] with `*out`
/// set to null when the pair is discarded.
///
/// # Safety
/// `model` must be a live handle, `spec` valid, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qt_trajectory_simulate(
    model: *const QtModel,
    spec: *const QtRunSpec,
    index: u64,
    out: *mut *mut QtTrajectory,
) -> QtStatus {
    guard(|| {
        let model = deref(model, "model")?;
        let spec = run_spec(deref(spec, "spec")?);
        write_out(out, ptr::null_mut(), "out")?;
        let sim = Simulator::new(&model.0, spec.dt, spec.horizon)?;
        let Some(pair) = simulate_pair(&sim, &spec, index)? else {
            return Err(Failure(
                QtStatus::Discarded,
                format!("trajectory {index} discarded"),
            ));
        };
        let ledger = ledger_with(&sim, &pair.forward, &pair.backward, spec.drift_mode)?;
        out.write(Box::into_raw(Box::new(QtTrajectory { pair, ledger })));
        Ok(())
    })
}

/// `ln W` of the pair, or NaN for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qt_trajectory_log_weight(traj: *const QtTrajectory) -> f64 {
    traj.as_ref().map_or(f64::NAN, |t| t.pair.log_weight)
}

/// Number of forward jumps, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qt_trajectory_n_jumps(traj: *const QtTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.pair.forward.jumps.len())
}

/// Forward jump `i`.
///
/// # Safety
/// `traj` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qt_trajectory_jump(
    traj: *const QtTrajectory,
    i: usize,
    out: *mut QtJump,
) -> QtStatus {
    guard(|| {
        let t = deref(traj, "traj")?;
        let j =
            t.pair.forward.jumps.get(i).ok_or_else(|| {
                Failure(QtStatus::InvalidArgument, format!("jump {i} out of range"))
            })?;
        write_out(
            out,
            QtJump {
                step: j.step,
                time: j.time,
                channel: j.channel,
            },
            "out",
        )
    })
}

/// Final forward state as interleaved `(re, im)` pairs; `buf` must hold
/// `2 * dim` doubles.
///
/// # Safety
/// `traj` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn qt_trajectory_final_state(
    traj: *const QtTrajectory,
    buf: *mut f64,
    len: usize,
) -> QtStatus {
    guard(|| {
        let t = deref(traj, "traj")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let amps = t.pair.forward.final_state.amplitudes();
        if len != 2 * amps.len() {
            return Err(Failure(
                QtStatus::DimensionMismatch,
                format!("buffer holds {len} doubles, need {}", 2 * amps.len()),
            ));
        }
        let out = std::slice::from_raw_parts_mut(buf, len);
        for (k, a) in amps.iter().enumerate() {
            out[2 * k] = a.re;
            out[2 * k + 1] = a.im;
        }
        Ok(())
    })
}

/// Entropy-ledger totals for the pair.
///
/// # Safety
/// `traj` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qt_trajectory_ledger(
    traj: *const QtTrajectory,
    out: *mut QtLedger,
) -> QtStatus {
    guard(|| {
        let l = &deref(traj, "traj")?.ledger;
        let summary = QtLedger {
            n_jumps: l.n_jumps(),
            jump_flux: l.jump_flux,
            drift_flux: l.drift_flux,
            thermal_total: l.thermal_total(),
            nonthermal_jump_total: l.nonthermal_jump_total(),
            kappa_sum: l.kappa_sum(),
        };
        write_out(out, summary, "out")
    })
}

/// The pair as a JSON document. Release with [`qt_string_free`].
///
/// # Safety
/// `traj` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qt_trajectory_to_json(
    traj: *const QtTrajectory,
    out: *mut *mut c_char,
) -> QtStatus {
    guard(|| {
        let t = deref(traj, "traj")?;
        let doc = serde_json::json!({
            "index": t.pair.index,
            "log_weight": t.pair.log_weight,
            "forward": t.pair.forward,
            "backward": t.pair.backward,
        });
        let s = CString::new(doc.to_string())
            .map_err(|e| Failure(QtStatus::Internal, e.to_string()))?;
        write_out(out, s.into_raw(), "out")
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `traj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qt_trajectory_free(traj: *mut QtTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}
