// Copyright 2026 The qtraj Authors
// SPDX-License-Identifier: Apache-2.0

//! Entropy fluxes along a trajectory.
//!
//! A jump through channel `(gamma, A)` from state `chi` has direct rate
//! `R^D = gamma |A chi|^2` and reversed rate
//! `R^R = gamma^b <chi|Lambda^2|chi> / |A chi|^2` with `Lambda = A^dagger A`.
//! Its entropy flux `ln(R^R / R^D)` splits into a thermal part
//! `ln(gamma^b / gamma)` and a nonthermal part `ln(1 - eta)`, where
//! `eta = -Var(Lambda) / |A chi|^4 <= 0`.
//!
//! Drift fluxes compare the survival norm of a forward drift segment with the
//! survival norm of the reversed drift over the same interval. All entropies
//! are in nats.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{check_dim, Operator, StateVector, ZERO_NORM_GUARD};
use crate::model::{real_expectation, Channel, LindbladModel};
use crate::pdp::{Direction, DriftSegment, JumpEvent, Simulator, TrajectoryRecord};

/// Midpoint substeps per `dt` for the appendix integrals and exact drift factors.
pub const QUADRATURE_SUBSTEPS: usize = 16;

const NORMALIZED_TOL: f64 = 1e-8;
const HERMITIAN_TOL: f64 = 1e-10;

fn check_normalized(psi: &StateVector) -> Result<()> {
    if psi.is_normalized(NORMALIZED_TOL) {
        Ok(())
    } else {
        Err(Error::param(
            "state",
            format!("expected a normalized state, |psi|^2 = {}", psi.norm_sq()),
        ))
    }
}

/// `|A chi|^2`, guarded away from zero.
fn jump_norm_sq(ch: &Channel, chi: &StateVector) -> Result<f64> {
    let n = ch.operator().apply(chi)?.norm_sq();
    if n > ZERO_NORM_GUARD {
        Ok(n)
    } else {
        Err(Error::NearZeroNorm { norm_sq: n })
    }
}

/// `<chi|Lambda^2|chi> = |Lambda chi|^2`.
fn lambda_sq_expectation(ch: &Channel, chi: &StateVector) -> Result<f64> {
    Ok(ch.lambda().apply(chi)?.norm_sq())
}

pub fn direct_rate(ch: &Channel, t: f64, chi: &StateVector) -> Result<f64> {
    check_normalized(chi)?;
    Ok(ch.rate(t) * ch.operator().apply(chi)?.norm_sq())
}

pub fn reversed_rate(ch: &Channel, t: f64, chi: &StateVector) -> Result<f64> {
    check_normalized(chi)?;
    let n = jump_norm_sq(ch, chi)?;
    Ok(ch.backward_rate(t) * lambda_sq_expectation(ch, chi)? / n)
}

/// `(<Lambda>^2 - <Lambda^2>) / |A chi|^4`; never positive.
pub fn eta(ch: &Channel, chi: &StateVector) -> Result<f64> {
    check_normalized(chi)?;
    let n = jump_norm_sq(ch, chi)?;
    Ok((n * n - lambda_sq_expectation(ch, chi)?) / (n * n))
}

/// Intrinsic variance `<Q^2> - <Q>^2` of a Hermitian operator in a pure state.
pub fn var1_state(op: &Operator, psi: &StateVector) -> Result<f64> {
    check_dim(op.dim(), psi.dim())?;
    let deviation = op.hermitian_deviation();
    if deviation > HERMITIAN_TOL {
        return Err(Error::NonHermitian { deviation });
    }
    check_normalized(psi)?;
    let mean = real_expectation(op, psi)?;
    Ok(op.apply(psi)?.norm_sq() - mean * mean)
}

/// Per-jump row of an [`EntropyLedger`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JumpEntry {
    pub k: usize,
    pub channel: usize,
    pub time: f64,
    pub r_direct: f64,
    pub r_reversed: f64,
    /// `ln(gamma^b / gamma)`; infinite when the backward rate vanishes.
    pub thermal: f64,
    /// `ln(1 - eta)`.
    pub nonthermal: f64,
    pub eta: f64,
}

impl JumpEntry {
    /// `ln(R^R / R^D)` for this jump.
    pub fn flux(&self) -> f64 {
        self.thermal + self.nonthermal
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftEntry {
    pub k: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub log_d_fwd: f64,
    pub log_d_rev: f64,
    /// Sum of the per-step `kappa` along the segment.
    pub kappa: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EntropyLedger {
    pub jump_flux: f64,
    pub drift_flux: f64,
    pub per_jump: Vec<JumpEntry>,
    pub per_drift: Vec<DriftEntry>,
}

impl EntropyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the entry for `jump` and accumulates its flux.
    pub fn push_jump(&mut self, model: &LindbladModel, jump: &JumpEvent) -> Result<()> {
        let ch = model.channel(jump.channel)?;
        let chi = &jump.pre_state;
        check_normalized(chi)?;
        let n = jump_norm_sq(ch, chi)?;
        let l2 = lambda_sq_expectation(ch, chi)?;
        let (g, gb) = (ch.rate(jump.time), ch.backward_rate(jump.time));
        let eta = (n * n - l2) / (n * n);
        let entry = JumpEntry {
            k: self.per_jump.len(),
            channel: jump.channel,
            time: jump.time,
            r_direct: g * n,
            r_reversed: gb * l2 / n,
            thermal: (gb / g).ln(),
            nonthermal: (l2 / (n * n)).ln(),
            eta,
        };
        self.jump_flux += entry.flux();
        self.per_jump.push(entry);
        Ok(())
    }

    pub fn push_drift(
        &mut self,
        t_start: f64,
        t_end: f64,
        log_d_fwd: f64,
        log_d_rev: f64,
        kappa: f64,
    ) {
        self.drift_flux -= log_d_fwd - log_d_rev;
        self.per_drift.push(DriftEntry {
            k: self.per_drift.len(),
            t_start,
            t_end,
            log_d_fwd,
            log_d_rev,
            kappa,
        });
    }

    pub fn n_jumps(&self) -> usize {
        self.per_jump.len()
    }

    pub fn thermal_total(&self) -> f64 {
        self.per_jump.iter().map(|j| j.thermal).sum()
    }

    pub fn nonthermal_jump_total(&self) -> f64 {
        self.per_jump.iter().map(|j| j.nonthermal).sum()
    }

    pub fn kappa_sum(&self) -> f64 {
        self.per_drift.iter().map(|d| d.kappa).sum()
    }

    /// Entropy flux into the environment, `jump_flux + drift_flux`.
    pub fn total_flux(&self) -> f64 {
        self.jump_flux + self.drift_flux
    }
}

/// Drift flux of one interval, `-(log_D_fwd - log_D_rev)`, taking both norms
/// from the recorded segments.
pub fn drift_flux_exact(fwd: &DriftSegment, rev: &DriftSegment) -> Result<f64> {
    check_same_interval(fwd, rev)?;
    Ok(-(fwd.log_survival - rev.log_survival))
}

fn check_same_interval(a: &DriftSegment, b: &DriftSegment) -> Result<()> {
    let tol = 1e-9 * (1.0 + a.t_end.abs());
    if (a.t_start - b.t_start).abs() > tol || (a.t_end - b.t_end).abs() > tol {
        return Err(Error::IntervalMismatch {
            a_start: a.t_start,
            a_end: a.t_end,
            b_start: b.t_start,
            b_end: b.t_end,
        });
    }
    Ok(())
}

/// Which state the reversed drift norm of segment `k` is evaluated on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftMode {
    /// The state the backward trajectory occupies when it enters the
    /// interval (forward final state for the last segment).
    #[default]
    BackwardWalk,
    /// The forward post-jump state at the end of the interval (forward final
    /// state for the last segment).
    Verbatim,
}

/// Verifies that `bwd` is the backward partner of `fwd`.
pub fn check_pair(fwd: &TrajectoryRecord, bwd: &TrajectoryRecord) -> Result<()> {
    if fwd.direction != Direction::Forward || bwd.direction != Direction::Backward {
        return Err(Error::InvalidRecord(
            "expected a (forward, backward) pair".into(),
        ));
    }
    if fwd.jumps.len() != bwd.jumps.len() || fwd.drifts.len() != bwd.drifts.len() {
        return Err(Error::InvalidRecord("jump counts differ".into()));
    }
    for (f, b) in fwd.jumps.iter().zip(&bwd.jumps) {
        if f.step != b.step || f.channel != b.channel {
            return Err(Error::InvalidRecord("jump sequences differ".into()));
        }
    }
    for (f, b) in fwd.drifts.iter().zip(&bwd.drifts) {
        check_same_interval(f, b)?;
    }
    Ok(())
}

/// `ln D^R_k` for every drift segment of `fwd`.
pub fn reversed_drift_logs(
    sim: &Simulator<'_>,
    fwd: &TrajectoryRecord,
    bwd: &TrajectoryRecord,
    mode: DriftMode,
) -> Result<Vec<f64>> {
    check_pair(fwd, bwd)?;
    match mode {
        DriftMode::BackwardWalk => Ok(bwd.drifts.iter().map(|d| d.log_survival).collect()),
        DriftMode::Verbatim => {
            let n = fwd.jumps.len();
            let table = sim.table();
            fwd.drifts
                .iter()
                .enumerate()
                .map(|(k, seg)| {
                    let start = if k < n {
                        &fwd.jumps[k].post_state
                    } else {
                        &fwd.final_state
                    };
                    let mut psi = start.as_vector().clone();
                    let mut log = 0.0;
                    for j in seg.steps().rev() {
                        let v: DVector<Complex64> = table.backward_factor(j).matrix() * &psi;
                        let n = v.norm_squared();
                        if !(n > ZERO_NORM_GUARD) {
                            return Err(Error::NearZeroNorm { norm_sq: n });
                        }
                        log += n.ln();
                        psi = v.unscale(n.sqrt());
                    }
                    Ok(log)
                })
                .collect()
        }
    }
}

/// Sum over the steps of a forward segment of the per-step `kappa`, using the
/// simulator's own drift factors.
fn segment_kappa(sim: &Simulator<'_>, seg: &DriftSegment) -> Result<f64> {
    let table = sim.table();
    let mut psi = seg.entry_state.as_vector().clone();
    let mut total = 0.0;
    for j in seg.steps() {
        let v: DVector<Complex64> = table.forward_factor(j).matrix() * &psi;
        let n = v.norm_squared();
        if !(n > ZERO_NORM_GUARD) {
            return Err(Error::NearZeroNorm { norm_sq: n });
        }
        // <M^2> = |U^dagger U psi|^2 with M = U^dagger U
        let m2 = (table.backward_factor(j).matrix() * &v).norm_squared();
        total -= (m2 - n * n) / (n * n);
        psi = v.unscale(n.sqrt());
    }
    Ok(total)
}

/// Full ledger of a forward trajectory and its backward partner.
pub fn ledger_with(
    sim: &Simulator<'_>,
    fwd: &TrajectoryRecord,
    bwd: &TrajectoryRecord,
    mode: DriftMode,
) -> Result<EntropyLedger> {
    let rev = reversed_drift_logs(sim, fwd, bwd, mode)?;
    let mut ledger = EntropyLedger::new();
    for jump in &fwd.jumps {
        ledger.push_jump(sim.model(), jump)?;
    }
    for (seg, log_rev) in fwd.drifts.iter().zip(rev) {
        let kappa = segment_kappa(sim, seg)?;
        ledger.push_drift(seg.t_start, seg.t_end, seg.log_survival, log_rev, kappa);
    }
    Ok(ledger)
}

/// [`ledger_with`] in the default drift mode, on the grid of `fwd`.
pub fn ledger_for_trajectory(
    model: &LindbladModel,
    fwd: &TrajectoryRecord,
    bwd: &TrajectoryRecord,
) -> Result<EntropyLedger> {
    let sim = Simulator::new(model, fwd.dt, fwd.horizon)?;
    ledger_with(&sim, fwd, bwd, DriftMode::default())
}

/// Total entropy production given the log-densities of the initial forward
/// state and of the final state.
pub fn sigma_with_boundary_densities(
    ledger: &EntropyLedger,
    log_p_initial: f64,
    log_p_final: f64,
) -> f64 {
    (log_p_initial - log_p_final) - ledger.total_flux()
}

fn quadrature_nodes(t: f64, dt: f64) -> impl Iterator<Item = f64> {
    let h = dt / QUADRATURE_SUBSTEPS as f64;
    (0..QUADRATURE_SUBSTEPS).map(move |s| t + (s as f64 + 0.5) * h)
}

/// `I^(1) = int_t^{t+dt} Omega(t1) dt1` by the midpoint rule.
pub fn appendix_i1(model: &LindbladModel, t: f64, dt: f64) -> Operator {
    let h = dt / QUADRATURE_SUBSTEPS as f64;
    quadrature_nodes(t, dt)
        .fold(Operator::zeros(model.dim()), |acc, s| {
            &acc + &model.omega(s)
        })
        .scale_real(h)
}

/// `I^(2) = int int T{Omega(t1) Omega(t2)}` over `[t, t+dt]^2` by the midpoint rule.
pub fn appendix_i2(model: &LindbladModel, t: f64, dt: f64) -> Operator {
    let h = dt / QUADRATURE_SUBSTEPS as f64;
    let dim = model.dim();
    let mut earlier = Operator::zeros(dim);
    let mut ordered = Operator::zeros(dim);
    let mut diagonal = Operator::zeros(dim);
    for s in quadrature_nodes(t, dt) {
        let om = model.omega(s);
        ordered = &ordered + &(&om * &earlier);
        diagonal = &diagonal + &(&om * &om);
        earlier = &earlier + &om;
    }
    (&ordered.scale_real(2.0) + &diagonal).scale_real(h * h)
}

/// Second-order estimate `<I^(2)> - <I^(1)>^2` of `Var(U^dagger U)` over one step.
pub fn appendix_var1_expansion(
    model: &LindbladModel,
    t: f64,
    dt: f64,
    psi: &StateVector,
) -> Result<f64> {
    check_dim(model.dim(), psi.dim())?;
    check_normalized(psi)?;
    let i1 = real_expectation(&appendix_i1(model, t, dt), psi)?;
    let i2 = real_expectation(&appendix_i2(model, t, dt), psi)?;
    Ok(i2 - i1 * i1)
}

/// `Var(U^dagger U)` over `[t, t+dt]` with `U` the finely time-ordered drift factor.
pub fn exact_drift_var1(model: &LindbladModel, t: f64, dt: f64, psi: &StateVector) -> Result<f64> {
    let (var, _) = drift_moments(model, t, dt, psi)?;
    Ok(var)
}

/// `kappa = -Var(U^dagger U) / |U psi|^4`; never positive.
pub fn drift_kappa(model: &LindbladModel, t: f64, dt: f64, psi: &StateVector) -> Result<f64> {
    let (var, n) = drift_moments(model, t, dt, psi)?;
    if !(n > ZERO_NORM_GUARD) {
        return Err(Error::NearZeroNorm { norm_sq: n });
    }
    Ok(-var / (n * n))
}

fn drift_moments(model: &LindbladModel, t: f64, dt: f64, psi: &StateVector) -> Result<(f64, f64)> {
    check_dim(model.dim(), psi.dim())?;
    check_normalized(psi)?;
    let u = model.fine_step_propagator(t, dt, QUADRATURE_SUBSTEPS);
    let m = &u.adjoint() * &u;
    let up = u.apply(psi)?;
    let n = up.norm_sq();
    Ok((m.apply(psi)?.norm_sq() - n * n, n))
}
