// Copyright 2026 The qtraj Authors
// SPDX-License-Identifier: Apache-2.0

//! Time-dependent Lindblad models.
//!
//! A [`LindbladModel`] holds a free Hamiltonian `H_S(t) = sum_k f_k(t) H_k` and
//! a list of decay channels `(gamma_i(t), A_i)`. Every channel names an adjoint
//! partner whose operator is `A_i^dagger`; the backward rate of a channel is the
//! partner's forward rate schedule (shared by `Arc`).

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{c, check_dim, Operator, StateVector};

const HERMITIAN_TOL: f64 = 1e-12;
const PAIRING_TOL: f64 = 1e-12;

/// Scalar time profile used for rates and driving amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    Constant(f64),
    /// `t -> amplitude * exp(-t / tau)`
    ExpDecay {
        amplitude: f64,
        tau: f64,
    },
    /// `t -> amplitude * (1 - exp(-t / tau))`
    ExpRise {
        amplitude: f64,
        tau: f64,
    },
}

impl Schedule {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Schedule::Constant(v) => v,
            Schedule::ExpDecay { amplitude, tau } => amplitude * (-t / tau).exp(),
            Schedule::ExpRise { amplitude, tau } => amplitude * -(-t / tau).exp_m1(),
        }
    }

    /// Exact integral over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match *self {
            Schedule::Constant(v) => v * (b - a),
            Schedule::ExpDecay { amplitude, tau } => {
                amplitude * tau * ((-a / tau).exp() - (-b / tau).exp())
            }
            Schedule::ExpRise { amplitude, tau } => {
                amplitude * (b - a) - amplitude * tau * ((-a / tau).exp() - (-b / tau).exp())
            }
        }
    }

    fn amplitude(&self) -> f64 {
        match *self {
            Schedule::Constant(v) => v,
            Schedule::ExpDecay { amplitude, .. } | Schedule::ExpRise { amplitude, .. } => amplitude,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !self.amplitude().is_finite() {
            return Err(Error::param(name, "amplitude must be finite"));
        }
        match *self {
            Schedule::ExpDecay { tau, .. } | Schedule::ExpRise { tau, .. }
                if !(tau > 0.0 && tau.is_finite()) =>
            {
                Err(Error::param(
                    name,
                    format!("time constant must be > 0, got {tau}"),
                ))
            }
            _ => Ok(()),
        }
    }

    /// Rates must stay nonnegative for all `t >= 0`; every variant is monotone
    /// in its amplitude sign, so checking the amplitude suffices.
    fn validate_rate(&self, name: &str) -> Result<()> {
        self.validate(name)?;
        if self.amplitude() < 0.0 {
            return Err(Error::param(name, "rates must be >= 0"));
        }
        Ok(())
    }
}

/// One term `f(t) * H` of the free Hamiltonian.
#[derive(Clone, Debug)]
pub struct HamiltonianTerm {
    pub schedule: Schedule,
    pub operator: Operator,
}

/// Channel description handed to [`LindbladModel::new`].
#[derive(Clone, Debug)]
pub struct ChannelSpec {
    pub operator: Operator,
    pub rate: Schedule,
    /// Index of the channel whose operator is this one's adjoint.
    pub partner: usize,
}

/// A decay channel with cached operator products.
#[derive(Clone, Debug)]
pub struct Channel {
    operator: Operator,
    adjoint: Operator,
    lambda: Operator,
    lambda_sq: Operator,
    rate: Arc<Schedule>,
    backward_rate: Arc<Schedule>,
    partner: usize,
}

impl Channel {
    /// Jump operator `A`.
    pub fn operator(&self) -> &Operator {
        &self.operator
    }

    /// Backward jump operator `A^dagger`.
    pub fn adjoint_operator(&self) -> &Operator {
        &self.adjoint
    }

    /// `A^dagger A`.
    pub fn lambda(&self) -> &Operator {
        &self.lambda
    }

    /// `(A^dagger A)^2`.
    pub fn lambda_sq(&self) -> &Operator {
        &self.lambda_sq
    }

    pub fn rate(&self, t: f64) -> f64 {
        self.rate.eval(t)
    }

    pub fn backward_rate(&self, t: f64) -> f64 {
        self.backward_rate.eval(t)
    }

    pub fn rate_schedule(&self) -> &Arc<Schedule> {
        &self.rate
    }

    pub fn backward_rate_schedule(&self) -> &Arc<Schedule> {
        &self.backward_rate
    }

    pub fn partner(&self) -> usize {
        self.partner
    }
}

/// Free Hamiltonian schedule plus decay channels.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    dim: usize,
    hamiltonian: Vec<HamiltonianTerm>,
    channels: Vec<Channel>,
}

impl LindbladModel {
    pub fn new(
        dim: usize,
        hamiltonian: Vec<HamiltonianTerm>,
        specs: Vec<ChannelSpec>,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::param("dim", "model dimension must be >= 2"));
        }
        for (k, term) in hamiltonian.iter().enumerate() {
            check_dim(dim, term.operator.dim())?;
            term.schedule
                .validate(&format!("hamiltonian[{k}].schedule"))?;
            let dev = term.operator.hermitian_deviation();
            if dev > HERMITIAN_TOL {
                return Err(Error::NonHermitian { deviation: dev });
            }
        }
        let rates: Vec<Arc<Schedule>> = specs.iter().map(|s| Arc::new(s.rate.clone())).collect();
        let mut channels = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            check_dim(dim, spec.operator.dim())?;
            spec.rate.validate_rate(&format!("channel[{i}].rate"))?;
            let p = spec.partner;
            if p >= specs.len() {
                return Err(Error::param(
                    format!("channel[{i}].partner"),
                    format!("partner index {p} out of range"),
                ));
            }
            if specs[p].partner != i {
                return Err(Error::param(
                    format!("channel[{i}].partner"),
                    format!("pairing is not mutual: {i} -> {p} -> {}", specs[p].partner),
                ));
            }
            let adjoint = spec.operator.adjoint();
            let dev = adjoint.max_abs_diff(&specs[p].operator);
            if dev > PAIRING_TOL {
                return Err(Error::param(
                    format!("channel[{i}].partner"),
                    format!("partner operator differs from the adjoint by {dev:e}"),
                ));
            }
            let lambda = &adjoint * &spec.operator;
            let lambda_sq = &lambda * &lambda;
            channels.push(Channel {
                operator: spec.operator.clone(),
                adjoint,
                lambda,
                lambda_sq,
                rate: Arc::clone(&rates[i]),
                backward_rate: Arc::clone(&rates[p]),
                partner: p,
            });
        }
        Ok(Self {
            dim,
            hamiltonian,
            channels,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel(&self, index: usize) -> Result<&Channel> {
        self.channels
            .get(index)
            .ok_or_else(|| Error::param("channel", format!("channel index {index} out of range")))
    }

    pub fn hamiltonian_terms(&self) -> &[HamiltonianTerm] {
        &self.hamiltonian
    }

    /// `H_S(t)`.
    pub fn hamiltonian(&self, t: f64) -> Operator {
        self.hamiltonian
            .iter()
            .fold(Operator::zeros(self.dim), |acc, term| {
                &acc + &term.operator.scale_real(term.schedule.eval(t))
            })
    }

    /// `Omega(t) = sum_i gamma_i(t) A_i^dagger A_i`.
    pub fn omega(&self, t: f64) -> Operator {
        self.channels
            .iter()
            .fold(Operator::zeros(self.dim), |acc, ch| {
                &acc + &ch.lambda.scale_real(ch.rate(t))
            })
    }

    /// `H_eff(t) = H_S(t) - (i/2) Omega(t)`.
    pub fn effective_hamiltonian(&self, t: f64) -> Operator {
        &self.hamiltonian(t) - &self.omega(t).scale(c(0.0, 0.5))
    }

    /// One midpoint factor `exp(-i H_eff(t + dt/2) dt)` of the time-ordered drift.
    pub fn step_propagator(&self, t_start: f64, dt: f64) -> Operator {
        self.effective_hamiltonian(t_start + 0.5 * dt)
            .scale(c(0.0, -dt))
            .exp()
    }

    /// Adjoint of [`Self::step_propagator`]; the backward drift factor.
    pub fn backward_step_propagator(&self, t_start: f64, dt: f64) -> Operator {
        self.step_propagator(t_start, dt).adjoint()
    }

    /// Time-ordered product of `substeps` midpoint factors across `[t_start, t_start + dt]`.
    pub fn fine_step_propagator(&self, t_start: f64, dt: f64, substeps: usize) -> Operator {
        let h = dt / substeps as f64;
        (0..substeps).fold(Operator::identity(self.dim), |acc, s| {
            &self.step_propagator(t_start + s as f64 * h, h) * &acc
        })
    }

    /// Right-hand side of the master equation at time `t`.
    pub fn lindblad_generator(&self, t: f64, rho: &Operator) -> Result<Operator> {
        check_dim(self.dim, rho.dim())?;
        let h = self.hamiltonian(t);
        let mut out = h.commutator(rho)?.scale(c(0.0, -1.0));
        for ch in &self.channels {
            let g = ch.rate(t);
            if g == 0.0 {
                continue;
            }
            let jump = &(&ch.operator * rho) * &ch.adjoint;
            let anti = &(&ch.lambda * rho) + &(rho * &ch.lambda);
            out = &out + &(&jump - &anti.scale_real(0.5)).scale_real(g);
        }
        Ok(out)
    }
}

/// Parameters of the driven two-level atom: `omega(t) = omega0 (1 - e^{-t/tau})`,
/// `gamma_1(t) = g1 e^{-t/tau1}`, `gamma_2(t) = g2 (1 - e^{-t/tau2})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoLevelParams {
    pub omega0: f64,
    pub tau: f64,
    pub g1: f64,
    pub tau1: f64,
    pub g2: f64,
    pub tau2: f64,
}

impl TwoLevelParams {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("tau", self.tau), ("tau1", self.tau1), ("tau2", self.tau2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be > 0, got {v}")));
            }
        }
        for (name, v) in [("g1", self.g1), ("g2", self.g2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be >= 0, got {v}")));
            }
        }
        if !self.omega0.is_finite() {
            return Err(Error::param("omega0", "must be finite"));
        }
        Ok(())
    }

    fn drive(&self) -> Vec<HamiltonianTerm> {
        drive_term(self.omega0, self.tau)
    }
}

fn drive_term(omega0: f64, tau: f64) -> Vec<HamiltonianTerm> {
    vec![HamiltonianTerm {
        schedule: Schedule::ExpRise {
            amplitude: omega0,
            tau,
        },
        operator: Operator::sigma_x().scale_real(0.5),
    }]
}

/// Direct-photodetection unraveling: channels `(sigma_-, gamma_1)` and `(sigma_+, gamma_2)`.
pub fn build_two_level_direct(p: &TwoLevelParams) -> Result<LindbladModel> {
    p.validate()?;
    LindbladModel::new(
        2,
        p.drive(),
        vec![
            ChannelSpec {
                operator: Operator::sigma_minus(),
                rate: Schedule::ExpDecay {
                    amplitude: p.g1,
                    tau: p.tau1,
                },
                partner: 1,
            },
            ChannelSpec {
                operator: Operator::sigma_plus(),
                rate: Schedule::ExpRise {
                    amplitude: p.g2,
                    tau: p.tau2,
                },
                partner: 0,
            },
        ],
    )
}

/// Homodyne-like unraveling of the same master equation.
///
/// Channel order is `[sigma_- - i beta, sigma_- + i beta, sigma_+ - i beta*, sigma_+ + i beta*]`,
/// each at half the direct-scheme rate. Pairings: `0 <-> 3`, `1 <-> 2`.
pub fn build_two_level_homodyne(p: &TwoLevelParams, beta: Complex64) -> Result<LindbladModel> {
    p.validate()?;
    if !(beta.re.is_finite() && beta.im.is_finite()) {
        return Err(Error::param("beta", "must be finite"));
    }
    let shift = |op: Operator, z: Complex64| &op + &Operator::identity(2).scale(z);
    let ib = c(0.0, 1.0) * beta;
    let ib_conj = c(0.0, 1.0) * beta.conj();
    let emission = Schedule::ExpDecay {
        amplitude: 0.5 * p.g1,
        tau: p.tau1,
    };
    let absorption = Schedule::ExpRise {
        amplitude: 0.5 * p.g2,
        tau: p.tau2,
    };
    LindbladModel::new(
        2,
        p.drive(),
        vec![
            ChannelSpec {
                operator: shift(Operator::sigma_minus(), -ib),
                rate: emission.clone(),
                partner: 3,
            },
            ChannelSpec {
                operator: shift(Operator::sigma_minus(), ib),
                rate: emission,
                partner: 2,
            },
            ChannelSpec {
                operator: shift(Operator::sigma_plus(), -ib_conj),
                rate: absorption.clone(),
                partner: 1,
            },
            ChannelSpec {
                operator: shift(Operator::sigma_plus(), ib_conj),
                rate: absorption,
                partner: 0,
            },
        ],
    )
}

/// Direct scheme coupled to a thermal field: constant `gamma_1 = c (<N> + 1)`,
/// `gamma_2 = c <N>`.
pub fn build_two_level_thermal(
    omega0: f64,
    tau: f64,
    mean_photon_number: f64,
    rate_scale: f64,
) -> Result<LindbladModel> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::param("tau", format!("must be > 0, got {tau}")));
    }
    if !(mean_photon_number >= 0.0 && mean_photon_number.is_finite()) {
        return Err(Error::param("mean_photon_number", "must be >= 0"));
    }
    if !(rate_scale >= 0.0 && rate_scale.is_finite()) {
        return Err(Error::param("rate_scale", "must be >= 0"));
    }
    if !omega0.is_finite() {
        return Err(Error::param("omega0", "must be finite"));
    }
    LindbladModel::new(
        2,
        drive_term(omega0, tau),
        vec![
            ChannelSpec {
                operator: Operator::sigma_minus(),
                rate: Schedule::Constant(rate_scale * (mean_photon_number + 1.0)),
                partner: 1,
            },
            ChannelSpec {
                operator: Operator::sigma_plus(),
                rate: Schedule::Constant(rate_scale * mean_photon_number),
                partner: 0,
            },
        ],
    )
}

/// Undriven two-level decay: `H_S = 0`, `(sigma_-, gamma)` paired with a silent `(sigma_+, 0)`.
pub fn build_pure_decay(gamma: f64) -> Result<LindbladModel> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::param("gamma", "must be >= 0"));
    }
    LindbladModel::new(
        2,
        Vec::new(),
        vec![
            ChannelSpec {
                operator: Operator::sigma_minus(),
                rate: Schedule::Constant(gamma),
                partner: 1,
            },
            ChannelSpec {
                operator: Operator::sigma_plus(),
                rate: Schedule::Constant(0.0),
                partner: 0,
            },
        ],
    )
}

/// Rates for one level pair of the eigenstate-jump model (levels indexed from 0 = ground).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub lower: usize,
    pub upper: usize,
    /// Rate of `|lower><upper|`.
    pub down_rate: f64,
    /// Rate of `|upper><lower|`.
    pub up_rate: f64,
}

/// Relative tolerance used to call two energy gaps degenerate.
pub const GAP_DEGENERACY_TOL: f64 = 1e-9;

/// Jumps between eigenstates of `H_S = diag(energies)`.
///
/// One lowering channel `|i><j|` per pair `i < j` in lexicographic pair order,
/// followed by the raising channels `|j><i|` in the same order. Pairs absent
/// from `transitions` get zero rates.
pub fn build_eigenstate_jump_model(
    energies: &[f64],
    transitions: &[Transition],
) -> Result<LindbladModel> {
    let n = energies.len();
    if n < 2 {
        return Err(Error::param("energies", "need at least two levels"));
    }
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::param("energies", "must be finite"));
    }
    if energies.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("energies", "must be strictly increasing"));
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let scale = energies[n - 1] - energies[0];
    for (a, &(i, j)) in pairs.iter().enumerate() {
        for &(k, l) in &pairs[a + 1..] {
            let g1 = energies[j] - energies[i];
            let g2 = energies[l] - energies[k];
            if (g1 - g2).abs() <= GAP_DEGENERACY_TOL * scale {
                return Err(Error::param(
                    "energies",
                    format!("degenerate gaps: ({i},{j}) and ({k},{l}) both {g1}"),
                ));
            }
        }
    }
    let mut down = vec![0.0; pairs.len()];
    let mut up = vec![0.0; pairs.len()];
    let mut seen = vec![false; pairs.len()];
    for (t_idx, t) in transitions.iter().enumerate() {
        let name = format!("transitions[{t_idx}]");
        let pos = pairs
            .iter()
            .position(|&p| p == (t.lower, t.upper))
            .ok_or_else(|| Error::param(&name, "need lower < upper < number of levels"))?;
        if std::mem::replace(&mut seen[pos], true) {
            return Err(Error::param(&name, "duplicate level pair"));
        }
        for (label, r) in [("down_rate", t.down_rate), ("up_rate", t.up_rate)] {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::param(format!("{name}.{label}"), "must be >= 0"));
            }
        }
        down[pos] = t.down_rate;
        up[pos] = t.up_rate;
    }
    let m = pairs.len();
    let mut specs = Vec::with_capacity(2 * m);
    for (a, &(i, j)) in pairs.iter().enumerate() {
        specs.push(ChannelSpec {
            operator: Operator::transition(n, i, j),
            rate: Schedule::Constant(down[a]),
            partner: a + m,
        });
    }
    for (a, &(i, j)) in pairs.iter().enumerate() {
        specs.push(ChannelSpec {
            operator: Operator::transition(n, j, i),
            rate: Schedule::Constant(up[a]),
            partner: a,
        });
    }
    LindbladModel::new(
        n,
        vec![HamiltonianTerm {
            schedule: Schedule::Constant(1.0),
            operator: Operator::real_diagonal(energies),
        }],
        specs,
    )
}

/// Expectation of a Hermitian operator, real part only.
pub(crate) fn real_expectation(op: &Operator, psi: &StateVector) -> Result<f64> {
    Ok(op.expectation(psi)?.re)
}
