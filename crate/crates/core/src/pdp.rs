// Copyright 2026 The qtraj Authors
// SPDX-License-Identifier: Apache-2.0

//! Piecewise-deterministic trajectory engine.
//!
//! Time runs on a fixed measurement grid `t_j = j * dt`, `j = 0..n_steps`. In
//! each measurement interval either exactly one jump is detected (with
//! probability `gamma_i ||A_i psi||^2 dt`, rates taken at the interval
//! midpoint) or the state drifts by one midpoint factor of the effective
//! propagator and is renormalized. A jump occupies its whole interval and is
//! stamped with the interval midpoint, so drift segment `k` covers
//! `[t_start, t_end]` on the grid and jump `k` sits at `t_end + dt/2`.
//!
//! The backward trajectory is not sampled: it starts from the forward final
//! state, walks the same grid from `T` down to `0` applying the adjoint drift
//! factors, and applies `A_i^dagger` in every interval where the forward
//! trajectory jumped through channel `i`.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{check_dim, Operator, StateVector, ZERO_NORM_GUARD};
use crate::model::LindbladModel;

/// Upper bound on the total jump probability of a single measurement interval.
pub const WEAK_JUMP_LIMIT: f64 = 0.1;

/// Moduli below this are redrawn by [`sample_initial_state`].
const MIN_MODULUS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JumpEvent {
    /// Grid interval `[step*dt, (step+1)*dt]` in which the jump was detected.
    pub step: usize,
    pub time: f64,
    pub channel: usize,
    pub pre_state: StateVector,
    pub post_state: StateVector,
}

/// A maximal run of drift steps.
///
/// For forward records `entry_state` sits at `t_start` and `exit_state` at
/// `t_end`; backward records traverse the interval the other way, so
/// `entry_state` sits at `t_end` and `exit_state` at `t_start`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftSegment {
    pub first_step: usize,
    /// One past the last drift step.
    pub end_step: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub entry_state: StateVector,
    pub exit_state: StateVector,
    /// `ln ||U entry_state||^2` accumulated step by step.
    pub log_survival: f64,
}

impl DriftSegment {
    pub fn steps(&self) -> std::ops::Range<usize> {
        self.first_step..self.end_step
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub direction: Direction,
    pub initial_state: StateVector,
    pub final_state: StateVector,
    /// Chronological (ascending time) for both directions.
    pub jumps: Vec<JumpEvent>,
    /// Chronological; always `jumps.len() + 1` entries.
    pub drifts: Vec<DriftSegment>,
    pub dt: f64,
    pub horizon: f64,
    pub rng_seed: u64,
    pub rng_stream: u64,
    /// States at grid steps `0, stride, 2*stride, ...` (forward records only).
    #[serde(skip)]
    pub snapshots: Vec<StateVector>,
    #[serde(skip)]
    pub snapshot_stride: Option<usize>,
}

impl TrajectoryRecord {
    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Checks interleaving of jumps and drifts and the state chain.
    pub fn check_chaining(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidRecord(m));
        if self.drifts.len() != self.jumps.len() + 1 {
            return bad(format!(
                "{} jumps but {} drift segments",
                self.jumps.len(),
                self.drifts.len()
            ));
        }
        let n = self.n_steps();
        if self.drifts[0].first_step != 0 || self.drifts[self.jumps.len()].end_step != n {
            return bad("drift segments do not span the horizon".into());
        }
        for (k, jump) in self.jumps.iter().enumerate() {
            let before = &self.drifts[k];
            let after = &self.drifts[k + 1];
            if before.end_step != jump.step || after.first_step != jump.step + 1 {
                return bad(format!("jump {k} is not between its drift segments"));
            }
            if !(before.t_end < jump.time && jump.time < after.t_start) {
                return bad(format!("jump {k} time out of order"));
            }
            let (into_jump, out_of_jump) = match self.direction {
                Direction::Forward => (&before.exit_state, &after.entry_state),
                Direction::Backward => (&after.exit_state, &before.entry_state),
            };
            if into_jump != &jump.pre_state || out_of_jump != &jump.post_state {
                return bad(format!("state chain broken at jump {k}"));
            }
        }
        for d in &self.drifts {
            if d.end_step < d.first_step || d.log_survival > 1e-12 {
                return bad("malformed drift segment".into());
            }
        }
        let (first, last) = match self.direction {
            Direction::Forward => (
                &self.drifts[0].entry_state,
                &self.drifts[self.jumps.len()].exit_state,
            ),
            Direction::Backward => (
                &self.drifts[self.jumps.len()].entry_state,
                &self.drifts[0].exit_state,
            ),
        };
        if first != &self.initial_state || last != &self.final_state {
            return bad("end states do not match drift segments".into());
        }
        Ok(())
    }
}

/// Uniform grid `t_j = j * dt` over `[0, horizon]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, horizon: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", format!("must be > 0, got {dt}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::param(
                "horizon",
                format!("must be > 0, got {horizon}"),
            ));
        }
        let steps = horizon / dt;
        let n = steps.round();
        if n < 1.0 || (steps - n).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::param(
                "horizon",
                format!("horizon {horizon} is not an integer multiple of dt {dt}"),
            ));
        }
        Ok(Self {
            dt,
            n_steps: n as usize,
        })
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    pub fn midpoint(&self, step: usize) -> f64 {
        (step as f64 + 0.5) * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.n_steps)
    }
}

/// How the initial state of each trajectory is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    /// `|c_e|, |c_g|` uniform on `[0, 1]` with a uniform relative phase.
    RandomTwoLevel,
    Basis(usize),
    Fixed(StateVector),
}

impl InitialState {
    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Result<StateVector> {
        match self {
            InitialState::RandomTwoLevel => {
                check_dim(2, dim)?;
                Ok(sample_initial_state(rng))
            }
            InitialState::Basis(i) => StateVector::basis(dim, *i),
            InitialState::Fixed(psi) => {
                check_dim(dim, psi.dim())?;
                psi.normalize()
            }
        }
    }
}

/// Two-level initial state with uniformly drawn moduli and relative phase.
///
/// The resulting ensemble is not uniform on the Bloch sphere.
pub fn sample_initial_state<R: Rng + ?Sized>(rng: &mut R) -> StateVector {
    loop {
        let mod_e: f64 = rng.random();
        let mod_g: f64 = rng.random();
        let phase = std::f64::consts::TAU * rng.random::<f64>();
        if mod_e < MIN_MODULUS && mod_g < MIN_MODULUS {
            continue;
        }
        let psi = StateVector::new(vec![
            Complex64::from_polar(mod_e, phase),
            Complex64::new(mod_g, 0.0),
        ])
        .expect("two finite amplitudes");
        return psi.normalize().expect("norm bounded away from zero");
    }
}

/// Per-trajectory RNG: stream `index` of a ChaCha8 generator keyed by `master_seed`.
pub fn trajectory_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Drift factors and midpoint rates tabulated on the grid; shared by all
/// trajectories of one model.
#[derive(Clone, Debug)]
pub struct PropagatorTable {
    grid: TimeGrid,
    forward: Vec<Operator>,
    backward: Vec<Operator>,
    /// `rates[step * n_channels + i]`
    rates: Vec<f64>,
    n_channels: usize,
}

impl PropagatorTable {
    pub fn new(model: &LindbladModel, grid: TimeGrid) -> Self {
        let n_channels = model.channels().len();
        let mut forward = Vec::with_capacity(grid.n_steps);
        let mut backward = Vec::with_capacity(grid.n_steps);
        let mut rates = Vec::with_capacity(grid.n_steps * n_channels);
        for j in 0..grid.n_steps {
            let u = model.step_propagator(grid.time(j), grid.dt);
            backward.push(u.adjoint());
            forward.push(u);
            let tm = grid.midpoint(j);
            rates.extend(model.channels().iter().map(|ch| ch.rate(tm)));
        }
        Self {
            grid,
            forward,
            backward,
            rates,
            n_channels,
        }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn forward_factor(&self, step: usize) -> &Operator {
        &self.forward[step]
    }

    pub fn backward_factor(&self, step: usize) -> &Operator {
        &self.backward[step]
    }

    pub fn rate(&self, step: usize, channel: usize) -> f64 {
        self.rates[step * self.n_channels + channel]
    }
}

/// Options for recording a forward trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RecordOptions {
    /// Keep the state at every `stride`-th grid point.
    pub snapshot_stride: Option<usize>,
}

/// Forward sampler and backward constructor bound to one model and grid.
#[derive(Clone, Debug)]
pub struct Simulator<'m> {
    model: &'m LindbladModel,
    table: PropagatorTable,
}

impl<'m> Simulator<'m> {
    pub fn new(model: &'m LindbladModel, dt: f64, horizon: f64) -> Result<Self> {
        let grid = TimeGrid::new(dt, horizon)?;
        Ok(Self {
            model,
            table: PropagatorTable::new(model, grid),
        })
    }

    pub fn model(&self) -> &'m LindbladModel {
        self.model
    }

    pub fn table(&self) -> &PropagatorTable {
        &self.table
    }

    pub fn grid(&self) -> TimeGrid {
        self.table.grid
    }

    /// Samples one forward trajectory. `rng_seed`/`rng_stream` are stored in
    /// the record for provenance only.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        psi0: &StateVector,
        rng: &mut R,
        opts: RecordOptions,
        rng_seed: u64,
        rng_stream: u64,
    ) -> Result<TrajectoryRecord> {
        let dim = self.model.dim();
        check_dim(dim, psi0.dim())?;
        if !psi0.is_normalized(1e-10) {
            return Err(Error::param("psi0", "initial state must be normalized"));
        }
        if opts.snapshot_stride == Some(0) {
            return Err(Error::param("snapshot_stride", "must be >= 1"));
        }
        let grid = self.grid();
        let channels = self.model.channels();
        let mut psi = psi0.as_vector().clone();
        let mut buf = DVector::<Complex64>::zeros(dim);
        let mut probs = vec![0.0; channels.len()];
        let mut jumps = Vec::new();
        let mut drifts = Vec::new();
        let mut snapshots = Vec::new();
        let mut seg_first = 0usize;
        let mut seg_entry = psi0.clone();
        let mut seg_log = 0.0;
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);

        for j in 0..grid.n_steps {
            if let Some(s) = opts.snapshot_stride {
                if j % s == 0 {
                    snapshots.push(StateVector::from_vector(psi.clone()));
                }
            }
            let mut total = 0.0;
            for (i, ch) in channels.iter().enumerate() {
                let rate = self.table.rate(j, i);
                probs[i] = if rate == 0.0 {
                    0.0
                } else {
                    buf.gemv(one, ch.operator().matrix(), &psi, zero);
                    rate * buf.norm_squared() * grid.dt
                };
                total += probs[i];
            }
            if total >= WEAK_JUMP_LIMIT {
                return Err(Error::StepTooLarge {
                    step: j,
                    time: grid.time(j),
                    dt: grid.dt,
                    total_probability: total,
                    limit: WEAK_JUMP_LIMIT,
                });
            }
            let r: f64 = rng.random();
            if r < total {
                let mut cum = 0.0;
                let mut chosen = channels.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    cum += p;
                    if r < cum {
                        chosen = i;
                        break;
                    }
                }
                let pre = StateVector::from_vector(psi.clone());
                let post = channels[chosen].operator().apply(&pre)?.normalize()?;
                drifts.push(DriftSegment {
                    first_step: seg_first,
                    end_step: j,
                    t_start: grid.time(seg_first),
                    t_end: grid.time(j),
                    entry_state: seg_entry,
                    exit_state: pre.clone(),
                    log_survival: seg_log,
                });
                jumps.push(JumpEvent {
                    step: j,
                    time: grid.midpoint(j),
                    channel: chosen,
                    pre_state: pre,
                    post_state: post.clone(),
                });
                psi.copy_from(post.as_vector());
                seg_first = j + 1;
                seg_entry = post;
                seg_log = 0.0;
            } else {
                buf.gemv(one, self.table.forward_factor(j).matrix(), &psi, zero);
                let n = buf.norm_squared();
                if !(n > ZERO_NORM_GUARD) {
                    return Err(Error::NearZeroNorm { norm_sq: n });
                }
                seg_log += n.ln();
                psi.copy_from(&buf);
                psi.unscale_mut(n.sqrt());
            }
        }
        if let Some(s) = opts.snapshot_stride {
            if grid.n_steps.is_multiple_of(s) {
                snapshots.push(StateVector::from_vector(psi.clone()));
            }
        }
        let final_state = StateVector::from_vector(psi);
        drifts.push(DriftSegment {
            first_step: seg_first,
            end_step: grid.n_steps,
            t_start: grid.time(seg_first),
            t_end: grid.horizon(),
            entry_state: seg_entry,
            exit_state: final_state.clone(),
            log_survival: seg_log,
        });
        Ok(TrajectoryRecord {
            direction: Direction::Forward,
            initial_state: psi0.clone(),
            final_state,
            jumps,
            drifts,
            dt: grid.dt,
            horizon: grid.horizon(),
            rng_seed,
            rng_stream,
            snapshots,
            snapshot_stride: opts.snapshot_stride,
        })
    }

    /// Deterministic backward partner of a forward record.
    pub fn backward(&self, fwd: &TrajectoryRecord) -> Result<TrajectoryRecord> {
        if fwd.direction != Direction::Forward {
            return Err(Error::InvalidRecord("expected a forward record".into()));
        }
        let grid = self.grid();
        if fwd.n_steps() != grid.n_steps || (fwd.dt - grid.dt).abs() > 1e-12 * grid.dt {
            return Err(Error::GridMismatch(format!(
                "record has {} steps of {}, simulator {} steps of {}",
                fwd.n_steps(),
                fwd.dt,
                grid.n_steps,
                grid.dt
            )));
        }
        let channels = self.model.channels();
        let dim = self.model.dim();
        check_dim(dim, fwd.final_state.dim())?;
        let mut psi = fwd.final_state.as_vector().clone();
        let mut buf = DVector::<Complex64>::zeros(dim);
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);

        let mut jumps_rev = Vec::with_capacity(fwd.jumps.len());
        let mut drifts_rev = Vec::with_capacity(fwd.drifts.len());
        let mut pending = fwd.jumps.iter().rev().peekable();
        let mut seg_end = grid.n_steps;
        let mut seg_entry = fwd.final_state.clone();
        let mut seg_log = 0.0;

        for j in (0..grid.n_steps).rev() {
            match pending.peek() {
                Some(jump) if jump.step == j => {
                    let ch = channels.get(jump.channel).ok_or_else(|| {
                        Error::InvalidRecord(format!("unknown channel {}", jump.channel))
                    })?;
                    let pre = StateVector::from_vector(psi.clone());
                    let post = ch.adjoint_operator().apply(&pre)?.normalize()?;
                    drifts_rev.push(DriftSegment {
                        first_step: j + 1,
                        end_step: seg_end,
                        t_start: grid.time(j + 1),
                        t_end: grid.time(seg_end),
                        entry_state: seg_entry,
                        exit_state: pre.clone(),
                        log_survival: seg_log,
                    });
                    jumps_rev.push(JumpEvent {
                        step: j,
                        time: jump.time,
                        channel: jump.channel,
                        pre_state: pre,
                        post_state: post.clone(),
                    });
                    psi.copy_from(post.as_vector());
                    seg_end = j;
                    seg_entry = post;
                    seg_log = 0.0;
                    pending.next();
                }
                _ => {
                    buf.gemv(one, self.table.backward_factor(j).matrix(), &psi, zero);
                    let n = buf.norm_squared();
                    if !(n > ZERO_NORM_GUARD) {
                        return Err(Error::NearZeroNorm { norm_sq: n });
                    }
                    seg_log += n.ln();
                    psi.copy_from(&buf);
                    psi.unscale_mut(n.sqrt());
                }
            }
        }
        if pending.next().is_some() {
            return Err(Error::InvalidRecord("jump steps outside the grid".into()));
        }
        let final_state = StateVector::from_vector(psi);
        drifts_rev.push(DriftSegment {
            first_step: 0,
            end_step: seg_end,
            t_start: 0.0,
            t_end: grid.time(seg_end),
            entry_state: seg_entry,
            exit_state: final_state.clone(),
            log_survival: seg_log,
        });
        jumps_rev.reverse();
        drifts_rev.reverse();
        Ok(TrajectoryRecord {
            direction: Direction::Backward,
            initial_state: fwd.final_state.clone(),
            final_state,
            jumps: jumps_rev,
            drifts: drifts_rev,
            dt: fwd.dt,
            horizon: fwd.horizon,
            rng_seed: fwd.rng_seed,
            rng_stream: fwd.rng_stream,
            snapshots: Vec::new(),
            snapshot_stride: None,
        })
    }
}

/// One-shot forward simulation (builds the propagator table for this call).
pub fn forward_simulate<R: Rng + ?Sized>(
    model: &LindbladModel,
    psi0: &StateVector,
    dt: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    Simulator::new(model, dt, horizon)?.forward(psi0, rng, RecordOptions::default(), 0, 0)
}

/// One-shot backward construction.
pub fn backward_construct(
    model: &LindbladModel,
    fwd: &TrajectoryRecord,
) -> Result<TrajectoryRecord> {
    Simulator::new(model, fwd.dt, fwd.horizon)?.backward(fwd)
}
