// Copyright 2026 The qtraj Authors
// SPDX-License-Identifier: Apache-2.0

//! Master-equation integration and trajectory-ensemble comparison.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{check_dim, Operator, StateVector};
use crate::model::LindbladModel;
use crate::pdp::{TimeGrid, TrajectoryRecord};

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;
/// Allowed trace drift over a whole integration.
pub const TRACE_DRIFT_TOL: f64 = 1e-8;

/// A Hermitian, unit-trace, positive semidefinite operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        Self::with_tolerances(op, HERMITIAN_TOL, TRACE_TOL)
    }

    fn with_tolerances(op: Operator, herm_tol: f64, trace_tol: f64) -> Result<Self> {
        let deviation = op.hermitian_deviation();
        if deviation > herm_tol {
            return Err(Error::NonHermitian { deviation });
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
            return Err(Error::InvariantViolation(format!(
                "trace {tr} differs from 1"
            )));
        }
        let min = min_eigenvalue(&op);
        if min < -POSITIVITY_TOL {
            return Err(Error::InvariantViolation(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(Self(op))
    }

    pub fn from_pure(psi: &StateVector) -> Result<Self> {
        Self::new(psi.normalize()?.projector())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(Operator::identity(dim).scale_real(1.0 / dim as f64))
    }

    pub fn operator(&self) -> &Operator {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.0.entry(row, col)
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }
}

fn min_eigenvalue(op: &Operator) -> f64 {
    // Hermitize first so rounding noise does not leak into the spectrum
    let m = op.matrix();
    let h: DMatrix<Complex64> = (m + m.adjoint()).scale(0.5);
    h.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `1/2 * sum of singular values of (a - b)`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let diff = a.operator() - b.operator();
    Ok(0.5 * diff.matrix().singular_values().iter().sum::<f64>())
}

/// Classical RK4 on the master equation with step `dt` over `[0, horizon]`.
/// Returns the state at every grid point, `horizon / dt + 1` entries.
pub fn integrate_master_equation(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    dt: f64,
    horizon: f64,
) -> Result<Vec<DensityMatrix>> {
    check_dim(model.dim(), rho0.dim())?;
    let grid = TimeGrid::new(dt, horizon)?;
    let mut out = Vec::with_capacity(grid.n_steps + 1);
    let mut rho = rho0.operator().clone();
    out.push(rho0.clone());
    for j in 0..grid.n_steps {
        let t = grid.time(j);
        let k1 = model.lindblad_generator(t, &rho)?;
        let k2 = model.lindblad_generator(t + 0.5 * dt, &(&rho + &k1.scale_real(0.5 * dt)))?;
        let k3 = model.lindblad_generator(t + 0.5 * dt, &(&rho + &k2.scale_real(0.5 * dt)))?;
        let k4 = model.lindblad_generator(t + dt, &(&rho + &k3.scale_real(dt)))?;
        let incr =
            &(&(&k1 + &k2.scale_real(2.0)) + &(&k3.scale_real(2.0) + &k4)).scale_real(dt / 6.0);
        rho = &rho + incr;
        let state = DensityMatrix::with_tolerances(rho.clone(), HERMITIAN_TOL, TRACE_DRIFT_TOL)
            .map_err(|e| {
                Error::InvariantViolation(format!(
                    "master equation left the state space at t = {}: {e}",
                    grid.time(j + 1)
                ))
            })?;
        out.push(state);
    }
    Ok(out)
}

/// Running sum of snapshot projectors.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleAccumulator {
    dt: f64,
    horizon: f64,
    stride: usize,
    sums: Vec<DMatrix<Complex64>>,
    count: usize,
}

impl EnsembleAccumulator {
    pub fn new(dim: usize, dt: f64, horizon: f64, stride: usize) -> Result<Self> {
        let grid = TimeGrid::new(dt, horizon)?;
        if stride == 0 || grid.n_steps % stride != 0 {
            return Err(Error::param(
                "sample_stride",
                format!("must divide the {} grid steps", grid.n_steps),
            ));
        }
        Ok(Self {
            dt,
            horizon,
            stride,
            sums: vec![DMatrix::zeros(dim, dim); grid.n_steps / stride + 1],
            count: 0,
        })
    }

    pub fn add_snapshots(&mut self, snapshots: &[StateVector]) -> Result<()> {
        if snapshots.len() != self.sums.len() {
            return Err(Error::GridMismatch(format!(
                "{} snapshots, expected {}",
                snapshots.len(),
                self.sums.len()
            )));
        }
        for (sum, psi) in self.sums.iter_mut().zip(snapshots) {
            check_dim(sum.nrows(), psi.dim())?;
            let v = psi.as_vector();
            *sum += v * v.adjoint();
        }
        self.count += 1;
        Ok(())
    }

    pub fn add(&mut self, rec: &TrajectoryRecord) -> Result<()> {
        let same_grid = (rec.dt - self.dt).abs() <= 1e-12 * self.dt
            && (rec.horizon - self.horizon).abs() <= 1e-9 * self.horizon
            && rec.snapshot_stride == Some(self.stride);
        if !same_grid {
            return Err(Error::GridMismatch(format!(
                "trajectory (dt {}, T {}, stride {:?}) vs ensemble (dt {}, T {}, stride {})",
                rec.dt, rec.horizon, rec.snapshot_stride, self.dt, self.horizon, self.stride
            )));
        }
        self.add_snapshots(&rec.snapshots)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Sample times `0, stride*dt, ..., horizon`.
    pub fn times(&self) -> Vec<f64> {
        (0..self.sums.len())
            .map(|i| (i * self.stride) as f64 * self.dt)
            .collect()
    }

    pub fn average(&self) -> Result<Vec<DensityMatrix>> {
        if self.count == 0 {
            return Err(Error::param("trajectories", "ensemble is empty"));
        }
        let n = self.count as f64;
        self.sums
            .iter()
            .map(|s| DensityMatrix::new(Operator::from_matrix(s.unscale(n))?))
            .collect()
    }
}

/// Average of the snapshot projectors of `trajectories` at every sample time.
pub fn ensemble_average(trajectories: &[TrajectoryRecord]) -> Result<Vec<DensityMatrix>> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::param("trajectories", "ensemble is empty"))?;
    let stride = first
        .snapshot_stride
        .ok_or_else(|| Error::InvalidRecord("trajectory carries no snapshots".into()))?;
    let dim = first.initial_state.dim();
    let mut acc = EnsembleAccumulator::new(dim, first.dt, first.horizon, stride)?;
    for rec in trajectories {
        acc.add(rec)?;
    }
    acc.average()
}

/// Trace distance at each sample time between the ensemble and the master
/// equation solution sampled every `stride` grid steps.
pub fn compare_with_master_equation(
    ensemble: &[DensityMatrix],
    solution: &[DensityMatrix],
    stride: usize,
) -> Result<Vec<f64>> {
    if stride == 0 || (ensemble.len() - 1) * stride != solution.len() - 1 {
        return Err(Error::GridMismatch(format!(
            "{} ensemble samples at stride {stride} vs {} solution points",
            ensemble.len(),
            solution.len()
        )));
    }
    ensemble
        .iter()
        .enumerate()
        .map(|(i, rho)| trace_distance(rho, &solution[i * stride]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{c, EXCITED};
    use crate::model::{
        build_pure_decay, build_two_level_thermal, ChannelSpec, HamiltonianTerm, Schedule,
    };
    use crate::pdp::{trajectory_rng, RecordOptions, Simulator};
    use approx::assert_abs_diff_eq;

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::from_pure(&StateVector::excited()).is_ok());
        let bad_trace = Operator::identity(2);
        assert!(DensityMatrix::new(bad_trace).is_err());
        let non_psd = Operator::real_diagonal(&[1.5, -0.5]);
        assert!(DensityMatrix::new(non_psd).is_err());
        let non_herm =
            Operator::new(2, vec![c(0.5, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(0.5, 0.0)]).unwrap();
        assert!(matches!(
            DensityMatrix::new(non_herm),
            Err(Error::NonHermitian { .. })
        ));
    }

    #[test]
    fn trace_distance_examples() {
        let e = DensityMatrix::from_pure(&StateVector::excited()).unwrap();
        let g = DensityMatrix::from_pure(&StateVector::ground()).unwrap();
        assert_abs_diff_eq!(trace_distance(&e, &e).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(trace_distance(&e, &g).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            trace_distance(&e, &DensityMatrix::maximally_mixed(2)).unwrap(),
            0.5,
            epsilon = 1e-14
        );
        assert!(trace_distance(&e, &DensityMatrix::maximally_mixed(3)).is_err());
    }

    #[test]
    fn pure_decay_population() {
        let g = 0.03;
        let m = build_pure_decay(g).unwrap();
        let rho0 = DensityMatrix::from_pure(&StateVector::excited()).unwrap();
        let sol = integrate_master_equation(&m, &rho0, 0.5, 100.0).unwrap();
        for (j, rho) in sol.iter().enumerate() {
            let t = j as f64 * 0.5;
            assert!((rho.entry(EXCITED, EXCITED).re - (-g * t).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn unitary_evolution_preserves_purity() {
        let m = build_two_level_thermal(0.2, 10.0, 0.0, 0.0).unwrap();
        let psi = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let sol =
            integrate_master_equation(&m, &DensityMatrix::from_pure(&psi).unwrap(), 0.1, 50.0)
                .unwrap();
        for rho in &sol {
            assert!((rho.purity() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn maximally_mixed_is_stationary_under_symmetric_channels() {
        let sym = LindbladModel::new(
            2,
            vec![HamiltonianTerm {
                schedule: Schedule::Constant(0.3),
                operator: Operator::real_diagonal(&[0.5, -0.5]),
            }],
            vec![
                ChannelSpec {
                    operator: Operator::sigma_minus(),
                    rate: Schedule::Constant(0.05),
                    partner: 1,
                },
                ChannelSpec {
                    operator: Operator::sigma_plus(),
                    rate: Schedule::Constant(0.05),
                    partner: 0,
                },
            ],
        )
        .unwrap();
        let mixed = DensityMatrix::maximally_mixed(2);
        assert!(
            sym.lindblad_generator(0.0, mixed.operator())
                .unwrap()
                .norm_one()
                < 1e-15
        );
        let sol = integrate_master_equation(&sym, &mixed, 1.0, 100.0).unwrap();
        assert!(trace_distance(sol.last().unwrap(), &mixed).unwrap() < 1e-12);
    }

    #[test]
    fn ensemble_average_basics() {
        let m = build_pure_decay(0.02).unwrap();
        let sim = Simulator::new(&m, 1.0, 40.0).unwrap();
        let psi = StateVector::from_real(&[0.6, 0.8]).unwrap();
        let opts = RecordOptions {
            snapshot_stride: Some(4),
        };
        let rec = sim
            .forward(&psi, &mut trajectory_rng(1, 0), opts, 1, 0)
            .unwrap();
        let one = ensemble_average(std::slice::from_ref(&rec)).unwrap();
        assert_eq!(one.len(), 11);
        for rho in &one {
            assert!((rho.purity() - 1.0).abs() < 1e-12);
        }
        let two = ensemble_average(&[rec.clone(), rec.clone()]).unwrap();
        for (a, b) in one.iter().zip(&two) {
            assert!(trace_distance(a, b).unwrap() < 1e-15);
        }
        let other = Simulator::new(&m, 1.0, 20.0)
            .unwrap()
            .forward(&psi, &mut trajectory_rng(1, 1), opts, 1, 1)
            .unwrap();
        assert!(matches!(
            ensemble_average(&[rec, other]),
            Err(Error::GridMismatch(_))
        ));
        assert!(ensemble_average(&[]).is_err());
    }

    #[test]
    fn ensemble_converges_to_master_equation() {
        let g = 0.01;
        let m = build_pure_decay(g).unwrap();
        let sim = Simulator::new(&m, 1.0, 100.0).unwrap();
        let psi = StateVector::from_real(&[0.8, 0.6]).unwrap();
        let opts = RecordOptions {
            snapshot_stride: Some(10),
        };
        let recs: Vec<_> = (0..4000)
            .map(|i| {
                sim.forward(&psi, &mut trajectory_rng(17, i), opts, 17, i)
                    .unwrap()
            })
            .collect();
        let ens = ensemble_average(&recs).unwrap();
        let sol =
            integrate_master_equation(&m, &DensityMatrix::from_pure(&psi).unwrap(), 1.0, 100.0)
                .unwrap();
        let d = compare_with_master_equation(&ens, &sol, 10).unwrap();
        assert_eq!(d.len(), 11);
        assert!(d[0] < 1e-12);
        assert!(d.iter().all(|&x| x < 0.03), "{d:?}");
    }
}
