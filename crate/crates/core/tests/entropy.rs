// Copyright 2026 The qtraj Authors
// SPDX-License-Identifier: Apache-2.0

use num_complex::Complex64;
use proptest::prelude::*;
use qtraj_core::entropy::{direct_rate, eta, ledger_with, reversed_rate, DriftMode};
use qtraj_core::hilbert::{Operator, StateVector};
use qtraj_core::ift::{simulate_pair, RunSpec};
use qtraj_core::model::{
    build_eigenstate_jump_model, build_two_level_direct, build_two_level_homodyne,
    build_two_level_thermal, LindbladModel, Transition, TwoLevelParams,
};
use qtraj_core::Simulator;

type M = Vec<Vec<Complex64>>;

fn entries(op: &Operator) -> M {
    (0..op.dim())
        .map(|r| (0..op.dim()).map(|c| op.entry(r, c)).collect())
        .collect()
}

fn mul(m: &M, v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn dagger(m: &M) -> M {
    (0..m.len())
        .map(|r| (0..m.len()).map(|c| m[c][r].conj()).collect())
        .collect()
}

fn nsq(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn atom(k: f64) -> TwoLevelParams {
    TwoLevelParams {
        omega0: 8e-3 * k,
        tau: 37.0,
        g1: 4.8e-3 * k,
        tau1: 77.0,
        g2: 8e-4 * k,
        tau2: 100.0,
    }
}

fn models() -> Vec<LindbladModel> {
    vec![
        build_two_level_direct(&atom(3.0)).unwrap(),
        build_two_level_homodyne(
            &atom(1.0),
            Complex64::from_polar(2.0, 0.6 * std::f64::consts::PI),
        )
        .unwrap(),
        build_two_level_thermal(8e-3, 37.0, 0.5, 4.8e-3).unwrap(),
    ]
}

fn state(v: &[(f64, f64)]) -> Option<StateVector> {
    let amps: Vec<Complex64> = v.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
    StateVector::new(amps).ok()?.normalize().ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rates_match_matrix_oracle(
        which in 0usize..3,
        raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2),
        t in 1.0f64..300.0,
    ) {
        let models = models();
        let model = &models[which];
        let Some(chi) = state(&raw) else { return Ok(()) };
        for (i, ch) in model.channels().iter().enumerate() {
            let a = entries(ch.operator());
            let ax = mul(&a, chi.amplitudes());
            let lam_x = mul(&dagger(&a), &ax);
            let n = nsq(&ax);
            if n < 1e-8 {
                continue;
            }
            let (g, gb) = (ch.rate(t), ch.backward_rate(t));
            let rd = direct_rate(ch, t, &chi).unwrap();
            prop_assert!((rd - g * n).abs() <= 1e-13 * (1.0 + g * n), "channel {}", i);
            let rr = reversed_rate(ch, t, &chi).unwrap();
            prop_assert!((rr - gb * nsq(&lam_x) / n).abs() <= 1e-12 * (1.0 + rr));
            let e = eta(ch, &chi).unwrap();
            prop_assert!((e - (n * n - nsq(&lam_x)) / (n * n)).abs() <= 1e-10);
            // Cauchy-Schwarz: <Lambda>^2 <= <Lambda^2>.
            prop_assert!(e <= 1e-12);
        }
    }
}

fn oracle_log_weight(
    model: &LindbladModel,
    fwd: &qtraj_core::TrajectoryRecord,
    bwd: &qtraj_core::TrajectoryRecord,
) -> f64 {
    fwd.jumps
        .iter()
        .zip(&bwd.jumps)
        .map(|(f, b)| {
            let a = entries(model.channels()[f.channel].operator());
            let ax = mul(&a, f.pre_state.amplitudes());
            let lam_x = mul(&dagger(&a), &ax);
            let back = mul(&dagger(&a), b.pre_state.amplitudes());
            (nsq(&lam_x) / nsq(&ax)).ln() - nsq(&back).ln()
        })
        .sum()
}

#[test]
fn weight_matches_record_oracle() {
    let mut checked = 0;
    for model in models() {
        let spec = RunSpec::new(60, 1.0, 400.0, 21);
        let sim = Simulator::new(&model, spec.dt, spec.horizon).unwrap();
        for i in 0..spec.n_trajectories as u64 {
            let Some(pair) = simulate_pair(&sim, &spec, i).unwrap() else {
                continue;
            };
            let oracle = oracle_log_weight(&model, &pair.forward, &pair.backward);
            assert!(
                (pair.log_weight - oracle).abs() <= 1e-10 * (1.0 + oracle.abs()),
                "{} vs {oracle}",
                pair.log_weight
            );
            checked += usize::from(!pair.forward.jumps.is_empty());
        }
    }
    assert!(checked > 20, "too few trajectories with jumps: {checked}");
}

#[test]
fn ledger_totals_are_sums_of_entries() {
    let model = build_two_level_direct(&atom(4.0)).unwrap();
    let spec = RunSpec::new(40, 1.0, 400.0, 8);
    let sim = Simulator::new(&model, spec.dt, spec.horizon).unwrap();
    for i in 0..40 {
        let Some(pair) = simulate_pair(&sim, &spec, i).unwrap() else {
            continue;
        };
        for mode in [DriftMode::BackwardWalk, DriftMode::Verbatim] {
            let l = ledger_with(&sim, &pair.forward, &pair.backward, mode).unwrap();
            assert_eq!(l.n_jumps(), pair.forward.jumps.len());
            assert_eq!(l.per_drift.len(), pair.forward.drifts.len());
            let jump: f64 = l.per_jump.iter().map(|e| e.flux()).sum();
            assert!((jump - l.jump_flux).abs() < 1e-12 * (1.0 + jump.abs()));
            let split: f64 = l.per_jump.iter().map(|e| e.thermal + e.nonthermal).sum();
            assert!((split - l.thermal_total() - l.nonthermal_jump_total()).abs() < 1e-10);
            for e in &l.per_jump {
                assert!(
                    (e.thermal + e.nonthermal + (e.r_direct / e.r_reversed).ln()).abs() < 1e-10
                );
                assert!(e.eta <= 1e-12);
            }
            let kappa: f64 = l.per_drift.iter().map(|d| d.kappa).sum();
            assert!((kappa - l.kappa_sum()).abs() < 1e-14 && l.kappa_sum() <= 1e-15);
        }
    }
}

#[test]
fn eigenstate_ledger_is_purely_thermal() {
    let transitions = [
        Transition {
            lower: 0,
            upper: 1,
            down_rate: 3e-3,
            up_rate: 1e-3,
        },
        Transition {
            lower: 1,
            upper: 2,
            down_rate: 2e-3,
            up_rate: 5e-4,
        },
    ];
    let model = build_eigenstate_jump_model(&[0.0, 1.0, 2.5], &transitions).unwrap();
    let spec = RunSpec {
        initial_state: qtraj_core::InitialState::Basis(2),
        ..RunSpec::new(50, 1.0, 500.0, 4)
    };
    let sim = Simulator::new(&model, spec.dt, spec.horizon).unwrap();
    let mut jumps = 0;
    for i in 0..50 {
        let pair = simulate_pair(&sim, &spec, i).unwrap().unwrap();
        let l = ledger_with(&sim, &pair.forward, &pair.backward, DriftMode::BackwardWalk).unwrap();
        let oracle: f64 = pair
            .forward
            .jumps
            .iter()
            .map(|j| {
                let ch = &model.channels()[j.channel];
                (ch.backward_rate(j.time) / ch.rate(j.time)).ln()
            })
            .sum();
        assert!((l.thermal_total() - oracle).abs() < 1e-12);
        assert!(l.nonthermal_jump_total().abs() < 1e-12);
        assert!(l.per_jump.iter().all(|e| e.eta.abs() < 1e-12));
        assert!(l.kappa_sum().abs() < 1e-12);
        assert!(pair.log_weight.abs() < 1e-12);
        jumps += l.n_jumps();
    }
    assert!(jumps > 10);
}
