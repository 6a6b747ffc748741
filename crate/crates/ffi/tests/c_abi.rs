// Copyright 2026 The qtraj Authors
// SPDX-License-Identifier: Apache-2.0

use std::ffi::{CStr, CString};
use std::ptr;

use qtraj_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(qt_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn atom() -> QtTwoLevelParams {
    QtTwoLevelParams {
        omega0: 4e-3,
        tau: 370.0,
        g1: 2.4e-3,
        tau1: 770.0,
        g2: 4e-4,
        tau2: 1000.0,
    }
}

fn direct_model() -> *mut QtModel {
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { qt_model_two_level_direct(&atom(), &mut m) },
        QtStatus::Ok
    );
    assert!(!m.is_null());
    m
}

fn spec(n: usize, seed: u64) -> QtRunSpec {
    let mut s = unsafe { std::mem::zeroed() };
    assert_eq!(
        unsafe { qt_run_spec_default(n, 1.0, 300.0, seed, &mut s) },
        QtStatus::Ok
    );
    s
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(qt_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_handles() {
    let m = direct_model();
    unsafe {
        assert_eq!(qt_model_dim(m), 2);
        assert_eq!(qt_model_n_channels(m), 2);
        assert_eq!(qt_model_dim(ptr::null()), 0);
        qt_model_free(m);
        qt_model_free(ptr::null_mut());
    }
}

#[test]
fn null_and_invalid_arguments_report_status_and_message() {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(
            qt_model_two_level_direct(ptr::null(), &mut m),
            QtStatus::NullPointer
        );
        assert!(last_error().contains("params"));
        let mut bad = atom();
        bad.tau = -1.0;
        assert_eq!(
            qt_model_two_level_direct(&bad, &mut m),
            QtStatus::InvalidArgument
        );
        assert!(last_error().contains("tau"), "{}", last_error());
        assert!(m.is_null());
        assert_eq!(
            qt_model_two_level_thermal(1e-3, 100.0, -0.5, 1e-3, &mut m),
            QtStatus::InvalidArgument
        );
        let ok = direct_model();
        assert_eq!(last_error(), "");
        let mut e = QtEstimate::default();
        assert_eq!(qt_estimate(ok, ptr::null(), &mut e), QtStatus::NullPointer);
        qt_model_free(ok);
    }
}

#[test]
fn oversized_step_is_reported() {
    let mut m = ptr::null_mut();
    let p = QtTwoLevelParams { g1: 10.0, ..atom() };
    unsafe {
        assert_eq!(qt_model_two_level_direct(&p, &mut m), QtStatus::Ok);
        let mut e = QtEstimate::default();
        assert_eq!(qt_estimate(m, &spec(4, 1), &mut e), QtStatus::StepTooLarge);
        assert!(last_error().contains("step"));
        qt_model_free(m);
    }
}

#[test]
fn estimate_matches_core_and_trajectory_weights() {
    let m = direct_model();
    let s = spec(64, 9);
    let mut e = QtEstimate::default();
    unsafe {
        assert_eq!(qt_estimate(m, &s, &mut e), QtStatus::Ok);
        let core_model =
            qtraj_core::model::build_two_level_direct(&qtraj_core::model::TwoLevelParams {
                omega0: 4e-3,
                tau: 370.0,
                g1: 2.4e-3,
                tau1: 770.0,
                g2: 4e-4,
                tau2: 1000.0,
            })
            .unwrap();
        let core =
            qtraj_core::ift::estimate(&core_model, &qtraj_core::RunSpec::new(64, 1.0, 300.0, 9))
                .unwrap();
        assert_eq!(e.mean, core.mean);
        assert_eq!(e.std_error, core.std_error);
        assert_eq!(e.n_trajectories + e.n_discarded, 64);

        let mut total = 0.0;
        for i in 0..64 {
            let mut t = ptr::null_mut();
            match qt_trajectory_simulate(m, &s, i, &mut t) {
                QtStatus::Ok => {
                    total += qt_trajectory_log_weight(t).exp();
                    qt_trajectory_free(t);
                }
                QtStatus::Discarded => assert!(t.is_null()),
                other => panic!("{other:?}: {}", last_error()),
            }
        }
        assert!((total / e.n_trajectories as f64 - e.mean).abs() <= 1e-12 * e.mean);
        qt_model_free(m);
    }
}

#[test]
fn trajectory_accessors() {
    let m = direct_model();
    let s = spec(1, 3);
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(qt_trajectory_simulate(m, &s, 0, &mut t), QtStatus::Ok);
        let mut buf = [0.0; 4];
        assert_eq!(
            qt_trajectory_final_state(t, buf.as_mut_ptr(), 4),
            QtStatus::Ok
        );
        let norm: f64 = buf.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-10);
        assert_eq!(
            qt_trajectory_final_state(t, buf.as_mut_ptr(), 3),
            QtStatus::DimensionMismatch
        );

        let n = qt_trajectory_n_jumps(t);
        let mut ledger = QtLedger::default();
        assert_eq!(qt_trajectory_ledger(t, &mut ledger), QtStatus::Ok);
        assert_eq!(ledger.n_jumps, n);
        let mut j = QtJump::default();
        for i in 0..n {
            assert_eq!(qt_trajectory_jump(t, i, &mut j), QtStatus::Ok);
            assert!(j.channel < 2 && j.time > 0.0 && j.time < 300.0);
        }
        assert_eq!(qt_trajectory_jump(t, n, &mut j), QtStatus::InvalidArgument);

        let mut json = ptr::null_mut();
        assert_eq!(qt_trajectory_to_json(t, &mut json), QtStatus::Ok);
        let doc: serde_json::Value =
            serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(
            doc["log_weight"].as_f64().unwrap(),
            qt_trajectory_log_weight(t)
        );
        qt_string_free(json);
        qt_trajectory_free(t);
        qt_model_free(m);
    }
}

#[test]
fn eigenstate_model_has_unit_weights() {
    let energies = [0.0, 1e-3, 2.6e-3];
    let transitions = [
        QtTransition {
            lower: 0,
            upper: 1,
            down_rate: 1.2e-3,
            up_rate: 4e-4,
        },
        QtTransition {
            lower: 1,
            upper: 2,
            down_rate: 9e-4,
            up_rate: 3e-4,
        },
    ];
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(
            qt_model_eigenstate_jump(energies.as_ptr(), 3, transitions.as_ptr(), 2, &mut m),
            QtStatus::Ok
        );
        assert_eq!(qt_model_dim(m), 3);
        let mut s = spec(100, 2);
        s.initial_basis = 2;
        let mut e = QtEstimate::default();
        assert_eq!(qt_estimate(m, &s, &mut e), QtStatus::Ok);
        assert!((e.mean - 1.0).abs() < 1e-12 && e.zeta.abs() < 1e-12);
        s.initial_basis = 5;
        assert_eq!(qt_estimate(m, &s, &mut e), QtStatus::InvalidArgument);
        qt_model_free(m);
    }
}

#[test]
fn model_from_config_uses_sweep_point() {
    let json = CString::new(
        r#"{"schema_version": 1, "name": "t",
            "model": {"kind": "two_level_thermal", "omega0_dt": 8e-4, "dt_over_tau": 2.7e-3,
                      "mean_photon_number": 0.2, "rate_scale_dt": 4.8e-4},
            "run": {"n_trajectories": 10, "dt_over_t": 0.01, "master_seed": 5},
            "sweep": {"coordinate": "mean_photon_number", "values": [0.2, 1.0]}}"#,
    )
    .unwrap();
    unsafe {
        let mut m = ptr::null_mut();
        let mut s = spec(1, 0);
        assert_eq!(
            qt_model_from_config(json.as_ptr(), 1, &mut m, &mut s),
            QtStatus::Ok
        );
        assert_eq!(s.n_trajectories, 10);
        assert_eq!(s.horizon, 100.0);
        assert_eq!(s.master_seed, qtraj_core::ift::point_seed(5, 1));
        qt_model_free(m);
        assert_eq!(
            qt_model_from_config(json.as_ptr(), 2, &mut m, ptr::null_mut()),
            QtStatus::InvalidArgument
        );
        let bad = CString::new("{").unwrap();
        assert_eq!(
            qt_model_from_config(bad.as_ptr(), 0, &mut m, ptr::null_mut()),
            QtStatus::InvalidArgument
        );
        assert!(last_error().contains("line"));
    }
}

#[test]
fn errors_are_thread_local() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(
            qt_model_two_level_direct(ptr::null(), &mut m),
            QtStatus::NullPointer
        );
    }
    let other = std::thread::spawn(last_error).join().unwrap();
    assert_eq!(other, "");
    assert!(!last_error().is_empty());
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/qtraj.h");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"qtraj.h\"\nint main(void) {\n  QtRunSpec s;\n  QtModel *m = 0;\n  \
         QtStatus st = qt_run_spec_default(10, 1.0, 100.0, 1, &s);\n  \
         (void)m; return st == QT_STATUS_OK ? 0 : 1;\n}\n",
    )
    .unwrap();
    let Ok(out) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(std::path::Path::new(header).parent().unwrap())
        .arg(&src)
        .output()
    else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
