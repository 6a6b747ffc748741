// Copyright 2026 The qtraj Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qtraj_core::config::{ExperimentConfig, ModelConfig, SweepCoordinateKind};

fn recipe(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../recipes")
        .join(name)
}

fn qtraj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtraj"))
        .args(args)
        .env_remove("QTRAJ_SEED")
        .env_remove("QTRAJ_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(format!("{name}.json"));
    std::fs::write(&p, body).unwrap();
    p
}

const SMALL_SWEEP: &str = r#"{
  "schema_version": 1,
  "name": "small",
  "model": {"kind": "two_level_direct", "omega0_dt": 8e-3, "g1_dt": 4.8e-3, "g2_dt": 8e-4,
            "dt_over_tau": 2.7e-2, "dt_over_tau1": 1.3e-2, "dt_over_tau2": 1e-2},
  "run": {"n_trajectories": 200, "dt_over_t": 0.005, "master_seed": 7},
  "sweep": {"coordinate": "k", "values": [1, 2, 3]}
}"#;

#[test]
fn shipped_recipes_match_their_figures() {
    let fig3 = ExperimentConfig::load(&recipe("fig3.json")).unwrap();
    let s = fig3.sweep.as_ref().unwrap();
    assert_eq!(s.coordinate, SweepCoordinateKind::K);
    assert_eq!(s.values, (1..=10).map(f64::from).collect::<Vec<_>>());
    assert_eq!(fig3.horizon(), 1250.0);
    assert_eq!(fig3.run.n_trajectories, 10_000);

    let fig4 = ExperimentConfig::load(&recipe("fig4.json")).unwrap();
    assert_eq!(
        fig4.sweep.as_ref().unwrap().coordinate,
        SweepCoordinateKind::BetaModulus
    );
    assert_eq!(fig4.sweep.as_ref().unwrap().values.len(), 10);
    match fig4.model {
        ModelConfig::TwoLevelHomodyne {
            beta_phase_over_pi, ..
        } => assert_eq!(beta_phase_over_pi, 0.6),
        ref other => panic!("{other:?}"),
    }

    let fig5 = ExperimentConfig::load(&recipe("fig5.json")).unwrap();
    let s = fig5.sweep.as_ref().unwrap();
    assert_eq!(s.coordinate, SweepCoordinateKind::MeanPhotonNumber);
    assert_eq!(s.values.len(), 8);
    for (k, v) in s.values.iter().enumerate() {
        assert!((v - (0.2 + 0.3 * k as f64)).abs() < 1e-12);
    }
    assert_eq!(fig5.run.n_trajectories, 30_000);

    for name in ["eigenstate3.json", "minimal.json"] {
        let cfg = ExperimentConfig::load(&recipe(name)).unwrap();
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}

#[test]
fn minimal_recipe_has_unit_mean() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = qtraj(&[
        "simulate",
        recipe("minimal.json").to_str().unwrap(),
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut r = csv::Reader::from_path(dir.path().join("minimal_summary.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 1.0);
    assert_eq!(&rows[0][5], "1");
    let ledger = std::fs::read_to_string(dir.path().join("minimal_ledger.csv")).unwrap();
    assert!(ledger.starts_with("traj_id,N_jumps,jump_flux,drift_flux,thermal_total,nonthermal_jump_total,kappa_sum,weight_W\n"));
    assert_eq!(ledger.lines().count(), 2);
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("minimal_summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["config"]["name"], "minimal");
    assert!(summary["audit"].as_object().unwrap().len() > 1);
}

#[test]
fn sweep_is_deterministic_and_writes_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small", SMALL_SWEEP);
    let mut csvs = Vec::new();
    for (run, threads) in [("a", "1"), ("b", "3")] {
        let out = dir.path().join(run);
        let o = qtraj(&[
            "sweep",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(stdout(&o).lines().count(), 3);
        csvs.push(std::fs::read(out.join("small_summary.csv")).unwrap());
        let dat = std::fs::read_to_string(out.join("small.dat")).unwrap();
        assert_eq!(dat.lines().next(), Some("# x mean std_error"));
        assert_eq!(dat.lines().count(), 4);
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs[0].clone()).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("k,1.0000000000000000e0,"));

    // simulate over the same sweep produces the same summary plus ledgers.
    let out = dir.path().join("c");
    let o = qtraj(&[
        "simulate",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(out.join("small_summary.csv")).unwrap(),
        csvs[0]
    );
    for i in 0..3 {
        let ledger = std::fs::read_to_string(out.join(format!("small_ledger_{i}.csv"))).unwrap();
        assert_eq!(ledger.lines().count(), 201);
    }
}

#[test]
fn seed_and_output_come_from_flags_or_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small", SMALL_SWEEP);
    let env_out = dir.path().join("env");
    let o = Command::new(env!("CARGO_BIN_EXE_qtraj"))
        .args(["sweep", cfg.to_str().unwrap()])
        .env("QTRAJ_OUT", &env_out)
        .env("QTRAJ_SEED", "8")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let flag_out = dir.path().join("flag");
    let o = qtraj(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--seed",
        "8",
        "--out",
        flag_out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let seven = dir.path().join("seven");
    let o = qtraj(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--out",
        seven.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let env_csv = std::fs::read(env_out.join("small_summary.csv")).unwrap();
    assert_eq!(
        env_csv,
        std::fs::read(flag_out.join("small_summary.csv")).unwrap()
    );
    assert_ne!(
        env_csv,
        std::fs::read(seven.join("small_summary.csv")).unwrap()
    );
}

#[test]
fn dump_writes_one_line_per_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL_SWEEP.replace("\"n_trajectories\": 200", "\"n_trajectories\": 5");
    let cfg = write_config(dir.path(), "small", &body);
    let o = qtraj(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--dump-trajectories",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dump = std::fs::read_to_string(dir.path().join("small_trajectories.jsonl")).unwrap();
    assert_eq!(dump.lines().count(), 15);
    let first: serde_json::Value = serde_json::from_str(dump.lines().next().unwrap()).unwrap();
    assert_eq!(first["forward"]["direction"], "forward");
    assert_eq!(first["backward"]["direction"], "backward");
    assert!(dir.path().join("small.dat").exists());
}

#[test]
fn config_errors_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        "bad",
        "{\n  \"schema_version\": 1,\n  \"nme\": 3\n}",
    );
    let o = qtraj(&["simulate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let empty = write_config(dir.path(), "empty", &SMALL_SWEEP.replace("[1, 2, 3]", "[]"));
    let o = qtraj(&["sweep", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sweep.values"), "{}", stderr(&o));

    let o = qtraj(&[
        "sweep",
        recipe("minimal.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = qtraj(&[
        "simulate",
        dir.path().join("missing.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = qtraj(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn oversized_step_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL_SWEEP
        .replace("\"g1_dt\": 4.8e-3", "\"g1_dt\": 0.5")
        .replace(
            ",\n  \"sweep\": {\"coordinate\": \"k\", \"values\": [1, 2, 3]}",
            "",
        );
    let cfg = write_config(dir.path(), "big", &body);
    let o = qtraj(&[
        "simulate",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("step 0"), "{}", stderr(&o));

    // Inside a sweep the failing point is recorded and the others still run.
    let body = SMALL_SWEEP.replace("[1, 2, 3]", "[1, 200, 2]");
    let cfg = write_config(dir.path(), "mixed", &body);
    let o = qtraj(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let mut r = csv::Reader::from_path(dir.path().join("small_summary.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1][9].contains("step too large"));
    assert!(rows[0][9].is_empty() && rows[2][9].is_empty());
}

#[test]
fn validate_reports_each_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = qtraj(&[
        "validate",
        recipe("eigenstate3.json").to_str().unwrap(),
        "--out",
        out,
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert_eq!(
        text.lines().filter(|l| l.starts_with("PASS ")).count(),
        4,
        "{text}"
    );
    assert!(text.contains("zeta = 0.000e0"));
    let report = std::fs::read_to_string(dir.path().join("eigenstate3_validation.csv")).unwrap();
    assert!(report.starts_with("t,trace_distance\n"));

    let strict = std::fs::read_to_string(recipe("eigenstate3.json"))
        .unwrap()
        .replace("\"outputs\"", "\"validate\": {\"trace_distance_threshold\": 1e-6, \"n_trajectories\": 50},\n  \"outputs\"");
    let cfg = write_config(dir.path(), "strict", &strict);
    let o = qtraj(&["validate", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("FAIL ensemble vs master equation"));
}
