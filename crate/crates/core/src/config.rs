// Copyright 2026 The qtraj Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration files (JSON).
//!
//! Physical parameters are stored as dimensionless products with the
//! measurement step `dt`, e.g. `omega0_dt = omega0 * dt` and
//! `dt_over_tau = dt / tau`. `run.dt` fixes the internal time unit and
//! defaults to 1.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::entropy::DriftMode;
use crate::error::{Error, Result};
use crate::hilbert::StateVector;
use crate::ift::RunSpec;
use crate::model::{
    build_eigenstate_jump_model, build_two_level_direct, build_two_level_homodyne,
    build_two_level_thermal, LindbladModel, Transition, TwoLevelParams,
};
use crate::pdp::InitialState;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub model: ModelConfig,
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrivenAtom {
    pub omega0_dt: f64,
    pub g1_dt: f64,
    pub g2_dt: f64,
    pub dt_over_tau: f64,
    pub dt_over_tau1: f64,
    pub dt_over_tau2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionConfig {
    pub lower: usize,
    pub upper: usize,
    pub down_rate_dt: f64,
    pub up_rate_dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    TwoLevelDirect {
        #[serde(flatten)]
        atom: DrivenAtom,
    },
    TwoLevelHomodyne {
        #[serde(flatten)]
        atom: DrivenAtom,
        beta_modulus: f64,
        /// Phase of beta in units of pi.
        beta_phase_over_pi: f64,
    },
    TwoLevelThermal {
        omega0_dt: f64,
        dt_over_tau: f64,
        mean_photon_number: f64,
        /// `c * dt` in `gamma_1 = c (<N> + 1)`, `gamma_2 = c <N>`.
        rate_scale_dt: f64,
    },
    EigenstateJump {
        energies_dt: Vec<f64>,
        transitions: Vec<TransitionConfig>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStateConfig {
    RandomTwoLevel,
    Basis { index: usize },
    Fixed { amplitudes: Vec<[f64; 2]> },
}

fn default_dt() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n_trajectories: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// `dt / T`.
    pub dt_over_t: f64,
    pub master_seed: u64,
    #[serde(default = "default_initial")]
    pub initial_state: InitialStateConfig,
    #[serde(default)]
    pub drift_mode: DriftMode,
}

fn default_initial() -> InitialStateConfig {
    InitialStateConfig::RandomTwoLevel
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepCoordinateKind {
    /// Multiplies `omega0_dt`, `g1_dt` and `g2_dt` of a direct model.
    K,
    BetaModulus,
    MeanPhotonNumber,
}

impl SweepCoordinateKind {
    pub fn label(self) -> &'static str {
        match self {
            SweepCoordinateKind::K => "k",
            SweepCoordinateKind::BetaModulus => "beta_modulus",
            SweepCoordinateKind::MeanPhotonNumber => "mean_photon_number",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub coordinate: SweepCoordinateKind,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub dump_trajectories: bool,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            dump_trajectories: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default = "default_threshold")]
    pub trace_distance_threshold: f64,
    /// Trajectories for the ensemble comparison; `run.n_trajectories` if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_trajectories: Option<usize>,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
}

fn default_threshold() -> f64 {
    0.05
}

fn default_stride() -> usize {
    25
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            trace_distance_threshold: default_threshold(),
            n_trajectories: None,
            sample_stride: default_stride(),
        }
    }
}

/// Converts a `serde_json` error into a config diagnostic with its position.
fn parse_error(e: serde_json::Error) -> Error {
    Error::param(
        "config",
        format!("line {}, column {}: {e}", e.line(), e.column()),
    )
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::param(name, format!("must be > 0, got {v}")))
    }
}

impl DrivenAtom {
    fn params(&self, dt: f64, k: f64) -> Result<TwoLevelParams> {
        Ok(TwoLevelParams {
            omega0: k * self.omega0_dt / dt,
            tau: dt / positive("model.dt_over_tau", self.dt_over_tau)?,
            g1: k * self.g1_dt / dt,
            tau1: dt / positive("model.dt_over_tau1", self.dt_over_tau1)?,
            g2: k * self.g2_dt / dt,
            tau2: dt / positive("model.dt_over_tau2", self.dt_over_tau2)?,
        })
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(parse_error)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::param("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn check(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::param(
                "schema_version",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    self.schema_version
                ),
            ));
        }
        if self.run.n_trajectories == 0 {
            return Err(Error::param("run.n_trajectories", "must be >= 1"));
        }
        positive("run.dt", self.run.dt)?;
        positive("run.dt_over_t", self.run.dt_over_t)?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::param("sweep.values", "must not be empty"));
            }
            let ok = matches!(
                (&self.model, sweep.coordinate),
                (ModelConfig::TwoLevelDirect { .. }, SweepCoordinateKind::K)
                    | (
                        ModelConfig::TwoLevelHomodyne { .. },
                        SweepCoordinateKind::BetaModulus
                    )
                    | (
                        ModelConfig::TwoLevelThermal { .. },
                        SweepCoordinateKind::MeanPhotonNumber
                    )
            );
            if !ok {
                return Err(Error::param(
                    "sweep.coordinate",
                    format!(
                        "`{}` does not apply to this model kind",
                        sweep.coordinate.label()
                    ),
                ));
            }
        }
        if self.validate.sample_stride == 0 {
            return Err(Error::param("validate.sample_stride", "must be >= 1"));
        }
        self.build_model(None)?;
        self.initial_state()?;
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.run.dt / self.run.dt_over_t
    }

    /// Builds the model, with the sweep coordinate set to `coordinate` if given.
    pub fn build_model(&self, coordinate: Option<f64>) -> Result<LindbladModel> {
        let dt = self.run.dt;
        match &self.model {
            ModelConfig::TwoLevelDirect { atom } => {
                build_two_level_direct(&atom.params(dt, coordinate.unwrap_or(1.0))?)
            }
            ModelConfig::TwoLevelHomodyne {
                atom,
                beta_modulus,
                beta_phase_over_pi,
            } => {
                let modulus = coordinate.unwrap_or(*beta_modulus);
                let beta =
                    Complex64::from_polar(modulus, beta_phase_over_pi * std::f64::consts::PI);
                build_two_level_homodyne(&atom.params(dt, 1.0)?, beta)
            }
            ModelConfig::TwoLevelThermal {
                omega0_dt,
                dt_over_tau,
                mean_photon_number,
                rate_scale_dt,
            } => build_two_level_thermal(
                omega0_dt / dt,
                dt / positive("model.dt_over_tau", *dt_over_tau)?,
                coordinate.unwrap_or(*mean_photon_number),
                rate_scale_dt / dt,
            ),
            ModelConfig::EigenstateJump {
                energies_dt,
                transitions,
            } => {
                let energies: Vec<f64> = energies_dt.iter().map(|e| e / dt).collect();
                let transitions: Vec<Transition> = transitions
                    .iter()
                    .map(|t| Transition {
                        lower: t.lower,
                        upper: t.upper,
                        down_rate: t.down_rate_dt / dt,
                        up_rate: t.up_rate_dt / dt,
                    })
                    .collect();
                build_eigenstate_jump_model(&energies, &transitions)
            }
        }
    }

    pub fn initial_state(&self) -> Result<InitialState> {
        Ok(match &self.run.initial_state {
            InitialStateConfig::RandomTwoLevel => InitialState::RandomTwoLevel,
            InitialStateConfig::Basis { index } => InitialState::Basis(*index),
            InitialStateConfig::Fixed { amplitudes } => InitialState::Fixed(
                StateVector::new(
                    amplitudes
                        .iter()
                        .map(|[re, im]| Complex64::new(*re, *im))
                        .collect(),
                )?
                .normalize()?,
            ),
        })
    }

    pub fn run_spec(&self) -> Result<RunSpec> {
        Ok(RunSpec {
            initial_state: self.initial_state()?,
            drift_mode: self.run.drift_mode,
            ..RunSpec::new(
                self.run.n_trajectories,
                self.run.dt,
                self.horizon(),
                self.run.master_seed,
            )
        })
    }

    /// Sweep label and values; a single `None` point when there is no sweep.
    pub fn points(&self) -> Vec<Option<(&'static str, f64)>> {
        match &self.sweep {
            None => vec![None],
            Some(s) => s
                .values
                .iter()
                .map(|v| Some((s.coordinate.label(), *v)))
                .collect(),
        }
    }

    /// Dimensionless products and derived physical values, for audit output.
    pub fn audit(&self) -> Vec<(String, f64)> {
        let dt = self.run.dt;
        let mut out = vec![
            ("dt".to_string(), dt),
            ("dt_over_T".to_string(), self.run.dt_over_t),
            ("T".to_string(), self.horizon()),
            ("n_steps".to_string(), (self.horizon() / dt).round()),
        ];
        let mut push = |k: &str, v: f64| out.push((k.to_string(), v));
        match &self.model {
            ModelConfig::TwoLevelDirect { atom } | ModelConfig::TwoLevelHomodyne { atom, .. } => {
                push("omega0_dt", atom.omega0_dt);
                push("g1_dt", atom.g1_dt);
                push("g2_dt", atom.g2_dt);
                push("dt_over_tau", atom.dt_over_tau);
                push("dt_over_tau1", atom.dt_over_tau1);
                push("dt_over_tau2", atom.dt_over_tau2);
                push("tau", dt / atom.dt_over_tau);
                push("tau1", dt / atom.dt_over_tau1);
                push("tau2", dt / atom.dt_over_tau2);
                if let ModelConfig::TwoLevelHomodyne {
                    beta_modulus,
                    beta_phase_over_pi,
                    ..
                } = &self.model
                {
                    push("beta_modulus", *beta_modulus);
                    push("beta_phase_over_pi", *beta_phase_over_pi);
                }
            }
            ModelConfig::TwoLevelThermal {
                omega0_dt,
                dt_over_tau,
                mean_photon_number,
                rate_scale_dt,
            } => {
                push("omega0_dt", *omega0_dt);
                push("dt_over_tau", *dt_over_tau);
                push("mean_photon_number", *mean_photon_number);
                push("gamma1_dt", rate_scale_dt * (mean_photon_number + 1.0));
                push("gamma2_dt", rate_scale_dt * mean_photon_number);
            }
            ModelConfig::EigenstateJump {
                energies_dt,
                transitions,
            } => {
                push("levels", energies_dt.len() as f64);
                push("transitions", transitions.len() as f64);
            }
        }
        out
    }
}
