// Copyright 2026 The qtraj Authors
// SPDX-License-Identifier: Apache-2.0

//! Quantum jump trajectories for time-dependent Lindblad dynamics, with a
//! per-trajectory entropy-production ledger and an integral fluctuation
//! theorem estimator.

// `!(x > guard)` is used on purpose so NaN norms take the degenerate branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod config;
pub mod ensemble;
pub mod entropy;
pub mod error;
pub mod hilbert;
pub mod ift;
pub mod model;
pub mod pdp;

pub use entropy::{DriftMode, EntropyLedger};
pub use error::{Error, Result};
pub use hilbert::{Operator, StateVector};
pub use ift::{IFTEstimate, RunSpec};
pub use model::LindbladModel;
pub use pdp::{InitialState, Simulator, TrajectoryRecord};
