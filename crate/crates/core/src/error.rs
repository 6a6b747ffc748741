// Copyright 2026 The qtraj Authors
// SPDX-License-Identifier: Apache-2.0

//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A state whose squared norm fell to or below the zero guard. Signals an
    /// impossible jump or drift branch.
    #[error("near-zero norm: |psi|^2 = {norm_sq:e}")]
    NearZeroNorm { norm_sq: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    /// Total jump probability per step reached the weak-jump limit.
    #[error(
        "step too large: total jump probability {total_probability:.4} >= {limit} at step {step} \
         (t = {time}, dt = {dt})"
    )]
    StepTooLarge {
        step: usize,
        time: f64,
        dt: f64,
        total_probability: f64,
        limit: f64,
    },

    #[error("operator is not Hermitian (deviation {deviation:e})")]
    NonHermitian { deviation: f64 },

    #[error("interval mismatch: [{a_start}, {a_end}] vs [{b_start}, {b_end}]")]
    IntervalMismatch {
        a_start: f64,
        a_end: f64,
        b_start: f64,
        b_end: f64,
    },

    #[error("time grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("invalid trajectory record: {0}")]
    InvalidRecord(String),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
