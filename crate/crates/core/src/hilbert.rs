// Copyright 2026 The qtraj Authors
// SPDX-License-Identifier: Apache-2.0

//! Dense complex linear algebra on small Hilbert spaces.
//!
//! State vectors and operators are thin newtypes over `nalgebra` dynamic
//! storage. Dimensions in this crate are small (2 to ~16), so everything is
//! dense. The two-level helpers use the ordering `|e> = 0`, `|g> = 1`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::ser::{Serialize, SerializeSeq, Serializer};

use crate::error::{Error, Result};

/// Squared norms at or below this value are treated as zero.
pub const ZERO_NORM_GUARD: f64 = 1e-14;

/// Index of the excited state in two-level helpers.
pub const EXCITED: usize = 0;
/// Index of the ground state in two-level helpers.
pub const GROUND: usize = 1;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A (not necessarily normalized) pure-state amplitude vector.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: DVector<Complex64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::param(
                "amplitudes",
                format!("state dimension must be >= 2, got {}", amplitudes.len()),
            ));
        }
        if amplitudes
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::param("amplitudes", "non-finite amplitude"));
        }
        Ok(Self {
            amps: DVector::from_vec(amplitudes),
        })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&x| c(x, 0.0)).collect())
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::param(
                "index",
                format!("basis index {index} out of range for dimension {dim}"),
            ));
        }
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        v[index] = c(1.0, 0.0);
        Self::new(v)
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); dim])
    }

    /// `|e>` of the two-level convention.
    pub fn excited() -> Self {
        Self::basis(2, EXCITED).expect("static dimension")
    }

    /// `|g>` of the two-level convention.
    pub fn ground() -> Self {
        Self::basis(2, GROUND).expect("static dimension")
    }

    pub(crate) fn from_vector(amps: DVector<Complex64>) -> Self {
        debug_assert!(amps.len() >= 2);
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        self.amps.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<Complex64> {
        &self.amps
    }

    /// Sum of squared moduli of the amplitudes.
    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Returns the state rescaled to unit norm.
    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm_sq();
        if !(n > ZERO_NORM_GUARD) {
            return Err(Error::NearZeroNorm { norm_sq: n });
        }
        Ok(Self {
            amps: self.amps.unscale(n.sqrt()),
        })
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sq() - 1.0).abs() <= tol
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amps.dotc(&other.amps))
    }

    /// `|self><self|`.
    pub fn projector(&self) -> Operator {
        Operator {
            m: &self.amps * self.amps.adjoint(),
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            amps: &self.amps * factor,
        }
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Distance between rays: `1 - |<a|b>|^2` for normalized inputs.
    pub fn ray_distance(&self, other: &StateVector) -> f64 {
        let ov = self.amps.dotc(&other.amps).norm_sqr();
        (1.0 - ov / (self.norm_sq() * other.norm_sq())).max(0.0)
    }
}

impl Serialize for StateVector {
    /// Amplitudes as `[re, im]` pairs.
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.dim()))?;
        for z in self.amps.iter() {
            seq.serialize_element(&[z.re, z.im])?;
        }
        seq.end()
    }
}

/// A square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    m: DMatrix<Complex64>,
}

impl Operator {
    /// Builds a `dim x dim` operator from row-major entries.
    pub fn new(dim: usize, row_major: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || row_major.len() != dim * dim {
            return Err(Error::param(
                "entries",
                format!("expected {} entries for dimension {dim}", dim * dim),
            ));
        }
        Ok(Self {
            m: DMatrix::from_row_slice(dim, dim, &row_major),
        })
    }

    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        Ok(Self { m })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn diagonal(diag: &[Complex64]) -> Self {
        Self {
            m: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
        }
    }

    pub fn real_diagonal(diag: &[f64]) -> Self {
        Self::diagonal(&diag.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>())
    }

    /// `|row><col|` in dimension `dim`.
    pub fn transition(dim: usize, row: usize, col: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(row, col)] = c(1.0, 0.0);
        Self { m }
    }

    /// Lowering operator `|g><e|`.
    pub fn sigma_minus() -> Self {
        Self::transition(2, GROUND, EXCITED)
    }

    /// Raising operator `|e><g|`.
    pub fn sigma_plus() -> Self {
        Self::transition(2, EXCITED, GROUND)
    }

    pub fn sigma_x() -> Self {
        Self::new(2, vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
            .expect("static dimension")
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.m[(row, col)]
    }

    /// `op |psi>`, without normalization.
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        check_dim(self.dim(), psi.dim())?;
        Ok(StateVector {
            amps: &self.m * &psi.amps,
        })
    }

    /// `<psi| op |psi>`.
    pub fn expectation(&self, psi: &StateVector) -> Result<Complex64> {
        check_dim(self.dim(), psi.dim())?;
        Ok(psi.amps.dotc(&(&self.m * &psi.amps)))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self {
            m: self.m.adjoint(),
        }
    }

    /// Matrix exponential by scaling and squaring with a Padé core.
    pub fn exp(&self) -> Self {
        Self { m: expm(&self.m) }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            m: &self.m * factor,
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        Self {
            m: &self.m * c(factor, 0.0),
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.m.trace()
    }

    /// Largest entrywise modulus of `self - self^dagger`.
    pub fn hermitian_deviation(&self) -> f64 {
        max_abs(&(&self.m - self.m.adjoint()))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        max_abs(&(&self.m - &other.m))
    }

    /// Induced 1-norm (max column sum).
    pub fn norm_one(&self) -> f64 {
        norm_one(&self.m)
    }

    /// Spectral norm.
    pub fn norm_two(&self) -> f64 {
        self.m
            .clone()
            .singular_values()
            .iter()
            .cloned()
            .fold(0.0, f64::max)
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self {
            m: &self.m * &other.m - &other.m * &self.m,
        })
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator {
            m: &self.m + &rhs.m,
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator {
            m: &self.m - &rhs.m,
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator {
            m: &self.m * &rhs.m,
        }
    }
}

impl Mul<Complex64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: Complex64) -> Operator {
        self.scale(rhs)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { m: -&self.m }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn norm_one(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

// Padé coefficients and 1-norm thresholds (Higham 2005) for degrees 3..13.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(f64, usize); 4] = [
    (1.495585217958292e-2, 3),
    (2.539_398_330_063_23e-1, 5),
    (9.504178996162932e-1, 7),
    (2.097847961257068e0, 9),
];
const THETA13: f64 = 5.371920351148152;

fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let eye = DMatrix::<Complex64>::identity(n, n);
    let norm = norm_one(a);
    if norm == 0.0 {
        return eye;
    }
    for &(theta, degree) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match degree {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(a, coeffs, &eye);
        }
    }
    let s = ((norm / THETA13).log2().ceil()).max(0.0) as i32;
    let scaled = a * c(2f64.powi(-s), 0.0);
    let mut r = pade13(&scaled, &eye);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn solve_pade(u: DMatrix<Complex64>, v: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let p = &v + &u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular within the threshold norms")
}

fn pade_low(a: &DMatrix<Complex64>, b: &[f64], eye: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let a2 = a * a;
    let mut power = eye.clone();
    let mut u_inner = eye * c(b[1], 0.0);
    let mut v = eye * c(b[0], 0.0);
    for k in 1..b.len() / 2 {
        power = &power * &a2;
        u_inner += &power * c(b[2 * k + 1], 0.0);
        v += &power * c(b[2 * k], 0.0);
    }
    solve_pade(a * u_inner, v)
}

fn pade13(a: &DMatrix<Complex64>, eye: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let b = |k: usize| c(PADE13[k], 0.0);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9));
    let u = a * (u_hi + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + eye * b(1));
    let v_hi = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8));
    let v = v_hi + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + eye * b(0);
    solve_pade(u, v)
}
