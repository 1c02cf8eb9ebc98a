//! Dense vectors, covectors and matrices plus the handful of
//! tolerance-governed primitives (rank, rank-one factorization, inversion,
//! null spaces) that the rest of the crate is built on.
//!
//! Entries are complex doubles. Real instances simply carry zero imaginary
//! parts; nothing below conjugates unless it says so.

use nalgebra::{Complex, DMatrix, DVector, SVD};
use thiserror::Error;

use crate::field::FieldConfig;

pub type Scalar = Complex<f64>;
pub type Matrix = DMatrix<Scalar>;
pub type Vector = DVector<Scalar>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is zero at tolerance")]
    ZeroMatrix,
    #[error("matrix is not rank one (sigma1 = {sigma1:e}, sigma2 = {sigma2:e})")]
    NotRankOne { sigma1: f64, sigma2: f64 },
    #[error("matrix is singular (numeric rank {rank} < {n})")]
    Singular { rank: usize, n: usize },
}

pub fn re(x: f64) -> Scalar {
    Complex::new(x, 0.0)
}

/// A linear functional on column vectors.
///
/// The pairing is bilinear: `f(v) = sum_a f_a * v_a`, with no conjugation
/// even over the complex field.
#[derive(Debug, Clone, PartialEq)]
pub struct Covector(Vector);

impl Covector {
    pub fn new(entries: Vector) -> Self {
        Covector(entries)
    }

    pub fn from_slice(entries: &[Scalar]) -> Self {
        Covector(Vector::from_column_slice(entries))
    }

    /// The dual basis functional `e_a*`.
    pub fn basis(dim: usize, a: usize) -> Self {
        Covector(basis_vector(dim, a))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &Vector {
        &self.0
    }

    pub fn into_entries(self) -> Vector {
        self.0
    }

    pub fn apply(&self, v: &Vector) -> Scalar {
        self.0.iter().zip(v.iter()).map(|(f, x)| f * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

pub fn basis_vector(dim: usize, a: usize) -> Vector {
    let mut v = Vector::zeros(dim);
    v[a] = re(1.0);
    v
}

/// Matrix unit `E_pq = e_p ⊗ e_q*` (0-based indices).
pub fn matrix_unit(n: usize, p: usize, q: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    m[(p, q)] = re(1.0);
    m
}

/// Builds a complex matrix from real row-major data.
pub fn real_matrix(rows: usize, cols: usize, row_major: &[f64]) -> Matrix {
    assert_eq!(row_major.len(), rows * cols, "row-major data has wrong length");
    Matrix::from_fn(rows, cols, |r, c| re(row_major[r * cols + c]))
}

pub fn real_vector(entries: &[f64]) -> Vector {
    Vector::from_iterator(entries.len(), entries.iter().map(|&x| re(x)))
}

pub fn is_finite(m: &Matrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// The rank-one operator `v ↦ f(v)·u`, i.e. the matrix `u fᵀ`.
pub fn outer(u: &Vector, f: &Covector) -> Result<Matrix, LinalgError> {
    if u.len() != f.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: u.len(),
            found: f.dim(),
        });
    }
    Ok(u * f.entries().transpose())
}

/// Singular values in descending order.
pub fn singular_values(a: &Matrix) -> DVector<f64> {
    if a.is_empty() {
        return DVector::zeros(0);
    }
    SVD::new(a.clone(), false, false).singular_values
}

/// Number of singular values above `tol_rel * sigma_1`; zero when `sigma_1`
/// itself is below `tol_abs`.
pub fn numeric_rank(a: &Matrix, cfg: &FieldConfig) -> usize {
    rank_from_singular_values(&singular_values(a), cfg)
}

fn rank_from_singular_values(sv: &DVector<f64>, cfg: &FieldConfig) -> usize {
    let Some(&s1) = sv.iter().next() else {
        return 0;
    };
    if s1 <= cfg.tol_abs() {
        return 0;
    }
    sv.iter().filter(|&&s| s > cfg.tol_rel() * s1).count()
}

/// Unit-modulus factor that makes the first entry with modulus above
/// `tol_abs` real and positive. Dividing by it applies the gauge.
pub fn leading_phase<'a>(entries: impl IntoIterator<Item = &'a Scalar>, tol_abs: f64) -> Scalar {
    entries
        .into_iter()
        .find(|z| z.norm() > tol_abs)
        .map(|z| z / z.norm())
        .unwrap_or_else(|| re(1.0))
}

/// `A ≈ u ⊗ f` with `‖f‖₂ = 1` and the leading significant entry of `f`
/// real positive; all scale lives in `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneFactor {
    pub u: Vector,
    pub f: Covector,
}

impl RankOneFactor {
    pub fn to_matrix(&self) -> Matrix {
        &self.u * self.f.entries().transpose()
    }
}

pub fn rank_one_factor(a: &Matrix, cfg: &FieldConfig) -> Result<RankOneFactor, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let svd = SVD::new(a.clone(), true, true);
    let sv = &svd.singular_values;
    let s1 = sv[0];
    if s1 <= cfg.tol_abs() {
        return Err(LinalgError::ZeroMatrix);
    }
    let s2 = if sv.len() > 1 { sv[1] } else { 0.0 };
    if s2 > cfg.tol_rel() * s1 {
        return Err(LinalgError::NotRankOne {
            sigma1: s1,
            sigma2: s2,
        });
    }
    let u_mat = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    // A ≈ s1 · u1 · v1ᴴ and v1ᴴ is the first row of v_t, so f = row as a column.
    let mut f: Vector = v_t.row(0).transpose();
    let mut u: Vector = u_mat.column(0) * re(s1);
    let phase = leading_phase(f.iter(), cfg.tol_abs());
    f /= phase;
    u *= phase;
    Ok(RankOneFactor {
        u,
        f: Covector::new(f),
    })
}

/// Inverse together with the 2-norm condition number `sigma_1 / sigma_n`.
pub fn invert(a: &Matrix, cfg: &FieldConfig) -> Result<(Matrix, f64), LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let n = a.nrows();
    let sv = singular_values(a);
    let rank = rank_from_singular_values(&sv, cfg);
    if rank < n {
        return Err(LinalgError::Singular { rank, n });
    }
    let cond = sv[0] / sv[n - 1];
    let inv = a
        .clone()
        .lu()
        .try_inverse()
        .ok_or(LinalgError::Singular { rank, n })?;
    Ok((inv, cond))
}

/// Orthonormal (Hermitian inner product) basis of `{v : A v = 0}`.
pub fn kernel_basis(a: &Matrix, cfg: &FieldConfig) -> Vec<Vector> {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return Vec::new();
    }
    // Zero rows do not change the kernel and give a square SVD with a full V.
    let size = rows.max(cols);
    let mut padded = Matrix::zeros(size, cols);
    padded.view_mut((0, 0), (rows, cols)).copy_from(a);
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sv = &svd.singular_values;
    let s1 = sv[0];
    let cut = if s1 <= cfg.tol_abs() {
        f64::INFINITY
    } else {
        cfg.tol_rel() * s1
    };
    sv.iter()
        .enumerate()
        .filter(|(_, &s)| s <= cut)
        .map(|(i, _)| v_t.row(i).adjoint())
        .collect()
}
