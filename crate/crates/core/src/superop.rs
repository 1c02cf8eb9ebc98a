//! Linear maps `M_n → M_m` stored as `m² × n²` matrices.
//!
//! Vectorization is column-major everywhere: entry `(p, q)` of an `n × n`
//! matrix sits at index `q·n + p`, so the column of `mat` holding the image
//! of `E_pq` is `q·n_in + p`. This matches nalgebra's storage order, which
//! lets `vectorize` read the buffer directly.

use thiserror::Error;

use crate::field::FieldConfig;
use crate::linalg::{self, LinalgError, Matrix, Scalar, Vector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SuperopError {
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("basis image count {0} is not a positive perfect square")]
    NotPerfectSquare(usize),
    #[error("basis image {index} has shape {rows}x{cols}, expected {expected}x{expected}")]
    ShapeMismatch {
        index: usize,
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("map is not invertible: {0}")]
    Singular(LinalgError),
    #[error("scalar alpha = {0} is zero at tolerance")]
    ZeroAlpha(Scalar),
}

/// Column-major vec index of entry `(p, q)` of an `n × n` matrix.
pub fn vec_index(n: usize, p: usize, q: usize) -> usize {
    q * n + p
}

pub fn vectorize(a: &Matrix) -> Vector {
    Vector::from_column_slice(a.as_slice())
}

pub fn unvectorize(v: &Vector, n: usize) -> Matrix {
    Matrix::from_column_slice(n, n, v.as_slice())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    n_in: usize,
    n_out: usize,
    mat: Matrix,
    cfg: FieldConfig,
}

impl Superoperator {
    pub fn new(n_in: usize, n_out: usize, mat: Matrix, cfg: FieldConfig) -> Result<Self, SuperopError> {
        if n_in == 0 || n_out == 0 {
            return Err(SuperopError::DimensionMismatch {
                what: "matrix dimension",
                expected: 1,
                found: 0,
            });
        }
        if mat.nrows() != n_out * n_out {
            return Err(SuperopError::DimensionMismatch {
                what: "superoperator rows",
                expected: n_out * n_out,
                found: mat.nrows(),
            });
        }
        if mat.ncols() != n_in * n_in {
            return Err(SuperopError::DimensionMismatch {
                what: "superoperator columns",
                expected: n_in * n_in,
                found: mat.ncols(),
            });
        }
        if !linalg::is_finite(&mat) {
            return Err(SuperopError::NonFinite);
        }
        Ok(Self {
            n_in,
            n_out,
            mat,
            cfg,
        })
    }

    pub fn identity(n: usize, cfg: FieldConfig) -> Self {
        Self::new(n, n, Matrix::identity(n * n, n * n), cfg).expect("identity shape is valid")
    }

    pub fn zero(n_in: usize, n_out: usize, cfg: FieldConfig) -> Self {
        Self::new(n_in, n_out, Matrix::zeros(n_out * n_out, n_in * n_in), cfg)
            .expect("zero shape is valid")
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn mat(&self) -> &Matrix {
        &self.mat
    }

    pub fn cfg(&self) -> &FieldConfig {
        &self.cfg
    }

    pub fn with_cfg(mut self, cfg: FieldConfig) -> Self {
        self.cfg = cfg;
        self
    }

    pub fn apply(&self, a: &Matrix) -> Result<Matrix, SuperopError> {
        if a.nrows() != self.n_in || a.ncols() != self.n_in {
            return Err(SuperopError::DimensionMismatch {
                what: "input matrix size",
                expected: self.n_in,
                found: if a.nrows() != self.n_in { a.nrows() } else { a.ncols() },
            });
        }
        Ok(unvectorize(&(&self.mat * vectorize(a)), self.n_out))
    }

    /// Image of the matrix unit `E_pq`.
    pub fn image_of_unit(&self, p: usize, q: usize) -> Matrix {
        let col = self.mat.column(vec_index(self.n_in, p, q));
        Matrix::from_column_slice(self.n_out, self.n_out, col.as_slice())
    }

    /// Images `T(E_pq)` ordered by column-major basis index.
    pub fn basis_images(&self) -> Vec<Matrix> {
        (0..self.n_in * self.n_in)
            .map(|j| Matrix::from_column_slice(self.n_out, self.n_out, self.mat.column(j).as_slice()))
            .collect()
    }

    pub fn from_basis_images(images: &[Matrix], cfg: FieldConfig) -> Result<Self, SuperopError> {
        let n_in = (images.len() as f64).sqrt().round() as usize;
        if n_in == 0 || n_in * n_in != images.len() {
            return Err(SuperopError::NotPerfectSquare(images.len()));
        }
        let n_out = images[0].nrows();
        for (index, img) in images.iter().enumerate() {
            if img.nrows() != n_out || img.ncols() != n_out {
                return Err(SuperopError::ShapeMismatch {
                    index,
                    rows: img.nrows(),
                    cols: img.ncols(),
                    expected: n_out,
                });
            }
        }
        let mut mat = Matrix::zeros(n_out * n_out, n_in * n_in);
        for (j, img) in images.iter().enumerate() {
            mat.column_mut(j).copy_from_slice(img.as_slice());
        }
        Self::new(n_in, n_out, mat, cfg)
    }

    pub fn scaled(&self, c: Scalar) -> Self {
        Self {
            mat: &self.mat * c,
            ..self.clone()
        }
    }

    /// Inverse map and the condition number of `mat`.
    pub fn inverse(&self) -> Result<(Superoperator, f64), SuperopError> {
        if self.n_in != self.n_out {
            return Err(SuperopError::Singular(LinalgError::NotSquare {
                rows: self.mat.nrows(),
                cols: self.mat.ncols(),
            }));
        }
        let (inv, cond) = linalg::invert(&self.mat, &self.cfg).map_err(SuperopError::Singular)?;
        let map = Self::new(self.n_out, self.n_in, inv, self.cfg)?;
        Ok((map, cond))
    }

    /// Largest Frobenius norm among the basis images.
    pub fn max_image_norm(&self) -> f64 {
        self.mat
            .column_iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }
}

/// `second ∘ first`.
pub fn compose(second: &Superoperator, first: &Superoperator) -> Result<Superoperator, SuperopError> {
    if first.n_out != second.n_in {
        return Err(SuperopError::DimensionMismatch {
            what: "composition inner dimension",
            expected: second.n_in,
            found: first.n_out,
        });
    }
    Superoperator::new(first.n_in, second.n_out, &second.mat * &first.mat, second.cfg)
}

/// `A ↦ α·S·A·S⁻¹`, whose matrix is `α · (S⁻¹)ᵀ ⊗ S`.
pub fn conjugation_superop(alpha: Scalar, s: &Matrix, cfg: FieldConfig) -> Result<Superoperator, SuperopError> {
    if alpha.norm() <= cfg.tol_abs() {
        return Err(SuperopError::ZeroAlpha(alpha));
    }
    let (s_inv, _) = linalg::invert(s, &cfg).map_err(SuperopError::Singular)?;
    let n = s.nrows();
    let mat = s_inv.transpose().kronecker(s) * alpha;
    Superoperator::new(n, n, mat, cfg)
}
