//! Seeded random draws shared by the generators and the sampled checks.
//!
//! ChaCha8 keeps streams identical across platforms for a given seed.

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::field::Field;
use crate::linalg::{Matrix, Scalar, Vector};

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal scalar; complex draws have independent normal parts.
pub fn random_scalar<R: Rng + ?Sized>(rng: &mut R, field: Field) -> Scalar {
    let re: f64 = rng.sample(StandardNormal);
    match field {
        Field::Real => Complex::new(re, 0.0),
        Field::Complex => {
            let im: f64 = rng.sample(StandardNormal);
            Complex::new(re, im)
        }
    }
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, field: Field) -> Matrix {
    // column-major draw order
    let mut m = Matrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = random_scalar(rng, field);
        }
    }
    m
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize, field: Field) -> Vector {
    Vector::from_fn(dim, |_, _| random_scalar(rng, field))
}

/// Scalar of modulus uniform in `[lo, hi]` with a random sign (real) or
/// phase (complex).
pub fn random_scalar_in_range<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64, field: Field) -> Scalar {
    let modulus = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    match field {
        Field::Real => {
            if rng.random_bool(0.5) {
                Complex::new(modulus, 0.0)
            } else {
                Complex::new(-modulus, 0.0)
            }
        }
        Field::Complex => {
            let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            Complex::from_polar(modulus, theta)
        }
    }
}
