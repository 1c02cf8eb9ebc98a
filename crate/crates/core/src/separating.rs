//! Decision procedures for the separating (`AB = 0 ⇒ T(A)T(B) = 0`) and
//! biseparating properties of a superoperator.
//!
//! # Exact reduction
//!
//! `β(A, B) = T(A)·T(B)` is bilinear. If `AB = 0` then `range(B) ⊆ ker(A)`,
//! so writing `A` as a sum of its rows `e_k ⊗ r_k` and `B` as a sum of its
//! columns `c_l ⊗ e_l*` gives rank-one pieces with every pairing
//! `r_k(c_l) = 0`. Hence `T` is separating iff `β(u⊗f, v⊗g) = 0` whenever
//! `f(v) = 0`.
//!
//! Fix `u = e_i`, `g = e_l*` and an output entry `(p, q)`. Then
//! `(f, v) ↦ β(e_i⊗f, v⊗e_l*)_pq = fᵀ M v` with
//! `M_ab = [T(E_ia)·T(E_bl)]_pq`. A bilinear form vanishing on all pairs
//! with `f(v) = 0` is a multiple of the pairing (the traceless rank-ones
//! span the traceless matrices), i.e. `M = c·I`. Bilinearity in `u` and `g`
//! lifts the basis statement to all rank-ones, so the whole property is
//! equivalent to every such `M` passing [`scalar_identity_test`].
//!
//! Failures are turned into explicit zero-product pairs built from matrix
//! units, so `AB` is exactly zero in floating point.

use rayon::prelude::*;
use thiserror::Error;

use crate::field::FieldConfig;
use crate::linalg::{self, basis_vector, matrix_unit, re, Covector, Matrix, Scalar};
use crate::sampling::{random_matrix, rng_from_seed, SeededRng};
use crate::superop::Superoperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Separating,
    NotSeparating,
    Biseparating,
    NotInvertible,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Separating => "separating",
            Status::NotSeparating => "not_separating",
            Status::Biseparating => "biseparating",
            Status::NotInvertible => "not_invertible",
        }
    }

    pub fn is_failure(self) -> bool {
        matches!(self, Status::NotSeparating | Status::NotInvertible)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Inverse => "inverse",
        }
    }
}

/// A pair with `A·B = 0` whose images do not multiply to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub a: Matrix,
    pub b: Matrix,
    /// `‖A·B‖_F`
    pub product_in_norm: f64,
    /// `‖T(A)·T(B)‖_F`
    pub violation_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict<W = Counterexample> {
    pub status: Status,
    pub counterexample: Option<W>,
    pub direction: Option<Direction>,
}

impl<W> Verdict<W> {
    pub fn pass(status: Status) -> Self {
        Self {
            status,
            counterexample: None,
            direction: None,
        }
    }

    pub fn not_invertible() -> Self {
        Self::pass(Status::NotInvertible)
    }

    pub fn fail(witness: W, direction: Option<Direction>) -> Self {
        Self {
            status: Status::NotSeparating,
            counterexample: Some(witness),
            direction,
        }
    }

    pub fn is_pass(&self) -> bool {
        !self.status.is_failure()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeparatingError {
    #[error("infeasible ranks {rank_a} + {rank_b} > {n}")]
    InfeasibleRanks { n: usize, rank_a: usize, rank_b: usize },
}

/// Whether `M` is a multiple of the identity at `threshold(scale)`; `c` is
/// the mean of the diagonal.
pub fn scalar_identity_test(m: &Matrix, cfg: &FieldConfig, scale: f64) -> (bool, Scalar) {
    let n = m.nrows().min(m.ncols());
    let c = if n == 0 {
        re(0.0)
    } else {
        m.diagonal().iter().sum::<Scalar>() / re(n as f64)
    };
    (first_scalar_violation(m, cfg.threshold(scale)).is_none(), c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ViolationKind {
    OffDiagonal,
    DiagonalMismatch,
}

/// Smallest `(a, b)` at which `M` fails to be scalar, off-diagonal
/// entries first.
fn first_scalar_violation(m: &Matrix, thr: f64) -> Option<(usize, usize, ViolationKind)> {
    first_off_diagonal(m, thr).or_else(|| first_diagonal_mismatch(m, thr))
}

fn first_off_diagonal(m: &Matrix, thr: f64) -> Option<(usize, usize, ViolationKind)> {
    let n = m.nrows();
    (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .find(|&(a, b)| a != b && m[(a, b)].norm() > thr)
        .map(|(a, b)| (a, b, ViolationKind::OffDiagonal))
}

fn first_diagonal_mismatch(m: &Matrix, thr: f64) -> Option<(usize, usize, ViolationKind)> {
    let n = m.nrows();
    (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .find(|&(a, b)| (m[(a, a)] - m[(b, b)]).norm() > thr)
        .map(|(a, b)| (a, b, ViolationKind::DiagonalMismatch))
}

/// Index tuple `(i, l, output, p, q, a, b)` of a failed scalar test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct QuadricViolation {
    pub i: usize,
    pub l: usize,
    pub output: usize,
    pub p: usize,
    pub q: usize,
    pub a: usize,
    pub b: usize,
    kind: ViolationKind,
}

/// Runs the exact reduction over one input block.
///
/// `images[g][j]` is the image of basis unit `j` (column-major index) of
/// `M_n` at output component `g`; products are taken componentwise. The
/// reported violation is the smallest `(i, l)`, then within it the smallest
/// `(g, vec_index(p, q), a, b)` among off-diagonal failures, falling back to
/// the smallest diagonal mismatch. Off-diagonal failures have matrix-unit
/// witnesses.
pub(crate) fn scan_quadric(
    images: &[Vec<Matrix>],
    n: usize,
    cfg: &FieldConfig,
    scale: f64,
) -> Option<QuadricViolation> {
    let thr = cfg.threshold(scale);
    // every entry of a quadric is at most max‖img‖², so components with
    // 2·max‖img‖² ≤ thr cannot fail
    let live: Vec<bool> = images
        .iter()
        .map(|imgs| {
            let mx = imgs.iter().map(|e| e.norm()).fold(0.0, f64::max);
            2.0 * mx * mx > thr
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |l| (i, l))).collect();
    pairs.par_iter().find_map_first(|&(i, l)| {
        let mut quads = Vec::new();
        for (g, imgs) in images.iter().enumerate() {
            if !live[g] {
                continue;
            }
            let m = imgs[0].nrows();
            // products[a * n + b] = T(E_ia) · T(E_bl)
            let products: Vec<Matrix> = (0..n)
                .flat_map(|a| (0..n).map(move |b| (a, b)))
                .map(|(a, b)| &imgs[a * n + i] * &imgs[l * n + b])
                .collect();
            for q in 0..m {
                for p in 0..m {
                    quads.push((g, p, q, Matrix::from_fn(n, n, |a, b| products[a * n + b][(p, q)])));
                }
            }
        }
        // (p, q) in column-major vec order
        quads.sort_by_key(|&(g, p, q, _)| (g, q, p));
        let hit = |search: fn(&Matrix, f64) -> Option<(usize, usize, ViolationKind)>| {
            quads.iter().find_map(|(g, p, q, quad)| {
                search(quad, thr).map(|(a, b, kind)| QuadricViolation {
                    i,
                    l,
                    output: *g,
                    p: *p,
                    q: *q,
                    a,
                    b,
                    kind,
                })
            })
        };
        hit(first_off_diagonal).or_else(|| hit(first_diagonal_mismatch))
    })
}

/// Zero-product witness candidates for a violation, in preference order.
pub(crate) fn witness_candidates(v: &QuadricViolation, n: usize) -> Vec<(Matrix, Matrix)> {
    match v.kind {
        ViolationKind::OffDiagonal => vec![(matrix_unit(n, v.i, v.a), matrix_unit(n, v.b, v.l))],
        ViolationKind::DiagonalMismatch => {
            let ei = basis_vector(n, v.i);
            let ea = basis_vector(n, v.a);
            let eb = basis_vector(n, v.b);
            let el = Covector::basis(n, v.l);
            let plus = Covector::new(&ea + &eb);
            let minus = Covector::new(&ea - &eb);
            // (e_a* ± e_b*)(e_a ∓ e_b) = 0; the two entries are
            // (M_aa − M_bb) ± (M_ba − M_ab), so one of them is at least |M_aa − M_bb|.
            vec![
                (
                    linalg::outer(&ei, &plus).unwrap(),
                    linalg::outer(&(&ea - &eb), &el).unwrap(),
                ),
                (
                    linalg::outer(&ei, &minus).unwrap(),
                    linalg::outer(&(&ea + &eb), &el).unwrap(),
                ),
            ]
        }
    }
}

fn scale_of(t: &Superoperator) -> f64 {
    let s = t.max_image_norm();
    s * s
}

fn build_counterexample(t: &Superoperator, v: &QuadricViolation, thr: f64) -> Counterexample {
    let n = t.n_in();
    let mut best: Option<Counterexample> = None;
    for (a, b) in witness_candidates(v, n) {
        let ta = t.apply(&a).expect("shape checked");
        let tb = t.apply(&b).expect("shape checked");
        let cx = Counterexample {
            product_in_norm: (&a * &b).norm(),
            violation_norm: (ta * tb).norm(),
            a,
            b,
        };
        if cx.violation_norm > thr {
            return cx;
        }
        if best.as_ref().is_none_or(|bst| cx.violation_norm > bst.violation_norm) {
            best = Some(cx);
        }
    }
    best.expect("at least one witness candidate")
}

/// Exact decision via the quadric reduction. Cost `O(n⁴ m³)`.
///
/// `n = 1` is separating unconditionally: on scalars `ab = 0` forces one
/// factor to vanish.
pub fn is_separating_exact(t: &Superoperator, cfg: &FieldConfig) -> Verdict {
    let n = t.n_in();
    if n == 1 {
        return Verdict::pass(Status::Separating);
    }
    let scale = scale_of(t);
    let images = vec![t.basis_images()];
    match scan_quadric(&images, n, cfg, scale) {
        None => Verdict::pass(Status::Separating),
        Some(v) => Verdict::fail(build_counterexample(t, &v, cfg.threshold(scale)), None),
    }
}

/// Random `(A, B)` with `A·B = 0` and the requested ranks.
///
/// `B` has range inside a random `rank_b`-dimensional subspace `W`; the rows
/// of `A` are drawn from the annihilator of `W`.
pub fn random_zero_product_pair_with(
    rng: &mut SeededRng,
    n: usize,
    rank_a: usize,
    rank_b: usize,
    cfg: &FieldConfig,
) -> Result<(Matrix, Matrix), SeparatingError> {
    if rank_a + rank_b > n {
        return Err(SeparatingError::InfeasibleRanks { n, rank_a, rank_b });
    }
    let field = cfg.field();
    let b = if rank_b == 0 {
        Matrix::zeros(n, n)
    } else {
        let w = random_matrix(rng, n, rank_b, field).qr().q();
        w * random_matrix(rng, rank_b, n, field)
    };
    let a = if rank_a == 0 {
        Matrix::zeros(n, n)
    } else {
        let annihilator = if rank_b == 0 {
            Matrix::identity(n, n)
        } else {
            let kernel = linalg::kernel_basis(&b.transpose(), cfg);
            Matrix::from_columns(&kernel)
        };
        let coeffs = random_matrix(rng, n, rank_a, field) * random_matrix(rng, rank_a, annihilator.ncols(), field);
        coeffs * annihilator.transpose()
    };
    Ok((a, b))
}

pub fn random_zero_product_pair(
    n: usize,
    rank_a: usize,
    rank_b: usize,
    seed: u64,
    cfg: &FieldConfig,
) -> Result<(Matrix, Matrix), SeparatingError> {
    random_zero_product_pair_with(&mut rng_from_seed(seed), n, rank_a, rank_b, cfg)
}

/// Rank splits `(rank_a, rank_b)` with both parts positive.
pub fn rank_splits(n: usize) -> Vec<(usize, usize)> {
    (1..n)
        .flat_map(|ra| (1..=n - ra).map(move |rb| (ra, rb)))
        .collect()
}

/// Monte-Carlo check over random zero-product pairs, cycling through every
/// rank split. A `Separating` answer is one-sided evidence only.
pub fn is_separating_sampled(t: &Superoperator, trials: usize, seed: u64, cfg: &FieldConfig) -> Verdict {
    let n = t.n_in();
    let splits = rank_splits(n);
    if splits.is_empty() || trials == 0 {
        return Verdict::pass(Status::Separating);
    }
    let thr = cfg.threshold(scale_of(t));
    let mut rng = rng_from_seed(seed);
    for trial in 0..trials {
        let (ra, rb) = splits[trial % splits.len()];
        let (a, b) = random_zero_product_pair_with(&mut rng, n, ra, rb, cfg).expect("feasible split");
        let a = &a / re(a.norm());
        let b = &b / re(b.norm());
        let tatb = t.apply(&a).expect("shape") * t.apply(&b).expect("shape");
        let violation = tatb.norm();
        if violation > thr {
            return Verdict::fail(
                Counterexample {
                    product_in_norm: (&a * &b).norm(),
                    violation_norm: violation,
                    a,
                    b,
                },
                None,
            );
        }
    }
    Verdict::pass(Status::Separating)
}

/// Invertible, separating, with separating inverse.
pub fn is_biseparating(t: &Superoperator, cfg: &FieldConfig) -> Verdict {
    if t.n_in() != t.n_out() {
        return Verdict::not_invertible();
    }
    let Ok((inv, _cond)) = t.inverse() else {
        return Verdict::not_invertible();
    };
    for (map, direction) in [(t, Direction::Forward), (&inv, Direction::Inverse)] {
        let v = is_separating_exact(map, cfg);
        if let Some(cx) = v.counterexample {
            return Verdict::fail(cx, Some(direction));
        }
    }
    Verdict::pass(Status::Biseparating)
}
