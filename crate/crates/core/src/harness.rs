//! Seeded instance generators, perturbations and brute-force oracles.
//!
//! Every generator is a pure function of its parameters and seed. Positive
//! instances carry their ground truth in gauge; negative ones are curated
//! (transpose, point mixing) or produced by perturbing a positive instance.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;
use thiserror::Error;

use crate::field::FieldConfig;
use crate::funcalg::{self, BigSuperoperator, DiscreteSpace, FuncalgError, PointwiseForm};
use crate::linalg::{self, re, Matrix};
use crate::sampling::{random_matrix, random_scalar_in_range, rng_from_seed, SeededRng};
use crate::separating::{self, Counterexample, Status, Verdict};
use crate::structure::{self, ConjugationForm, StructureError};
use crate::superop::{conjugation_superop, vec_index, SuperopError, Superoperator};

pub const DEFAULT_COND_CAP: f64 = 100.0;
pub const DEFAULT_ALPHA_RANGE: (f64, f64) = (0.5, 2.0);
/// Rejection draws before falling back to a synthesized spectrum.
const MAX_REJECTIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("{0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Superop(#[from] SuperopError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Funcalg(#[from] FuncalgError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceMap {
    Superop(Superoperator),
    Big(BigSuperoperator),
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    Conjugation(ConjugationForm),
    Pointwise(PointwiseForm),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceBundle {
    pub description: String,
    pub ground_truth: Option<GroundTruth>,
    pub map: InstanceMap,
    pub seed: u64,
}

impl InstanceBundle {
    pub fn superop(&self) -> Option<&Superoperator> {
        match &self.map {
            InstanceMap::Superop(t) => Some(t),
            InstanceMap::Big(_) => None,
        }
    }

    pub fn big(&self) -> Option<&BigSuperoperator> {
        match &self.map {
            InstanceMap::Big(t) => Some(t),
            InstanceMap::Superop(_) => None,
        }
    }

    pub fn conjugation(&self) -> Option<&ConjugationForm> {
        match &self.ground_truth {
            Some(GroundTruth::Conjugation(f)) => Some(f),
            _ => None,
        }
    }

    pub fn pointwise(&self) -> Option<&PointwiseForm> {
        match &self.ground_truth {
            Some(GroundTruth::Pointwise(f)) => Some(f),
            _ => None,
        }
    }

    /// Residual of the map against its ground truth, if there is one.
    pub fn ground_truth_residual(&self) -> Option<f64> {
        match (&self.map, &self.ground_truth) {
            (InstanceMap::Superop(t), Some(GroundTruth::Conjugation(f))) => {
                structure::verify_form(t, f, t.cfg()).ok()
            }
            (InstanceMap::Big(t), Some(GroundTruth::Pointwise(f))) => funcalg::verify_pointwise(t, f, t.cfg()).ok(),
            _ => None,
        }
    }
}

fn check_alpha_range((lo, hi): (f64, f64)) -> Result<(), HarnessError> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) {
        return Err(HarnessError::InvalidParameter(format!(
            "alpha range [{lo}, {hi}] must satisfy 0 < lo <= hi"
        )));
    }
    Ok(())
}

fn condition_number(s: &Matrix) -> f64 {
    let sv = linalg::singular_values(s);
    let (max, min) = (sv[0], sv[sv.len() - 1]);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Invertible `S` with `cond(S) ≤ cond_cap`. `cond_cap ≤ 1` gives `I`.
fn draw_s(rng: &mut SeededRng, n: usize, cond_cap: f64, cfg: &FieldConfig) -> Matrix {
    if cond_cap <= 1.0 {
        return Matrix::identity(n, n);
    }
    for _ in 0..MAX_REJECTIONS {
        let s = random_matrix(rng, n, n, cfg.field());
        if condition_number(&s) <= cond_cap {
            return s;
        }
    }
    // U·diag(σ)·V with σ spread over [1, cond_cap]
    let u = random_matrix(rng, n, n, cfg.field()).qr().q();
    let v = random_matrix(rng, n, n, cfg.field()).qr().q();
    let sigma = Matrix::from_fn(n, n, |i, j| {
        if i == j && n > 1 {
            re(cond_cap.powf(i as f64 / (n - 1) as f64))
        } else if i == j {
            re(1.0)
        } else {
            re(0.0)
        }
    });
    u * sigma * v
}

fn draw_form(
    rng: &mut SeededRng,
    n: usize,
    alpha_range: (f64, f64),
    cond_cap: f64,
    cfg: &FieldConfig,
) -> Result<ConjugationForm, HarnessError> {
    let s = draw_s(rng, n, cond_cap, cfg);
    let alpha = random_scalar_in_range(rng, alpha_range.0, alpha_range.1, cfg.field());
    Ok(ConjugationForm::new(alpha, &s, cfg)?)
}

/// Random `A ↦ α·S·A·S⁻¹`.
pub fn gen_conjugation(
    n: usize,
    seed: u64,
    alpha_range: (f64, f64),
    cond_cap: f64,
    cfg: &FieldConfig,
) -> Result<InstanceBundle, HarnessError> {
    if n == 0 {
        return Err(HarnessError::InvalidParameter("n must be at least 1".into()));
    }
    check_alpha_range(alpha_range)?;
    let mut rng = rng_from_seed(seed);
    let form = draw_form(&mut rng, n, alpha_range, cond_cap, cfg)?;
    let map = conjugation_superop(form.alpha(), form.s(), *cfg)?;
    Ok(InstanceBundle {
        description: format!("conjugation n={n} seed={seed}"),
        ground_truth: Some(GroundTruth::Conjugation(form)),
        map: InstanceMap::Superop(map),
        seed,
    })
}

/// Random pointwise conjugation composed with a random permutation of
/// `k` points.
pub fn gen_pointwise(
    k: usize,
    n: usize,
    seed: u64,
    alpha_range: (f64, f64),
    cond_cap: f64,
    cfg: &FieldConfig,
) -> Result<InstanceBundle, HarnessError> {
    if k == 0 || n == 0 {
        return Err(HarnessError::InvalidParameter("k and n must be at least 1".into()));
    }
    check_alpha_range(alpha_range)?;
    let mut rng = rng_from_seed(seed);
    let mut phi: Vec<usize> = (0..k).collect();
    phi.shuffle(&mut rng);
    let forms = (0..k)
        .map(|_| draw_form(&mut rng, n, alpha_range, cond_cap, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let form = PointwiseForm::new(
        DiscreteSpace::numbered("x", k),
        DiscreteSpace::numbered("y", k),
        phi,
        forms,
    )?;
    let map = form.to_big_superop(*cfg)?;
    Ok(InstanceBundle {
        description: format!("pointwise k={k} n={n} seed={seed}"),
        ground_truth: Some(GroundTruth::Pointwise(form)),
        map: InstanceMap::Big(map),
        seed,
    })
}

/// `A ↦ Aᵀ`
pub fn gen_transpose(n: usize, cfg: &FieldConfig) -> Superoperator {
    let mut mat = Matrix::zeros(n * n, n * n);
    for p in 0..n {
        for q in 0..n {
            mat[(vec_index(n, q, p), vec_index(n, p, q))] = re(1.0);
        }
    }
    Superoperator::new(n, n, mat, *cfg).expect("square permutation matrix")
}

/// A pointwise instance whose first output point averages the images of
/// two input points.
pub fn gen_point_mixing(k: usize, n: usize, seed: u64, cfg: &FieldConfig) -> Result<BigSuperoperator, HarnessError> {
    if k < 2 {
        return Err(HarnessError::InvalidParameter("point mixing needs k >= 2".into()));
    }
    let bundle = gen_pointwise(k, n, seed, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP, cfg)?;
    let form = bundle.pointwise().expect("pointwise ground truth").clone();
    let mut t = bundle.big().expect("block map").clone();
    let (a, b) = (form.phi()[0], form.phi()[1]);
    let half = t.block(0, a).scaled(re(0.5));
    t.set_block(0, a, half.clone())?;
    t.set_block(0, b, half)?;
    Ok(t)
}

fn unit_direction(rng: &mut SeededRng, rows: usize, cols: usize, cfg: &FieldConfig) -> Matrix {
    let g = random_matrix(rng, rows, cols, cfg.field());
    let norm = g.norm();
    g / re(norm)
}

/// `T + eps·G` with `G` seeded and of unit Frobenius norm.
pub fn perturb(t: &Superoperator, eps: f64, seed: u64) -> Superoperator {
    if eps == 0.0 {
        return t.clone();
    }
    let g = unit_direction(&mut rng_from_seed(seed), t.mat().nrows(), t.mat().ncols(), t.cfg());
    Superoperator::new(t.n_in(), t.n_out(), t.mat() + g * re(eps), *t.cfg()).expect("same shape")
}

/// Block-map version of [`perturb`]; `G` is unit norm over the whole map.
pub fn perturb_big(t: &BigSuperoperator, eps: f64, seed: u64) -> BigSuperoperator {
    if eps == 0.0 {
        return t.clone();
    }
    let dense = t.to_dense();
    let g = unit_direction(&mut rng_from_seed(seed), dense.nrows(), dense.ncols(), t.cfg());
    BigSuperoperator::from_dense(
        t.x_in().clone(),
        t.x_out().clone(),
        t.n(),
        t.m(),
        &(dense + g * re(eps)),
        *t.cfg(),
    )
    .expect("same shape")
}

/// Dense random superoperator `M_n → M_m`.
pub fn random_superop(n: usize, m: usize, seed: u64, cfg: &FieldConfig) -> Superoperator {
    let mat = random_matrix(&mut rng_from_seed(seed), m * m, n * n, cfg.field());
    Superoperator::new(n, m, mat, *cfg).expect("shape")
}

/// Families drawn on for mixed candidate pools.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateKind {
    /// Dense Gaussian superoperator.
    Random,
    Conjugation,
    /// Conjugation plus an `eps = 1e-3` perturbation.
    Perturbed,
    /// Transpose after a conjugation.
    TransposedConjugation,
    /// `A ↦ f(A)·N` with `N² = 0`: separating, never invertible.
    SquareZero,
    /// Conjugation plus a square-zero map.
    ConjugationPlusSquareZero,
}

impl CandidateKind {
    pub const ALL: [CandidateKind; 6] = [
        CandidateKind::Random,
        CandidateKind::Conjugation,
        CandidateKind::Perturbed,
        CandidateKind::TransposedConjugation,
        CandidateKind::SquareZero,
        CandidateKind::ConjugationPlusSquareZero,
    ];
}

fn square_zero_map(n: usize, seed: u64, cfg: &FieldConfig) -> Superoperator {
    let mut rng = rng_from_seed(seed);
    let field = cfg.field();
    let u = crate::sampling::random_vector(&mut rng, n, field);
    // g with g(u) = 0
    let w = crate::sampling::random_vector(&mut rng, n, field);
    let g = &w - &u * (u.transpose() * &w)[(0, 0)] / (u.transpose() * &u)[(0, 0)];
    let nil = &u * g.transpose();
    let functional = random_matrix(&mut rng, 1, n * n, field);
    let mat = crate::superop::vectorize(&nil) * functional;
    Superoperator::new(n, n, mat, *cfg).expect("shape")
}

pub fn gen_candidate(kind: CandidateKind, n: usize, seed: u64, cfg: &FieldConfig) -> Superoperator {
    let conj = || {
        gen_conjugation(n, seed, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP, cfg)
            .expect("valid parameters")
            .superop()
            .expect("superop")
            .clone()
    };
    match kind {
        CandidateKind::Random => random_superop(n, n, seed, cfg),
        CandidateKind::Conjugation => conj(),
        CandidateKind::Perturbed => perturb(&conj(), 1e-3, seed),
        CandidateKind::TransposedConjugation => {
            crate::superop::compose(&gen_transpose(n, cfg), &conj()).expect("same size")
        }
        CandidateKind::SquareZero => square_zero_map(n, seed, cfg),
        CandidateKind::ConjugationPlusSquareZero => {
            let t = conj();
            let z = square_zero_map(n, seed, cfg);
            Superoperator::new(n, n, t.mat() + z.mat(), *cfg).expect("same shape")
        }
    }
}

/// Monte-Carlo separating test on its own code path: images are assembled
/// from the basis images entry by entry, trials are independent streams of
/// one seed and run in parallel, and the first failing trial wins.
pub fn brute_force_separating_oracle(t: &Superoperator, trials: usize, seed: u64, cfg: &FieldConfig) -> Verdict {
    let n = t.n_in();
    let splits = separating::rank_splits(n);
    if splits.is_empty() || trials == 0 {
        return Verdict::pass(Status::Separating);
    }
    let images = t.basis_images();
    let scale = images.iter().map(|e| e.norm_squared()).fold(0.0, f64::max);
    let thr = cfg.threshold(scale);
    let image_of = |a: &Matrix| -> Matrix {
        let mut out = Matrix::zeros(t.n_out(), t.n_out());
        for q in 0..n {
            for p in 0..n {
                out += &images[vec_index(n, p, q)] * a[(p, q)];
            }
        }
        out
    };
    let hit = (0..trials).into_par_iter().find_map_first(|trial| {
        let mut rng = SeededRng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let (ra, rb) = splits[trial % splits.len()];
        let (a, b) = separating::random_zero_product_pair_with(&mut rng, n, ra, rb, cfg).ok()?;
        let a = &a / re(a.norm());
        let b = &b / re(b.norm());
        let violation = (image_of(&a) * image_of(&b)).norm();
        (violation > thr).then(|| Counterexample {
            product_in_norm: (&a * &b).norm(),
            violation_norm: violation,
            a,
            b,
        })
    });
    match hit {
        Some(cx) => Verdict::fail(cx, None),
        None => Verdict::pass(Status::Separating),
    }
}

/// Brute-force test of `L(H) ⊆ R(H)` for a single matrix: random `G` with
/// `G·H = 0` (rows of `G` drawn from the left kernel of `H`), then check
/// `H·G = 0`. Returns `false` at the first `G` that breaks the inclusion.
pub fn brute_force_left_in_right(h: &Matrix, trials: usize, seed: u64, cfg: &FieldConfig) -> bool {
    let n = h.nrows();
    let left_kernel = linalg::kernel_basis(&h.transpose(), cfg);
    if left_kernel.is_empty() {
        return true;
    }
    let k = Matrix::from_columns(&left_kernel);
    let mut rng = rng_from_seed(seed);
    let thr = cfg.threshold(h.norm());
    (0..trials).all(|_| {
        let g = random_matrix(&mut rng, n, k.ncols(), cfg.field()) * k.transpose();
        let g = &g / re(g.norm());
        (h * g).norm() <= thr
    })
}

/// Counts from probing whether invertible separating maps have separating
/// inverses on `M_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InverseExperiment {
    pub candidates: usize,
    pub invertible_separating: usize,
    pub inverse_separating: usize,
}

/// Draws conjugations, perturbed conjugations, transposes and
/// transpose-conjugation composites for `n ∈ 1..=max_n`, keeps the
/// invertible separating ones and tests their inverses.
pub fn inverse_separating_experiment(max_n: usize, seeds: u64, cfg: &FieldConfig) -> InverseExperiment {
    let mut out = InverseExperiment::default();
    for n in 1..=max_n {
        for seed in 0..seeds {
            let base = gen_conjugation(n, seed, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP, cfg)
                .expect("valid parameters")
                .superop()
                .expect("superop")
                .clone();
            let transpose = gen_transpose(n, cfg);
            let composite = crate::superop::compose(&transpose, &base).expect("same size");
            let candidates = [base.clone(), perturb(&base, 1e-3, seed), transpose, composite];
            for t in &candidates {
                out.candidates += 1;
                let Ok((inv, _)) = t.inverse() else { continue };
                if !separating::is_separating_exact(t, cfg).is_pass() {
                    continue;
                }
                out.invertible_separating += 1;
                if separating::is_separating_exact(&inv, cfg).is_pass() {
                    out.inverse_separating += 1;
                }
            }
        }
    }
    out
}
