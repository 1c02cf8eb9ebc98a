//! Recovery of the canonical form `T(A) = α·S·A·S⁻¹` of a biseparating map.
//!
//! The recovery is constructive and follows the rank-one probes:
//!
//! 1. `T` must send rank-one operators to rank-one operators.
//! 2. `T(E_11) = s_1 ⊗ f*`; `f*` is the covector shared by every `T(e ⊗ e_1*)`.
//! 3. Each `T(E_i1)` must factor as `s_i ⊗ f*` with the *same* `f*`; the
//!    vectors `s_i` are the columns of `S`.
//! 4. `S` must be invertible.
//! 5. `T(I) = α·I` gives `α` (the identity lies in every standard algebra).
//! 6. The candidate is checked against every basis image.
//!
//! Step 6 stands in for the argument that agreement on rank-ones extends to
//! the whole algebra: in finite dimension the basis is a finite test set.

use std::fmt;

use thiserror::Error;

use crate::field::FieldConfig;
use crate::linalg::{self, leading_phase, matrix_unit, re, Covector, LinalgError, Matrix, Scalar};
use crate::sampling::{random_vector, rng_from_seed};
use crate::superop::Superoperator;

/// Seed of the random rank-one probes used by [`check_rank_one_preserving`].
pub const RANK_ONE_PROBE_SEED: u64 = 0x5eed_0001;
pub const RANK_ONE_PROBES: usize = 20;

/// The step of the recovery that rejected the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecoveryStep {
    RankOnePreserving,
    ColumnFactorization,
    InvertS,
    IdentityImage,
    Residual,
}

impl RecoveryStep {
    pub fn as_str(self) -> &'static str {
        match self {
            RecoveryStep::RankOnePreserving => "rank_one_preserving",
            RecoveryStep::ColumnFactorization => "column_factorization",
            RecoveryStep::InvertS => "invert_s",
            RecoveryStep::IdentityImage => "identity_image",
            RecoveryStep::Residual => "residual",
        }
    }
}

impl fmt::Display for RecoveryStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StructureError {
    #[error("dimension mismatch: map is M_{n_in} -> M_{n_out}")]
    DimensionMismatch { n_in: usize, n_out: usize },
    #[error("map does not preserve rank one: {probe} has image of rank {rank}")]
    NotRankOnePreserving { probe: String, rank: usize },
    #[error("image of E_{{{column},1}} does not share the covector of T(E_11) (residual {residual:e})")]
    NotFactorizable { column: usize, residual: f64 },
    #[error("recovered S is not invertible: {0}")]
    NotInvertibleS(LinalgError),
    #[error("not of the form alpha*S*A*S^-1 at step {step} (residual {residual:e})")]
    NotStandardForm { step: RecoveryStep, residual: f64 },
    #[error("map is zero at tolerance; residual undefined")]
    DegenerateMap,
}

impl StructureError {
    pub fn step(&self) -> RecoveryStep {
        match self {
            StructureError::DimensionMismatch { .. } => RecoveryStep::RankOnePreserving,
            StructureError::NotRankOnePreserving { .. } => RecoveryStep::RankOnePreserving,
            StructureError::NotFactorizable { .. } => RecoveryStep::ColumnFactorization,
            StructureError::NotInvertibleS(_) => RecoveryStep::InvertS,
            StructureError::NotStandardForm { step, .. } => *step,
            StructureError::DegenerateMap => RecoveryStep::Residual,
        }
    }

    /// Stable machine name for reports.
    pub fn kind(&self) -> &'static str {
        match self {
            StructureError::DimensionMismatch { .. } => "DimensionMismatch",
            StructureError::NotRankOnePreserving { .. } => "NotRankOnePreserving",
            StructureError::NotFactorizable { .. } => "NotFactorizable",
            StructureError::NotInvertibleS(_) => "NotInvertibleS",
            StructureError::NotStandardForm { .. } => "NotStandardForm",
            StructureError::DegenerateMap => "DegenerateMap",
        }
    }
}

/// Brings `S` to the canonical gauge: `‖S‖_F = √n` and the first entry in
/// column-major order with modulus above `tol_abs` real positive.
pub fn gauge_normalize(s: &Matrix, cfg: &FieldConfig) -> Matrix {
    let n = s.nrows() as f64;
    let norm = s.norm();
    if norm == 0.0 {
        return s.clone();
    }
    let scaled = s * re(n.sqrt() / norm);
    let phase = leading_phase(scaled.iter(), cfg.tol_abs());
    scaled / phase
}

/// `(α, S)` with `S` in the canonical gauge.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugationForm {
    alpha: Scalar,
    s: Matrix,
    s_inv: Matrix,
}

impl ConjugationForm {
    /// Normalizes `S` into the gauge; `α` is unaffected since the form is
    /// invariant under `S ↦ cS`.
    pub fn new(alpha: Scalar, s: &Matrix, cfg: &FieldConfig) -> Result<Self, StructureError> {
        if !s.is_square() {
            return Err(StructureError::DimensionMismatch {
                n_in: s.nrows(),
                n_out: s.ncols(),
            });
        }
        if alpha.norm() <= cfg.tol_abs() {
            return Err(StructureError::NotStandardForm {
                step: RecoveryStep::IdentityImage,
                residual: alpha.norm(),
            });
        }
        let s = gauge_normalize(s, cfg);
        let (s_inv, _) = linalg::invert(&s, cfg).map_err(StructureError::NotInvertibleS)?;
        Ok(Self { alpha, s, s_inv })
    }

    pub fn alpha(&self) -> Scalar {
        self.alpha
    }

    pub fn s(&self) -> &Matrix {
        &self.s
    }

    pub fn s_inv(&self) -> &Matrix {
        &self.s_inv
    }

    pub fn n(&self) -> usize {
        self.s.nrows()
    }

    /// `α·S·A·S⁻¹`
    pub fn apply(&self, a: &Matrix) -> Matrix {
        &self.s * a * &self.s_inv * self.alpha
    }
}

/// The covector-side companion of `S`: `T(u ⊗ f) = S u ⊗ Ψ f`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiMap {
    pub mat: Matrix,
}

impl PsiMap {
    pub fn apply(&self, f: &Covector) -> Covector {
        Covector::new(&self.mat * f.entries())
    }
}

/// `Ψ = α·(S⁻¹)ᵀ`, so that `Sᵀ∘Ψ = α·Id`.
pub fn psi_of(form: &ConjugationForm) -> PsiMap {
    PsiMap {
        mat: form.s_inv.transpose() * form.alpha,
    }
}

fn rank_one_probe_failure(t: &Superoperator, cfg: &FieldConfig) -> Option<(String, usize)> {
    let n = t.n_in();
    for q in 0..n {
        for p in 0..n {
            let rank = linalg::numeric_rank(&t.image_of_unit(p, q), cfg);
            if rank != 1 {
                return Some((format!("E_{{{},{}}}", p + 1, q + 1), rank));
            }
        }
    }
    let mut rng = rng_from_seed(RANK_ONE_PROBE_SEED);
    for k in 0..RANK_ONE_PROBES {
        let u = random_vector(&mut rng, n, cfg.field());
        let f = Covector::new(random_vector(&mut rng, n, cfg.field()));
        let probe = linalg::outer(&u, &f).expect("same dimension");
        let rank = linalg::numeric_rank(&t.apply(&probe).expect("shape"), cfg);
        if rank != 1 {
            return Some((format!("random rank-one probe {k}"), rank));
        }
    }
    None
}

/// Whether every basis unit and 20 seeded random rank-one matrices have
/// rank-one images.
pub fn check_rank_one_preserving(t: &Superoperator, cfg: &FieldConfig) -> bool {
    rank_one_probe_failure(t, cfg).is_none()
}

pub fn recover_conjugation(t: &Superoperator, cfg: &FieldConfig) -> Result<ConjugationForm, StructureError> {
    let n = t.n_in();
    if n != t.n_out() {
        return Err(StructureError::DimensionMismatch {
            n_in: n,
            n_out: t.n_out(),
        });
    }
    if n == 1 {
        let alpha = t.mat()[(0, 0)];
        return ConjugationForm::new(alpha, &Matrix::identity(1, 1), cfg);
    }

    if let Some((probe, rank)) = rank_one_probe_failure(t, cfg) {
        return Err(StructureError::NotRankOnePreserving { probe, rank });
    }

    let first = linalg::rank_one_factor(&t.image_of_unit(0, 0), cfg).map_err(|_| {
        StructureError::NotRankOnePreserving {
            probe: "E_{1,1}".into(),
            rank: 0,
        }
    })?;
    let f = first.f;
    // ties resolve to the lowest index
    let w = (0..n).fold(0, |best, a| {
        if f.entries()[a].norm() > f.entries()[best].norm() {
            a
        } else {
            best
        }
    });
    let fw = f.entries()[w];

    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        let image = t.image_of_unit(i, 0);
        let col = image.column(w) / fw;
        let residual = (&image - &col * f.entries().transpose()).norm();
        if residual > cfg.threshold(image.norm()) {
            return Err(StructureError::NotFactorizable {
                column: i + 1,
                residual,
            });
        }
        s.set_column(i, &col);
    }
    linalg::invert(&s, cfg).map_err(StructureError::NotInvertibleS)?;

    let t_id = t.apply(&Matrix::identity(n, n)).expect("shape");
    let alpha = t_id.trace() / re(n as f64);
    let id_residual = (&t_id - Matrix::identity(n, n) * alpha).norm();
    if id_residual > cfg.threshold(t_id.norm()) || alpha.norm() <= cfg.tol_abs() {
        return Err(StructureError::NotStandardForm {
            step: RecoveryStep::IdentityImage,
            residual: id_residual,
        });
    }

    let form = ConjugationForm::new(alpha, &s, cfg)?;
    let residual = verify_form(t, &form, cfg)?;
    if residual > residual_tolerance(cfg) {
        return Err(StructureError::NotStandardForm {
            step: RecoveryStep::Residual,
            residual,
        });
    }
    Ok(form)
}

/// Largest relative residual accepted by [`recover_conjugation`].
pub fn residual_tolerance(cfg: &FieldConfig) -> f64 {
    cfg.tol_rel()
}

/// `max_ij ‖T(E_ij) − α·S·E_ij·S⁻¹‖_F / max_ij ‖T(E_ij)‖_F`.
pub fn verify_form(t: &Superoperator, form: &ConjugationForm, cfg: &FieldConfig) -> Result<f64, StructureError> {
    let n = t.n_in();
    if n != t.n_out() || n != form.n() {
        return Err(StructureError::DimensionMismatch {
            n_in: n,
            n_out: form.n(),
        });
    }
    let scale = t.max_image_norm();
    if scale <= cfg.tol_abs() {
        return Err(StructureError::DegenerateMap);
    }
    let mut worst: f64 = 0.0;
    for q in 0..n {
        for p in 0..n {
            let diff = t.image_of_unit(p, q) - form.apply(&matrix_unit(n, p, q));
            worst = worst.max(diff.norm());
        }
    }
    Ok(worst / scale)
}
