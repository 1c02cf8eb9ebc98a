//! Maps between algebras of matrix-valued functions on finite point sets.
//!
//! `C(X, M_n)` for a finite discrete `X` is the direct sum of `|X|` copies of
//! `M_n` with pointwise multiplication. A linear map
//! `T: C(X₁, M_n) → C(X₂, M_m)` is stored as a grid of superoperators:
//! `blocks[x₂][x₁]` carries the value at `x₁` to its contribution at `x₂`.
//!
//! Biseparating maps here are pointwise conjugations composed with a
//! bijection of the points, `(T F)(x) = α(x)·S_x·F(φ(x))·S_x⁻¹`. For `n = 1`
//! this is the familiar weighted composition `T f = τ·(f ∘ φ)`.

use std::collections::HashSet;

use thiserror::Error;

use crate::field::FieldConfig;
use crate::linalg::{self, matrix_unit, Matrix};
use crate::separating::{scan_quadric, witness_candidates, Direction, Status, Verdict};
use crate::structure::{self, ConjugationForm, StructureError};
use crate::superop::{Superoperator, SuperopError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuncalgError {
    #[error("point set must not be empty")]
    EmptySpace,
    #[error("duplicate point label {0:?}")]
    DuplicateLabel(String),
    #[error("point label {0:?} must be non-empty and must not contain '/'")]
    BadLabel(String),
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Superop(#[from] SuperopError),
    #[error("output point {point} draws on {} input points ({})", sources.len(), sources.join(", "))]
    NotLocal { point: String, sources: Vec<String> },
    #[error("point map is not a bijection: {0}")]
    PhiNotBijective(String),
    #[error("at point {point}: {source}")]
    PointRecovery { point: String, source: StructureError },
    #[error("residual {residual:e} exceeds tolerance after recovery")]
    ResidualTooLarge { residual: f64 },
    #[error("map is zero at tolerance; residual undefined")]
    DegenerateMap,
    #[error("second function is not zero-or-invertible at every point")]
    NotAiMember,
    #[error("zero product ({product_zero}) disagrees with disjoint supports ({disjoint})")]
    EquivalenceViolated { product_zero: bool, disjoint: bool },
}

impl FuncalgError {
    /// Name of the recovery step that rejected the map.
    pub fn step(&self) -> &'static str {
        match self {
            FuncalgError::NotLocal { .. } => "locality",
            FuncalgError::PhiNotBijective(_) => "phi_bijection",
            FuncalgError::PointRecovery { source, .. } => source.step().as_str(),
            FuncalgError::ResidualTooLarge { .. } | FuncalgError::DegenerateMap => "residual",
            _ => "input",
        }
    }

    /// Stable machine name for reports.
    pub fn kind(&self) -> &'static str {
        match self {
            FuncalgError::EmptySpace => "EmptySpace",
            FuncalgError::DuplicateLabel(_) => "DuplicateLabel",
            FuncalgError::BadLabel(_) => "BadLabel",
            FuncalgError::DimensionMismatch { .. } => "DimensionMismatch",
            FuncalgError::Superop(_) => "Superop",
            FuncalgError::NotLocal { .. } => "NotLocal",
            FuncalgError::PhiNotBijective(_) => "PhiNotBijective",
            FuncalgError::PointRecovery { source, .. } => source.kind(),
            FuncalgError::ResidualTooLarge { .. } => "ResidualTooLarge",
            FuncalgError::DegenerateMap => "DegenerateMap",
            FuncalgError::NotAiMember => "NotAiMember",
            FuncalgError::EquivalenceViolated { .. } => "EquivalenceViolated",
        }
    }
}

/// A finite set of labelled points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteSpace {
    labels: Vec<String>,
}

impl DiscreteSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self, FuncalgError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(FuncalgError::EmptySpace);
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if l.is_empty() || l.contains('/') {
                return Err(FuncalgError::BadLabel(l.clone()));
            }
            if !seen.insert(l.as_str()) {
                return Err(FuncalgError::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self { labels })
    }

    /// `prefix1, …, prefixk`
    pub fn numbered(prefix: &str, k: usize) -> Self {
        Self::new((1..=k).map(|i| format!("{prefix}{i}"))).expect("numbered labels are valid")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, idx: usize) -> &str {
        &self.labels[idx]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// `F: X → M_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFunction {
    space: DiscreteSpace,
    n: usize,
    values: Vec<Matrix>,
}

impl MatrixFunction {
    pub fn new(space: DiscreteSpace, values: Vec<Matrix>) -> Result<Self, FuncalgError> {
        if values.len() != space.len() {
            return Err(FuncalgError::DimensionMismatch {
                what: "number of values",
                expected: space.len(),
                found: values.len(),
            });
        }
        let n = values[0].nrows();
        for v in &values {
            if v.nrows() != n || v.ncols() != n {
                return Err(FuncalgError::DimensionMismatch {
                    what: "value size",
                    expected: n,
                    found: if v.nrows() != n { v.nrows() } else { v.ncols() },
                });
            }
        }
        Ok(Self { space, n, values })
    }

    pub fn zero(space: DiscreteSpace, n: usize) -> Self {
        let values = vec![Matrix::zeros(n, n); space.len()];
        Self { space, n, values }
    }

    /// The function equal to `value` at point `idx` and zero elsewhere.
    pub fn delta(space: DiscreteSpace, idx: usize, value: Matrix) -> Self {
        let mut f = Self::zero(space, value.nrows());
        f.values[idx] = value;
        f
    }

    pub fn constant(space: DiscreteSpace, value: Matrix) -> Self {
        let values = vec![value.clone(); space.len()];
        Self {
            space,
            n: value.nrows(),
            values,
        }
    }

    pub fn space(&self) -> &DiscreteSpace {
        &self.space
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn value(&self, idx: usize) -> &Matrix {
        &self.values[idx]
    }

    /// Pointwise product.
    pub fn mul(&self, other: &MatrixFunction) -> Result<MatrixFunction, FuncalgError> {
        if self.space != other.space || self.n != other.n {
            return Err(FuncalgError::DimensionMismatch {
                what: "function shapes",
                expected: self.space.len() * self.n,
                found: other.space.len() * other.n,
            });
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(MatrixFunction {
            space: self.space.clone(),
            n: self.n,
            values,
        })
    }

    /// `sqrt(Σ_x ‖F(x)‖_F²)`
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt()
    }

    pub fn max_value_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// `c(F) = {x : F(x) ≠ 0}` with nonzero meaning above
/// `threshold(max_x ‖F(x)‖_F)`. Labels come back in point order.
pub fn support(f: &MatrixFunction, cfg: &FieldConfig) -> Vec<String> {
    support_indices(f, cfg)
        .into_iter()
        .map(|i| f.space.label(i).to_string())
        .collect()
}

fn support_indices(f: &MatrixFunction, cfg: &FieldConfig) -> Vec<usize> {
    let scale = f.max_value_norm();
    if scale <= cfg.tol_abs() {
        return Vec::new();
    }
    let thr = cfg.threshold(scale);
    (0..f.values.len()).filter(|&i| f.values[i].norm() > thr).collect()
}

/// Membership in `{H : L(H) ⊆ R(H)}`, i.e. `GH = 0 ⇒ HG = 0` for all `G`.
///
/// In finite dimension this holds exactly when every value is zero or
/// invertible: a singular nonzero `H(x)` admits a rank-one `G` with
/// `G·H(x) = 0` but `H(x)·G ≠ 0`.
pub fn ai_membership(f: &MatrixFunction, cfg: &FieldConfig) -> bool {
    let sup = support_indices(f, cfg);
    sup.iter().all(|&i| linalg::numeric_rank(&f.values[i], cfg) == f.n)
}

/// Checks `F₁·F₂ = 0 ⟺ c(F₁) ∩ c(F₂) = ∅` for `F₂` in the AI set and
/// returns the common truth value.
pub fn zero_product_iff_disjoint_support(
    f1: &MatrixFunction,
    f2: &MatrixFunction,
    cfg: &FieldConfig,
) -> Result<bool, FuncalgError> {
    if !ai_membership(f2, cfg) {
        return Err(FuncalgError::NotAiMember);
    }
    let prod = f1.mul(f2)?;
    let product_zero = prod.max_value_norm() <= cfg.threshold(f1.max_value_norm() * f2.max_value_norm());
    let s1: HashSet<usize> = support_indices(f1, cfg).into_iter().collect();
    let disjoint = support_indices(f2, cfg).iter().all(|i| !s1.contains(i));
    if product_zero != disjoint {
        return Err(FuncalgError::EquivalenceViolated {
            product_zero,
            disjoint,
        });
    }
    Ok(product_zero)
}

/// `T: C(X₁, M_n) → C(X₂, M_m)` as a `|X₂| × |X₁|` grid of superoperators.
#[derive(Debug, Clone, PartialEq)]
pub struct BigSuperoperator {
    x_in: DiscreteSpace,
    x_out: DiscreteSpace,
    n: usize,
    m: usize,
    /// row-major: `blocks[x2 * k1 + x1]`
    blocks: Vec<Superoperator>,
    cfg: FieldConfig,
}

impl BigSuperoperator {
    /// `blocks` is indexed `[x2][x1]`.
    pub fn new(
        x_in: DiscreteSpace,
        x_out: DiscreteSpace,
        blocks: Vec<Vec<Superoperator>>,
        cfg: FieldConfig,
    ) -> Result<Self, FuncalgError> {
        let (k1, k2) = (x_in.len(), x_out.len());
        if blocks.len() != k2 {
            return Err(FuncalgError::DimensionMismatch {
                what: "block rows (output points)",
                expected: k2,
                found: blocks.len(),
            });
        }
        let n = blocks[0].first().map(|b| b.n_in()).unwrap_or(0);
        let m = blocks[0].first().map(|b| b.n_out()).unwrap_or(0);
        let mut flat = Vec::with_capacity(k1 * k2);
        for row in blocks {
            if row.len() != k1 {
                return Err(FuncalgError::DimensionMismatch {
                    what: "block columns (input points)",
                    expected: k1,
                    found: row.len(),
                });
            }
            for b in row {
                if b.n_in() != n || b.n_out() != m {
                    return Err(FuncalgError::DimensionMismatch {
                        what: "block shape",
                        expected: n,
                        found: b.n_in(),
                    });
                }
                flat.push(b.with_cfg(cfg));
            }
        }
        Ok(Self {
            x_in,
            x_out,
            n,
            m,
            blocks: flat,
            cfg,
        })
    }

    /// All blocks zero.
    pub fn zero(x_in: DiscreteSpace, x_out: DiscreteSpace, n: usize, m: usize, cfg: FieldConfig) -> Self {
        let blocks = vec![Superoperator::zero(n, m, cfg); x_in.len() * x_out.len()];
        Self {
            x_in,
            x_out,
            n,
            m,
            blocks,
            cfg,
        }
    }

    pub fn x_in(&self) -> &DiscreteSpace {
        &self.x_in
    }

    pub fn x_out(&self) -> &DiscreteSpace {
        &self.x_out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn cfg(&self) -> &FieldConfig {
        &self.cfg
    }

    pub fn block(&self, x2: usize, x1: usize) -> &Superoperator {
        &self.blocks[x2 * self.x_in.len() + x1]
    }

    pub fn set_block(&mut self, x2: usize, x1: usize, block: Superoperator) -> Result<(), FuncalgError> {
        if block.n_in() != self.n || block.n_out() != self.m {
            return Err(FuncalgError::DimensionMismatch {
                what: "block shape",
                expected: self.n,
                found: block.n_in(),
            });
        }
        let k1 = self.x_in.len();
        self.blocks[x2 * k1 + x1] = block.with_cfg(self.cfg);
        Ok(())
    }

    /// `(T F)(x₂) = Σ_{x₁} blocks[x₂][x₁](F(x₁))`
    pub fn apply_fn(&self, f: &MatrixFunction) -> Result<MatrixFunction, FuncalgError> {
        if f.space != self.x_in || f.n != self.n {
            return Err(FuncalgError::DimensionMismatch {
                what: "input function",
                expected: self.x_in.len() * self.n,
                found: f.space.len() * f.n,
            });
        }
        let k1 = self.x_in.len();
        let values = (0..self.x_out.len())
            .map(|x2| {
                (0..k1).fold(Matrix::zeros(self.m, self.m), |acc, x1| {
                    acc + self.block(x2, x1).apply(&f.values[x1]).expect("shape checked")
                })
            })
            .collect();
        MatrixFunction::new(self.x_out.clone(), values)
    }

    /// The whole map as a `k₂m² × k₁n²` matrix, points outermost.
    pub fn to_dense(&self) -> Matrix {
        let (k1, k2) = (self.x_in.len(), self.x_out.len());
        let (ci, ro) = (self.n * self.n, self.m * self.m);
        let mut dense = Matrix::zeros(k2 * ro, k1 * ci);
        for x2 in 0..k2 {
            for x1 in 0..k1 {
                dense.view_mut((x2 * ro, x1 * ci), (ro, ci)).copy_from(self.block(x2, x1).mat());
            }
        }
        dense
    }

    pub fn from_dense(
        x_in: DiscreteSpace,
        x_out: DiscreteSpace,
        n: usize,
        m: usize,
        dense: &Matrix,
        cfg: FieldConfig,
    ) -> Result<Self, FuncalgError> {
        let (k1, k2) = (x_in.len(), x_out.len());
        let (ci, ro) = (n * n, m * m);
        if dense.shape() != (k2 * ro, k1 * ci) {
            return Err(FuncalgError::DimensionMismatch {
                what: "dense matrix rows",
                expected: k2 * ro,
                found: dense.nrows(),
            });
        }
        let mut blocks = Vec::with_capacity(k2);
        for x2 in 0..k2 {
            let mut row = Vec::with_capacity(k1);
            for x1 in 0..k1 {
                let mat = dense.view((x2 * ro, x1 * ci), (ro, ci)).into_owned();
                row.push(Superoperator::new(n, m, mat, cfg)?);
            }
            blocks.push(row);
        }
        Self::new(x_in, x_out, blocks, cfg)
    }

    /// Inverse map `C(X₂, M_m) → C(X₁, M_n)` and its condition number.
    pub fn inverse(&self) -> Result<(BigSuperoperator, f64), FuncalgError> {
        let (inv, cond) = linalg::invert(&self.to_dense(), &self.cfg)
            .map_err(|e| FuncalgError::Superop(SuperopError::Singular(e)))?;
        let map = Self::from_dense(self.x_out.clone(), self.x_in.clone(), self.m, self.n, &inv, self.cfg)?;
        Ok((map, cond))
    }

    /// Largest Frobenius norm of a block matrix.
    pub fn max_block_norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.mat().norm()).fold(0.0, f64::max)
    }

    /// Largest `‖blocks[x₂][x₁](E_ij)‖_F` over everything.
    pub fn max_image_norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_image_norm()).fold(0.0, f64::max)
    }

    /// Output points reached by input point `x1`.
    fn reach(&self, x1: usize, thr: f64) -> Vec<usize> {
        (0..self.x_out.len())
            .filter(|&x2| self.block(x2, x1).mat().norm() > thr)
            .collect()
    }
}

/// Pair of functions with disjoint supports (resp. zero product) whose
/// images violate the corresponding condition at `point`.
#[derive(Debug, Clone, PartialEq)]
pub struct FnCounterexample {
    pub f1: MatrixFunction,
    pub f2: MatrixFunction,
    /// Output point where the violation shows.
    pub point: String,
    /// `max_x ‖F₁(x)·F₂(x)‖_F` (algebraic check) or
    /// `max_x ‖F₁(x)‖‖F₂(x)‖` (strict check).
    pub product_in_norm: f64,
    pub violation_norm: f64,
}

/// Basis unit `(p, q)` with the largest image under `block`; ties go to the
/// lowest column-major index.
fn dominant_unit(block: &Superoperator) -> (usize, usize) {
    let n = block.n_in();
    let mut best = (0, 0);
    let mut best_norm = -1.0;
    for q in 0..n {
        for p in 0..n {
            let v = block.image_of_unit(p, q).norm();
            if v > best_norm {
                best = (p, q);
                best_norm = v;
            }
        }
    }
    best
}

/// Whether functions with disjoint supports always have images with
/// disjoint supports. Exact: it holds iff no output point is reached from
/// two different input points.
pub fn is_strictly_separating(t: &BigSuperoperator, cfg: &FieldConfig) -> Verdict<FnCounterexample> {
    let thr = cfg.threshold(t.max_block_norm());
    let k1 = t.x_in.len();
    let reaches: Vec<Vec<usize>> = (0..k1).map(|x1| t.reach(x1, thr)).collect();
    for x1 in 0..k1 {
        for y1 in x1 + 1..k1 {
            if let Some(&x2) = reaches[x1].iter().find(|x2| reaches[y1].contains(x2)) {
                let (p, q) = dominant_unit(t.block(x2, x1));
                let (r, s) = dominant_unit(t.block(x2, y1));
                let f1 = MatrixFunction::delta(t.x_in.clone(), x1, matrix_unit(t.n, p, q));
                let f2 = MatrixFunction::delta(t.x_in.clone(), y1, matrix_unit(t.n, r, s));
                let g1 = t.apply_fn(&f1).expect("shape");
                let g2 = t.apply_fn(&f2).expect("shape");
                let product_in_norm = f1
                    .values
                    .iter()
                    .zip(&f2.values)
                    .map(|(a, b)| a.norm() * b.norm())
                    .fold(0.0, f64::max);
                let violation_norm = g1.values[x2].norm() * g2.values[x2].norm();
                return Verdict::fail(
                    FnCounterexample {
                        f1,
                        f2,
                        point: t.x_out.label(x2).to_string(),
                        product_in_norm,
                        violation_norm,
                    },
                    None,
                );
            }
        }
    }
    Verdict::pass(Status::Separating)
}

fn lifted_witness(
    t: &BigSuperoperator,
    f1: MatrixFunction,
    f2: MatrixFunction,
    point: usize,
) -> FnCounterexample {
    let product_in_norm = f1.mul(&f2).expect("same shape").max_value_norm();
    let violation = t
        .apply_fn(&f1)
        .expect("shape")
        .mul(&t.apply_fn(&f2).expect("shape"))
        .expect("same shape");
    FnCounterexample {
        point: t.x_out.label(point).to_string(),
        product_in_norm,
        violation_norm: violation.norm(),
        f1,
        f2,
    }
}

/// Exact check of `F·G = 0 ⇒ T(F)·T(G) = 0` on the direct-sum algebra.
///
/// Splitting `F = Σ δ_x F(x)` reduces it to (a) images of units at distinct
/// input points multiplying to zero everywhere, and (b) for each input
/// point, the single-algebra quadric reduction with function-valued output.
pub fn is_separating_fn(t: &BigSuperoperator, cfg: &FieldConfig) -> Verdict<FnCounterexample> {
    let (k1, k2) = (t.x_in.len(), t.x_out.len());
    let n = t.n;
    let nn = n * n;
    // images[x1][x2][j]
    let images: Vec<Vec<Vec<Matrix>>> = (0..k1)
        .map(|x1| (0..k2).map(|x2| t.block(x2, x1).basis_images()).collect())
        .collect();
    let scale = t.max_image_norm().powi(2);
    let thr = cfg.threshold(scale);

    // ‖AB‖_F ≤ ‖A‖_F‖B‖_F lets whole block pairs be skipped
    let block_max: Vec<Vec<f64>> = (0..k1)
        .map(|x1| (0..k2).map(|x2| t.block(x2, x1).max_image_norm()).collect())
        .collect();
    for x1 in 0..k1 {
        for y1 in 0..k1 {
            if x1 == y1 {
                continue;
            }
            for x2 in 0..k2 {
                if block_max[x1][x2] * block_max[y1][x2] <= thr {
                    continue;
                }
                for j in 0..nn {
                    for jj in 0..nn {
                        let prod = &images[x1][x2][j] * &images[y1][x2][jj];
                        if prod.norm() > thr {
                            let unit = |idx: usize| matrix_unit(n, idx % n, idx / n);
                            let f1 = MatrixFunction::delta(t.x_in.clone(), x1, unit(j));
                            let f2 = MatrixFunction::delta(t.x_in.clone(), y1, unit(jj));
                            return Verdict::fail(lifted_witness(t, f1, f2, x2), None);
                        }
                    }
                }
            }
        }
    }

    if n > 1 {
        for (x1, imgs) in images.iter().enumerate() {
            if let Some(v) = scan_quadric(imgs, n, cfg, scale) {
                let mut best: Option<FnCounterexample> = None;
                for (a, b) in witness_candidates(&v, n) {
                    let f1 = MatrixFunction::delta(t.x_in.clone(), x1, a);
                    let f2 = MatrixFunction::delta(t.x_in.clone(), x1, b);
                    let cx = lifted_witness(t, f1, f2, v.output);
                    if cx.violation_norm > thr {
                        return Verdict::fail(cx, None);
                    }
                    if best.as_ref().is_none_or(|b| cx.violation_norm > b.violation_norm) {
                        best = Some(cx);
                    }
                }
                return Verdict::fail(best.expect("witness"), None);
            }
        }
    }
    Verdict::pass(Status::Separating)
}

/// Invertible, separating, with separating inverse.
pub fn is_biseparating_fn(t: &BigSuperoperator, cfg: &FieldConfig) -> Verdict<FnCounterexample> {
    let Ok((inv, _)) = t.inverse() else {
        return Verdict::not_invertible();
    };
    for (map, direction) in [(t, Direction::Forward), (&inv, Direction::Inverse)] {
        let v = is_separating_fn(map, cfg);
        if let Some(cx) = v.counterexample {
            return Verdict::fail(cx, Some(direction));
        }
    }
    Verdict::pass(Status::Biseparating)
}

/// `(T F)(x) = α(x)·S_x·F(φ(x))·S_x⁻¹`
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseForm {
    x_in: DiscreteSpace,
    x_out: DiscreteSpace,
    /// `phi[x2] = x1`
    phi: Vec<usize>,
    forms: Vec<ConjugationForm>,
}

impl PointwiseForm {
    pub fn new(
        x_in: DiscreteSpace,
        x_out: DiscreteSpace,
        phi: Vec<usize>,
        forms: Vec<ConjugationForm>,
    ) -> Result<Self, FuncalgError> {
        if x_in.len() != x_out.len() {
            return Err(FuncalgError::PhiNotBijective(format!(
                "{} input points vs {} output points",
                x_in.len(),
                x_out.len()
            )));
        }
        if phi.len() != x_out.len() || forms.len() != x_out.len() {
            return Err(FuncalgError::DimensionMismatch {
                what: "pointwise form length",
                expected: x_out.len(),
                found: phi.len().min(forms.len()),
            });
        }
        let mut hit = vec![false; x_in.len()];
        for &x1 in &phi {
            if x1 >= x_in.len() || hit[x1] {
                return Err(FuncalgError::PhiNotBijective(format!(
                    "input point index {x1} is hit twice or out of range"
                )));
            }
            hit[x1] = true;
        }
        let n = forms[0].n();
        if forms.iter().any(|f| f.n() != n) {
            return Err(FuncalgError::DimensionMismatch {
                what: "per-point matrix size",
                expected: n,
                found: forms.iter().map(|f| f.n()).find(|&k| k != n).unwrap_or(n),
            });
        }
        Ok(Self {
            x_in,
            x_out,
            phi,
            forms,
        })
    }

    pub fn x_in(&self) -> &DiscreteSpace {
        &self.x_in
    }

    pub fn x_out(&self) -> &DiscreteSpace {
        &self.x_out
    }

    pub fn n(&self) -> usize {
        self.forms[0].n()
    }

    pub fn phi(&self) -> &[usize] {
        &self.phi
    }

    /// `(φ(x₂) label, x₂ label)` pairs in output order.
    pub fn phi_table(&self) -> Vec<(String, String)> {
        self.phi
            .iter()
            .enumerate()
            .map(|(x2, &x1)| (self.x_out.label(x2).to_string(), self.x_in.label(x1).to_string()))
            .collect()
    }

    pub fn form(&self, x2: usize) -> &ConjugationForm {
        &self.forms[x2]
    }

    pub fn forms(&self) -> &[ConjugationForm] {
        &self.forms
    }

    /// The block superoperator realizing this form.
    pub fn to_big_superop(&self, cfg: FieldConfig) -> Result<BigSuperoperator, FuncalgError> {
        let n = self.n();
        let mut t = BigSuperoperator::zero(self.x_in.clone(), self.x_out.clone(), n, n, cfg);
        for (x2, form) in self.forms.iter().enumerate() {
            let block = crate::superop::conjugation_superop(form.alpha(), form.s(), cfg)?;
            t.set_block(x2, self.phi[x2], block)?;
        }
        Ok(t)
    }
}

pub fn recover_pointwise(t: &BigSuperoperator, cfg: &FieldConfig) -> Result<PointwiseForm, FuncalgError> {
    if t.n != t.m {
        return Err(FuncalgError::DimensionMismatch {
            what: "matrix size (n vs m)",
            expected: t.n,
            found: t.m,
        });
    }
    let (k1, k2) = (t.x_in.len(), t.x_out.len());
    if k1 != k2 {
        return Err(FuncalgError::PhiNotBijective(format!(
            "{k1} input points vs {k2} output points"
        )));
    }
    let thr = cfg.threshold(t.max_block_norm());
    let mut phi = Vec::with_capacity(k2);
    for x2 in 0..k2 {
        let sources: Vec<usize> = (0..k1).filter(|&x1| t.block(x2, x1).mat().norm() > thr).collect();
        if sources.len() != 1 {
            return Err(FuncalgError::NotLocal {
                point: t.x_out.label(x2).to_string(),
                sources: sources.iter().map(|&i| t.x_in.label(i).to_string()).collect(),
            });
        }
        phi.push(sources[0]);
    }
    let mut hit = vec![None; k1];
    for (x2, &x1) in phi.iter().enumerate() {
        if let Some(prev) = hit[x1] {
            return Err(FuncalgError::PhiNotBijective(format!(
                "{} and {} both draw on {}",
                t.x_out.label(prev),
                t.x_out.label(x2),
                t.x_in.label(x1)
            )));
        }
        hit[x1] = Some(x2);
    }
    let forms = phi
        .iter()
        .enumerate()
        .map(|(x2, &x1)| {
            structure::recover_conjugation(t.block(x2, x1), cfg).map_err(|source| FuncalgError::PointRecovery {
                point: t.x_out.label(x2).to_string(),
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let form = PointwiseForm::new(t.x_in.clone(), t.x_out.clone(), phi, forms)?;
    let residual = verify_pointwise(t, &form, cfg)?;
    if residual > structure::residual_tolerance(cfg) {
        return Err(FuncalgError::ResidualTooLarge { residual });
    }
    Ok(form)
}

/// Largest deviation from the form over all points and basis units,
/// including any mass in blocks off the graph of `φ`, relative to the
/// largest block image.
pub fn verify_pointwise(t: &BigSuperoperator, form: &PointwiseForm, cfg: &FieldConfig) -> Result<f64, FuncalgError> {
    if t.x_in != form.x_in || t.x_out != form.x_out || t.n != form.n() || t.m != form.n() {
        return Err(FuncalgError::DimensionMismatch {
            what: "form shape",
            expected: t.x_out.len() * t.n,
            found: form.x_out.len() * form.n(),
        });
    }
    let scale = t.max_image_norm();
    if scale <= cfg.tol_abs() {
        return Err(FuncalgError::DegenerateMap);
    }
    let n = t.n;
    let mut worst: f64 = 0.0;
    for x2 in 0..t.x_out.len() {
        for x1 in 0..t.x_in.len() {
            let block = t.block(x2, x1);
            if x1 == form.phi[x2] {
                let f = &form.forms[x2];
                for q in 0..n {
                    for p in 0..n {
                        let diff = block.image_of_unit(p, q) - f.apply(&matrix_unit(n, p, q));
                        worst = worst.max(diff.norm());
                    }
                }
            } else {
                worst = worst.max(block.max_image_norm());
            }
        }
    }
    Ok(worst / scale)
}
