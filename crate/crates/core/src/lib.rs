//! Separating and biseparating linear maps between matrix algebras.
//!
//! A linear map `T: M_n → M_m` is *separating* when `AB = 0` implies
//! `T(A)T(B) = 0`, and *biseparating* when it is bijective and its inverse
//! is separating too. On full matrix algebras every biseparating map has the
//! form `A ↦ α·S·A·S⁻¹`; on functions from a finite point set into `M_n` it
//! acts pointwise as such a conjugation composed with a permutation of the
//! points.
//!
//! Modules:
//! - [`linalg`]: dense primitives and tolerance-governed rank decisions.
//! - [`superop`]: maps `M_n → M_m` as vectorized matrices.
//! - [`separating`]: exact and sampled property checks with counterexamples.
//! - [`structure`]: recovery and verification of the conjugation form.
//! - [`funcalg`]: the same for maps between matrix-valued functions.
//! - [`harness`]: seeded instance generators and brute-force oracles.

pub mod field;
pub mod funcalg;
pub mod harness;
pub mod linalg;
pub mod sampling;
pub mod separating;
pub mod structure;
pub mod superop;

pub use field::{Field, FieldConfig};
pub use linalg::{Covector, Matrix, Scalar, Vector};
pub use separating::{Counterexample, Direction, Status, Verdict};
pub use superop::Superoperator;
