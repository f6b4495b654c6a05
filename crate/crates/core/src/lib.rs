//! Approximate diagonalization of continuous fields of Hermitian and unitary
//! matrices sampled on meshes of compact parameter spaces, together with
//! detectors for the topological obstructions (Chern and winding numbers)
//! that prevent it.
//!
//! The pipeline for a Hermitian field `A` is:
//!
//! 1. [`reduce::tridiagonalize`] conjugates `A` to tridiagonal form with a
//!    positive subdiagonal, perturbing column tails so they never vanish;
//! 2. [`reduce::distinct_spectrum_perturbation`] adjusts the last two rows so
//!    the spectrum is simple at every node;
//! 3. [`bundle::eigenframes`] and [`bundle::trivialize`] pick globally
//!    continuous eigenvectors, failing exactly when a Chern number is nonzero;
//! 4. [`bundle::assemble_unitary`] stacks them into the diagonalizing unitary.
//!
//! [`diag`] wires these together and produces a [`diag::DiagonalizationReport`].

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod diag;
pub mod error;
pub mod field;
pub mod mesh;
pub mod models;
pub mod numlin;
pub mod reduce;

pub use error::{Error, LinalgError, Obstruction, Result};
pub use num_complex::Complex64;
