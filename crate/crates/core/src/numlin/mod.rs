//! Dense complex linear algebra for small matrices (`n` up to a few dozen).

mod eigen;
mod lu;
mod matrix;

use num_complex::Complex64;

pub use eigen::{
    expm_i_hermitian, herm_eig, herm_eig_with, min_gap, min_singular_value, op_norm, principal_log_unitary,
    unitary_eig, wrap_angle, Spectrum, UnitarySpectrum,
};
pub use lu::{det, det_tr, inverse};
pub use matrix::{inner, vec_norm, CMatrix};

use crate::error::LinalgError;

pub const HERM_TOL: f64 = 1e-10;
pub const SING_TOL: f64 = 1e-12;
pub const TOL_EIG: f64 = 1e-10;

/// Tolerances for [`herm_eig_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigOptions {
    /// Relative bound on `‖A − A*‖` accepted as Hermitian.
    pub herm_tol: f64,
    /// Relative bound on the reconstruction residual.
    pub tol_eig: f64,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            herm_tol: HERM_TOL,
            tol_eig: TOL_EIG,
        }
    }
}

/// Phase convention of the reflector built by [`householder_to_e1`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PhaseConvention {
    /// `w = v + e^{iφ}e₁` with `φ = arg(v₁)`; avoids cancellation.
    #[default]
    CancellationAvoiding,
    /// `w = v − e^{iφ}e₁`, so `U·v = e^{i·arg(v₁)}e₁`; loses accuracy when
    /// `v` is close to `e^{iφ}e₁`.
    Aligned,
}

/// Unitary `U` with `U·v = e^{iφ}·e₁` for a unit vector `v`; returns `(U, φ)`.
///
/// When `v` is already a multiple of `e₁` the identity is returned.
pub fn householder_to_e1(v: &[Complex64], convention: PhaseConvention) -> Result<(CMatrix, f64), LinalgError> {
    let m = v.len();
    let norm = vec_norm(v);
    if norm < SING_TOL || !norm.is_finite() {
        return Err(LinalgError::ZeroVector { norm });
    }
    let base = if v[0].norm() > 0.0 { v[0].arg() } else { 0.0 };
    let phi = match convention {
        PhaseConvention::CancellationAvoiding => base,
        PhaseConvention::Aligned => base + std::f64::consts::PI,
    };
    if v[1..].iter().all(|x| x.norm() == 0.0) {
        return Ok((CMatrix::identity(m), v[0].arg()));
    }
    let mut w: Vec<Complex64> = v.iter().map(|x| x / norm).collect();
    w[0] += Complex64::from_polar(1.0, phi);
    let ww = vec_norm(&w).powi(2);
    let h = CMatrix::from_fn(m, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        Complex64::new(delta, 0.0) - w[i] * w[j].conj() * (2.0 / ww)
    });
    // H v = −e^{iφ} e₁
    Ok((h, wrap_angle(phi + std::f64::consts::PI)))
}

/// Unitary factor `X (X*X)^{−1/2}` of the polar decomposition.
pub fn polar_unitary(x: &CMatrix) -> Result<CMatrix, LinalgError> {
    polar_unitary_with(x, SING_TOL)
}

pub fn polar_unitary_with(x: &CMatrix, sing_tol: f64) -> Result<CMatrix, LinalgError> {
    let gram = &x.adjoint() * x;
    let s = herm_eig(&gram)?;
    let smallest = s.values[s.values.len() - 1];
    let sigma_min = smallest.max(0.0).sqrt();
    if sigma_min <= sing_tol {
        return Err(LinalgError::Singular { sigma_min });
    }
    let inv_sqrt: Vec<f64> = s.values.iter().map(|l| 1.0 / l.sqrt()).collect();
    let root = &(&s.vectors * &CMatrix::from_real_diag(&inv_sqrt)) * &s.vectors.adjoint();
    Ok(x * &root)
}
