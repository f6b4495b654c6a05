use std::f64::consts::PI;

use num_complex::Complex64;

use super::matrix::{CMatrix, ZERO};
use super::{lu, EigOptions};
use crate::error::LinalgError;

const MAX_SWEEPS: usize = 100;
const OFFDIAG_REL_TOL: f64 = 1e-14;

/// Eigen-decomposition of a Hermitian matrix.
///
/// `values` are sorted non-increasingly and `vectors` holds the matching unit
/// eigenvectors as columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Spectrum {
    pub fn reconstruct(&self) -> CMatrix {
        let d = CMatrix::from_real_diag(&self.values);
        &(&self.vectors * &d) * &self.vectors.adjoint()
    }

    pub fn vector(&self, j: usize) -> Vec<Complex64> {
        self.vectors.column(j)
    }
}

/// Hermitian eigensolver with default tolerances.
pub fn herm_eig(a: &CMatrix) -> Result<Spectrum, LinalgError> {
    herm_eig_with(a, &EigOptions::default())
}

/// Cyclic complex Jacobi eigensolver.
///
/// Sweeps visit pairs `(p, q)`, `p < q`, in row order. Each rotation removes the
/// phase of `a_pq` with a diagonal unitary and then applies the classical real
/// Jacobi rotation, so the result is bitwise deterministic.
pub fn herm_eig_with(a: &CMatrix, opts: &EigOptions) -> Result<Spectrum, LinalgError> {
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = a.dim();
    let scale = a.frobenius_norm();
    let defect = a.hermitian_defect();
    let bound = opts.herm_tol * scale;
    if defect > bound {
        return Err(LinalgError::NotHermitian { defect, bound });
    }

    let mut w = a.hermitian_part();
    let mut v = CMatrix::identity(n);
    let target = OFFDIAG_REL_TOL * scale;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&w) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut w, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&w) > target {
        return Err(LinalgError::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(j, j)].re.total_cmp(&w[(i, i)].re).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| w[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, |r, c| v[(r, order[c])]);
    let spectrum = Spectrum { values, vectors };

    let residual = (&spectrum.reconstruct() - &a.hermitian_part()).frobenius_norm();
    if residual > opts.tol_eig * (1.0 + scale) {
        return Err(LinalgError::NoConvergence { sweeps: MAX_SWEEPS });
    }
    Ok(spectrum)
}

fn off_diagonal_norm(w: &CMatrix) -> f64 {
    let n = w.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += w[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn rotate(w: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let b = w[(p, q)];
    let babs = b.norm();
    if babs == 0.0 {
        return;
    }
    let phase = b / babs;
    let app = w[(p, p)].re;
    let aqq = w[(q, q)].re;
    let tau = (aqq - app) / (2.0 * babs);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // J = diag(1, conj(phase)) · [[c, s], [-s, c]] on the (p, q) plane.
    let jpp = Complex64::new(c, 0.0);
    let jpq = Complex64::new(s, 0.0);
    let jqp = -phase.conj() * s;
    let jqq = phase.conj() * c;

    let n = w.dim();
    for k in 0..n {
        let wkp = w[(k, p)];
        let wkq = w[(k, q)];
        w[(k, p)] = wkp * jpp + wkq * jqp;
        w[(k, q)] = wkp * jpq + wkq * jqq;
    }
    for k in 0..n {
        let wpk = w[(p, k)];
        let wqk = w[(q, k)];
        w[(p, k)] = jpp.conj() * wpk + jqp.conj() * wqk;
        w[(q, k)] = jpq.conj() * wpk + jqq.conj() * wqk;
    }
    w[(p, q)] = ZERO;
    w[(q, p)] = ZERO;
    w[(p, p)] = Complex64::new(app - t * babs, 0.0);
    w[(q, q)] = Complex64::new(aqq + t * babs, 0.0);

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * jpp + vkq * jqp;
        v[(k, q)] = vkp * jpq + vkq * jqq;
    }
}

/// Smallest gap between consecutive entries of a non-increasing list.
pub fn min_gap(values: &[f64]) -> f64 {
    values.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min)
}

/// Largest singular value, computed from the spectrum of `X*X`.
pub fn op_norm(x: &CMatrix) -> f64 {
    if x.dim() == 1 {
        return x[(0, 0)].norm();
    }
    let gram = &x.adjoint() * x;
    match herm_eig(&gram) {
        Ok(s) => s.values[0].max(0.0).sqrt(),
        // The Gram matrix is Hermitian by construction; fall back to the
        // Frobenius bound if the solver refuses non-finite input.
        Err(_) => x.frobenius_norm(),
    }
}

/// Smallest singular value of `x`.
pub fn min_singular_value(x: &CMatrix) -> f64 {
    let gram = &x.adjoint() * x;
    match herm_eig(&gram) {
        Ok(s) => s.values[s.values.len() - 1].max(0.0).sqrt(),
        Err(_) => 0.0,
    }
}

/// Eigen-decomposition of a unitary matrix.
///
/// `angles` lie in `(−π, π]` and are sorted non-increasingly; `vectors` holds the
/// matching orthonormal eigenvectors as columns.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitarySpectrum {
    pub angles: Vec<f64>,
    pub vectors: CMatrix,
}

impl UnitarySpectrum {
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.angles.iter().map(|&a| Complex64::from_polar(1.0, a)).collect()
    }
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Eigen-decomposition of a unitary matrix through the Cayley transform.
///
/// A rotation `e^{iθ₀}` is chosen so that `I + e^{iθ₀}U` is well conditioned;
/// `C = i(I − W)(I + W)⁻¹` is then Hermitian with eigenvalues `tan(φ/2)`.
pub fn unitary_eig(u: &CMatrix) -> Result<UnitarySpectrum, LinalgError> {
    let n = u.dim();
    let candidates = 2 * n + 2;
    let mut best: Option<(f64, f64)> = None;
    for k in 0..candidates {
        let theta0 = 2.0 * PI * k as f64 / candidates as f64;
        let w = u.scale(Complex64::from_polar(1.0, theta0));
        let smin = min_singular_value(&w.shift(1.0));
        if best.is_none_or(|(_, s)| smin > s) {
            best = Some((theta0, smin));
        }
        if smin >= 0.5 {
            break;
        }
    }
    let (theta0, _) = best.expect("at least one candidate rotation");
    let w = u.scale(Complex64::from_polar(1.0, theta0));
    let (angles_w, vectors) = cayley_eig(&w)?;
    let mut pairs: Vec<(f64, usize)> = angles_w
        .iter()
        .enumerate()
        .map(|(i, a)| (wrap_angle(a - theta0), i))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let angles = pairs.iter().map(|p| p.0).collect();
    let vectors = CMatrix::from_fn(n, |r, c| vectors[(r, pairs[c].1)]);
    Ok(UnitarySpectrum { angles, vectors })
}

/// Eigen-angles in `(−π, π)` and eigenvectors of a unitary `w` with `−1`
/// outside its spectrum.
fn cayley_eig(w: &CMatrix) -> Result<(Vec<f64>, CMatrix), LinalgError> {
    let i = Complex64::new(0.0, 1.0);
    let inv = lu::inverse(&w.shift(1.0))?;
    let minus = &CMatrix::identity(w.dim()) - w;
    let c = (&minus * &inv).scale(i).hermitian_part();
    let s = herm_eig(&c)?;
    let angles = s.values.iter().map(|t| 2.0 * t.atan()).collect();
    Ok((angles, s.vectors))
}

/// `exp(iA)` for Hermitian `A`.
pub fn expm_i_hermitian(a: &CMatrix) -> Result<CMatrix, LinalgError> {
    let s = herm_eig(a)?;
    let d: Vec<Complex64> = s.values.iter().map(|&l| Complex64::from_polar(1.0, l)).collect();
    Ok(&(&s.vectors * &CMatrix::from_diag(&d)) * &s.vectors.adjoint())
}

/// Hermitian `A` with spectrum in `(−π, π)` such that `exp(iA) = w`.
///
/// Requires `−1` to lie outside the spectrum of `w`.
pub fn principal_log_unitary(w: &CMatrix) -> Result<CMatrix, LinalgError> {
    let (angles, v) = cayley_eig(w)?;
    Ok((&(&v * &CMatrix::from_real_diag(&angles)) * &v.adjoint()).hermitian_part())
}
