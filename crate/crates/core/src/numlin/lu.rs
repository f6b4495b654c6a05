use num_complex::Complex64;

use super::matrix::{CMatrix, ONE, ZERO};
use crate::error::LinalgError;

struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

fn factor(x: &CMatrix) -> Lu {
    let n = x.dim();
    let mut lu = x.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    let mut singular = false;
    for k in 0..n {
        let mut piv = k;
        let mut best = lu[(k, k)].norm();
        for i in (k + 1)..n {
            let v = lu[(i, k)].norm();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == 0.0 {
            singular = true;
            continue;
        }
        if piv != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = t;
            }
            perm.swap(k, piv);
            sign = -sign;
        }
        let pivot = lu[(k, k)];
        for i in (k + 1)..n {
            let f = lu[(i, k)] / pivot;
            lu[(i, k)] = f;
            for j in (k + 1)..n {
                let t = lu[(k, j)];
                lu[(i, j)] -= f * t;
            }
        }
    }
    Lu {
        lu,
        perm,
        sign,
        singular,
    }
}

/// Determinant by LU with partial pivoting.
pub fn det(x: &CMatrix) -> Complex64 {
    let f = factor(x);
    if f.singular {
        return ZERO;
    }
    let mut d = Complex64::new(f.sign, 0.0);
    for i in 0..x.dim() {
        d *= f.lu[(i, i)];
    }
    d
}

/// Determinant and trace of `x`.
pub fn det_tr(x: &CMatrix) -> (Complex64, Complex64) {
    (det(x), x.trace())
}

/// Inverse by LU with partial pivoting.
pub fn inverse(x: &CMatrix) -> Result<CMatrix, LinalgError> {
    let n = x.dim();
    let f = factor(x);
    let scale = x.max_abs();
    let min_pivot = (0..n).map(|i| f.lu[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if f.singular || min_pivot <= 1e-14 * scale {
        return Err(LinalgError::Singular {
            sigma_min: if f.singular { 0.0 } else { min_pivot },
        });
    }
    let mut inv = CMatrix::zeros(n);
    let mut col = vec![ZERO; n];
    for c in 0..n {
        for (i, slot) in col.iter_mut().enumerate() {
            *slot = if f.perm[i] == c { ONE } else { ZERO };
        }
        for i in 0..n {
            let mut s = col[i];
            for j in 0..i {
                s -= f.lu[(i, j)] * col[j];
            }
            col[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for j in (i + 1)..n {
                s -= f.lu[(i, j)] * col[j];
            }
            col[i] = s / f.lu[(i, i)];
        }
        inv.set_column(c, &col);
    }
    Ok(inv)
}
