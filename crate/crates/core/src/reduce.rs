//! Reduction of Hermitian fields to tridiagonal form and the determinant
//! recursion that forces an everywhere-simple spectrum.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{same_mesh, FieldTag, MatrixField, ScalarField, INV_TOL};
use crate::mesh::Mesh;
use crate::numlin::{self, herm_eig, householder_to_e1, min_gap, op_norm, CMatrix, PhaseConvention};

/// Smallest spectral gap accepted after the distinct-spectrum step.
pub const GAP_TOL: f64 = 1e-7;
/// Edge discontinuity of the conjugator above which a warning is raised.
pub const GAUGE_WARN_TOL: f64 = 0.5;
/// Retry cap of the joint-invertibility perturbation.
pub const MAX_ATTEMPTS: usize = 32;

/// Outcome of [`perturb_joint_invertible_bounded`].
#[derive(Clone, Debug)]
pub struct JointPerturbation {
    pub fields: Vec<ScalarField>,
    /// Constant offset added to each input function.
    pub offsets: Vec<f64>,
    /// `min_x Σ g_i(x)²`.
    pub margin: f64,
    /// Number of random draws tried (0 when the input was kept).
    pub attempts: usize,
}

/// Perturbs `fs` by less than `eps` each so that `Σ g_i²` is bounded away from 0.
pub fn perturb_joint_invertible(fs: &[ScalarField], eps: f64, seed: u64) -> Result<Vec<ScalarField>> {
    let bounds = vec![eps; fs.len()];
    Ok(perturb_joint_invertible_bounded(fs, &bounds, seed)?.fields)
}

/// As [`perturb_joint_invertible`] with a separate bound per function; a zero
/// bound keeps that function fixed.
///
/// Offsets are constant: a seeded random direction scaled to
/// `(1 − 2^{−(t+1)})·bound` on try `t`, so each offset stays strictly below its
/// bound. The input is returned unchanged when its margin already meets the
/// target `max(INV_TOL, (bound/8)²)`.
pub fn perturb_joint_invertible_bounded(fs: &[ScalarField], bounds: &[f64], seed: u64) -> Result<JointPerturbation> {
    let m = fs.len();
    if m == 0 || bounds.len() != m {
        return Err(Error::InvalidField("need one bound per function".into()));
    }
    let mesh = fs[0].mesh().clone();
    if fs.iter().any(|f| !same_mesh(f.mesh(), &mesh)) {
        return Err(Error::Incompatible);
    }
    if bounds.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(Error::InvalidField(
            "perturbation bounds must be finite and non-negative".into(),
        ));
    }
    let values: Vec<Vec<f64>> = fs.iter().map(|f| f.real_values()).collect();
    let dim = mesh.dimension();
    let low_rank = m < dim + 1;
    let max_bound = bounds.iter().cloned().fold(0.0, f64::max);
    let target = INV_TOL.max((0.125 * max_bound).powi(2));

    let evaluate = |offsets: &[f64]| -> (f64, bool) {
        let shifted: Vec<Vec<f64>> = values
            .iter()
            .zip(offsets)
            .map(|(v, o)| v.iter().map(|x| x + o).collect())
            .collect();
        let margin = sum_of_squares_margin(&shifted);
        let removable = !low_rank || zero_set_avoided(&mesh, &shifted);
        (margin, removable)
    };
    let finish = |offsets: Vec<f64>, margin: f64, attempts: usize| -> Result<JointPerturbation> {
        let fields = values
            .iter()
            .zip(&offsets)
            .map(|(v, o)| {
                let g: Vec<f64> = v.iter().map(|x| x + o).collect();
                ScalarField::from_real(mesh.clone(), &g)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(JointPerturbation {
            fields,
            offsets,
            margin,
            attempts,
        })
    };

    let zero = vec![0.0; m];
    let (margin, removable) = evaluate(&zero);
    if margin >= target && removable {
        return finish(zero, margin, 0);
    }

    let free: Vec<usize> = (0..m).filter(|&i| bounds[i] > 0.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut attempts = 0;
    if !free.is_empty() {
        for t in 0..MAX_ATTEMPTS {
            attempts = t + 1;
            let scale = 1.0 - 0.5f64.powi(t as i32 + 1);
            let direction = random_direction(&mut rng, free.len());
            let mut offsets = vec![0.0; m];
            for (&i, u) in free.iter().zip(direction) {
                offsets[i] = scale * bounds[i] * u;
            }
            let (margin, removable) = evaluate(&offsets);
            if !removable {
                continue;
            }
            if margin >= target {
                return finish(offsets, margin, attempts);
            }
            if best.as_ref().is_none_or(|(_, b)| margin > *b) {
                best = Some((offsets, margin));
            }
        }
    }
    match best {
        Some((offsets, margin)) if margin > INV_TOL => finish(offsets, margin, attempts),
        _ if low_rank => Err(Error::DimensionObstruction { functions: m, dim }),
        best => Err(Error::PerturbationFailed {
            attempts,
            best_margin: best.map_or(margin, |(_, b)| b),
        }),
    }
}

fn random_direction(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    loop {
        let u: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            return u.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn sum_of_squares_margin(values: &[Vec<f64>]) -> f64 {
    let nodes = values[0].len();
    (0..nodes)
        .map(|x| values.iter().map(|v| v[x] * v[x]).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Whether the piecewise-continuous extension of too few functions is free of
/// zeros: no sign change along an edge for one function, no vortex inside a
/// plaquette for two functions on a surface.
fn zero_set_avoided(mesh: &Mesh, values: &[Vec<f64>]) -> bool {
    match values.len() {
        1 => {
            let f = &values[0];
            f.iter().all(|&v| v != 0.0) && mesh.edges().iter().all(|e| f[e.tail] * f[e.head] > 0.0)
        }
        2 => mesh.plaquettes().iter().all(|p| {
            let z: Vec<Complex64> = p
                .nodes
                .iter()
                .map(|&i| Complex64::new(values[0][i], values[1][i]))
                .collect();
            if z.iter().any(|v| v.norm() == 0.0) {
                return false;
            }
            let total: f64 = (0..4).map(|k| (z[(k + 1) % 4] / z[k]).arg()).sum();
            (total / (2.0 * PI)).round() == 0.0
        }),
        _ => true,
    }
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Per-node tridiagonal data `T ≈ U₁*·A·U₁`.
#[derive(Clone, Debug)]
pub struct TridiagonalField {
    mesh: Arc<Mesh>,
    n: usize,
    /// Raw diagonal entries `a_kk` of `T`.
    pub diag: Vec<ScalarField>,
    /// `sub[k] = T[k+1][k]`; real positive for `k < n − 2`.
    pub sub: Vec<ScalarField>,
    pub conjugator: MatrixField,
    pub offband_residual: f64,
    /// Maximum over edges of `‖U₁(x) − U₁(y)‖`.
    pub gauge_defect: f64,
    pub gauge_warning: bool,
}

impl TridiagonalField {
    /// Builds the field from nodewise data and measures the residual against `a`.
    pub fn from_parts(
        a: &MatrixField,
        diag: Vec<ScalarField>,
        sub: Vec<ScalarField>,
        conjugator: MatrixField,
    ) -> Result<Self> {
        let n = a.n();
        if diag.len() != n || sub.len() + 1 != n || !a.same_shape(&conjugator) {
            return Err(Error::Incompatible);
        }
        let mut t = TridiagonalField {
            mesh: a.mesh().clone(),
            n,
            diag,
            sub,
            conjugator,
            offband_residual: 0.0,
            gauge_defect: 0.0,
            gauge_warning: false,
        };
        t.offband_residual = (0..a.mesh().node_count())
            .map(|x| op_norm(&(&a.sample(x).conjugate_by(t.conjugator.sample(x)) - &t.matrix(x))))
            .fold(0.0, f64::max);
        t.gauge_defect = crate::field::continuity_modulus(&t.conjugator);
        t.gauge_warning = t.gauge_defect > GAUGE_WARN_TOL;
        Ok(t)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Assembled tridiagonal matrix at `node`.
    pub fn matrix(&self, node: usize) -> CMatrix {
        let d: Vec<f64> = self.diag.iter().map(|f| f.value(node).re).collect();
        let s: Vec<Complex64> = self.sub.iter().map(|f| f.value(node)).collect();
        tridiagonal(&d, &s)
    }

    pub fn assembled(&self) -> Result<MatrixField> {
        let samples = (0..self.mesh.node_count()).map(|x| self.matrix(x)).collect();
        MatrixField::new(self.mesh.clone(), FieldTag::Hermitian, samples)
    }

    /// Centered diagonal `c_j = a_jj − a_nn` at `node`.
    pub fn centered_diag(&self, node: usize) -> Vec<f64> {
        let last = self.diag[self.n - 1].value(node).re;
        self.diag.iter().map(|f| f.value(node).re - last).collect()
    }

    /// Real subdiagonal `b_1 … b_{n−2}` at `node`.
    pub fn real_sub(&self, node: usize) -> Vec<f64> {
        self.sub[..self.n - 2].iter().map(|f| f.value(node).re).collect()
    }
}

/// Hermitian tridiagonal matrix with `T[k+1][k] = sub[k]`.
pub fn tridiagonal(diag: &[f64], sub: &[Complex64]) -> CMatrix {
    let n = diag.len();
    let mut t = CMatrix::from_real_diag(diag);
    for (k, &b) in sub.iter().enumerate().take(n.saturating_sub(1)) {
        t[(k + 1, k)] = b;
        t[(k, k + 1)] = b.conj();
    }
    t
}

/// Conjugates `a` nodewise to tridiagonal form with positive subdiagonal
/// `b_1 … b_{n−2}`.
///
/// Column tails are made jointly nonvanishing by perturbing each real
/// component by less than `eps`; the dropped entries give an off-band residual
/// below `(n−1)^{3/2}·eps`.
pub fn tridiagonalize(a: &MatrixField, eps: f64, seed: u64) -> Result<TridiagonalField> {
    a.require(FieldTag::Hermitian)?;
    let n = a.n();
    if n < 2 {
        return Err(Error::InvalidField("tridiagonalization needs n ≥ 2".into()));
    }
    let mesh = a.mesh().clone();
    let nodes = mesh.node_count();
    let mut work: Vec<CMatrix> = a.samples().to_vec();
    let mut q: Vec<CMatrix> = vec![CMatrix::identity(n); nodes];
    let mut sub = Vec::with_capacity(n - 1);

    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let mut parts = Vec::with_capacity(2 * len);
        for r in 0..len {
            let re: Vec<f64> = work.iter().map(|w| w[(k + 1 + r, k)].re).collect();
            let im: Vec<f64> = work.iter().map(|w| w[(k + 1 + r, k)].im).collect();
            parts.push(ScalarField::from_real(mesh.clone(), &re)?);
            parts.push(ScalarField::from_real(mesh.clone(), &im)?);
        }
        let perturbed = perturb_joint_invertible_bounded(&parts, &vec![eps; 2 * len], derive_seed(seed, k as u64))?;
        let mut b = Vec::with_capacity(nodes);
        for x in 0..nodes {
            let v: Vec<Complex64> = (0..len)
                .map(|r| {
                    Complex64::new(
                        perturbed.fields[2 * r].value(x).re,
                        perturbed.fields[2 * r + 1].value(x).re,
                    )
                })
                .collect();
            let (h, phi) = householder_to_e1(&v, PhaseConvention::CancellationAvoiding)?;
            let h = h.scale(Complex64::from_polar(1.0, -phi));
            let mut qk = CMatrix::identity(n);
            for i in 0..len {
                for j in 0..len {
                    qk[(k + 1 + i, k + 1 + j)] = h[(i, j)];
                }
            }
            work[x] = &(&qk * &work[x]) * &qk.adjoint();
            q[x] = &qk * &q[x];
            b.push(numlin::vec_norm(&v));
        }
        sub.push(ScalarField::from_real(mesh.clone(), &b)?);
    }
    let last: Vec<Complex64> = work.iter().map(|w| w[(n - 1, n - 2)]).collect();
    sub.push(ScalarField::new(mesh.clone(), last)?);
    let diag = (0..n)
        .map(|j| {
            let d: Vec<f64> = work.iter().map(|w| w[(j, j)].re).collect();
            ScalarField::from_real(mesh.clone(), &d)
        })
        .collect::<Result<Vec<_>>>()?;
    let conjugator = MatrixField::new(mesh, FieldTag::Unitary, q.iter().map(CMatrix::adjoint).collect())?;
    TridiagonalField::from_parts(a, diag, sub, conjugator)
}

/// Leading principal minors `q_0 … q_{n−1}` of the centered tridiagonal field.
#[derive(Clone, Debug)]
pub struct QSequence {
    pub q: Vec<ScalarField>,
}

impl QSequence {
    pub fn get(&self, k: usize) -> &ScalarField {
        &self.q[k]
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }
}

/// `q_0 = 1`, `q_1 = c_1`, `q_k = c_k q_{k−1} − b_{k−1}² q_{k−2}` for one node.
/// `c` and `b` are 1-based in the recursion and 0-based here.
pub fn q_values(c: &[f64], b: &[f64]) -> Vec<f64> {
    let n = c.len();
    let mut q = Vec::with_capacity(n + 1);
    q.push(1.0);
    if n == 0 {
        return q;
    }
    q.push(c[0]);
    for k in 2..=n {
        let next = c[k - 1] * q[k - 1] - b[k - 2] * b[k - 2] * q[k - 2];
        q.push(next);
    }
    q
}

/// Minor sequence of `t` with `c_j = a_jj − a_nn`.
pub fn q_sequence(t: &TridiagonalField) -> QSequence {
    let n = t.n();
    let nodes = t.mesh().node_count();
    let mut columns = vec![Vec::with_capacity(nodes); n];
    for x in 0..nodes {
        let c = t.centered_diag(x);
        let b = t.real_sub(x);
        for (col, v) in columns.iter_mut().zip(q_values(&c[..n - 1], &b)) {
            col.push(v);
        }
    }
    let q = columns
        .iter()
        .map(|c| ScalarField::from_real(t.mesh().clone(), c).expect("finite minors"))
        .collect();
    QSequence { q }
}

/// Output of [`distinct_spectrum_perturbation`].
#[derive(Clone, Debug)]
pub struct DistinctSpectrum {
    /// The perturbed centered tridiagonal field `B` (last diagonal entry 0).
    pub centered: MatrixField,
    /// `a_nn`, added back to recover the spectrum of the uncentered field.
    pub shift: ScalarField,
    /// Perturbed `q_{n−1}`; equals `det(B'_{n−1})` for `n ≥ 3`.
    pub b: ScalarField,
    pub q: QSequence,
    /// Minimum over nodes of the spectral gap of `B`.
    pub min_gap: f64,
    /// `sup_norm(B − B₀)` where `B₀` is the centered input.
    pub movement: f64,
    /// Maximum over nodes of `|det(B'_{n−1}) − b|` (zero for `n = 2`).
    pub det_defect: f64,
    /// True when only `q_{n−1}` had to be moved.
    pub gauge_covariant: bool,
}

impl DistinctSpectrum {
    /// `B + a_nn·I` at `node`.
    pub fn recentered(&self, node: usize) -> CMatrix {
        self.centered.sample(node).shift(self.shift.value(node).re)
    }

    /// `U₁·(B + a_nn)·U₁*` in the basis of the original field.
    pub fn in_original_basis(&self, t: &TridiagonalField) -> Result<MatrixField> {
        let samples = (0..t.mesh().node_count())
            .map(|x| {
                let u = t.conjugator.sample(x);
                let b = &(u * &self.recentered(x)) * &u.adjoint();
                b.hermitian_part()
            })
            .collect();
        MatrixField::new(t.mesh().clone(), FieldTag::Hermitian, samples)
    }
}

/// Perturbs the last two rows of `t` so the spectrum is simple everywhere.
///
/// For `n = 2` the functions `a₁₁ − a₂₂`, `Re a₂₁`, `Im a₂₁` are perturbed
/// jointly invertible. For `n ≥ 3` the value `q_{n−1}` and the entry `b_{n−1}`
/// are perturbed to `b` and `d` with `b² + |d|²` invertible; then `c_{n−1}` and
/// `b_{n−2}` are adjusted so `det(B'_{n−1}) = b`. Moving `q_{n−1}` alone is tried
/// first since it does not depend on the phase of the last basis vector.
pub fn distinct_spectrum_perturbation(t: &TridiagonalField, eps: f64, seed: u64) -> Result<DistinctSpectrum> {
    let n = t.n();
    let mesh = t.mesh().clone();
    let nodes = mesh.node_count();
    let q = q_sequence(t);
    let shift = t.diag[n - 1].clone();
    let last = &t.sub[n - 2];
    let re = ScalarField::from_real(mesh.clone(), &last.values().iter().map(|v| v.re).collect::<Vec<_>>())?;
    let im = ScalarField::from_real(mesh.clone(), &last.values().iter().map(|v| v.im).collect::<Vec<_>>())?;

    let mut samples = Vec::with_capacity(nodes);
    let (b_field, det_defect, gauge_covariant);
    if n == 2 {
        let c1 = ScalarField::from_real(
            mesh.clone(),
            &(0..nodes).map(|x| t.centered_diag(x)[0]).collect::<Vec<_>>(),
        )?;
        let p = perturb_joint_invertible_bounded(&[c1, re, im], &[eps, eps, eps], seed)?;
        for x in 0..nodes {
            let d = Complex64::new(p.fields[1].value(x).re, p.fields[2].value(x).re);
            samples.push(tridiagonal(&[p.fields[0].value(x).re, 0.0], &[d]));
        }
        gauge_covariant = p.offsets[1] == 0.0 && p.offsets[2] == 0.0;
        b_field = p.fields[0].clone();
        det_defect = 0.0;
    } else {
        let q1 = q.get(n - 1);
        let q2 = q.get(n - 2);
        let q3 = q.get(n - 3);
        let m = (0..nodes)
            .map(|x| t.sub[n - 3].value(x).re)
            .fold(f64::INFINITY, f64::min);
        let s: Vec<f64> = (0..nodes)
            .map(|x| q2.value(x).re.powi(2) + q3.value(x).re.powi(2))
            .collect();
        let s_min = s.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(m > 0.0) || !(s_min > 0.0) {
            return Err(Error::PerturbationFailed {
                attempts: 0,
                best_margin: s_min.min(m),
            });
        }
        let tol_q = eps.min(m * eps).min(0.5 * m * m) / ((q2.sup_abs() + q3.sup_abs()) / s_min);
        let functions = [re, im, q1.clone()];
        let p = match perturb_joint_invertible_bounded(&functions, &[0.0, 0.0, tol_q], seed) {
            Ok(p) => p,
            Err(_) => perturb_joint_invertible_bounded(&functions, &[eps, eps, tol_q], derive_seed(seed, 1 << 32))?,
        };
        gauge_covariant = p.offsets[0] == 0.0 && p.offsets[1] == 0.0;
        let mut worst = 0.0f64;
        for x in 0..nodes {
            let mut c = t.centered_diag(x);
            let mut b: Vec<Complex64> = t.sub.iter().map(|f| f.value(x)).collect();
            let target = p.fields[2].value(x).re;
            let delta = target - q1.value(x).re;
            c[n - 2] += delta * q2.value(x).re / s[x];
            let squared = b[n - 3].re.powi(2) - delta * q3.value(x).re / s[x];
            b[n - 3] = Complex64::new(squared.max(0.0).sqrt(), 0.0);
            b[n - 2] = Complex64::new(p.fields[0].value(x).re, p.fields[1].value(x).re);
            let bm = tridiagonal(&c, &b);
            worst = worst.max((numlin::det(&bm.leading_block(n - 1)) - target).norm());
            samples.push(bm);
        }
        b_field = p.fields[2].clone();
        det_defect = worst;
    }

    let mut movement = 0.0f64;
    let mut gap = f64::INFINITY;
    let mut gap_node = 0;
    for (x, bm) in samples.iter().enumerate() {
        let b0 = t.matrix(x).shift(-shift.value(x).re);
        movement = movement.max(op_norm(&(bm - &b0)));
        let g = min_gap(&herm_eig(bm)?.values);
        if g < gap {
            gap = g;
            gap_node = x;
        }
    }
    if gap < GAP_TOL {
        return Err(Error::GapCollapse { gap, node: gap_node });
    }
    Ok(DistinctSpectrum {
        centered: MatrixField::new(mesh, FieldTag::Hermitian, samples)?,
        shift,
        b: b_field,
        q,
        min_gap: gap,
        movement,
        det_defect,
        gauge_covariant,
    })
}
