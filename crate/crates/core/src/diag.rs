//! Top-level drivers producing [`DiagonalizationReport`]s.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::bundle::{
    assemble_unitary, band_obstructions, cycle_windings, eigenframes, trivialize, LineBundleData, ObstructionReport,
    OVERLAP_TOL,
};
use crate::error::{Error, Obstruction, Result};
use crate::field::{
    continuity_modulus, field_det_tr, pointwise_spectra, FieldTag, Invertibility, MatrixField, ScalarField,
};
use crate::mesh::MeshKind;
use crate::numlin::{self, herm_eig, inner, op_norm, principal_log_unitary, unitary_eig, wrap_angle, CMatrix};
use crate::reduce::{distinct_spectrum_perturbation, tridiagonalize};

/// Number of rotations tried when clearing `−1` from a unitary spectrum.
pub const ROTATION_GRID: usize = 720;
/// Bins of the eigen-angle histogram attached to unresolved unitary runs.
pub const HISTOGRAM_BINS: usize = 36;
/// Tolerance for unitarity of `U` and for the Weyl transfer check.
pub const VERIFY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Success,
    Obstructed,
    Unresolved,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Success => "success",
            Status::Obstructed => "obstructed",
            Status::Unresolved => "unresolved",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Status::Success, Status::Obstructed, Status::Unresolved]
            .into_iter()
            .find(|s| s.name() == name)
    }
}

/// Whether `Λ` holds eigenvalues (`diag(Λ)`) or eigen-angles (`diag(e^{iΛ})`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LambdaKind {
    Real,
    Phase,
}

impl LambdaKind {
    pub fn name(self) -> &'static str {
        match self {
            LambdaKind::Real => "real",
            LambdaKind::Phase => "phase",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "real" => Some(LambdaKind::Real),
            "phase" => Some(LambdaKind::Phase),
            _ => None,
        }
    }
}

/// Intermediate quantities of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub route: String,
    /// `‖U₁*AU₁ − T‖` of the tridiagonal stage.
    pub offband_residual: f64,
    /// `‖B − B₀‖` of the distinct-spectrum stage.
    pub distinct_movement: f64,
    pub min_gap: f64,
    pub gauge_defect: f64,
    pub gauge_warning: bool,
    /// `max_e ‖A(x) − A(y)‖` of the input.
    pub continuity_modulus: f64,
    /// `max_e ‖U(x) − U(y)‖` of the output unitary.
    pub unitary_edge_defect: f64,
    /// Rotation `θ` of the logarithm route.
    pub rotation: Option<f64>,
    pub angle_histogram: Option<Vec<usize>>,
    /// Residual before rounding a projection's eigenvalues.
    pub pre_rounding_residual: Option<f64>,
    pub message: Option<String>,
}

#[derive(Clone, Debug)]
pub struct DiagonalizationReport {
    pub status: Status,
    pub epsilon_requested: f64,
    /// `max_x ‖U*AU − diag(Λ)‖` on success.
    pub epsilon_achieved: Option<f64>,
    pub unitary: Option<MatrixField>,
    pub lambda: Vec<ScalarField>,
    pub lambda_kind: LambdaKind,
    pub obstruction: ObstructionReport,
    pub diagnostics: Diagnostics,
    pub mesh_kind: MeshKind,
    pub resolution: usize,
    pub n: usize,
    pub elapsed: Duration,
}

impl DiagonalizationReport {
    fn empty(a: &MatrixField, eps: f64, kind: LambdaKind) -> Self {
        Self {
            status: Status::Unresolved,
            epsilon_requested: eps,
            epsilon_achieved: None,
            unitary: None,
            lambda: Vec::new(),
            lambda_kind: kind,
            obstruction: ObstructionReport::default(),
            diagnostics: Diagnostics {
                continuity_modulus: continuity_modulus(a),
                ..Default::default()
            },
            mesh_kind: a.mesh().kind(),
            resolution: a.mesh().resolution(),
            n: a.n(),
            elapsed: Duration::ZERO,
        }
    }

    /// `Λ` at `node`.
    pub fn lambda_at(&self, node: usize) -> Vec<f64> {
        self.lambda.iter().map(|f| f.value(node).re).collect()
    }

    /// Target diagonal matrix at `node`.
    pub fn diagonal(&self, node: usize) -> CMatrix {
        diagonal_matrix(self.lambda_kind, &self.lambda_at(node))
    }

    fn fail(mut self, err: Error) -> Result<Self> {
        self.status = match &err {
            Error::Obstructed(o) => {
                if let Obstruction::BandMonodromy { cycle, shift } = o {
                    if self.obstruction.band_shifts.is_empty() {
                        self.obstruction.band_shifts = vec![0; cycle + 1];
                    }
                    self.obstruction.band_shifts[*cycle] = *shift;
                }
                Status::Obstructed
            }
            Error::GapCollapse { .. }
            | Error::Unresolved { .. }
            | Error::NotSmooth { .. }
            | Error::PerturbationFailed { .. }
            | Error::DimensionObstruction { .. }
            | Error::NoCommonGap
            | Error::NotOrthogonal { .. }
            | Error::RoundingAmbiguous { .. }
            | Error::ResidualTooLarge { .. }
            | Error::Linalg(_) => Status::Unresolved,
            _ => return Err(err),
        };
        self.diagnostics.message = Some(err.to_string());
        self.unitary = None;
        self.epsilon_achieved = None;
        Ok(self)
    }
}

fn diagonal_matrix(kind: LambdaKind, values: &[f64]) -> CMatrix {
    match kind {
        LambdaKind::Real => CMatrix::from_real_diag(values),
        LambdaKind::Phase => {
            let d: Vec<Complex64> = values.iter().map(|&a| Complex64::from_polar(1.0, a)).collect();
            CMatrix::from_diag(&d)
        }
    }
}

fn residual(a: &MatrixField, u: &MatrixField, lambda: &[ScalarField], kind: LambdaKind) -> f64 {
    (0..a.mesh().node_count())
        .map(|x| {
            let values: Vec<f64> = lambda.iter().map(|f| f.value(x).re).collect();
            op_norm(&(&a.sample(x).conjugate_by(u.sample(x)) - &diagonal_matrix(kind, &values)))
        })
        .fold(0.0, f64::max)
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidField(format!("epsilon must be positive, got {eps}")))
    }
}

struct Frames {
    unitary: MatrixField,
    lambda: Vec<ScalarField>,
}

/// Reduction, distinct-spectrum perturbation, eigenframes and gauge fixing.
fn hermitian_frames(
    a: &MatrixField,
    eps: f64,
    seed: u64,
    diag: &mut Diagnostics,
    obstruction: &mut ObstructionReport,
) -> Result<Frames> {
    let n = a.n();
    let mesh = a.mesh().clone();
    if n == 1 {
        let unitary = MatrixField::constant(mesh.clone(), FieldTag::Unitary, &CMatrix::identity(1))?;
        let values: Vec<f64> = a.samples().iter().map(|s| s[(0, 0)].re).collect();
        diag.min_gap = f64::INFINITY;
        return Ok(Frames {
            unitary,
            lambda: vec![ScalarField::from_real(mesh, &values)?],
        });
    }
    let (t_eps, d_eps) = if n == 2 {
        (eps / 4.0, eps / 4.0)
    } else {
        let share = eps / 14.0;
        (share / ((n - 1) as f64).powf(1.5), share)
    };
    let t = tridiagonalize(a, t_eps, seed)?;
    diag.offband_residual = t.offband_residual;
    diag.gauge_defect = t.gauge_defect;
    diag.gauge_warning = t.gauge_warning;
    let d = distinct_spectrum_perturbation(&t, d_eps, seed.wrapping_add(1))?;
    diag.distinct_movement = d.movement;
    diag.min_gap = d.min_gap;
    let b = d.in_original_basis(&t)?;
    let bands = eigenframes(&b)?;
    *obstruction = ObstructionReport {
        winding_numbers: std::mem::take(&mut obstruction.winding_numbers),
        ..band_obstructions(&bands, d.min_gap)?
    };
    finish_frames(&bands, obstruction)
}

fn finish_frames(bands: &[LineBundleData], obstruction: &ObstructionReport) -> Result<Frames> {
    for b in bands {
        b.require_resolved()?;
    }
    if let Some(Obstruction::Chern { band, chern }) = obstruction.obstruction() {
        return Err(Error::Obstructed(Obstruction::Chern { band, chern }));
    }
    let aligned = bands.iter().map(trivialize).collect::<Result<Vec<_>>>()?;
    let unitary = assemble_unitary(&aligned)?;
    let mesh = unitary.mesh().clone();
    let lambda = bands
        .iter()
        .map(|b| ScalarField::from_real(mesh.clone(), &b.eigenvalues))
        .collect::<Result<Vec<_>>>()?;
    Ok(Frames { unitary, lambda })
}

fn hermitian_windings(a: &MatrixField) -> Vec<i64> {
    let (det, _) = field_det_tr(a);
    if a.mesh().cycle_basis().is_empty() || !det.is_invertible() {
        return Vec::new();
    }
    cycle_windings(&det).unwrap_or_default()
}

/// Approximately diagonalizes a Hermitian field: on success
/// `max_x ‖U*(x)A(x)U(x) − diag(Λ(x))‖ < eps`.
///
/// The budget is split as `eps/14` for tridiagonalization and `6·eps/14` for
/// the distinct-spectrum step (`eps/4` each for `n = 2`), so the residual stays
/// below `eps/2`.
pub fn approx_diagonalize_hermitian(a: &MatrixField, eps: f64, seed: u64) -> Result<DiagonalizationReport> {
    let start = Instant::now();
    if a.tag() == FieldTag::Projection {
        return approx_diagonalize_hermitian(&a.clone().with_tag(FieldTag::Hermitian)?, eps, seed);
    }
    a.require(FieldTag::Hermitian)?;
    check_eps(eps)?;
    let mut report = DiagonalizationReport::empty(a, eps, LambdaKind::Real);
    report.diagnostics.route = "hermitian".into();
    report.obstruction.winding_numbers = hermitian_windings(a);
    let mut diag = report.diagnostics.clone();
    let mut obs = report.obstruction.clone();
    let outcome = hermitian_frames(a, eps, seed, &mut diag, &mut obs);
    report.diagnostics = diag;
    report.obstruction = obs;
    let mut report = match outcome {
        Ok(frames) => accept(report, a, frames)?,
        Err(e) => report.fail(e)?,
    };
    report.elapsed = start.elapsed();
    Ok(report)
}

fn accept(mut report: DiagonalizationReport, a: &MatrixField, frames: Frames) -> Result<DiagonalizationReport> {
    let achieved = residual(a, &frames.unitary, &frames.lambda, report.lambda_kind);
    report.diagnostics.unitary_edge_defect = continuity_modulus(&frames.unitary);
    report.lambda = frames.lambda;
    let eps = report.epsilon_requested;
    if achieved >= eps {
        return report.fail(Error::ResidualTooLarge {
            residual: achieved,
            requested: eps,
        });
    }
    report.status = Status::Success;
    report.epsilon_achieved = Some(achieved);
    report.unitary = Some(frames.unitary);
    Ok(report)
}

/// Exact diagonalization of a projection field: the Hermitian pipeline at
/// `eps = 1/4`, then eigenvalues rounded to 0 or 1.
pub fn diagonalize_projection(p: &MatrixField, seed: u64) -> Result<DiagonalizationReport> {
    let start = Instant::now();
    p.require(FieldTag::Projection)?;
    let herm = p.clone().with_tag(FieldTag::Hermitian)?;
    let mut report = approx_diagonalize_hermitian(&herm, 0.25, seed)?;
    report.diagnostics.route = "projection".into();
    if report.status != Status::Success {
        report.elapsed = start.elapsed();
        return Ok(report);
    }
    let mut rounded = Vec::with_capacity(report.lambda.len());
    for f in &report.lambda {
        let mut values = Vec::with_capacity(f.len());
        for (node, v) in f.values().iter().enumerate() {
            let v = v.re;
            if v > 0.75 {
                values.push(1.0);
            } else if v < 0.25 {
                values.push(0.0);
            } else {
                let r = report.fail(Error::RoundingAmbiguous { node, value: v })?;
                return Ok(DiagonalizationReport {
                    elapsed: start.elapsed(),
                    ..r
                });
            }
        }
        rounded.push(ScalarField::from_real(p.mesh().clone(), &values)?);
    }
    let before = report.epsilon_achieved;
    let u = report.unitary.clone().expect("success carries U");
    let achieved = residual(p, &u, &rounded, LambdaKind::Real);
    report.diagnostics.pre_rounding_residual = before;
    report.lambda = rounded;
    report.epsilon_achieved = Some(achieved);
    let eps = report.epsilon_requested;
    if achieved >= eps {
        report = report.fail(Error::ResidualTooLarge {
            residual: achieved,
            requested: eps,
        })?;
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

/// Approximately diagonalizes a unitary field: on success
/// `max_x ‖U*(x)V(x)U(x) − diag(e^{iΛ(x)})‖ < eps`.
///
/// Determinant windings along the cycle basis are measured first. With all of
/// them zero, a rotation clearing `−1` from every spectrum is searched and the
/// Hermitian logarithm is diagonalized at `eps/2`. Otherwise, or when no such
/// rotation exists, eigenvalue bands are followed directly around the mesh;
/// bands that are permuted along a cycle are an obstruction.
pub fn approx_diagonalize_unitary(v: &MatrixField, eps: f64, seed: u64) -> Result<DiagonalizationReport> {
    let start = Instant::now();
    v.require(FieldTag::Unitary)?;
    check_eps(eps)?;
    let mut report = DiagonalizationReport::empty(v, eps, LambdaKind::Phase);
    let (det, _) = field_det_tr(v);
    report.obstruction.winding_numbers = cycle_windings(&det)?;
    let winding = report.obstruction.winding_numbers.iter().position(|&w| w != 0);

    let spectra: Vec<numlin::UnitarySpectrum> = v
        .samples()
        .iter()
        .map(unitary_eig)
        .collect::<std::result::Result<_, _>>()?;
    report.diagnostics.angle_histogram = Some(angle_histogram(&spectra));

    if winding.is_none() {
        report.diagnostics.route = "unitary-log".into();
        let mut diag = report.diagnostics.clone();
        let mut obs = report.obstruction.clone();
        match log_route(v, &spectra, eps, seed, &mut diag, &mut obs) {
            Ok(frames) => {
                report.diagnostics = diag;
                report.obstruction = obs;
                let mut r = accept(report, v, frames)?;
                r.diagnostics.angle_histogram = None;
                r.elapsed = start.elapsed();
                return Ok(r);
            }
            Err(Error::Obstructed(o)) => {
                report.diagnostics = diag;
                report.obstruction = obs;
                let mut r = report.fail(Error::Obstructed(o))?;
                r.elapsed = start.elapsed();
                return Ok(r);
            }
            Err(_) => {}
        }
    }

    report.diagnostics.route = "unitary-direct".into();
    let mut diag = report.diagnostics.clone();
    let mut obs = report.obstruction.clone();
    let outcome = direct_route(v, eps, &mut diag, &mut obs);
    report.diagnostics = diag;
    report.obstruction = obs;
    let mut r = match outcome {
        Ok(frames) => {
            let mut r = accept(report, v, frames)?;
            if r.status == Status::Success {
                r.diagnostics.angle_histogram = None;
            }
            r
        }
        Err(Error::Obstructed(o)) => report.fail(Error::Obstructed(o))?,
        Err(e) => match winding {
            Some(cycle) => {
                let w = report.obstruction.winding_numbers[cycle];
                let mut r = report.fail(Error::Obstructed(Obstruction::Winding { cycle, winding: w }))?;
                r.diagnostics.message = Some(format!(
                    "{}; direct route failed: {e}",
                    r.diagnostics.message.unwrap_or_default()
                ));
                r
            }
            None => report.fail(e)?,
        },
    };
    r.elapsed = start.elapsed();
    Ok(r)
}

fn angle_histogram(spectra: &[numlin::UnitarySpectrum]) -> Vec<usize> {
    let mut bins = vec![0; HISTOGRAM_BINS];
    for s in spectra {
        for &a in &s.angles {
            let t = ((a + PI) / (2.0 * PI) * HISTOGRAM_BINS as f64).floor() as usize;
            bins[t.min(HISTOGRAM_BINS - 1)] += 1;
        }
    }
    bins
}

fn log_route(
    v: &MatrixField,
    spectra: &[numlin::UnitarySpectrum],
    eps: f64,
    seed: u64,
    diag: &mut Diagnostics,
    obstruction: &mut ObstructionReport,
) -> Result<Frames> {
    let n = v.n();
    let gap_angle = PI / (8.0 * n as f64);
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..ROTATION_GRID {
        let theta = 2.0 * PI * k as f64 / ROTATION_GRID as f64;
        let clearance = spectra
            .iter()
            .flat_map(|s| s.angles.iter())
            .map(|&a| PI - wrap_angle(a + theta).abs())
            .fold(f64::INFINITY, f64::min);
        if clearance > best.0 {
            best = (clearance, theta);
        }
    }
    let (clearance, theta) = best;
    if clearance < gap_angle {
        return Err(Error::NoCommonGap);
    }
    diag.rotation = Some(theta);
    let rot = Complex64::from_polar(1.0, theta);
    let samples = v
        .samples()
        .iter()
        .map(|s| principal_log_unitary(&s.scale(rot)))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let a = MatrixField::new(v.mesh().clone(), FieldTag::Hermitian, samples)?;
    let frames = hermitian_frames(&a, eps / 2.0, seed, diag, obstruction)?;
    let lambda = frames
        .lambda
        .iter()
        .map(|f| {
            let shifted: Vec<f64> = f.values().iter().map(|z| z.re - theta).collect();
            ScalarField::from_real(v.mesh().clone(), &shifted)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Frames {
        unitary: frames.unitary,
        lambda,
    })
}

/// Smallest circular distance between consecutive eigen-angles.
fn cyclic_gap(angles: &[f64]) -> f64 {
    let n = angles.len();
    if n < 2 {
        return 2.0 * PI;
    }
    (0..n)
        .map(|k| {
            let next = angles[(k + 1) % n];
            let d = angles[k] - next;
            if k + 1 == n {
                d + 2.0 * PI
            } else {
                d
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Groups sorted eigen-angles whose chord distance to a cyclic neighbour is
/// below `tol`; returns sorted-index clusters.
fn clusters(angles: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let n = angles.len();
    let close = |i: usize, j: usize| {
        (Complex64::from_polar(1.0, angles[i]) - Complex64::from_polar(1.0, angles[j])).norm() < tol
    };
    let breaks: Vec<usize> = (0..n).filter(|&k| n == 1 || !close(k, (k + 1) % n)).collect();
    let Some(&first) = breaks.first() else {
        return vec![(0..n).collect()];
    };
    // Each cluster runs from just after one break up to and including the next.
    let mut out = Vec::with_capacity(breaks.len());
    let mut start = (first + 1) % n;
    for &b in breaks.iter().cycle().skip(1).take(breaks.len()) {
        let mut c = vec![start];
        let mut k = start;
        while k != b {
            k = (k + 1) % n;
            c.push(k);
        }
        out.push(c);
        start = (b + 1) % n;
    }
    out
}

/// Eigenvector frames carried from `prev` into the eigenspaces of `s`.
///
/// Labels are assigned to clusters of nearly equal eigenvalues by projected
/// weight; inside a cluster the frames are the polar factor of the projected
/// parent frames, i.e. the closest orthonormal basis of the cluster subspace.
fn continue_frames(
    s: &numlin::UnitarySpectrum,
    prev: &[Vec<Complex64>],
    tol: f64,
    edge: usize,
) -> Result<Vec<Vec<Complex64>>> {
    let n = prev.len();
    let groups = clusters(&s.angles, tol);
    let basis: Vec<Vec<Vec<Complex64>>> = groups
        .iter()
        .map(|g| g.iter().map(|&k| s.vectors.column(k)).collect())
        .collect();
    let weight = |j: usize, c: usize| -> f64 { basis[c].iter().map(|v| inner(v, &prev[j]).norm_sqr()).sum() };
    let mut pairs: Vec<(f64, usize, usize)> = (0..n)
        .flat_map(|j| (0..groups.len()).map(move |c| (j, c)))
        .map(|(j, c)| (weight(j, c), j, c))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut owner = vec![usize::MAX; n];
    let mut room: Vec<usize> = groups.iter().map(Vec::len).collect();
    for (_, j, c) in pairs {
        if owner[j] == usize::MAX && room[c] > 0 {
            owner[j] = c;
            room[c] -= 1;
        }
    }
    let mut frames = vec![Vec::new(); n];
    for (c, vs) in basis.iter().enumerate() {
        let labels: Vec<usize> = (0..n).filter(|&j| owner[j] == c).collect();
        let k = labels.len();
        // Coordinates of the projected parent frames in the cluster basis.
        let proj = CMatrix::from_fn(k, |r, col| inner(&vs[r], &prev[labels[col]]));
        let overlap = numlin::min_singular_value(&proj);
        if overlap < OVERLAP_TOL {
            return Err(Error::Unresolved {
                band: labels[0],
                edge,
                overlap,
            });
        }
        let q = numlin::polar_unitary(&proj)?;
        for (col, &j) in labels.iter().enumerate() {
            let mut f = vec![Complex64::new(0.0, 0.0); n];
            for (r, v) in vs.iter().enumerate() {
                for (fi, vi) in f.iter_mut().zip(v) {
                    *fi += vi * q[(r, col)];
                }
            }
            frames[j] = f;
        }
    }
    Ok(frames)
}

/// Permutation `π` with frame `j` at `tail` continuing to frame `π(j)` at `head`.
fn edge_permutation(tail: &[Vec<Complex64>], head: &[Vec<Complex64>]) -> Option<Vec<usize>> {
    let n = tail.len();
    let perm: Vec<usize> = (0..n)
        .map(|j| {
            (0..n)
                .max_by(|&a, &b| {
                    inner(&head[a], &tail[j])
                        .norm()
                        .total_cmp(&inner(&head[b], &tail[j]).norm())
                })
                .expect("n > 0")
        })
        .collect();
    let mut seen = vec![false; n];
    for &p in &perm {
        if std::mem::replace(&mut seen[p], true) {
            return None;
        }
    }
    Some(perm)
}

fn direct_route(
    v: &MatrixField,
    eps: f64,
    diag: &mut Diagnostics,
    obstruction: &mut ObstructionReport,
) -> Result<Frames> {
    follow_bands(v, eps, diag, obstruction)
}

/// Follows eigenvectors along the spanning tree, checks that the labels close
/// up around every cycle, and gauge-fixes the resulting line bundles.
///
/// Eigenvalues closer than `eps/(4n)` are treated as one cluster, so bands may
/// pass through crossings; the residual stays below `eps/2`.
fn follow_bands(
    v: &MatrixField,
    eps: f64,
    diag: &mut Diagnostics,
    obstruction: &mut ObstructionReport,
) -> Result<Frames> {
    let n = v.n();
    let mesh = v.mesh().clone();
    let tol = eps / (4.0 * n as f64);
    let spectra: Vec<numlin::UnitarySpectrum> = v
        .samples()
        .iter()
        .map(unitary_eig)
        .collect::<std::result::Result<_, _>>()?;
    diag.min_gap = spectra
        .iter()
        .map(|s| cyclic_gap(&s.angles))
        .fold(f64::INFINITY, f64::min);

    let tree = mesh.spanning_tree();
    let nodes = mesh.node_count();
    let mut frames: Vec<Vec<Vec<Complex64>>> = vec![Vec::new(); nodes];
    let mut lift = vec![vec![0.0; n]; nodes];
    frames[tree.root] = (0..n).map(|k| spectra[tree.root].vectors.column(k)).collect();
    lift[tree.root] = spectra[tree.root].angles.clone();
    for &y in &tree.order[1..] {
        let (x, e) = tree.parent[y].expect("non-root node has a parent");
        frames[y] = continue_frames(&spectra[y], &frames[x], tol, e)?;
        let vy = v.sample(y);
        for j in 0..n {
            let a = inner(&frames[y][j], &vy.mul_vec(&frames[y][j])).arg();
            lift[y][j] = lift[x][j] + wrap_angle(a - lift[x][j]);
        }
    }

    let mut perms: Vec<Option<Vec<usize>>> = vec![None; mesh.edges().len()];
    for (e, edge) in mesh.edges().iter().enumerate() {
        let p = edge_permutation(&frames[edge.tail], &frames[edge.head]).ok_or(Error::Unresolved {
            band: 0,
            edge: e,
            overlap: 0.0,
        })?;
        perms[e] = Some(p);
    }
    let transport = |chain: &[(usize, i8)]| -> Vec<usize> {
        let mut label: Vec<usize> = (0..n).collect();
        for &(e, s) in chain {
            let p = perms[e].as_ref().expect("every edge has a permutation");
            for l in label.iter_mut() {
                *l = if s > 0 {
                    p[*l]
                } else {
                    p.iter().position(|&q| q == *l).expect("permutation")
                };
            }
        }
        label
    };
    obstruction.band_shifts = mesh.cycle_basis().iter().map(|c| transport(c)[0]).collect();
    let moved: Vec<bool> = mesh
        .cycle_basis()
        .iter()
        .map(|c| transport(c).iter().enumerate().any(|(j, &l)| j != l))
        .collect();
    if let Some(cycle) = moved.iter().position(|&m| m) {
        let shift = obstruction.band_shifts[cycle].max(1);
        obstruction.band_shifts[cycle] = shift;
        return Err(Error::Obstructed(Obstruction::BandMonodromy { cycle, shift }));
    }
    for p in mesh.plaquettes() {
        let l = transport(&p.edges);
        if let Some(band) = l.iter().enumerate().position(|(j, &m)| j != m) {
            return Err(Error::Unresolved {
                band,
                edge: p.edges[0].0,
                overlap: 0.0,
            });
        }
    }

    let bands = (0..n)
        .map(|j| {
            let fj = (0..nodes).map(|x| frames[x][j].clone()).collect();
            let values = (0..nodes).map(|x| lift[x][j]).collect();
            LineBundleData::new(mesh.clone(), j, fj, values)
        })
        .collect::<Result<Vec<_>>>()?;
    let bands_report = band_obstructions(&bands, diag.min_gap)?;
    obstruction.chern_numbers = bands_report.chern_numbers.clone();
    obstruction.resolved = bands_report.resolved.clone();
    obstruction.min_overlap = bands_report.min_overlap;
    obstruction.min_gap = diag.min_gap;
    finish_frames(&bands, obstruction)
}

/// Outcome of [`verify_report`].
#[derive(Clone, Debug, PartialEq)]
pub struct Verification {
    pub ok: bool,
    /// First violated clause.
    pub failed: Option<String>,
    pub residual: f64,
    pub unitarity_defect: f64,
    /// Largest distance between `Λ` and the pointwise spectrum.
    pub spectral_distance: f64,
}

/// Re-measures a success report against its field.
pub fn verify_report(a: &MatrixField, r: &DiagonalizationReport) -> Verification {
    let mut out = Verification {
        ok: false,
        failed: None,
        residual: f64::NAN,
        unitarity_defect: f64::NAN,
        spectral_distance: f64::NAN,
    };
    let fail = |mut out: Verification, why: String| {
        out.failed = Some(why);
        out
    };
    if r.status != Status::Success {
        return fail(out, format!("report status is {}", r.status.name()));
    }
    let Some(u) = &r.unitary else {
        return fail(out, "report carries no unitary".into());
    };
    if !u.same_shape(a) || r.lambda.len() != a.n() || r.lambda.iter().any(|f| f.len() != a.mesh().node_count()) {
        return fail(out, "report does not match the field".into());
    }
    out.unitarity_defect = u.samples().iter().map(CMatrix::unitarity_defect).fold(0.0, f64::max);
    out.residual = residual(a, u, &r.lambda, r.lambda_kind);
    out.spectral_distance = match spectral_distance(a, r) {
        Ok(d) => d,
        Err(e) => return fail(out, format!("spectrum of the field: {e}")),
    };
    if out.unitarity_defect > VERIFY_TOL {
        return fail(
            out.clone(),
            format!("U is not unitary (defect {:.3e})", out.unitarity_defect),
        );
    }
    for x in 0..a.mesh().node_count() {
        let l = r.lambda_at(x);
        // Eigen-angles carry no global order once bands cross.
        if r.lambda_kind == LambdaKind::Real && !l.windows(2).all(|w| w[0] >= w[1]) {
            return fail(out, format!("Λ is not sorted at node {x}"));
        }
    }
    let claimed = r.epsilon_achieved.unwrap_or(f64::NAN);
    if !(out.residual <= claimed + VERIFY_TOL) {
        return fail(
            out.clone(),
            format!("residual {:.3e} exceeds the reported {:.3e}", out.residual, claimed),
        );
    }
    if !(out.residual < r.epsilon_requested) {
        return fail(
            out.clone(),
            format!(
                "residual {:.3e} is not below epsilon {:.3e}",
                out.residual, r.epsilon_requested
            ),
        );
    }
    if out.spectral_distance > out.residual + VERIFY_TOL {
        return fail(
            out.clone(),
            format!("Λ is {:.3e} away from the spectrum", out.spectral_distance),
        );
    }
    out.ok = true;
    out
}

/// For Hermitian fields, `max |Λ_j − λ_j|`; for unitary fields, the largest
/// distance from a point of one spectrum to the other.
fn spectral_distance(a: &MatrixField, r: &DiagonalizationReport) -> Result<f64> {
    let mut worst = 0.0f64;
    match r.lambda_kind {
        LambdaKind::Real => {
            let herm = if a.tag() == FieldTag::General {
                a.clone().with_tag(FieldTag::Hermitian)?
            } else {
                a.clone()
            };
            let s = pointwise_spectra(&herm)?;
            for (l, f) in r.lambda.iter().zip(&s) {
                for x in 0..a.mesh().node_count() {
                    worst = worst.max((l.value(x).re - f.value(x).re).abs());
                }
            }
        }
        LambdaKind::Phase => {
            for x in 0..a.mesh().node_count() {
                let ev = unitary_eig(a.sample(x))?.eigenvalues();
                let d: Vec<Complex64> = r.lambda_at(x).iter().map(|&t| Complex64::from_polar(1.0, t)).collect();
                let one_way = |p: &[Complex64], q: &[Complex64]| {
                    p.iter()
                        .map(|z| q.iter().map(|w| (z - w).norm()).fold(f64::INFINITY, f64::min))
                        .fold(0.0, f64::max)
                };
                worst = worst.max(one_way(&ev, &d)).max(one_way(&d, &ev));
            }
        }
    }
    Ok(worst)
}

/// Hermitian eigen-decomposition of every sample, for callers comparing
/// against the pointwise spectrum.
pub fn nodewise_eigenvalues(a: &MatrixField) -> Result<Vec<Vec<f64>>> {
    a.samples().iter().map(|s| Ok(herm_eig(s)?.values)).collect()
}

/// Detectors only: gap scan, eigenframes, Chern numbers and determinant
/// windings, without attempting a diagonalization.
pub fn detect_obstructions(a: &MatrixField) -> Result<ObstructionReport> {
    match a.tag() {
        FieldTag::Hermitian | FieldTag::Projection => {
            let mut gap = f64::INFINITY;
            for s in a.samples() {
                gap = gap.min(numlin::min_gap(&herm_eig(s)?.values));
            }
            let bands = eigenframes(a)?;
            let mut report = band_obstructions(&bands, gap)?;
            report.winding_numbers = hermitian_windings(a);
            Ok(report)
        }
        FieldTag::Unitary => {
            let (det, _) = field_det_tr(a);
            let mut report = ObstructionReport {
                winding_numbers: cycle_windings(&det)?,
                ..Default::default()
            };
            let mut diag = Diagnostics::default();
            match follow_bands(a, 0.0, &mut diag, &mut report) {
                Ok(_) | Err(Error::Obstructed(_)) => {}
                Err(e @ (Error::GapCollapse { .. } | Error::Unresolved { .. } | Error::NotSmooth { .. })) => {
                    return Err(e)
                }
                Err(_) => {}
            }
            report.min_gap = diag.min_gap;
            Ok(report)
        }
        FieldTag::General => Err(Error::WrongTag {
            expected: "hermitian or unitary",
        }),
    }
}

/// Meshes are shared between fields built from the same run.
pub fn shares_mesh(a: &MatrixField, b: &MatrixField) -> bool {
    Arc::ptr_eq(a.mesh(), b.mesh())
}
