//! Eigenline bundles on meshes: link phases, plaquette curvature, Chern and
//! winding numbers, and gauge fixing of eigenvector frames.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Obstruction, Result};
use crate::field::{same_mesh, FieldTag, Invertibility, MatrixField, ScalarField, INV_TOL};
use crate::mesh::{Mesh, MeshKind};
use crate::numlin::{herm_eig, inner, min_gap, vec_norm, wrap_angle, CMatrix};
use crate::reduce::GAP_TOL;

/// Adjacent frames with smaller overlap are considered unresolved.
pub const OVERLAP_TOL: f64 = 0.1;
/// Allowed distance of a curvature sum from an integer multiple of 2π.
pub const CHERN_TOL: f64 = 1e-6;
/// Iteration cap of the Poisson smoother.
pub const POISSON_MAX_ITER: usize = 10_000;
/// Residual target of the Poisson smoother.
pub const POISSON_TOL: f64 = 1e-10;
/// Co-tree mismatch tolerated after tree propagation.
const CONSISTENCY_TOL: f64 = 1e-6;

/// Default bound on aligned link phases: `max(4π/N, π/4)`.
///
/// Link phases of a smooth gauge scale like `h·|connection|`, so a purely
/// `1/N` bound would reject fields with a strong but smooth connection at
/// every resolution; the floor only rejects visibly discontinuous frames.
pub fn smooth_tol(mesh: &Mesh) -> f64 {
    (4.0 * PI / mesh.resolution() as f64).max(PI / 4.0)
}

/// Frames of one spectral band with their discrete connection.
#[derive(Clone, Debug)]
pub struct LineBundleData {
    mesh: Arc<Mesh>,
    pub band: usize,
    /// Unit eigenvector per node.
    pub frames: Vec<Vec<Complex64>>,
    /// Eigenvalue per node.
    pub eigenvalues: Vec<f64>,
    /// `⟨ξ(tail), ξ(head)⟩ / |·|` per edge; 1 where the overlap vanishes.
    pub link_phase: Vec<Complex64>,
    /// `|⟨ξ(tail), ξ(head)⟩|` per edge.
    pub overlap: Vec<f64>,
    /// Principal argument of the ordered link product per plaquette.
    pub curvature: Vec<f64>,
}

impl LineBundleData {
    pub fn new(mesh: Arc<Mesh>, band: usize, frames: Vec<Vec<Complex64>>, eigenvalues: Vec<f64>) -> Result<Self> {
        if frames.len() != mesh.node_count() || eigenvalues.len() != frames.len() {
            return Err(Error::Incompatible);
        }
        let mut link_phase = Vec::with_capacity(mesh.edges().len());
        let mut overlap = Vec::with_capacity(mesh.edges().len());
        for e in mesh.edges() {
            let z = inner(&frames[e.tail], &frames[e.head]);
            let r = z.norm();
            overlap.push(r);
            link_phase.push(if r > 0.0 { z / r } else { Complex64::new(1.0, 0.0) });
        }
        let curvature = mesh
            .plaquettes()
            .iter()
            .map(|p| {
                p.edges
                    .iter()
                    .fold(Complex64::new(1.0, 0.0), |acc, &(e, s)| {
                        acc * if s > 0 { link_phase[e] } else { link_phase[e].conj() }
                    })
                    .arg()
            })
            .collect();
        Ok(Self {
            mesh,
            band,
            frames,
            eigenvalues,
            link_phase,
            overlap,
            curvature,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Same band with frames multiplied by `e^{iθ_x}`.
    pub fn rephased(&self, theta: &[f64]) -> Result<Self> {
        let frames = self
            .frames
            .iter()
            .zip(theta)
            .map(|(f, &t)| {
                let w = Complex64::from_polar(1.0, t);
                f.iter().map(|z| z * w).collect()
            })
            .collect();
        Self::new(self.mesh.clone(), self.band, frames, self.eigenvalues.clone())
    }

    /// Smallest overlap and the edge attaining it.
    pub fn min_overlap(&self) -> (f64, usize) {
        self.overlap.iter().enumerate().fold(
            (f64::INFINITY, 0),
            |best, (e, &o)| if o < best.0 { (o, e) } else { best },
        )
    }

    pub fn is_resolved(&self) -> bool {
        self.overlap.is_empty() || self.min_overlap().0 > OVERLAP_TOL
    }

    pub fn require_resolved(&self) -> Result<()> {
        let (overlap, edge) = self.min_overlap();
        if self.is_resolved() {
            Ok(())
        } else {
            Err(Error::Unresolved {
                band: self.band,
                edge,
                overlap,
            })
        }
    }

    /// Largest `|arg u_e|` over edges.
    pub fn max_link_angle(&self) -> f64 {
        self.link_phase.iter().map(|u| u.arg().abs()).fold(0.0, f64::max)
    }

    /// Product of link phases along a signed chain.
    pub fn holonomy(&self, chain: &[(usize, i8)]) -> Complex64 {
        chain.iter().fold(Complex64::new(1.0, 0.0), |acc, &(e, s)| {
            acc * if s > 0 {
                self.link_phase[e]
            } else {
                self.link_phase[e].conj()
            }
        })
    }
}

/// Unit eigenvector frames of every band of a Hermitian field with simple
/// spectrum, bands ordered by non-increasing eigenvalue.
pub fn eigenframes(b: &MatrixField) -> Result<Vec<LineBundleData>> {
    if !matches!(b.tag(), FieldTag::Hermitian | FieldTag::Projection) {
        return Err(Error::WrongTag { expected: "hermitian" });
    }
    let n = b.n();
    let nodes = b.mesh().node_count();
    let mut frames = vec![Vec::with_capacity(nodes); n];
    let mut values = vec![Vec::with_capacity(nodes); n];
    for (x, s) in b.samples().iter().enumerate() {
        let spec = herm_eig(s)?;
        let gap = min_gap(&spec.values);
        if gap < GAP_TOL {
            return Err(Error::GapCollapse { gap, node: x });
        }
        for j in 0..n {
            frames[j].push(spec.vector(j));
            values[j].push(spec.values[j]);
        }
    }
    frames
        .into_iter()
        .zip(values)
        .enumerate()
        .map(|(j, (f, v))| LineBundleData::new(b.mesh().clone(), j, f, v))
        .collect()
}

/// Lattice first Chern number: `Σ curvature / 2π` on a closed surface.
pub fn chern_number(l: &LineBundleData) -> Result<i64> {
    if !l.mesh.closed_2d() {
        return Err(Error::NotClosed);
    }
    l.require_resolved()?;
    let total = l.curvature.iter().sum::<f64>() / (2.0 * PI);
    let k = total.round();
    if (total - k).abs() > CHERN_TOL {
        return Err(Error::InvalidField(format!("curvature sum {total} is not an integer")));
    }
    Ok(k as i64)
}

/// Degree of `f / |f|` along a closed signed cycle.
pub fn winding_number(f: &ScalarField, cycle: &[(usize, i8)]) -> Result<i64> {
    let margin = f.invertibility_margin();
    if margin <= INV_TOL {
        return Err(Error::NotInvertible { margin });
    }
    let steps = f.mesh().chain_steps(cycle);
    if steps.is_empty() || steps.windows(2).any(|w| w[0].1 != w[1].0) || steps[0].0 != steps[steps.len() - 1].1 {
        return Err(Error::InvalidField("winding needs a closed cycle".into()));
    }
    let total: f64 = steps.iter().map(|&(a, b)| (f.value(b) / f.value(a)).arg()).sum::<f64>() / (2.0 * PI);
    Ok(total.round() as i64)
}

/// Aligns the frames of `l` so every link phase is small.
///
/// The target connection is the co-exact part `δψ` solving the plaquette
/// Poisson equation `dδψ = F`, plus a uniform harmonic part carrying the
/// holonomy of each non-contractible cycle. Frames are then rotated along the
/// spanning tree to realize it. Fails with the Chern number when the bundle
/// on a closed surface is nontrivial.
pub fn trivialize(l: &LineBundleData) -> Result<LineBundleData> {
    trivialize_with(l, smooth_tol(&l.mesh))
}

pub fn trivialize_with(l: &LineBundleData, smooth_tol: f64) -> Result<LineBundleData> {
    l.require_resolved()?;
    let mesh = l.mesh.clone();
    if mesh.closed_2d() {
        let chern = chern_number(l)?;
        if chern != 0 {
            return Err(Error::Obstructed(Obstruction::Chern { band: l.band, chern }));
        }
    }
    let target = target_connection(l);

    let tree = mesh.spanning_tree();
    let mut theta = vec![0.0; mesh.node_count()];
    theta[tree.root] = root_anchor(&l.frames[tree.root]);
    for &y in &tree.order[1..] {
        let (x, e) = tree.parent[y].expect("non-root node has a parent");
        let edge = mesh.edges()[e];
        let (arg, a) = (l.link_phase[e].arg(), target[e]);
        theta[y] = if edge.tail == x {
            theta[x] + a - arg
        } else {
            theta[x] - a + arg
        };
    }
    let aligned = l.rephased(&theta)?;
    let mismatch = aligned
        .link_phase
        .iter()
        .zip(&target)
        .map(|(u, a)| wrap_angle(u.arg() - a).abs())
        .fold(0.0, f64::max);
    let phase = aligned.max_link_angle();
    if mismatch > CONSISTENCY_TOL || phase > smooth_tol {
        return Err(Error::NotSmooth {
            band: l.band,
            phase: phase.max(mismatch),
            tol: smooth_tol,
        });
    }
    Ok(aligned)
}

/// Phase making the largest-modulus component real positive.
fn root_anchor(frame: &[Complex64]) -> f64 {
    let big = frame.iter().fold(
        Complex64::new(0.0, 0.0),
        |best, z| if z.norm() > best.norm() { *z } else { best },
    );
    -big.arg()
}

/// Smooth connection 1-form with the curvature and holonomies of `l`.
fn target_connection(l: &LineBundleData) -> Vec<f64> {
    let mesh = &l.mesh;
    let mut a = vec![0.0; mesh.edges().len()];
    if mesh.dimension() == 2 {
        let psi = solve_plaquette_poisson(mesh, &l.curvature);
        for (p, plaq) in mesh.plaquettes().iter().enumerate() {
            for &(e, s) in &plaq.edges {
                a[e] += s as f64 * psi[p];
            }
        }
    }
    let n = mesh.resolution() as f64;
    match mesh.kind() {
        MeshKind::Circle => {
            let cycle = &mesh.cycle_basis()[0];
            let alpha = l.holonomy(cycle).arg();
            for &(e, s) in cycle {
                a[e] = s as f64 * alpha / n;
            }
        }
        MeshKind::Torus => {
            for cycle in mesh.cycle_basis() {
                let coexact: f64 = cycle.iter().map(|&(e, s)| s as f64 * a[e]).sum();
                let alpha = wrap_angle(l.holonomy(&cycle).arg() - coexact);
                let direction = edge_direction(mesh, cycle[0].0);
                for e in 0..mesh.edges().len() {
                    if edge_direction(mesh, e) == direction {
                        a[e] += alpha / n;
                    }
                }
            }
        }
        _ => {}
    }
    a
}

/// 0 for edges along the first grid axis, 1 for the second.
fn edge_direction(mesh: &Mesh, e: usize) -> usize {
    let edge = mesh.edges()[e];
    let n = mesh.resolution();
    usize::from(edge.tail / n != edge.head / n)
}

/// Solves `d dᵀ ψ = F` on the plaquette graph by successive over-relaxation.
/// Open surfaces get a zero exterior; closed ones a mean-zero solution.
pub fn solve_plaquette_poisson(mesh: &Mesh, curvature: &[f64]) -> Vec<f64> {
    let plaquettes = mesh.plaquettes();
    let count = plaquettes.len();
    let mut owners: Vec<Vec<(usize, f64)>> = vec![Vec::new(); mesh.edges().len()];
    for (p, plaq) in plaquettes.iter().enumerate() {
        for &(e, s) in &plaq.edges {
            owners[e].push((p, s as f64));
        }
    }
    let mut neighbors: Vec<Vec<(usize, f64)>> = vec![Vec::new(); count];
    let mut diag = vec![0.0; count];
    for list in &owners {
        for &(p, sp) in list {
            diag[p] += 1.0;
            for &(q, sq) in list {
                if q != p {
                    neighbors[p].push((q, sp * sq));
                }
            }
        }
    }
    let closed = mesh.closed_2d();
    let mut rhs = curvature.to_vec();
    if closed && count > 0 {
        let mean = rhs.iter().sum::<f64>() / count as f64;
        rhs.iter_mut().for_each(|f| *f -= mean);
    }
    let scale = rhs.iter().map(|f| f.abs()).fold(0.0, f64::max);
    let tol = POISSON_TOL * scale.max(1e-2);
    let omega = 2.0 / (1.0 + (PI / mesh.resolution() as f64).sin());
    let mut psi = vec![0.0; count];
    for _ in 0..POISSON_MAX_ITER {
        for p in 0..count {
            let off: f64 = neighbors[p].iter().map(|&(q, c)| c * psi[q]).sum();
            let gs = (rhs[p] - off) / diag[p];
            psi[p] += omega * (gs - psi[p]);
        }
        let residual = (0..count)
            .map(|p| {
                let off: f64 = neighbors[p].iter().map(|&(q, c)| c * psi[q]).sum();
                (diag[p] * psi[p] + off - rhs[p]).abs()
            })
            .fold(0.0, f64::max);
        if residual <= tol {
            break;
        }
    }
    if closed && count > 0 {
        let mean = psi.iter().sum::<f64>() / count as f64;
        psi.iter_mut().for_each(|v| *v -= mean);
    }
    psi
}

/// Stacks trivialized frames into a unitary field `U(x) = (ξ₁(x), …, ξₙ(x))`.
pub fn assemble_unitary(frames: &[LineBundleData]) -> Result<MatrixField> {
    let first = frames.first().ok_or(Error::Incompatible)?;
    let mesh = first.mesh.clone();
    let n = frames.len();
    if frames
        .iter()
        .any(|f| !same_mesh(&f.mesh, &mesh) || f.frames.first().map_or(0, Vec::len) != n)
    {
        return Err(Error::Incompatible);
    }
    let mut samples = Vec::with_capacity(mesh.node_count());
    let mut worst = 0.0f64;
    for x in 0..mesh.node_count() {
        let cols: Vec<Vec<Complex64>> = frames.iter().map(|f| f.frames[x].clone()).collect();
        let u = CMatrix::from_columns(&cols);
        worst = worst.max(u.unitarity_defect());
        samples.push(u);
    }
    if worst > 1e-9 {
        return Err(Error::NotOrthogonal { defect: worst });
    }
    MatrixField::new(mesh, FieldTag::Unitary, samples).map_err(|_| Error::NotOrthogonal { defect: worst })
}

/// Topological diagnostics of a field.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObstructionReport {
    /// Per band, on closed surfaces only.
    pub chern_numbers: Option<Vec<i64>>,
    /// Per cycle-basis element; empty when not measured.
    pub winding_numbers: Vec<i64>,
    /// Per band.
    pub resolved: Vec<bool>,
    pub min_overlap: f64,
    pub min_gap: f64,
    /// Per cycle, the cyclic shift of unitary bands after transport around it.
    pub band_shifts: Vec<usize>,
}

impl ObstructionReport {
    /// First nonzero integer obstruction.
    pub fn obstruction(&self) -> Option<Obstruction> {
        if let Some(cherns) = &self.chern_numbers {
            if let Some((band, &chern)) = cherns.iter().enumerate().find(|(_, &c)| c != 0) {
                return Some(Obstruction::Chern { band, chern });
            }
        }
        if let Some((cycle, &winding)) = self.winding_numbers.iter().enumerate().find(|(_, &w)| w != 0) {
            return Some(Obstruction::Winding { cycle, winding });
        }
        self.band_shifts
            .iter()
            .enumerate()
            .find(|(_, &s)| s != 0)
            .map(|(cycle, &shift)| Obstruction::BandMonodromy { cycle, shift })
    }

    pub fn has_nonzero(&self) -> bool {
        self.chern_numbers.as_ref().is_some_and(|c| c.iter().any(|&k| k != 0))
            || self.winding_numbers.iter().any(|&w| w != 0)
            || self.band_shifts.iter().any(|&s| s != 0)
    }
}

/// Chern numbers and diagnostics of the eigenline bundles of a Hermitian field.
pub fn band_obstructions(bands: &[LineBundleData], min_gap: f64) -> Result<ObstructionReport> {
    let mut report = ObstructionReport {
        min_gap,
        min_overlap: f64::INFINITY,
        ..Default::default()
    };
    for b in bands {
        report.min_overlap = report.min_overlap.min(b.min_overlap().0);
        report.resolved.push(b.is_resolved());
    }
    if let Some(first) = bands.first() {
        if first.mesh.closed_2d() && report.resolved.iter().all(|&r| r) {
            report.chern_numbers = Some(bands.iter().map(chern_number).collect::<Result<Vec<_>>>()?);
        }
    }
    Ok(report)
}

/// Winding numbers of `f` along every cycle-basis element.
pub fn cycle_windings(f: &ScalarField) -> Result<Vec<i64>> {
    f.mesh().cycle_basis().iter().map(|c| winding_number(f, c)).collect()
}

/// Largest column distance between `u` and `v` after the best per-column
/// phase, i.e. the distance up to a diagonal unitary gauge.
pub fn column_phase_defect(u: &CMatrix, v: &CMatrix) -> f64 {
    let n = u.dim();
    (0..n)
        .map(|j| {
            let (a, b) = (u.column(j), v.column(j));
            let z = inner(&a, &b);
            let r = z.norm();
            let w = if r > 0.0 { z / r } else { Complex64::new(1.0, 0.0) };
            let diff: Vec<Complex64> = a.iter().zip(&b).map(|(p, q)| p * w - q).collect();
            vec_norm(&diff)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;
    use crate::numlin::op_norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mesh(kind: MeshKind, n: usize) -> Arc<Mesh> {
        Arc::new(build_mesh(kind, n).unwrap())
    }

    fn berry(m: &Arc<Mesh>) -> MatrixField {
        MatrixField::from_fn(m.clone(), FieldTag::Hermitian, |p| {
            let c = |re, im| Complex64::new(re, im);
            CMatrix::from_rows(&[vec![c(p[2], 0.0), c(p[0], -p[1])], vec![c(p[0], p[1]), c(-p[2], 0.0)]])
        })
        .unwrap()
    }

    fn circle_rotation(m: &Arc<Mesh>) -> MatrixField {
        MatrixField::from_fn(m.clone(), FieldTag::Hermitian, |p| {
            let (s, c) = p[0].sin_cos();
            CMatrix::from_real_rows(&[vec![c, s], vec![s, -c]])
        })
        .unwrap()
    }

    fn random_phases(count: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| rng.gen_range(-PI..PI)).collect()
    }

    #[test]
    fn constant_field_has_flat_frames() {
        let m = mesh(MeshKind::Torus, 5);
        let f = MatrixField::constant(m, FieldTag::Hermitian, &CMatrix::from_real_diag(&[2.0, 1.0])).unwrap();
        let bands = eigenframes(&f).unwrap();
        assert_eq!(bands.len(), 2);
        for (j, b) in bands.iter().enumerate() {
            assert!((b.frames[0][j].norm() - 1.0).abs() < 1e-12);
            assert!(b.link_phase.iter().all(|u| (u - 1.0).norm() < 1e-12));
            assert!(b.curvature.iter().all(|c| c.abs() < 1e-12));
            assert_eq!(chern_number(b).unwrap(), 0);
        }
    }

    #[test]
    fn degenerate_field_is_rejected() {
        let m = mesh(MeshKind::Interval, 4);
        let f = MatrixField::constant(m, FieldTag::Hermitian, &CMatrix::identity(2)).unwrap();
        assert!(matches!(eigenframes(&f), Err(Error::GapCollapse { .. })));
    }

    #[test]
    fn frames_are_orthonormal_eigenvectors() {
        let m = mesh(MeshKind::Circle, 12);
        let f = circle_rotation(&m);
        let bands = eigenframes(&f).unwrap();
        for x in 0..12 {
            assert!((bands[0].eigenvalues[x] - 1.0).abs() < 1e-12);
            assert!((bands[1].eigenvalues[x] + 1.0).abs() < 1e-12);
            assert!(inner(&bands[0].frames[x], &bands[1].frames[x]).norm() < 1e-9);
            let theta = m.coord(x)[0];
            let expected = [
                Complex64::new((theta / 2.0).cos(), 0.0),
                Complex64::new((theta / 2.0).sin(), 0.0),
            ];
            assert!((inner(&expected, &bands[0].frames[x]).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reversing_an_edge_conjugates_its_link() {
        let m = mesh(MeshKind::Square, 5);
        let bands = eigenframes(&berry_square(&m)).unwrap();
        let b = &bands[0];
        let e = m.edges()[3];
        let forward = inner(&b.frames[e.tail], &b.frames[e.head]);
        let backward = inner(&b.frames[e.head], &b.frames[e.tail]);
        assert!((forward.conj() - backward).norm() < 1e-15);
    }

    fn berry_square(m: &Arc<Mesh>) -> MatrixField {
        MatrixField::from_fn(m.clone(), FieldTag::Hermitian, |p| {
            let (x, y) = (p[0] - 0.3, p[1] - 0.6);
            let z = 0.5;
            CMatrix::from_rows(&[
                vec![Complex64::new(z, 0.0), Complex64::new(x, -y)],
                vec![Complex64::new(x, y), Complex64::new(-z, 0.0)],
            ])
        })
        .unwrap()
    }

    #[test]
    fn berry_sphere_chern_numbers() {
        for n in [8, 16] {
            let m = mesh(MeshKind::Sphere, n);
            let bands = eigenframes(&berry(&m)).unwrap();
            let upper = chern_number(&bands[0]).unwrap();
            let lower = chern_number(&bands[1]).unwrap();
            assert_eq!((lower, upper), (-1, 1), "N = {n}");
            assert!(bands.iter().all(LineBundleData::is_resolved));
        }
    }

    #[test]
    fn chern_is_gauge_invariant() {
        let m = mesh(MeshKind::Sphere, 8);
        let bands = eigenframes(&berry(&m)).unwrap();
        let rotated = bands[1].rephased(&random_phases(m.node_count(), 4)).unwrap();
        assert_eq!(chern_number(&rotated).unwrap(), chern_number(&bands[1]).unwrap());
        let cycle = mesh(MeshKind::Torus, 6);
        let f = MatrixField::from_fn(cycle.clone(), FieldTag::Hermitian, |p| {
            let (s, c) = (p[0] + p[1]).sin_cos();
            CMatrix::from_real_rows(&[vec![c, s], vec![s, -c]])
        })
        .unwrap();
        let b = &eigenframes(&f).unwrap()[0];
        let r = b.rephased(&random_phases(cycle.node_count(), 5)).unwrap();
        for c in cycle.cycle_basis() {
            assert!((b.holonomy(&c) - r.holonomy(&c)).norm() < 1e-12);
        }
    }

    #[test]
    fn chern_requires_closed_surface() {
        let m = mesh(MeshKind::Square, 5);
        let bands = eigenframes(&berry_square(&m)).unwrap();
        assert!(matches!(chern_number(&bands[0]), Err(Error::NotClosed)));
    }

    #[test]
    fn winding_examples() {
        let m = mesh(MeshKind::Circle, 7);
        let cycle = &m.cycle_basis()[0];
        let one = ScalarField::constant(m.clone(), 1.0);
        assert_eq!(winding_number(&one, cycle).unwrap(), 0);
        let f = ScalarField::from_fn(m.clone(), |p| Complex64::from_polar(1.0, p[0])).unwrap();
        assert_eq!(winding_number(&f, cycle).unwrap(), 1);
        let g = ScalarField::from_fn(m.clone(), |p| Complex64::from_polar(1.0, 2.0 * p[0])).unwrap();
        assert_eq!(winding_number(&g, cycle).unwrap(), 2);
        assert_eq!(winding_number(&f.conj(), cycle).unwrap(), -1);
        let zero = ScalarField::constant(m, 0.0);
        assert!(matches!(winding_number(&zero, cycle), Err(Error::NotInvertible { .. })));
    }

    #[test]
    fn winding_is_additive_on_random_functions() {
        let m = mesh(MeshKind::Circle, 64);
        let cycle = &m.cycle_basis()[0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let k = rng.gen_range(-3..4);
            let a = rng.gen_range(0.0..0.5);
            let phase = rng.gen_range(0.0..PI);
            let f = ScalarField::from_fn(m.clone(), |p| {
                Complex64::from_polar(1.0 + a * (p[0] + phase).cos(), k as f64 * p[0] + a * (2.0 * p[0]).sin())
            })
            .unwrap();
            let w = winding_number(&f, cycle).unwrap();
            assert_eq!(w, k);
            assert_eq!(winding_number(&f.powi(2), cycle).unwrap(), 2 * w);
            assert_eq!(winding_number(&f.mul(&f.conj()).unwrap(), cycle).unwrap(), 0);
        }
    }

    #[test]
    fn interval_and_square_always_trivialize() {
        let line = mesh(MeshKind::Interval, 30);
        let f = MatrixField::from_fn(line, FieldTag::Hermitian, |p| {
            let t = 2.0 * PI * p[0];
            CMatrix::from_rows(&[
                vec![Complex64::new(0.0, 0.0), Complex64::from_polar(1.0, t)],
                vec![Complex64::from_polar(1.0, -t), Complex64::new(0.0, 0.0)],
            ])
        })
        .unwrap();
        for b in eigenframes(&f).unwrap() {
            let t = trivialize(&b.rephased(&random_phases(30, 1)).unwrap()).unwrap();
            assert!(t.max_link_angle() < 1e-9);
        }
        let sq = mesh(MeshKind::Square, 17);
        for b in eigenframes(&berry_square(&sq)).unwrap() {
            let t = trivialize(&b.rephased(&random_phases(sq.node_count(), 2)).unwrap()).unwrap();
            assert!(t.max_link_angle() <= smooth_tol(&sq));
            for x in 0..sq.node_count() {
                assert!((inner(&t.frames[x], &b.frames[x]).norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn circle_holonomy_is_spread_evenly() {
        let n = 24;
        let m = mesh(MeshKind::Circle, n);
        let bands = eigenframes(&circle_rotation(&m)).unwrap();
        for b in &bands {
            let alpha = b.holonomy(&m.cycle_basis()[0]).arg().abs();
            assert!((alpha - PI).abs() < 1e-9, "rotation model has holonomy −1");
            let t = trivialize(b).unwrap();
            assert!(t.max_link_angle() <= alpha / n as f64 + 1e-9);
        }
    }

    #[test]
    fn berry_sphere_is_obstructed() {
        let m = mesh(MeshKind::Sphere, 8);
        let bands = eigenframes(&berry(&m)).unwrap();
        match trivialize(&bands[1]) {
            Err(Error::Obstructed(Obstruction::Chern { chern, band })) => assert_eq!((band, chern), (1, -1)),
            other => panic!("expected Chern obstruction, got {other:?}"),
        }
    }

    #[test]
    fn torus_band_with_zero_chern_trivializes() {
        let m = mesh(MeshKind::Torus, 16);
        let f = MatrixField::from_fn(m.clone(), FieldTag::Hermitian, |p| {
            let (s, c) = (p[0] + 2.0 * p[1]).sin_cos();
            CMatrix::from_rows(&[
                vec![
                    Complex64::new(c + 0.3 * p[1].cos(), 0.0),
                    Complex64::new(s, 0.2 * p[0].sin()),
                ],
                vec![Complex64::new(s, -0.2 * p[0].sin()), Complex64::new(-c, 0.0)],
            ])
        })
        .unwrap();
        for b in eigenframes(&f).unwrap() {
            assert_eq!(chern_number(&b).unwrap(), 0);
            let t = trivialize(&b).unwrap();
            assert!(t.max_link_angle() <= smooth_tol(&m));
        }
    }

    #[test]
    fn assembled_unitary_diagonalizes_the_circle_model() {
        let m = mesh(MeshKind::Circle, 32);
        let f = circle_rotation(&m);
        let bands: Vec<_> = eigenframes(&f)
            .unwrap()
            .iter()
            .map(|b| trivialize(b).unwrap())
            .collect();
        let u = assemble_unitary(&bands).unwrap();
        for x in 0..m.node_count() {
            let d = f.sample(x).conjugate_by(u.sample(x));
            let target = CMatrix::from_real_diag(&[1.0, -1.0]);
            assert!(op_norm(&(&d - &target)) < 1e-8);
        }
        let constant =
            MatrixField::constant(m, FieldTag::Hermitian, &CMatrix::from_real_diag(&[3.0, 1.0, 2.0])).unwrap();
        let bands: Vec<_> = eigenframes(&constant)
            .unwrap()
            .iter()
            .map(|b| trivialize(b).unwrap())
            .collect();
        let u = assemble_unitary(&bands).unwrap();
        let p = CMatrix::from_real_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]);
        assert!((u.sample(0) - &p).max_abs() < 1e-12);
    }

    #[test]
    fn non_orthogonal_frames_are_rejected() {
        let m = mesh(MeshKind::Interval, 3);
        let f = vec![vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]; 3];
        let a = LineBundleData::new(m.clone(), 0, f.clone(), vec![0.0; 3]).unwrap();
        let b = LineBundleData::new(m, 1, f, vec![0.0; 3]).unwrap();
        assert!(matches!(assemble_unitary(&[a, b]), Err(Error::NotOrthogonal { .. })));
    }

    #[test]
    fn poisson_solution_reproduces_curvature() {
        for kind in [MeshKind::Square, MeshKind::Torus, MeshKind::Sphere] {
            let m = mesh(kind, 8);
            let mut f: Vec<f64> = random_phases(m.plaquettes().len(), 7)
                .iter()
                .map(|v| 0.01 * v)
                .collect();
            if m.closed_2d() {
                let mean = f.iter().sum::<f64>() / f.len() as f64;
                f.iter_mut().for_each(|v| *v -= mean);
            }
            let psi = solve_plaquette_poisson(&m, &f);
            let mut a = vec![0.0; m.edges().len()];
            for (p, plaq) in m.plaquettes().iter().enumerate() {
                for &(e, s) in &plaq.edges {
                    a[e] += s as f64 * psi[p];
                }
            }
            for (p, plaq) in m.plaquettes().iter().enumerate() {
                let d: f64 = plaq.edges.iter().map(|&(e, s)| s as f64 * a[e]).sum();
                assert!((d - f[p]).abs() < 1e-9, "{kind}");
            }
        }
    }
}
