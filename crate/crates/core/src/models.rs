//! Built-in field generators.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{FieldTag, MatrixField};
use crate::mesh::{build_mesh, Mesh, MeshKind};
use crate::numlin::CMatrix;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `[[z, x − iy], [x + iy, −z]]`.
pub fn pauli_dot(p: [f64; 3]) -> CMatrix {
    CMatrix::from_rows(&[vec![c(p[2], 0.0), c(p[0], -p[1])], vec![c(p[0], p[1]), c(-p[2], 0.0)]])
}

/// Tridiagonal Toeplitz matrix with 2 on the diagonal and 1 beside it; its
/// eigenvalues `2 + 2cos(kπ/(n+1))` are simple.
pub fn toeplitz(n: usize) -> CMatrix {
    CMatrix::from_fn(n, |i, j| match i.abs_diff(j) {
        0 => c(2.0, 0.0),
        1 => c(1.0, 0.0),
        _ => c(0.0, 0.0),
    })
}

/// Angle-like coordinates of a node used by the Fourier generator.
fn phases(kind: MeshKind, p: &[f64; 3]) -> Vec<f64> {
    match kind {
        MeshKind::Interval => vec![PI * p[0]],
        MeshKind::Circle => vec![p[0]],
        MeshKind::Square => vec![PI * p[0], PI * p[1]],
        MeshKind::Torus => vec![p[0], p[1]],
        MeshKind::Sphere => vec![PI * p[0], PI * p[1], PI * p[2]],
    }
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMatrix {
    CMatrix::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .hermitian_part()
        .scale_real(scale)
}

/// Smooth random Hermitian field: a random constant part plus low Fourier
/// modes `Σ_k (C_k cos kφ + S_k sin kφ)/k` in every angle-like coordinate, with
/// random Hermitian coefficients drawn from `seed`.
pub fn random_smooth_hermitian(mesh: Arc<Mesh>, n: usize, seed: u64) -> Result<MatrixField> {
    const MODES: usize = 2;
    const AMPLITUDE: f64 = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = mesh.kind();
    let axes = phases(kind, &[0.0; 3]).len();
    let base = random_hermitian(&mut rng, n, 1.0);
    let mut modes = Vec::new();
    for axis in 0..axes {
        for k in 1..=MODES {
            let scale = AMPLITUDE / k as f64;
            let cos = random_hermitian(&mut rng, n, scale);
            let sin = random_hermitian(&mut rng, n, scale);
            modes.push((axis, k as f64, cos, sin));
        }
    }
    MatrixField::from_fn(mesh, FieldTag::Hermitian, |p| {
        let phi = phases(kind, p);
        let mut a = base.clone();
        for (axis, k, cos, sin) in &modes {
            let (s, co) = (k * phi[*axis]).sin_cos();
            a = &(&a + &cos.scale_real(co)) + &sin.scale_real(s);
        }
        a
    })
}

/// Named generators with their parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    /// Constant Hermitian Toeplitz field of size `n`.
    Constant {
        n: usize,
    },
    RandomSmooth {
        n: usize,
        seed: u64,
    },
    /// `[[0, e^{ix}], [e^{−ix}, 0]]` with `x = 2π·t` on the interval.
    TwoByTwo,
    /// `[[cos θ, sin θ], [sin θ, −cos θ]]` on the circle.
    CircleRotation,
    /// `p·σ` on the sphere.
    BerrySphere,
    /// `p·σ` composed with `(ϑ, φ) ↦ (ϑ, degree·φ)`.
    BerryPullback {
        degree: i32,
    },
    /// Unitary `[[0, 1], [e^{ikθ}, 0]]` on the circle.
    WindingUnitary {
        k: i32,
    },
    /// Unitary `diag(e^{iθ}, e^{−iθ})` on the circle.
    DiagRotation,
    /// Rank-one projection onto a smoothly rotating unit vector.
    ProjectionRankOne,
    /// Projection `(I − p·σ)/2` onto the lower Berry band.
    ProjectionSphere,
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Constant { .. } => "constant",
            Model::RandomSmooth { .. } => "random-smooth",
            Model::TwoByTwo => "two-by-two",
            Model::CircleRotation => "circle-rotation",
            Model::BerrySphere => "berry-sphere",
            Model::BerryPullback { .. } => "berry-pullback",
            Model::WindingUnitary { .. } => "winding-unitary",
            Model::DiagRotation => "diag-rotation",
            Model::ProjectionRankOne => "projection-rank-one",
            Model::ProjectionSphere => "projection-sphere",
        }
    }

    pub const NAMES: [&'static str; 10] = [
        "constant",
        "random-smooth",
        "two-by-two",
        "circle-rotation",
        "berry-sphere",
        "berry-pullback",
        "winding-unitary",
        "diag-rotation",
        "projection-rank-one",
        "projection-sphere",
    ];

    /// Model `name` with default parameters.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "constant" => Model::Constant { n: 3 },
            "random-smooth" => Model::RandomSmooth { n: 3, seed: 42 },
            "two-by-two" => Model::TwoByTwo,
            "circle-rotation" => Model::CircleRotation,
            "berry-sphere" => Model::BerrySphere,
            "berry-pullback" => Model::BerryPullback { degree: 2 },
            "winding-unitary" => Model::WindingUnitary { k: 1 },
            "diag-rotation" => Model::DiagRotation,
            "projection-rank-one" => Model::ProjectionRankOne,
            "projection-sphere" => Model::ProjectionSphere,
            _ => return None,
        })
    }

    pub fn tag(&self) -> FieldTag {
        match self {
            Model::WindingUnitary { .. } | Model::DiagRotation => FieldTag::Unitary,
            Model::ProjectionRankOne | Model::ProjectionSphere => FieldTag::Projection,
            _ => FieldTag::Hermitian,
        }
    }

    /// Mesh kinds the generator is defined on.
    pub fn supports(&self, kind: MeshKind) -> bool {
        match self {
            Model::Constant { .. } | Model::RandomSmooth { .. } => true,
            Model::TwoByTwo => kind == MeshKind::Interval,
            Model::CircleRotation | Model::WindingUnitary { .. } | Model::DiagRotation => {
                matches!(kind, MeshKind::Circle | MeshKind::Torus)
            }
            Model::BerrySphere | Model::BerryPullback { .. } | Model::ProjectionSphere => kind == MeshKind::Sphere,
            Model::ProjectionRankOne => matches!(kind, MeshKind::Interval | MeshKind::Square),
        }
    }

    /// Default mesh for the model.
    pub fn default_mesh(&self) -> (MeshKind, usize) {
        match self {
            Model::Constant { .. } => (MeshKind::Torus, 8),
            Model::RandomSmooth { .. } => (MeshKind::Square, 33),
            Model::TwoByTwo | Model::ProjectionRankOne => (MeshKind::Interval, 101),
            Model::CircleRotation | Model::WindingUnitary { .. } | Model::DiagRotation => (MeshKind::Circle, 128),
            Model::BerrySphere | Model::BerryPullback { .. } | Model::ProjectionSphere => (MeshKind::Sphere, 16),
        }
    }

    pub fn build_default(&self) -> Result<MatrixField> {
        let (kind, n) = self.default_mesh();
        self.build(Arc::new(build_mesh(kind, n)?))
    }

    pub fn build(&self, mesh: Arc<Mesh>) -> Result<MatrixField> {
        if !self.supports(mesh.kind()) {
            return Err(Error::InvalidField(format!(
                "model {} is not defined on a {} mesh",
                self.name(),
                mesh.kind()
            )));
        }
        let tag = self.tag();
        match *self {
            Model::Constant { n } => MatrixField::constant(mesh, tag, &toeplitz(n)),
            Model::RandomSmooth { n, seed } => random_smooth_hermitian(mesh, n, seed),
            Model::TwoByTwo => MatrixField::from_fn(mesh, tag, |p| {
                let e = Complex64::from_polar(1.0, 2.0 * PI * p[0]);
                CMatrix::from_rows(&[vec![c(0.0, 0.0), e], vec![e.conj(), c(0.0, 0.0)]])
            }),
            Model::CircleRotation => MatrixField::from_fn(mesh, tag, |p| {
                let (s, co) = p[0].sin_cos();
                CMatrix::from_real_rows(&[vec![co, s], vec![s, -co]])
            }),
            Model::BerrySphere => MatrixField::from_fn(mesh, tag, |p| pauli_dot(*p)),
            Model::BerryPullback { degree } => MatrixField::from_fn(mesh, tag, |p| pauli_dot(pullback(*p, degree))),
            Model::WindingUnitary { k } => MatrixField::from_fn(mesh, tag, |p| {
                CMatrix::from_rows(&[
                    vec![c(0.0, 0.0), c(1.0, 0.0)],
                    vec![Complex64::from_polar(1.0, k as f64 * p[0]), c(0.0, 0.0)],
                ])
            }),
            Model::DiagRotation => MatrixField::from_fn(mesh, tag, |p| {
                CMatrix::from_diag(&[Complex64::from_polar(1.0, p[0]), Complex64::from_polar(1.0, -p[0])])
            }),
            Model::ProjectionRankOne => MatrixField::from_fn(mesh, tag, |p| {
                let a = 0.5 * PI * p[0] + 0.25 * PI * p[1];
                let v = [c(a.cos(), 0.0), Complex64::from_polar(a.sin(), PI * p[1])];
                CMatrix::from_fn(2, |i, j| v[i] * v[j].conj())
            }),
            Model::ProjectionSphere => {
                MatrixField::from_fn(mesh, tag, |p| (&CMatrix::identity(2) - &pauli_dot(*p)).scale_real(0.5))
            }
        }
    }
}

/// `(sin ϑ cos dφ, sin ϑ sin dφ, cos ϑ)` for `p = (sin ϑ cos φ, sin ϑ sin φ, cos ϑ)`.
pub fn pullback(p: [f64; 3], degree: i32) -> [f64; 3] {
    let r = p[0].hypot(p[1]);
    let phi = p[1].atan2(p[0]) * degree as f64;
    [r * phi.cos(), r * phi.sin(), p[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{continuity_modulus, pointwise_spectra};

    #[test]
    fn every_model_builds_on_its_default_mesh() {
        for name in Model::NAMES {
            let model = Model::from_name(name).unwrap();
            assert_eq!(model.name(), name);
            let f = model.build_default().unwrap();
            assert_eq!(f.tag(), model.tag());
        }
        assert!(Model::from_name("nope").is_none());
    }

    #[test]
    fn unsupported_mesh_is_rejected() {
        let m = Arc::new(build_mesh(MeshKind::Square, 4).unwrap());
        assert!(Model::BerrySphere.build(m).is_err());
    }

    #[test]
    fn random_fields_are_seeded() {
        let m = Arc::new(build_mesh(MeshKind::Circle, 16).unwrap());
        let a = random_smooth_hermitian(m.clone(), 3, 1).unwrap();
        let b = random_smooth_hermitian(m.clone(), 3, 1).unwrap();
        let c = random_smooth_hermitian(m, 3, 2).unwrap();
        assert_eq!(a.samples(), b.samples());
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn berry_field_has_spectrum_plus_minus_one() {
        let f = Model::BerrySphere.build_default().unwrap();
        let s = pointwise_spectra(&f).unwrap();
        assert!(s[0].values().iter().all(|v| (v.re - 1.0).abs() < 1e-12));
        assert!(s[1].values().iter().all(|v| (v.re + 1.0).abs() < 1e-12));
    }

    #[test]
    fn berry_continuity_halves_under_refinement() {
        let at = |n| {
            continuity_modulus(
                &Model::BerrySphere
                    .build(Arc::new(build_mesh(MeshKind::Sphere, n).unwrap()))
                    .unwrap(),
            )
        };
        let ratio = at(32) / at(16);
        assert!((ratio - 0.5).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn pullback_has_the_requested_degree() {
        let p = [0.6, 0.0, 0.8];
        let q = pullback([0.0, 0.6, 0.8], 2);
        assert!((q[0] + p[0]).abs() < 1e-12 && q[1].abs() < 1e-12);
    }
}
