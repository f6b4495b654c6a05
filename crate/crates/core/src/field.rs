//! Matrix- and scalar-valued fields sampled at mesh nodes.
//!
//! A field is its node samples. Norms, margins and spectra are node maxima or
//! minima, reduced in node-id order.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::numlin::{self, herm_eig, op_norm, CMatrix};

/// Structural tolerance for the field tags.
pub const TAG_TOL: f64 = 1e-10;
/// A field is invertible when its margin exceeds this.
pub const INV_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FieldTag {
    Hermitian,
    Unitary,
    Projection,
    General,
}

impl FieldTag {
    pub fn name(self) -> &'static str {
        match self {
            FieldTag::Hermitian => "hermitian",
            FieldTag::Unitary => "unitary",
            FieldTag::Projection => "projection",
            FieldTag::General => "general",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            FieldTag::Hermitian,
            FieldTag::Unitary,
            FieldTag::Projection,
            FieldTag::General,
        ]
        .into_iter()
        .find(|t| t.name() == name)
    }

    /// Structural defect of `x` relative to this tag; zero for `General`.
    pub fn defect(self, x: &CMatrix) -> f64 {
        let scale = x.frobenius_norm().max(1.0);
        match self {
            FieldTag::General => 0.0,
            FieldTag::Hermitian => x.hermitian_defect() / scale,
            FieldTag::Unitary => x.unitarity_defect(),
            FieldTag::Projection => {
                let idem = (&(x * x) - x).frobenius_norm();
                x.hermitian_defect().max(idem) / scale
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct MatrixField {
    mesh: Arc<Mesh>,
    n: usize,
    samples: Vec<CMatrix>,
    tag: FieldTag,
}

impl MatrixField {
    /// Validates sample count, dimensions, finiteness and the tag.
    pub fn new(mesh: Arc<Mesh>, tag: FieldTag, samples: Vec<CMatrix>) -> Result<Self> {
        if samples.len() != mesh.node_count() {
            return Err(Error::InvalidField(format!(
                "{} samples for {} nodes",
                samples.len(),
                mesh.node_count()
            )));
        }
        let n = samples.first().map(CMatrix::dim).unwrap_or(1);
        for (node, s) in samples.iter().enumerate() {
            if s.dim() != n {
                return Err(Error::InvalidField(format!(
                    "sample {node} is {}×{}, expected {n}×{n}",
                    s.dim(),
                    s.dim()
                )));
            }
            if !s.is_finite() {
                return Err(Error::InvalidField(format!("sample {node} is not finite")));
            }
            let defect = tag.defect(s);
            if defect > TAG_TOL {
                return Err(Error::InvalidField(format!(
                    "sample {node} is not {} (defect {defect:.3e})",
                    tag.name()
                )));
            }
        }
        Ok(Self { mesh, n, samples, tag })
    }

    /// Evaluates `f` at every node coordinate.
    pub fn from_fn(mesh: Arc<Mesh>, tag: FieldTag, f: impl Fn(&[f64; 3]) -> CMatrix) -> Result<Self> {
        let samples = mesh.coords().iter().map(f).collect();
        Self::new(mesh, tag, samples)
    }

    pub fn constant(mesh: Arc<Mesh>, tag: FieldTag, value: &CMatrix) -> Result<Self> {
        let samples = vec![value.clone(); mesh.node_count()];
        Self::new(mesh, tag, samples)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tag(&self) -> FieldTag {
        self.tag
    }

    pub fn samples(&self) -> &[CMatrix] {
        &self.samples
    }

    pub fn sample(&self, node: usize) -> &CMatrix {
        &self.samples[node]
    }

    pub fn into_samples(self) -> Vec<CMatrix> {
        self.samples
    }

    /// Re-tags the field, validating the new tag.
    pub fn with_tag(self, tag: FieldTag) -> Result<Self> {
        Self::new(self.mesh, tag, self.samples)
    }

    pub fn require(&self, tag: FieldTag) -> Result<()> {
        if self.tag == tag {
            Ok(())
        } else {
            Err(Error::WrongTag { expected: tag.name() })
        }
    }

    pub fn same_shape(&self, other: &MatrixField) -> bool {
        self.n == other.n && same_mesh(&self.mesh, &other.mesh)
    }

    /// Nodewise map producing a general field.
    pub fn map(&self, f: impl Fn(usize, &CMatrix) -> CMatrix) -> Result<MatrixField> {
        let samples = self.samples.iter().enumerate().map(|(i, s)| f(i, s)).collect();
        Self::new(self.mesh.clone(), FieldTag::General, samples)
    }

    pub fn zip_map(&self, other: &MatrixField, f: impl Fn(&CMatrix, &CMatrix) -> CMatrix) -> Result<MatrixField> {
        if !self.same_shape(other) {
            return Err(Error::Incompatible);
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| f(a, b)).collect();
        Self::new(self.mesh.clone(), FieldTag::General, samples)
    }

    pub fn difference(&self, other: &MatrixField) -> Result<MatrixField> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn product(&self, other: &MatrixField) -> Result<MatrixField> {
        self.zip_map(other, |a, b| a * b)
    }

    /// Nodewise `U*·F·U`, keeping Hermitian/projection tags.
    pub fn conjugate_by(&self, u: &MatrixField) -> Result<MatrixField> {
        let out = self.zip_map(u, |a, w| a.conjugate_by(w))?;
        match self.tag {
            FieldTag::Hermitian | FieldTag::Projection => Ok(MatrixField { tag: self.tag, ..out }),
            _ => Ok(out),
        }
    }
}

pub(crate) fn same_mesh(a: &Arc<Mesh>, b: &Arc<Mesh>) -> bool {
    Arc::ptr_eq(a, b) || (a.kind() == b.kind() && a.resolution() == b.resolution())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    mesh: Arc<Mesh>,
    values: Vec<Complex64>,
    real: bool,
}

impl ScalarField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::InvalidField(format!(
                "{} values for {} nodes",
                values.len(),
                mesh.node_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidField("scalar field is not finite".into()));
        }
        Ok(Self {
            mesh,
            values,
            real: false,
        })
    }

    pub fn from_real(mesh: Arc<Mesh>, values: &[f64]) -> Result<Self> {
        let mut f = Self::new(mesh, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())?;
        f.real = true;
        Ok(f)
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(&[f64; 3]) -> Complex64) -> Result<Self> {
        let values = mesh.coords().iter().map(f).collect();
        Self::new(mesh, values)
    }

    pub fn from_real_fn(mesh: Arc<Mesh>, f: impl Fn(&[f64; 3]) -> f64) -> Result<Self> {
        let values: Vec<f64> = mesh.coords().iter().map(f).collect();
        Self::from_real(mesh, &values)
    }

    pub fn constant(mesh: Arc<Mesh>, value: f64) -> Self {
        let values = vec![value; mesh.node_count()];
        Self::from_real(mesh, &values).expect("finite constant")
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn value(&self, node: usize) -> Complex64 {
        self.values[node]
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn conj(&self) -> ScalarField {
        ScalarField {
            values: self.values.iter().map(|v| v.conj()).collect(),
            ..self.clone()
        }
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        if !same_mesh(&self.mesh, &other.mesh) {
            return Err(Error::Incompatible);
        }
        Ok(ScalarField {
            mesh: self.mesh.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
            real: self.real && other.real,
        })
    }

    pub fn powi(&self, k: i32) -> ScalarField {
        ScalarField {
            values: self.values.iter().map(|v| v.powi(k)).collect(),
            ..self.clone()
        }
    }

    /// Largest absolute value over nodes.
    pub fn sup_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Fields whose nodewise invertibility can be measured.
pub trait Invertibility {
    /// Minimum over nodes of `|det|` (or `|value|` for scalars).
    fn invertibility_margin(&self) -> f64;

    fn is_invertible(&self) -> bool {
        self.invertibility_margin() > INV_TOL
    }
}

impl Invertibility for ScalarField {
    fn invertibility_margin(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min)
    }
}

impl Invertibility for MatrixField {
    fn invertibility_margin(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| numlin::det(s).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn invertibility_margin(f: &impl Invertibility) -> f64 {
    f.invertibility_margin()
}

/// Maximum over nodes of the operator norm.
pub fn sup_norm(f: &MatrixField) -> f64 {
    f.samples.iter().map(op_norm).fold(0.0, f64::max)
}

/// Sorted eigenvalue fields `λ₁ ≥ … ≥ λₙ`.
pub fn pointwise_spectra(f: &MatrixField) -> Result<Vec<ScalarField>> {
    if !matches!(f.tag, FieldTag::Hermitian | FieldTag::Projection) {
        return Err(Error::WrongTag { expected: "hermitian" });
    }
    let mut columns = vec![Vec::with_capacity(f.samples.len()); f.n];
    for s in &f.samples {
        let spec = herm_eig(s)?;
        for (col, v) in columns.iter_mut().zip(spec.values) {
            col.push(v);
        }
    }
    columns
        .iter()
        .map(|c| ScalarField::from_real(f.mesh.clone(), c))
        .collect()
}

/// Nodewise determinant and trace.
pub fn field_det_tr(f: &MatrixField) -> (ScalarField, ScalarField) {
    let (det, tr): (Vec<_>, Vec<_>) = f.samples.iter().map(numlin::det_tr).unzip();
    let build = |values| ScalarField {
        mesh: f.mesh.clone(),
        values,
        real: false,
    };
    (build(det), build(tr))
}

/// Maximum over edges of `‖F(x) − F(y)‖`.
pub fn continuity_modulus(f: &MatrixField) -> f64 {
    f.mesh
        .edges()
        .iter()
        .map(|e| op_norm(&(&f.samples[e.head] - &f.samples[e.tail])))
        .fold(0.0, f64::max)
}
