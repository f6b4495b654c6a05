use crate::mesh::MeshKind;

/// Failures of the dense kernels in [`crate::numlin`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is not Hermitian (defect {defect:.3e} exceeds {bound:.3e})")]
    NotHermitian { defect: f64, bound: f64 },
    #[error("Jacobi iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("vector norm {norm:.3e} is below tolerance")]
    ZeroVector { norm: f64 },
    #[error("matrix is numerically singular (smallest singular value {sigma_min:.3e})")]
    Singular { sigma_min: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
}

/// A topological obstruction detected on a mesh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Obstruction {
    /// Nonzero first Chern number of an eigenline bundle on a closed surface.
    Chern { band: usize, chern: i64 },
    /// Nonzero phase winding along a non-contractible cycle.
    Winding { cycle: usize, winding: i64 },
    /// Eigenvalue bands of a unitary field are permuted when transported around a cycle.
    BandMonodromy { cycle: usize, shift: usize },
}

impl std::fmt::Display for Obstruction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Obstruction::Chern { band, chern } => write!(f, "band {band} has Chern number {chern}"),
            Obstruction::Winding { cycle, winding } => {
                write!(f, "cycle {cycle} carries winding number {winding}")
            }
            Obstruction::BandMonodromy { cycle, shift } => {
                write!(f, "bands are cyclically shifted by {shift} around cycle {cycle}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("resolution {resolution} is too small for a {kind:?} mesh")]
    BadResolution { kind: MeshKind, resolution: usize },
    #[error("field is invalid: {0}")]
    InvalidField(String),
    #[error("operation requires a {expected} field")]
    WrongTag { expected: &'static str },
    #[error("{functions} real functions cannot be made jointly nonvanishing on a {dim}-dimensional mesh")]
    DimensionObstruction { functions: usize, dim: usize },
    #[error("perturbation failed after {attempts} attempts (best margin {best_margin:.3e})")]
    PerturbationFailed { attempts: usize, best_margin: f64 },
    #[error("spectral gap collapsed to {gap:.3e} at node {node}")]
    GapCollapse { gap: f64, node: usize },
    #[error("band {band} is unresolved: overlap {overlap:.3e} on edge {edge}; refine the mesh")]
    Unresolved { band: usize, edge: usize, overlap: f64 },
    #[error("aligned frames of band {band} still have link phase {phase:.3e} > {tol:.3e}; refine the mesh")]
    NotSmooth { band: usize, phase: f64, tol: f64 },
    #[error("operation requires a closed 2-dimensional mesh")]
    NotClosed,
    #[error("scalar field is not invertible (margin {margin:.3e})")]
    NotInvertible { margin: f64 },
    #[error("topological obstruction: {0}")]
    Obstructed(Obstruction),
    #[error("frames are not orthogonal (defect {defect:.3e})")]
    NotOrthogonal { defect: f64 },
    #[error("diagonal value {value} at node {node} cannot be rounded to 0 or 1")]
    RoundingAmbiguous { node: usize, value: f64 },
    #[error("no rotation clears the point -1 from the spectrum at every node")]
    NoCommonGap,
    #[error("residual {residual:.3e} is not below the requested {requested:.3e}")]
    ResidualTooLarge { residual: f64, requested: f64 },
    #[error("fields live on different meshes or have different sizes")]
    Incompatible,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
