//! Report files: a serialized [`DiagonalizationReport`] or obstruction scan.

use std::time::Duration;

use adiag_core::bundle::ObstructionReport;
use adiag_core::diag::{Diagnostics, DiagonalizationReport, LambdaKind, Status};
use adiag_core::field::{FieldTag, MatrixField, ScalarField};
use adiag_core::numlin::CMatrix;
use adiag_core::Obstruction;
use serde::{Deserialize, Serialize};

use crate::json::{self, complex, pair, reals, Pair, Real};
use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tool {
    pub name: String,
    pub version: String,
}

impl Default for Tool {
    fn default() -> Self {
        Self {
            name: "adiag".into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputInfo {
    pub digest: String,
    pub mesh_kind: String,
    #[serde(rename = "N")]
    pub resolution: usize,
    pub nodes: usize,
    pub n: usize,
    pub tag: String,
}

impl InputInfo {
    pub fn of(f: &MatrixField, digest: String) -> Self {
        Self {
            digest,
            mesh_kind: f.mesh().kind().name().into(),
            resolution: f.mesh().resolution(),
            nodes: f.mesh().node_count(),
            n: f.n(),
            tag: f.tag().name().into(),
        }
    }
}

/// First nonzero integer obstruction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirstObstruction {
    pub kind: String,
    pub index: usize,
    pub value: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstructionBlock {
    /// Per band, highest eigenvalue first; closed surfaces only.
    pub chern_numbers: Option<Vec<i64>>,
    pub winding_numbers: Vec<i64>,
    pub band_shifts: Vec<usize>,
    pub resolved: Vec<bool>,
    pub min_overlap: Real,
    pub min_gap: Real,
    pub first: Option<FirstObstruction>,
}

impl From<&ObstructionReport> for ObstructionBlock {
    fn from(o: &ObstructionReport) -> Self {
        let first = o.obstruction().map(|ob| match ob {
            Obstruction::Chern { band, chern } => FirstObstruction {
                kind: "chern".into(),
                index: band,
                value: chern,
            },
            Obstruction::Winding { cycle, winding } => FirstObstruction {
                kind: "winding".into(),
                index: cycle,
                value: winding,
            },
            Obstruction::BandMonodromy { cycle, shift } => FirstObstruction {
                kind: "band-monodromy".into(),
                index: cycle,
                value: shift as i64,
            },
        });
        Self {
            chern_numbers: o.chern_numbers.clone(),
            winding_numbers: o.winding_numbers.clone(),
            band_shifts: o.band_shifts.clone(),
            resolved: o.resolved.clone(),
            min_overlap: Real(o.min_overlap),
            min_gap: Real(o.min_gap),
            first,
        }
    }
}

impl From<&ObstructionBlock> for ObstructionReport {
    fn from(b: &ObstructionBlock) -> Self {
        Self {
            chern_numbers: b.chern_numbers.clone(),
            winding_numbers: b.winding_numbers.clone(),
            resolved: b.resolved.clone(),
            min_overlap: b.min_overlap.0,
            min_gap: b.min_gap.0,
            band_shifts: b.band_shifts.clone(),
        }
    }
}

/// Residual breakdown and intermediate quantities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsBlock {
    pub route: String,
    pub offband_residual: Real,
    pub distinct_movement: Real,
    pub min_gap: Real,
    pub gauge_defect: Real,
    pub gauge_warning: bool,
    pub continuity_modulus: Real,
    pub unitary_edge_defect: Real,
    pub rotation: Option<Real>,
    pub angle_histogram: Option<Vec<usize>>,
    pub pre_rounding_residual: Option<Real>,
    pub message: Option<String>,
}

impl From<&Diagnostics> for DiagnosticsBlock {
    fn from(d: &Diagnostics) -> Self {
        Self {
            route: d.route.clone(),
            offband_residual: Real(d.offband_residual),
            distinct_movement: Real(d.distinct_movement),
            min_gap: Real(d.min_gap),
            gauge_defect: Real(d.gauge_defect),
            gauge_warning: d.gauge_warning,
            continuity_modulus: Real(d.continuity_modulus),
            unitary_edge_defect: Real(d.unitary_edge_defect),
            rotation: d.rotation.map(Real),
            angle_histogram: d.angle_histogram.clone(),
            pre_rounding_residual: d.pre_rounding_residual.map(Real),
            message: d.message.clone(),
        }
    }
}

impl From<&DiagnosticsBlock> for Diagnostics {
    fn from(b: &DiagnosticsBlock) -> Self {
        Self {
            route: b.route.clone(),
            offband_residual: b.offband_residual.0,
            distinct_movement: b.distinct_movement.0,
            min_gap: b.min_gap.0,
            gauge_defect: b.gauge_defect.0,
            gauge_warning: b.gauge_warning,
            continuity_modulus: b.continuity_modulus.0,
            unitary_edge_defect: b.unitary_edge_defect.0,
            rotation: b.rotation.map(|r| r.0),
            angle_histogram: b.angle_histogram.clone(),
            pre_rounding_residual: b.pre_rounding_residual.map(|r| r.0),
            message: b.message.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    pub elapsed_seconds: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub format_version: u32,
    pub tool: Tool,
    /// `diagonalization` or `obstruction`.
    pub kind: String,
    pub input: InputInfo,
    pub status: Option<String>,
    pub epsilon_requested: Option<Real>,
    pub epsilon_achieved: Option<Real>,
    pub lambda_kind: Option<String>,
    /// Per node, `Λ_1 … Λ_n`.
    pub lambda: Option<Vec<Vec<Real>>>,
    /// Per node, row-major `[re, im]` entries of `U`.
    pub unitary: Option<Vec<Vec<Pair>>>,
    pub obstruction: ObstructionBlock,
    pub diagnostics: Option<DiagnosticsBlock>,
    /// The only block that differs between identical runs.
    pub timing: Timing,
}

impl ReportFile {
    pub fn from_report(r: &DiagonalizationReport, input: InputInfo, emit_unitary: bool) -> Self {
        let nodes = input.nodes;
        let lambda = (!r.lambda.is_empty()).then(|| (0..nodes).map(|x| reals(&r.lambda_at(x))).collect());
        let unitary = r.unitary.as_ref().filter(|_| emit_unitary).map(|u| {
            u.samples()
                .iter()
                .map(|s| s.as_slice().iter().map(|&z| pair(z)).collect())
                .collect()
        });
        Self {
            format_version: FORMAT_VERSION,
            tool: Tool::default(),
            kind: "diagonalization".into(),
            input,
            status: Some(r.status.name().into()),
            epsilon_requested: Some(Real(r.epsilon_requested)),
            epsilon_achieved: r.epsilon_achieved.map(Real),
            lambda_kind: Some(r.lambda_kind.name().into()),
            lambda,
            unitary,
            obstruction: (&r.obstruction).into(),
            diagnostics: Some((&r.diagnostics).into()),
            timing: Timing {
                elapsed_seconds: Real(r.elapsed.as_secs_f64()),
            },
        }
    }

    pub fn from_obstructions(o: &ObstructionReport, input: InputInfo, elapsed: Duration) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            tool: Tool::default(),
            kind: "obstruction".into(),
            input,
            status: None,
            epsilon_requested: None,
            epsilon_achieved: None,
            lambda_kind: None,
            lambda: None,
            unitary: None,
            obstruction: o.into(),
            diagnostics: None,
            timing: Timing {
                elapsed_seconds: Real(elapsed.as_secs_f64()),
            },
        }
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, CliError> {
        let r: Self = serde_json::from_slice(bytes).map_err(|e| CliError::Parse(format!("report file: {e}")))?;
        if r.format_version != FORMAT_VERSION {
            return Err(CliError::Parse(format!(
                "unsupported report format_version {}",
                r.format_version
            )));
        }
        Ok(r)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        json::to_bytes(self)
    }

    /// Rebuilds the in-memory report against the field it describes.
    pub fn to_report(&self, field: &MatrixField) -> Result<DiagonalizationReport, CliError> {
        let bad = |m: &str| CliError::Parse(format!("report file: {m}"));
        if self.kind != "diagonalization" {
            return Err(bad("not a diagonalization report"));
        }
        let mesh = field.mesh();
        if self.input.mesh_kind != mesh.kind().name()
            || self.input.resolution != mesh.resolution()
            || self.input.n != field.n()
        {
            return Err(bad("mesh or matrix size does not match the field"));
        }
        let status = self
            .status
            .as_deref()
            .and_then(Status::from_name)
            .ok_or_else(|| bad("unknown status"))?;
        let lambda_kind = self
            .lambda_kind
            .as_deref()
            .and_then(LambdaKind::from_name)
            .ok_or_else(|| bad("unknown lambda_kind"))?;
        let n = field.n();
        let nodes = mesh.node_count();
        let lambda = match &self.lambda {
            Some(rows) => {
                if rows.len() != nodes || rows.iter().any(|r| r.len() != n) {
                    return Err(bad("lambda has the wrong shape"));
                }
                (0..n)
                    .map(|j| {
                        let v: Vec<f64> = rows.iter().map(|r| r[j].0).collect();
                        ScalarField::from_real(mesh.clone(), &v)
                    })
                    .collect::<adiag_core::Result<Vec<_>>>()
                    .map_err(|e| bad(&e.to_string()))?
            }
            None => Vec::new(),
        };
        let unitary = match &self.unitary {
            Some(rows) => {
                if rows.len() != nodes || rows.iter().any(|r| r.len() != n * n) {
                    return Err(bad("unitary has the wrong shape"));
                }
                let samples = rows
                    .iter()
                    .map(|r| CMatrix::from_row_major(r.iter().map(complex).collect()))
                    .collect();
                // Tag checks are the verifier's job; keep whatever was stored.
                Some(MatrixField::new(mesh.clone(), FieldTag::General, samples).map_err(|e| bad(&e.to_string()))?)
            }
            None => None,
        };
        Ok(DiagonalizationReport {
            status,
            epsilon_requested: self.epsilon_requested.map_or(f64::NAN, |r| r.0),
            epsilon_achieved: self.epsilon_achieved.map(|r| r.0),
            unitary,
            lambda,
            lambda_kind,
            obstruction: (&self.obstruction).into(),
            diagnostics: self.diagnostics.as_ref().map(Into::into).unwrap_or_default(),
            mesh_kind: mesh.kind(),
            resolution: mesh.resolution(),
            n,
            elapsed: Duration::from_secs_f64(self.timing.elapsed_seconds.0.max(0.0)),
        })
    }

    /// Copy with the timing block zeroed, for run-to-run comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            timing: Timing {
                elapsed_seconds: Real(0.0),
            },
            ..self.clone()
        }
    }
}
