//! Field files: a mesh, a matrix size, a tag and either explicit samples or a
//! built-in generator.

use std::path::Path;
use std::sync::Arc;

use adiag_core::field::{FieldTag, MatrixField};
use adiag_core::mesh::{build_mesh, MeshKind};
use adiag_core::models::Model;
use adiag_core::numlin::CMatrix;
use serde::{Deserialize, Serialize};

use crate::json::{self, complex, pair, Pair};
use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub kind: String,
    #[serde(rename = "N")]
    pub resolution: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<i32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub name: String,
    #[serde(default)]
    pub params: GeneratorParams,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldFile {
    pub format_version: u32,
    pub mesh: MeshSpec,
    pub n: usize,
    pub tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<Vec<Pair>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
}

impl Generator {
    /// The model this generator names, with its parameters applied.
    pub fn model(&self) -> Result<Model, CliError> {
        let base =
            Model::from_name(&self.name).ok_or_else(|| CliError::Usage(format!("unknown model {:?}", self.name)))?;
        let p = &self.params;
        Ok(match base {
            Model::Constant { n } => Model::Constant { n: p.n.unwrap_or(n) },
            Model::RandomSmooth { n, .. } => Model::RandomSmooth {
                n: p.n.unwrap_or(n),
                seed: self.seed,
            },
            Model::WindingUnitary { k } => Model::WindingUnitary { k: p.k.unwrap_or(k) },
            Model::BerryPullback { degree } => Model::BerryPullback {
                degree: p.degree.unwrap_or(degree),
            },
            other => other,
        })
    }
}

impl FieldFile {
    /// Generator-form file for a built-in model.
    pub fn from_model(model: &Model, kind: MeshKind, resolution: usize, seed: u64) -> Result<Self, CliError> {
        if !model.supports(kind) {
            return Err(CliError::Usage(format!(
                "model {} is not defined on a {kind} mesh",
                model.name()
            )));
        }
        let (n, params) = match *model {
            Model::Constant { n } => (
                n,
                GeneratorParams {
                    n: Some(n),
                    ..Default::default()
                },
            ),
            Model::RandomSmooth { n, .. } => (
                n,
                GeneratorParams {
                    n: Some(n),
                    ..Default::default()
                },
            ),
            Model::WindingUnitary { k } => (
                2,
                GeneratorParams {
                    k: Some(k),
                    ..Default::default()
                },
            ),
            Model::BerryPullback { degree } => (
                2,
                GeneratorParams {
                    degree: Some(degree),
                    ..Default::default()
                },
            ),
            _ => (2, GeneratorParams::default()),
        };
        let seed = if let Model::RandomSmooth { seed: s, .. } = *model {
            s
        } else {
            seed
        };
        Ok(Self {
            format_version: FORMAT_VERSION,
            mesh: MeshSpec {
                kind: kind.name().into(),
                resolution,
            },
            n,
            tag: model.tag().name().into(),
            samples: None,
            generator: Some(Generator {
                name: model.name().into(),
                params,
                seed,
            }),
        })
    }

    /// Samples-form file holding `f` verbatim.
    pub fn from_field(f: &MatrixField) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            mesh: MeshSpec {
                kind: f.mesh().kind().name().into(),
                resolution: f.mesh().resolution(),
            },
            n: f.n(),
            tag: f.tag().name().into(),
            samples: Some(
                f.samples()
                    .iter()
                    .map(|s| s.as_slice().iter().map(|&z| pair(z)).collect())
                    .collect(),
            ),
            generator: None,
        }
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, CliError> {
        serde_json::from_slice(bytes).map_err(|e| CliError::Parse(format!("field file: {e}")))
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = json::read(path)?;
        Ok((Self::parse(&bytes)?, bytes))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        json::to_bytes(self)
    }

    pub fn mesh_kind(&self) -> Result<MeshKind, CliError> {
        MeshKind::from_name(&self.mesh.kind)
            .ok_or_else(|| CliError::Parse(format!("unknown mesh kind {:?}", self.mesh.kind)))
    }

    pub fn field_tag(&self) -> Result<FieldTag, CliError> {
        FieldTag::from_name(&self.tag).ok_or_else(|| CliError::Parse(format!("unknown tag {:?}", self.tag)))
    }

    /// Validates the file and builds the field it describes.
    pub fn to_field(&self) -> Result<MatrixField, CliError> {
        if self.format_version != FORMAT_VERSION {
            return Err(CliError::Parse(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        let kind = self.mesh_kind()?;
        let tag = self.field_tag()?;
        let mesh = Arc::new(build_mesh(kind, self.mesh.resolution).map_err(|e| CliError::Parse(e.to_string()))?);
        match (&self.samples, &self.generator) {
            (Some(samples), None) => {
                if samples.len() != mesh.node_count() {
                    return Err(CliError::Parse(format!(
                        "{} samples for {} nodes",
                        samples.len(),
                        mesh.node_count()
                    )));
                }
                let mut matrices = Vec::with_capacity(samples.len());
                for (node, s) in samples.iter().enumerate() {
                    if s.len() != self.n * self.n {
                        return Err(CliError::Parse(format!(
                            "node {node} has {} entries, expected {}",
                            s.len(),
                            self.n * self.n
                        )));
                    }
                    if s.iter().flatten().any(|r| !r.0.is_finite()) {
                        return Err(CliError::Parse(format!("node {node} has a non-finite entry")));
                    }
                    matrices.push(CMatrix::from_row_major(s.iter().map(complex).collect()));
                }
                MatrixField::new(mesh, tag, matrices).map_err(|e| CliError::Parse(e.to_string()))
            }
            (None, Some(g)) => {
                let model = g.model()?;
                if model.tag() != tag {
                    return Err(CliError::Parse(format!(
                        "model {} produces {} fields, not {}",
                        g.name,
                        model.tag().name(),
                        self.tag
                    )));
                }
                let f = model.build(mesh).map_err(|e| CliError::Parse(e.to_string()))?;
                if f.n() != self.n {
                    return Err(CliError::Parse(format!(
                        "model {} produces n = {}, not {}",
                        g.name,
                        f.n(),
                        self.n
                    )));
                }
                Ok(f)
            }
            _ => Err(CliError::Parse(
                "exactly one of samples and generator must be present".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_file_round_trips_and_builds() {
        let model = Model::WindingUnitary { k: 3 };
        let file = FieldFile::from_model(&model, MeshKind::Circle, 16, 42).unwrap();
        let bytes = file.to_bytes().unwrap();
        let back = FieldFile::parse(&bytes).unwrap();
        assert_eq!(back, file);
        let f = back.to_field().unwrap();
        let direct = model
            .build(Arc::new(build_mesh(MeshKind::Circle, 16).unwrap()))
            .unwrap();
        assert_eq!(f.samples(), direct.samples());
    }

    #[test]
    fn samples_file_is_bit_faithful() {
        let model = Model::RandomSmooth { n: 3, seed: 8 };
        let f = model.build(Arc::new(build_mesh(MeshKind::Square, 5).unwrap())).unwrap();
        let bytes = FieldFile::from_field(&f).to_bytes().unwrap();
        let g = FieldFile::parse(&bytes).unwrap().to_field().unwrap();
        assert_eq!(f.samples(), g.samples());
    }

    #[test]
    fn invalid_files_are_rejected() {
        let good = FieldFile::from_model(&Model::TwoByTwo, MeshKind::Interval, 5, 0).unwrap();
        let mut both = good.clone();
        both.samples = Some(Vec::new());
        assert!(both.to_field().is_err());
        let mut wrong_tag = good.clone();
        wrong_tag.tag = "unitary".into();
        assert!(wrong_tag.to_field().is_err());
        let mut version = good.clone();
        version.format_version = 2;
        assert!(version.to_field().is_err());
        let mut short = FieldFile::from_field(&good.to_field().unwrap());
        short.samples.as_mut().unwrap().pop();
        assert!(short.to_field().is_err());
        assert!(FieldFile::parse(b"{\"format_version\": 1").is_err());
        assert!(FieldFile::parse(
            b"{\"format_version\":1,\"mesh\":{\"kind\":\"circle\",\"N\":4},\"n\":1,\"tag\":\"hermitian\",\"extra\":0}"
        )
        .is_err());
    }

    #[test]
    fn unsupported_mesh_is_a_usage_error() {
        assert!(matches!(
            FieldFile::from_model(&Model::BerrySphere, MeshKind::Circle, 8, 0),
            Err(CliError::Usage(_))
        ));
    }
}
