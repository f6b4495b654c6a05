//! Subcommand implementations; each returns the process exit code.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use adiag_core::bundle::eigenframes;
use adiag_core::diag::{
    approx_diagonalize_hermitian, approx_diagonalize_unitary, detect_obstructions, diagonalize_projection,
    verify_report, DiagonalizationReport, Status,
};
use adiag_core::field::{pointwise_spectra, FieldTag, MatrixField};
use adiag_core::mesh::MeshKind;
use adiag_core::models::Model;
use adiag_core::numlin::unitary_eig;
use adiag_core::Error;

use crate::fieldfile::{FieldFile, Generator, GeneratorParams};
use crate::json::{self, digest};
use crate::report::{InputInfo, ReportFile};
use crate::{
    CliError, DemoArgs, DiagonalizeArgs, InputArgs, ObstructionArgs, VerifyArgs, EXIT_OBSTRUCTED, EXIT_SUCCESS,
    EXIT_UNRESOLVED, EXIT_VERIFY_FAILED,
};

/// A parsed input together with the bytes its digest is taken over.
pub struct Loaded {
    pub file: FieldFile,
    pub field: MatrixField,
    pub digest: String,
}

impl Loaded {
    pub fn info(&self) -> InputInfo {
        InputInfo::of(&self.field, self.digest.clone())
    }
}

/// Generator-form field file for `--model` and its flags.
pub fn model_file(input: &InputArgs, seed: u64) -> Result<FieldFile, CliError> {
    let name = input.model.as_deref().expect("called with --model");
    let generator = Generator {
        name: name.into(),
        params: GeneratorParams {
            n: input.size,
            k: input.k,
            degree: input.degree,
        },
        seed,
    };
    let model = generator.model()?;
    let (default_kind, default_res) = model.default_mesh();
    let kind = match &input.mesh {
        Some(m) => MeshKind::from_name(m).ok_or_else(|| CliError::Usage(format!("unknown mesh kind {m:?}")))?,
        None => default_kind,
    };
    let resolution = input
        .resolution
        .unwrap_or(if kind == default_kind { default_res } else { 16 });
    FieldFile::from_model(&model, kind, resolution, seed)
}

pub fn load(input: &InputArgs, seed: u64) -> Result<Loaded, CliError> {
    let (file, bytes) = match &input.input {
        Some(path) => FieldFile::load(path)?,
        None => {
            let file = model_file(input, seed)?;
            let bytes = file.to_bytes()?;
            (file, bytes)
        }
    };
    let field = file.to_field()?;
    Ok(Loaded {
        file,
        field,
        digest: digest(&bytes),
    })
}

fn run_pipeline(field: &MatrixField, eps: f64, seed: u64) -> Result<DiagonalizationReport, CliError> {
    Ok(match field.tag() {
        FieldTag::Hermitian => approx_diagonalize_hermitian(field, eps, seed)?,
        FieldTag::Unitary => approx_diagonalize_unitary(field, eps, seed)?,
        FieldTag::Projection => diagonalize_projection(field, seed)?,
        FieldTag::General => {
            return Err(CliError::Usage(
                "general fields cannot be diagonalized; tag them hermitian, unitary or projection".into(),
            ))
        }
    })
}

pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Success => EXIT_SUCCESS,
        Status::Obstructed => EXIT_OBSTRUCTED,
        Status::Unresolved => EXIT_UNRESOLVED,
    }
}

fn emit(bytes: &[u8], out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => json::write_atomic(p, bytes),
        None => std::io::stdout().write_all(bytes).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn summary(r: &DiagonalizationReport) -> String {
    match r.status {
        Status::Success => format!(
            "success: residual {:.3e} < {} ({})",
            r.epsilon_achieved.unwrap_or(f64::NAN),
            r.epsilon_requested,
            r.diagnostics.route
        ),
        _ => format!(
            "{}: {}",
            r.status.name(),
            r.diagnostics.message.as_deref().unwrap_or("")
        ),
    }
}

pub fn diagonalize(a: &DiagonalizeArgs) -> Result<i32, CliError> {
    let loaded = load(&a.input, a.seed)?;
    let r = run_pipeline(&loaded.field, a.eps, a.seed)?;
    let file = ReportFile::from_report(&r, loaded.info(), a.emit_unitary);
    emit(&file.to_bytes()?, a.out.as_deref())?;
    if let Some(p) = &a.write_field {
        json::write_atomic(p, &FieldFile::from_field(&loaded.field).to_bytes()?)?;
    }
    if let Some(dir) = &a.svg {
        write_svgs(dir, &loaded.field, Some(&r))?;
    }
    if let Some(p) = &a.csv {
        write_csv(p, &loaded.field, &r)?;
    }
    eprintln!("{}", summary(&r));
    Ok(exit_code(r.status))
}

pub fn obstruction(a: &ObstructionArgs) -> Result<i32, CliError> {
    let loaded = load(&a.input, a.seed)?;
    let start = Instant::now();
    let report = match detect_obstructions(&loaded.field) {
        Ok(r) => r,
        Err(e @ (Error::GapCollapse { .. } | Error::Unresolved { .. } | Error::NotSmooth { .. })) => {
            eprintln!("unresolved: {e}");
            return Ok(EXIT_UNRESOLVED);
        }
        Err(e) => return Err(e.into()),
    };
    let file = ReportFile::from_obstructions(&report, loaded.info(), start.elapsed());
    emit(&file.to_bytes()?, a.out.as_deref())?;
    eprintln!(
        "chern numbers {:?}, winding numbers {:?}, band shifts {:?}",
        report.chern_numbers, report.winding_numbers, report.band_shifts
    );
    if report.resolved.iter().all(|&r| r) {
        Ok(EXIT_SUCCESS)
    } else {
        eprintln!("unresolved: some band bundle has a vanishing link overlap");
        Ok(EXIT_UNRESOLVED)
    }
}

pub fn verify(a: &VerifyArgs) -> Result<i32, CliError> {
    let (file, bytes) = FieldFile::load(&a.field)?;
    let field = file.to_field()?;
    let report_file = ReportFile::parse(&json::read(&a.report)?)?;
    if report_file.unitary.is_none() {
        return Err(CliError::Usage(
            "report carries no unitary; rerun diagonalize with --emit-unitary".into(),
        ));
    }
    if report_file.input.digest != digest(&bytes) {
        eprintln!("warning: report was computed from different field bytes");
    }
    let report = report_file.to_report(&field)?;
    let v = verify_report(&field, &report);
    println!("residual            {:.6e}", v.residual);
    println!(
        "reported residual   {:.6e}",
        report.epsilon_achieved.unwrap_or(f64::NAN)
    );
    println!("requested epsilon   {:.6e}", report.epsilon_requested);
    println!("unitarity defect    {:.6e}", v.unitarity_defect);
    println!("spectral distance   {:.6e}", v.spectral_distance);
    match v.failed {
        None => {
            println!("verified");
            Ok(EXIT_SUCCESS)
        }
        Some(why) => {
            println!("failed: {why}");
            Ok(EXIT_VERIFY_FAILED)
        }
    }
}

/// Built-in scenarios with their documented defaults.
pub const DEMOS: [&str; 5] = [
    "two-by-two",
    "circle-rotation",
    "berry-sphere",
    "winding-unitary",
    "projection-sphere",
];

fn demo_setup(name: &str) -> Option<(Model, f64)> {
    Some(match name {
        "two-by-two" => (Model::TwoByTwo, 0.05),
        "circle-rotation" => (Model::CircleRotation, 0.01),
        "berry-sphere" => (Model::BerrySphere, 0.1),
        "winding-unitary" => (Model::WindingUnitary { k: 1 }, 0.05),
        "projection-sphere" => (Model::ProjectionSphere, 0.25),
        _ => return None,
    })
}

fn signed(v: i64) -> String {
    if v > 0 {
        format!("+{v}")
    } else {
        v.to_string()
    }
}

pub fn demo(a: &DemoArgs) -> Result<i32, CliError> {
    let (model, eps) = demo_setup(&a.name)
        .ok_or_else(|| CliError::Usage(format!("unknown demo {:?}; choose one of {}", a.name, DEMOS.join(", "))))?;
    let (kind, res) = model.default_mesh();
    let file = FieldFile::from_model(&model, kind, res, a.seed)?;
    let bytes = file.to_bytes()?;
    let field = file.to_field()?;
    let r = run_pipeline(&field, eps, a.seed)?;
    let dir = a.out_dir.join(&a.name);
    json::write_atomic(&dir.join("field.json"), &bytes)?;
    let report = ReportFile::from_report(&r, InputInfo::of(&field, digest(&bytes)), true);
    json::write_atomic(&dir.join("report.json"), &report.to_bytes()?)?;
    let plots = write_svgs(&dir, &field, Some(&r))?;

    let mesh = field.mesh();
    println!("{:<22}{}", "demo", a.name);
    println!("{:<22}{} N={} ({} nodes)", "mesh", kind, res, mesh.node_count());
    println!("{:<22}{} n={}", "field", field.tag().name(), field.n());
    println!("{:<22}{}", "status", r.status.name());
    println!("{:<22}{}", "epsilon requested", r.epsilon_requested);
    match r.epsilon_achieved {
        Some(e) => println!("{:<22}{e:.3e}", "residual"),
        None => println!("{:<22}-", "residual"),
    }
    if let Some(c) = &r.obstruction.chern_numbers {
        println!("{:<22}{:?}", "chern by band", c);
        if field.tag() == FieldTag::Projection {
            println!("{:<22}{}", "chern of range of P", signed(c[0]));
        } else if c.len() == 2 {
            println!("{:<22}({}, {})", "chern (lower, upper)", signed(c[1]), signed(c[0]));
        }
    }
    if !r.obstruction.winding_numbers.is_empty() {
        println!("{:<22}{:?}", "det winding", r.obstruction.winding_numbers);
    }
    if !r.obstruction.band_shifts.is_empty() {
        println!("{:<22}{:?}", "band shift", r.obstruction.band_shifts);
    }
    if let Some(m) = &r.diagnostics.message {
        println!("{:<22}{m}", "message");
    }
    println!("{:<22}{}", "output", dir.display());
    for p in plots {
        println!("{:<22}{}", "plot", p.display());
    }
    Ok(exit_code(r.status))
}

/// Eigenvalue curves on 1-d meshes, band curvature maps on 2-d meshes.
pub fn write_svgs(
    dir: &Path,
    field: &MatrixField,
    r: Option<&DiagonalizationReport>,
) -> Result<Vec<PathBuf>, CliError> {
    let mesh = field.mesh();
    let mut written = Vec::new();
    if mesh.dimension() == 1 {
        let values: Vec<Vec<f64>> = match r.filter(|r| !r.lambda.is_empty()) {
            Some(r) => (0..mesh.node_count()).map(|x| r.lambda_at(x)).collect(),
            None => pointwise_values(field)?,
        };
        let p = dir.join("eigenvalues.svg");
        json::write_atomic(
            &p,
            crate::svg::eigenvalue_plot(mesh, &values, "eigenvalue fields").as_bytes(),
        )?;
        written.push(p);
        return Ok(written);
    }
    let herm = match field.tag() {
        FieldTag::Hermitian => field.clone(),
        FieldTag::Projection => field.clone().with_tag(FieldTag::Hermitian)?,
        _ => {
            eprintln!("note: curvature maps are drawn for Hermitian and projection fields only");
            return Ok(written);
        }
    };
    match eigenframes(&herm) {
        Ok(bands) => {
            for b in bands {
                let p = dir.join(format!("curvature-band{}.svg", b.band));
                let title = format!("band {} plaquette curvature", b.band);
                json::write_atomic(&p, crate::svg::curvature_map(mesh, &b.curvature, &title).as_bytes())?;
                written.push(p);
            }
        }
        Err(e) => eprintln!("note: no curvature maps: {e}"),
    }
    Ok(written)
}

fn pointwise_values(field: &MatrixField) -> Result<Vec<Vec<f64>>, CliError> {
    let nodes = field.mesh().node_count();
    Ok(match field.tag() {
        FieldTag::Unitary => field
            .samples()
            .iter()
            .map(|s| unitary_eig(s).map(|u| u.angles))
            .collect::<Result<_, _>>()
            .map_err(Error::from)?,
        _ => {
            let herm = field.clone().with_tag(FieldTag::Hermitian)?;
            let s = pointwise_spectra(&herm)?;
            (0..nodes).map(|x| s.iter().map(|b| b.value(x).re).collect()).collect()
        }
    })
}

fn write_csv(path: &Path, field: &MatrixField, r: &DiagonalizationReport) -> Result<(), CliError> {
    let csv_err = |e: csv::Error| CliError::Parse(format!("csv: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["node".to_string(), "x".into(), "y".into(), "z".into()];
    header.extend((1..=field.n()).map(|j| format!("lambda_{j}")));
    w.write_record(&header).map_err(csv_err)?;
    if !r.lambda.is_empty() {
        for (x, c) in field.mesh().coords().iter().enumerate() {
            let mut row = vec![x.to_string()];
            row.extend(c.iter().map(|v| format!("{v:.16e}")));
            row.extend(r.lambda_at(x).iter().map(|v| format!("{v:.16e}")));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Parse(format!("csv: {e}")))?;
    json::write_atomic(path, &bytes)
}
