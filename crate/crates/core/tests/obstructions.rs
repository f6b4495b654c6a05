use std::f64::consts::PI;
use std::sync::Arc;

use adiag_core::bundle::{chern_number, eigenframes, trivialize};
use adiag_core::diag::{
    approx_diagonalize_hermitian, approx_diagonalize_unitary, detect_obstructions, diagonalize_projection, Status,
};
use adiag_core::field::field_det_tr;
use adiag_core::mesh::{build_mesh, Mesh, MeshKind};
use adiag_core::models::Model;
use adiag_core::{Error, Obstruction};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mesh(kind: MeshKind, n: usize) -> Arc<Mesh> {
    Arc::new(build_mesh(kind, n).unwrap())
}

#[test]
fn berry_bands_carry_opposite_unit_chern_numbers() {
    for res in [8, 16] {
        let f = Model::BerrySphere.build(mesh(MeshKind::Sphere, res)).unwrap();
        let bands = eigenframes(&f).unwrap();
        // Bands are listed by non-increasing eigenvalue: upper first.
        let cherns: Vec<i64> = bands.iter().map(|b| chern_number(b).unwrap()).collect();
        assert_eq!(cherns, vec![1, -1]);
        for b in &bands {
            assert!(matches!(
                trivialize(b),
                Err(Error::Obstructed(Obstruction::Chern { .. }))
            ));
        }
        let r = approx_diagonalize_hermitian(&f, 0.1, 0).unwrap();
        assert_eq!(r.status, Status::Obstructed);
    }
}

#[test]
fn chern_numbers_ignore_frame_phases() {
    let f = Model::BerrySphere.build(mesh(MeshKind::Sphere, 8)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for b in eigenframes(&f).unwrap() {
        let theta: Vec<f64> = (0..b.frames.len()).map(|_| rng.gen_range(-PI..PI)).collect();
        let r = b.rephased(&theta).unwrap();
        assert_eq!(chern_number(&r).unwrap(), chern_number(&b).unwrap());
        for (h0, h1) in b
            .mesh()
            .plaquettes()
            .iter()
            .map(|p| (b.holonomy(&p.edges).norm(), r.holonomy(&p.edges).norm()))
        {
            assert!((h0 - h1).abs() < 1e-12);
        }
    }
}

#[test]
fn pullback_doubles_the_chern_numbers() {
    let f = Model::BerryPullback { degree: 2 }
        .build(mesh(MeshKind::Sphere, 16))
        .unwrap();
    let report = detect_obstructions(&f).unwrap();
    assert_eq!(report.chern_numbers, Some(vec![2, -2]));
}

#[test]
fn determinant_winding_and_band_monodromy() {
    for k in 0..4 {
        let f = Model::WindingUnitary { k }.build(mesh(MeshKind::Circle, 96)).unwrap();
        let (d, _) = field_det_tr(&f);
        assert!(d.values().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        let r = approx_diagonalize_unitary(&f, 0.05, 0).unwrap();
        assert_eq!(r.obstruction.winding_numbers, vec![k as i64]);
        if k % 2 == 1 {
            assert_eq!(r.status, Status::Obstructed, "k={k}");
        } else {
            assert_eq!(r.status, Status::Success, "k={k}: {:?}", r.diagnostics.message);
            assert!(r.epsilon_achieved.unwrap() < 0.05);
        }
    }
}

#[test]
fn sphere_projection_is_not_trivial() {
    let f = Model::ProjectionSphere.build(mesh(MeshKind::Sphere, 12)).unwrap();
    let r = diagonalize_projection(&f, 0).unwrap();
    assert_eq!(r.status, Status::Obstructed);
    assert!(r.obstruction.has_nonzero());
}

#[test]
fn flat_torus_field_has_no_obstruction() {
    let f = Model::Constant { n: 2 }.build(mesh(MeshKind::Torus, 8)).unwrap();
    let report = detect_obstructions(&f).unwrap();
    assert_eq!(report.chern_numbers, Some(vec![0, 0]));
    assert_eq!(report.winding_numbers, vec![0, 0]);
    assert!(!report.has_nonzero());
    let r = approx_diagonalize_hermitian(&f, 0.01, 0).unwrap();
    assert_eq!(r.status, Status::Success);
}

#[test]
fn torus_unitary_with_winding_along_one_cycle() {
    let m = mesh(MeshKind::Torus, 12);
    let f = adiag_core::field::MatrixField::from_fn(m, adiag_core::field::FieldTag::Unitary, |p| {
        let z = Complex64::from_polar(1.0, p[0]);
        adiag_core::numlin::CMatrix::from_rows(&[
            vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
            vec![z, Complex64::new(0.0, 0.0)],
        ])
    })
    .unwrap();
    let r = approx_diagonalize_unitary(&f, 0.05, 0).unwrap();
    assert_eq!(r.status, Status::Obstructed);
    assert_eq!(r.obstruction.winding_numbers.iter().map(|w| w.abs()).sum::<i64>(), 1);
}
