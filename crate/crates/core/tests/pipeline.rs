use std::sync::Arc;

use adiag_core::diag::{approx_diagonalize_hermitian, verify_report, Status};
use adiag_core::field::{continuity_modulus, pointwise_spectra, FieldTag, MatrixField};
use adiag_core::mesh::{build_mesh, Mesh, MeshKind};
use adiag_core::models::{random_smooth_hermitian, Model};
use adiag_core::numlin::{det, op_norm, CMatrix};
use adiag_core::reduce::{distinct_spectrum_perturbation, q_sequence, q_values, tridiagonal, tridiagonalize};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mesh(kind: MeshKind, n: usize) -> Arc<Mesh> {
    Arc::new(build_mesh(kind, n).unwrap())
}

fn leading_minor(t: &CMatrix, k: usize) -> f64 {
    if k == 0 {
        1.0
    } else {
        det(&t.leading_block(k)).re
    }
}

#[test]
fn hermitian_models_succeed_on_contractible_and_circle_meshes() {
    let models = [
        Model::Constant { n: 3 },
        Model::RandomSmooth { n: 3, seed: 1 },
        Model::TwoByTwo,
        Model::CircleRotation,
    ];
    for model in models {
        for (kind, res) in [(MeshKind::Interval, 41), (MeshKind::Circle, 48), (MeshKind::Square, 13)] {
            if !model.supports(kind) {
                continue;
            }
            let f = model.build(mesh(kind, res)).unwrap();
            let spectra = pointwise_spectra(&f).unwrap();
            for eps in [0.1, 0.01] {
                let r = approx_diagonalize_hermitian(&f, eps, 11).unwrap();
                let name = model.name();
                assert_eq!(
                    r.status,
                    Status::Success,
                    "{name} on {kind}: {:?}",
                    r.diagnostics.message
                );
                let achieved = r.epsilon_achieved.unwrap();
                assert!(achieved < eps);
                let u = r.unitary.as_ref().unwrap();
                assert!(u.samples().iter().all(|s| s.unitarity_defect() < 1e-9));
                for (l, s) in r.lambda.iter().zip(&spectra) {
                    for x in 0..f.mesh().node_count() {
                        assert!((l.value(x).re - s.value(x).re).abs() <= achieved + 1e-9);
                    }
                }
                assert!(verify_report(&f, &r).ok);
            }
        }
    }
}

#[test]
fn random_fields_on_every_flat_mesh() {
    for seed in 0..5u64 {
        let n = 2 + (seed % 4) as usize;
        for (kind, res) in [
            (MeshKind::Interval, 101),
            (MeshKind::Circle, 128),
            (MeshKind::Square, 33),
        ] {
            let f = random_smooth_hermitian(mesh(kind, res), n, seed).unwrap();
            let r = approx_diagonalize_hermitian(&f, 0.01, seed).unwrap();
            assert_eq!(
                r.status,
                Status::Success,
                "seed {seed} {kind}: {:?}",
                r.diagnostics.message
            );
            let v = verify_report(&f, &r);
            assert!(v.ok, "{:?}", v.failed);
        }
    }
}

#[test]
fn unitary_varies_no_faster_than_the_field_allows() {
    // A smooth field on a fine mesh gives a visibly continuous frame.
    let f = random_smooth_hermitian(mesh(MeshKind::Circle, 256), 3, 4).unwrap();
    let r = approx_diagonalize_hermitian(&f, 0.01, 0).unwrap();
    assert_eq!(r.status, Status::Success);
    assert!(continuity_modulus(r.unitary.as_ref().unwrap()) < 0.5);
}

#[test]
fn tridiagonal_residual_respects_budget() {
    let eps = 1e-3;
    for seed in 0..6u64 {
        let n = 2 + (seed % 4) as usize;
        let f = random_smooth_hermitian(mesh(MeshKind::Square, 17), n, seed).unwrap();
        let t = tridiagonalize(&f, eps, seed).unwrap();
        let bound = ((n - 1) as f64).powf(1.5) * eps;
        assert!(t.offband_residual < bound, "n={n}: {} vs {bound}", t.offband_residual);
        for x in 0..f.mesh().node_count() {
            assert!(t.real_sub(x).iter().all(|&b| b > 0.0));
            let m = t.matrix(x);
            for i in 0..n {
                for j in 0..n {
                    if i.abs_diff(j) > 1 {
                        assert_eq!(m[(i, j)], Complex64::new(0.0, 0.0));
                    }
                }
            }
        }
    }
}

#[test]
fn q_recursion_matches_leading_minors() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.gen_range(2..=6);
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0.0..2.0)).collect();
        let sub: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let t = tridiagonal(&c, &sub);
        let q = q_values(&c, &b);
        for (k, qk) in q.iter().enumerate() {
            assert!((qk - leading_minor(&t, k)).abs() < 1e-9);
        }
    }
}

#[test]
fn distinct_spectrum_hits_its_determinant_target() {
    for seed in 0..4u64 {
        let n = 3 + (seed % 3) as usize;
        let f = random_smooth_hermitian(mesh(MeshKind::Circle, 64), n, seed).unwrap();
        let t = tridiagonalize(&f, 1e-3, seed).unwrap();
        let q = q_sequence(&t);
        assert_eq!(q.len(), n);
        let d = distinct_spectrum_perturbation(&t, 1e-3, seed).unwrap();
        assert!(d.det_defect < 1e-9);
        assert!(d.min_gap > 0.0);
        for x in 0..f.mesh().node_count() {
            let minor = leading_minor(d.centered.sample(x), n - 1);
            assert!((minor - d.b.value(x).re).abs() < 1e-9);
        }
    }
}

#[test]
fn two_by_two_eigenvalues_follow_the_closed_form() {
    let m = mesh(MeshKind::Interval, 101);
    let f = MatrixField::from_fn(m.clone(), FieldTag::Hermitian, |p| {
        CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, -p[0]]])
    })
    .unwrap();
    let r = approx_diagonalize_hermitian(&f, 0.01, 0).unwrap();
    assert_eq!(r.status, Status::Success);
    for (x, p) in m.coords().iter().enumerate() {
        let root = (p[0] * p[0] + 4.0).sqrt();
        let l = r.lambda_at(x);
        assert!((l[0] - (-p[0] + root) / 2.0).abs() < 1e-9);
        assert!((l[1] - (-p[0] - root) / 2.0).abs() < 1e-9);
    }
}

#[test]
fn residual_is_measured_against_the_input() {
    let f = random_smooth_hermitian(mesh(MeshKind::Interval, 33), 4, 2).unwrap();
    let r = approx_diagonalize_hermitian(&f, 0.05, 2).unwrap();
    let u = r.unitary.as_ref().unwrap();
    let worst = (0..33)
        .map(|x| op_norm(&(&f.sample(x).conjugate_by(u.sample(x)) - &r.diagonal(x))))
        .fold(0.0, f64::max);
    assert_eq!(worst, r.epsilon_achieved.unwrap());
}
