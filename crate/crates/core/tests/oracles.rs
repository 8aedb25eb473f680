use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spectracube::cheb::{cheb_interp_3d, eval_cheb_3d, l2_norm_3d};
use spectracube::drivers::{presets, solve_stationary};
use spectracube::linalg::Lu;
use spectracube::tensolve::{gmres_solve, Backend, GmresOptions};
use spectracube::tensor3::{format_e17, CoeffTensor3};
use spectracube::{DenseMatrix, Error};

fn random_system(seed: u64) -> (DenseMatrix, CoeffTensor3) {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    let n = 60;
    let mut a = DenseMatrix::from_fn(n, n, |_, _| g.random_range(-1.0..1.0));
    for i in 0..n {
        a[(i, i)] += 12.0;
    }
    let b = CoeffTensor3::from_fn([3, 4, 5], |_, _, _| g.random_range(-1.0..1.0));
    (a, b)
}

#[test]
fn gmres_solves_dense_system() {
    let (a, b) = random_system(3);
    let op = |x: &CoeffTensor3| CoeffTensor3::from_vec(x.dims(), a.matvec(x.as_slice())?);
    let (x, rep) = gmres_solve(&op, None, &b, None, &GmresOptions::default()).unwrap();
    let mut want = b.as_slice().to_vec();
    Lu::new(&a, "dense").unwrap().solve_in_place(&mut want);
    let err = x
        .as_slice()
        .iter()
        .zip(&want)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-10, "error {err:e}");
    assert!(rep.iterations > 1 && rep.iterations <= 60);
}

#[test]
fn gmres_with_exact_preconditioner_needs_one_step() {
    let (a, b) = random_system(4);
    let lu = Lu::new(&a, "dense").unwrap();
    let op = |x: &CoeffTensor3| CoeffTensor3::from_vec(x.dims(), a.matvec(x.as_slice())?);
    let pre = |x: &CoeffTensor3| {
        let mut v = x.as_slice().to_vec();
        lu.solve_in_place(&mut v);
        CoeffTensor3::from_vec(x.dims(), v)
    };
    let (_, rep) = gmres_solve(&op, Some(&pre), &b, None, &GmresOptions::default()).unwrap();
    assert_eq!(rep.iterations, 1);
}

#[test]
fn gmres_budget_reports_best_iterate() {
    let (a, b) = random_system(5);
    let op = |x: &CoeffTensor3| CoeffTensor3::from_vec(x.dims(), a.matvec(x.as_slice())?);
    let opts = GmresOptions {
        max_iterations: Some(3),
        ..GmresOptions::default()
    };
    match gmres_solve(&op, None, &b, None, &opts) {
        Err(Error::NonConvergence { iterations, best, .. }) => {
            assert_eq!(iterations, 3);
            assert_eq!(best.dims(), b.dims());
        }
        other => panic!("expected non-convergence, got {:?}", other.map(|r| r.1.iterations)),
    }
}

#[test]
fn reshape_poisson_low_degree_error() {
    // Truncation error of the degree-10 sine expansion.
    let s = solve_stationary(&presets::poisson(10).with_backend(Backend::Reshape)).unwrap();
    let e = s.sampled_error.unwrap();
    assert!((e - 1.55e-5).abs() < 0.5 * 1.55e-5, "{e:e}");
}

#[test]
fn backends_agree_on_constant_helmholtz() {
    let a = solve_stationary(&presets::helmholtz_const(12).with_backend(Backend::Reshape)).unwrap();
    let b = solve_stationary(&presets::helmholtz_const(12).with_backend(Backend::Recursive)).unwrap();
    let c = solve_stationary(&presets::helmholtz_const(12).with_backend(Backend::Gmres)).unwrap();
    let d1 = a.u.sub(&b.u).unwrap().max_abs();
    let d2 = a.u.sub(&c.u).unwrap().max_abs();
    assert!(d1 < 1e-12 && d2 < 1e-10, "{d1:e} {d2:e}");
}

#[test]
fn l2_norm_of_sine_product() {
    // ||sin(pi x) sin(pi y) sin(pi z)||^2 = 1
    let u = cheb_interp_3d(
        |x, y, z| {
            (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin() * (std::f64::consts::PI * z).sin()
        },
        [24; 3],
    )
    .unwrap();
    assert!((l2_norm_3d(&u).unwrap() - 1.0).abs() < 1e-12);
    assert!((eval_cheb_3d(&u, 0.5, 0.5, 0.5) - 1.0).abs() < 1e-12);
}

#[test]
fn tensor_text_round_trip() {
    let t = CoeffTensor3::from_fn([2, 3, 2], |i, j, k| {
        (i as f64 + 0.1) * (j as f64 - 1.3).powi(k as i32 + 3)
    });
    let back = CoeffTensor3::from_text(&t.to_text()).unwrap();
    assert_eq!(back, t);
    assert_eq!(format_e17(0.1), "1.00000000000000006e-01");
}

#[test]
fn heat_single_step_matches_recurrence() {
    let hp = presets::heat(14, 0.05, 1);
    let us = hp.run().unwrap();
    let (x, y, z) = (0.31, -0.42, 0.77);
    let got = eval_cheb_3d(&us[1], x, y, z);
    let want = hp.oracle(1, x, y, z);
    assert!((got - want).abs() < 1e-8 * want.abs().max(1e-3), "{got} {want}");
}
