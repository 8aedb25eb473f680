//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.
//! Runs without the libtest harness so the report is always printed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spectracube::bc::{normalize_leading_identity, reconstruct, reduce, BoundarySet};
use spectracube::cheb::{cheb_integral, cheb_interp_1d, diff_matrix, eval_cheb_3d, eval_ultra, l2_norm_3d};
use spectracube::drivers::{presets, sample_points, solve_stationary, BoundarySpec, OperatorSpec, Preconditioner};
use spectracube::linalg::Lu;
use spectracube::opdisc::{DiffOperator3, DiscOptions};
use spectracube::schur::real_schur;
use spectracube::tensolve::{solve_laplace_recursive, solve_reshape, Backend, LaplaceLikeSystem, RecursiveOptions};
use spectracube::tensor3::kron3_matvec;
use spectracube::{CoeffTensor3, DenseMatrix, Error};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn pass_if(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn rand_matrix(g: &mut ChaCha8Rng, r: usize, c: usize) -> DenseMatrix {
    DenseMatrix::from_fn(r, c, |_, _| g.random_range(-1.0..1.0))
}

fn rand_tensor(g: &mut ChaCha8Rng, d: [usize; 3]) -> CoeffTensor3 {
    CoeffTensor3::from_fn(d, |_, _, _| g.random_range(-1.0..1.0))
}

fn e<T: std::fmt::Display>(x: T) -> String {
    x.to_string()
}

fn poisson_recursive() -> Outcome {
    let r30 = solve_stationary(&presets::poisson(30).with_backend(Backend::Recursive)).map_err(e)?;
    let r50 = solve_stationary(&presets::poisson(50).with_backend(Backend::Recursive)).map_err(e)?;
    let s30 = solve_stationary(&presets::poisson(30).with_backend(Backend::Reshape)).map_err(e)?;
    let (e30, e50) = (r30.sampled_error.unwrap(), r50.sampled_error.unwrap());
    let speedup = s30.wall_seconds / r30.wall_seconds;
    pass_if(
        e30 <= 1e-10 && e50 <= 5e-10 && r50.wall_seconds < 60.0 && speedup >= 3.0,
        format!(
            "err(30)={e30:.2e} err(50)={e50:.2e} t(50)={:.2}s reshape/recursive at 30 = {speedup:.1}x",
            r50.wall_seconds
        ),
    )
}

fn reshape_table() -> Outcome {
    let e10 = solve_stationary(&presets::poisson(10).with_backend(Backend::Reshape))
        .map_err(e)?
        .sampled_error
        .unwrap();
    let e30 = solve_stationary(&presets::poisson(30).with_backend(Backend::Reshape))
        .map_err(e)?
        .sampled_error
        .unwrap();
    pass_if(
        (e10 - 1.55e-5).abs() <= 0.5 * 1.55e-5 && e30 <= 1e-12,
        format!("err(10)={e10:.3e} err(30)={e30:.2e}"),
    )
}

fn shifted_random(g: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let mut a = rand_matrix(g, n, n);
    for i in 0..n {
        a[(i, i)] += n as f64 + 1.0;
    }
    a
}

fn backend_equivalence() -> Outcome {
    let mut g = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let d: [usize; 3] = std::array::from_fn(|_| g.random_range(1..=12));
        let sys = LaplaceLikeSystem::new(
            shifted_random(&mut g, d[0]),
            shifted_random(&mut g, d[1]),
            shifted_random(&mut g, d[2]),
            rand_tensor(&mut g, d),
        )
        .map_err(e)?;
        let (x, _) = solve_laplace_recursive(&sys, RecursiveOptions { base_cap: 8 }).map_err(e)?;
        let eye = |n| DenseMatrix::identity(n);
        let k = eye(d[2])
            .kron(&eye(d[1]))
            .kron(&sys.u)
            .add(&eye(d[2]).kron(&sys.v).kron(&eye(d[0])))
            .and_then(|m| m.add(&sys.w.kron(&eye(d[1])).kron(&eye(d[0]))))
            .map_err(e)?;
        let mut want = sys.f.as_slice().to_vec();
        Lu::new(&k, "kronecker").map_err(e)?.solve_in_place(&mut want);
        let scale = want.iter().map(|v| v.abs()).fold(0.0, f64::max);
        worst = worst.max(max_diff(x.as_slice(), &want) / scale);
    }
    let mut diag_worst: f64 = 0.0;
    for _ in 0..10 {
        let d: [usize; 3] = std::array::from_fn(|_| g.random_range(1..=12));
        let vals: Vec<Vec<f64>> = d
            .iter()
            .map(|&n| (0..n).map(|_| g.random_range(0.5..3.0)).collect())
            .collect();
        let f = rand_tensor(&mut g, d);
        let sys = LaplaceLikeSystem::new(
            DenseMatrix::diagonal(&vals[0]),
            DenseMatrix::diagonal(&vals[1]),
            DenseMatrix::diagonal(&vals[2]),
            f.clone(),
        )
        .map_err(e)?;
        let (x, _) = solve_laplace_recursive(&sys, RecursiveOptions::default()).map_err(e)?;
        let want = CoeffTensor3::from_fn(d, |i, j, k| f.get(i, j, k) / (vals[0][i] + vals[1][j] + vals[2][k]));
        diag_worst = diag_worst.max(max_diff(x.as_slice(), want.as_slice()));
    }
    pass_if(
        worst <= 1e-9 && diag_worst <= 1e-12,
        format!("random rel diff {worst:.2e}, diagonal closed form {diag_worst:.2e}"),
    )
}

fn helmholtz_gamma() -> Outcome {
    let errs: Vec<f64> = [20, 40, 60]
        .iter()
        .map(|&n| solve_stationary(&presets::helmholtz_gamma(n)).map(|s| s.sampled_error.unwrap()))
        .collect::<Result<_, _>>()
        .map_err(e)?;
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    pass_if(
        monotone && errs[2] <= 1e-6 && errs[2] <= 1e-2 * errs[0],
        format!("err(20,40,60) = {:.2e}, {:.2e}, {:.2e}", errs[0], errs[1], errs[2]),
    )
}

fn rank2_preconditioners() -> Outcome {
    let mut b1 = presets::diffusion_rank2(30);
    b1.solver.backend = Some(Backend::Gmres);
    let mut b2 = b1.clone();
    b2.solver.preconditioner = presets::diffusion_rank2_separable_preconditioner();
    let s1 = solve_stationary(&b1).map_err(e)?;
    let s2 = solve_stationary(&b2).map_err(e)?;
    let budget = s1.report.iterations;
    let mut none = b1.clone();
    none.solver.preconditioner = Preconditioner::None;
    none.solver.gmres.max_iterations = Some(budget);
    let (unpre, unpre_fails) = match solve_stationary(&none) {
        Ok(s) => {
            let err = s.sampled_error.unwrap();
            (format!("reached {err:.2e}"), err > 1e-9)
        }
        Err(err) if matches!(err.root(), Error::NonConvergence { .. }) => ("did not converge".to_string(), true),
        Err(err) => return Err(err.to_string()),
    };
    let e2 = s2.sampled_error.unwrap();
    pass_if(
        e2 <= 1e-9 && s2.report.iterations < budget && unpre_fails,
        format!(
            "b2: {} its err {e2:.2e}; b1: {budget} its; unpreconditioned within {budget}: {unpre}",
            s2.report.iterations
        ),
    )
}

fn helmholtz_sqrt() -> Outcome {
    let full = solve_stationary(&presets::helmholtz_sqrt(30)).map_err(e)?;
    let split = solve_stationary(&presets::helmholtz_sqrt_split(30)).map_err(e)?;
    let cp_full = full.report.cp_error.unwrap_or(f64::INFINITY);
    let cp_split = split.report.cp_error.unwrap_or(f64::INFINITY);
    let err = full.sampled_error.unwrap();
    pass_if(
        cp_full <= 1e-7 && err <= 1e-7 && cp_split <= 1e-8,
        format!("CP(R=10) {cp_full:.2e}, solution {err:.2e}; split CP(R=7) {cp_split:.2e}"),
    )
}

fn mixed_bc() -> Outcome {
    let r15 = solve_stationary(&presets::helmholtz_mixed(15))
        .map_err(e)?
        .combined_residual;
    let r45 = solve_stationary(&presets::helmholtz_mixed(45))
        .map_err(e)?
        .combined_residual;
    pass_if(
        r45 <= 1e-2 * r15,
        format!("residual(15)={r15:.2e} residual(45)={r45:.2e}"),
    )
}

fn heat() -> Outcome {
    let hp = presets::heat(20, 1e-2, 50);
    let us = hp.run().map_err(e)?;
    let pts = sample_points(1000, 1000);
    let mut worst: f64 = 0.0;
    for (k, u) in us.iter().enumerate() {
        let scale = pts
            .iter()
            .map(|&[x, y, z]| hp.oracle(k, x, y, z).abs())
            .fold(0.0, f64::max);
        let err = pts
            .iter()
            .map(|&[x, y, z]| (eval_cheb_3d(u, x, y, z) - hp.oracle(k, x, y, z)).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err / scale);
    }
    let norms: Vec<f64> = us.iter().map(l2_norm_3d).collect::<Result<_, _>>().map_err(e)?;
    let monotone = norms.windows(2).all(|w| w[1] <= w[0]);
    pass_if(
        worst <= 1e-8 && monotone,
        format!("max relative error {worst:.2e}, norms non-increasing: {monotone}"),
    )
}

fn eigenvalues() -> Outcome {
    let l20 = presets::eig_potential(20, 50).run().map_err(e)?.lambda;
    let l30 = presets::eig_potential(30, 50).run().map_err(e)?.lambda;
    let lap = presets::eig_laplacian(20, 50).run().map_err(e)?.lambda;
    let target = 0.75 * std::f64::consts::PI.powi(2);
    pass_if(
        (l20 - l30).abs() <= 1e-8 && (lap - target).abs() <= 1e-10,
        format!(
            "lambda(20)={l20:.15}, |lambda(20)-lambda(30)|={:.2e}, Laplacian {:.2e} from 3pi^2/4",
            (l20 - l30).abs(),
            (lap - target).abs()
        ),
    )
}

fn run_cli(args: &[&str], dump: &std::path::Path) -> Result<(String, String), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_spectracube"))
        .args(args)
        .arg("--dump")
        .arg(dump)
        .env_remove("SPECTRACUBE_SEED")
        .output()
        .map_err(e)?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    // drop the wall-clock column
    let csv = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(2);
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok((csv, std::fs::read_to_string(dump).map_err(e)?))
}

fn cheb_u(k: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, 2.0 * x);
    if k == 0 {
        return a;
    }
    for _ in 1..k {
        (a, b) = (b, 2.0 * x * b - a);
    }
    b
}

fn property_suites() -> Outcome {
    let mut g = ChaCha8Rng::seed_from_u64(77);
    let mut notes = Vec::new();

    // tensor3: vec/Kronecker identity
    let mut kron_err: f64 = 0.0;
    for _ in 0..50 {
        let d: [usize; 3] = std::array::from_fn(|_| g.random_range(1..6));
        let r: [usize; 3] = std::array::from_fn(|_| g.random_range(1..6));
        let t = rand_tensor(&mut g, d);
        let (a, b, c) = (
            rand_matrix(&mut g, r[0], d[0]),
            rand_matrix(&mut g, r[1], d[1]),
            rand_matrix(&mut g, r[2], d[2]),
        );
        let fast = kron3_matvec(&a, &b, &c, &t).map_err(e)?;
        let slow = c.kron(&b).kron(&a).matvec(t.as_slice()).map_err(e)?;
        kron_err = kron_err.max(max_diff(&fast, &slow));
    }
    notes.push(format!("kron {kron_err:.1e}"));

    // cheb: derivative and integration identities
    let mut cheb_err: f64 = 0.0;
    for n in 1..20 {
        let c: Vec<f64> = (0..=n).map(|_| g.random_range(-1.0..1.0)).collect();
        let d = diff_matrix(1, n).matvec(&c).map_err(e)?;
        let x = g.random_range(-1.0..1.0);
        // T_k' = k U_{k-1}
        let oracle: f64 = (1..=n).map(|k| c[k] * k as f64 * cheb_u(k - 1, x)).sum();
        cheb_err = cheb_err.max((eval_ultra(1, &d, x) - oracle).abs() / (n * n) as f64);
        let a: Vec<f64> = (0..=n).map(|_| g.random_range(-1.0..1.0)).collect();
        let p = |x: f64| a.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let exact: f64 = a
            .iter()
            .enumerate()
            .map(|(k, c)| if k % 2 == 0 { 2.0 * c / (k as f64 + 1.0) } else { 0.0 })
            .sum();
        cheb_err = cheb_err.max((cheb_integral(&cheb_interp_1d(p, n).map_err(e)?) - exact).abs());
    }
    notes.push(format!("cheb {cheb_err:.1e}"));

    // bc: substitution recovers the constrained solution
    let mut bc_err: f64 = 0.0;
    for _ in 0..10 {
        let n: [usize; 3] = std::array::from_fn(|_| g.random_range(4..9));
        let op = DiffOperator3::laplacian()
            .with([0, 0, 0], g.random_range(-1.0..1.0))
            .map_err(e)?;
        let raw = BoundarySpec::dirichlet(None).assemble(op.orders(), n).map_err(e)?;
        let dims = n.map(|d| d + 1);
        let u = CoeffTensor3::from_fn(dims, |i, j, k| {
            g.random_range(-1.0..1.0) / (1.0 + (i + j + k) as f64).powi(2)
        });
        let ops = raw.ops.clone().map(|mut o| {
            o.g = u.mode_mult(&o.b, o.mode).expect("shapes match");
            o
        });
        let data = BoundarySet {
            ops,
            warnings: Vec::new(),
        };
        let norm = normalize_leading_identity(&data).map_err(e)?;
        let disc = OperatorSpec::General(op)
            .discretize(n, &DiscOptions::default())
            .map_err(e)?;
        let sys = reduce(&disc, &disc.apply(&u).map_err(e)?, &norm).map_err(e)?;
        let (x, _) = solve_reshape(&sys, 1 << 20).map_err(e)?;
        bc_err = bc_err.max(max_diff(reconstruct(&x, &norm).map_err(e)?.as_slice(), u.as_slice()));
    }
    notes.push(format!("bc {bc_err:.1e}"));

    // Schur invariants
    let mut schur_err: f64 = 0.0;
    for _ in 0..100 {
        let n = g.random_range(1..=50);
        let a = rand_matrix(&mut g, n, n);
        let s = real_schur(&a).map_err(e)?;
        let back = s.q.matmul(&s.t).and_then(|m| m.matmul(&s.q.transpose())).map_err(e)?;
        let orth =
            s.q.transpose()
                .matmul(&s.q)
                .and_then(|m| m.sub(&DenseMatrix::identity(n)))
                .map_err(e)?;
        let lower = (0..n)
            .flat_map(|j| (j + 2..n).map(move |i| (i, j)))
            .map(|(i, j)| s.t[(i, j)].abs())
            .fold(0.0, f64::max);
        schur_err = schur_err
            .max(back.sub(&a).map_err(e)?.max_abs() / n as f64)
            .max(orth.max_abs() / n as f64)
            .max(lower);
    }
    notes.push(format!("schur {schur_err:.1e}"));

    // CLI determinism under a fixed seed (the CP step is randomized)
    let dir = tempfile::tempdir().map_err(e)?;
    let args = ["solve", "--preset", "helmholtz-sqrt", "--n", "8", "--seed", "11"];
    let a = run_cli(&args, &dir.path().join("a.txt"))?;
    let b = run_cli(&args, &dir.path().join("b.txt"))?;
    let deterministic = a == b;
    notes.push(format!("cli deterministic: {deterministic}"));

    pass_if(
        kron_err <= 1e-13 && cheb_err <= 1e-12 && bc_err <= 1e-10 && schur_err <= 1e-13 && deterministic,
        notes.join(", "),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("Poisson, recursive backend", poisson_recursive),
        ("Poisson, reshape backend error magnitudes", reshape_table),
        ("recursive vs explicit Kronecker", backend_equivalence),
        ("variable-kappa Helmholtz spectral decay", helmholtz_gamma),
        ("rank-2 diffusion preconditioners", rank2_preconditioners),
        ("sqrt-kappa Helmholtz with CP", helmholtz_sqrt),
        ("mixed-BC Helmholtz residual decay", mixed_bc),
        ("implicit Euler heat", heat),
        ("eigenvalue convergence", eigenvalues),
        ("property suites and CLI determinism", property_suites),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match outcome {
            Ok(d) => println!("criterion {:>2}: PASS  {name}: {d}", i + 1),
            Err(d) => {
                println!("criterion {:>2}: FAIL  {name}: {d}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
