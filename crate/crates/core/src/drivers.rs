//! End-to-end pipelines: stationary solves, degree adaptivity, implicit
//! Euler time stepping and inverse iteration.

use std::sync::Arc;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bc::{
    assemble_boundary_set, dirichlet, neumann, normalize_leading_identity, reconstruct, reduce_operator, BcKind,
    BoundarySet, ReducedOperator,
};
use crate::cheb::{eval_cheb_3d, inner_product_3d, try_cheb_interp_3d};
use crate::error::{Error, Result, StageExt};
use crate::opdisc::{
    discretize_operator, discretize_separable_diffusion, surrogate_operator, DiffOperator3, DiscOptions,
    DiscretizedOperator,
};
use crate::tensolve::{
    solve_gmres, solve_reshape, Backend, GmresOptions, PreparedLaplace, RecursiveOptions, SolveReport,
    DEFAULT_RESHAPE_CAP,
};
use crate::tensor3::CoeffTensor3;

pub type Func3 = Arc<dyn Fn(f64, f64, f64) -> Result<f64> + Send + Sync>;
pub type Func1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn func3(f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Func3 {
    Arc::new(move |x, y, z| Ok(f(x, y, z)))
}

pub fn func1(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Func1 {
    Arc::new(f)
}

/// Spatial operator of a problem.
#[derive(Clone)]
pub enum OperatorSpec {
    General(DiffOperator3),
    /// `-div(a grad u)` with `a = sum_r a_r1(x) a_r2(y) a_r3(z)`.
    Diffusion(Vec<[Func1; 3]>),
}

impl OperatorSpec {
    pub fn orders(&self) -> [usize; 3] {
        match self {
            OperatorSpec::General(op) => op.orders(),
            OperatorSpec::Diffusion(_) => [2, 2, 2],
        }
    }

    pub fn discretize(&self, degrees: [usize; 3], opts: &DiscOptions) -> Result<DiscretizedOperator> {
        match self {
            OperatorSpec::General(op) => discretize_operator(op, degrees, opts),
            OperatorSpec::Diffusion(terms) => {
                let mut out: Option<DiscretizedOperator> = None;
                for [a, b, c] in terms {
                    let d = discretize_separable_diffusion([&**a, &**b, &**c], degrees)?;
                    out = Some(match out {
                        None => d,
                        Some(acc) => acc.sum(d)?,
                    });
                }
                out.ok_or_else(|| Error::Input("diffusion coefficient has no terms".into()))
            }
        }
    }

    /// Laplace-like eligible stand-in with constant (root mean square)
    /// coefficients.
    pub fn surrogate(&self, degrees: [usize; 3]) -> Result<OperatorSpec> {
        match self {
            OperatorSpec::General(op) => Ok(OperatorSpec::General(surrogate_operator(op, degrees)?)),
            OperatorSpec::Diffusion(terms) => {
                let terms = terms.clone();
                let a = try_cheb_interp_3d(
                    |x, y, z| Ok(terms.iter().map(|[a, b, c]| a(x) * b(y) * c(z)).sum()),
                    degrees,
                )?;
                let mut rms = (inner_product_3d(&a, &a)? / 8.0).sqrt();
                if crate::cheb::cheb_integral_3d(&a) < 0.0 {
                    rms = -rms;
                }
                Ok(OperatorSpec::Diffusion(vec![[
                    func1(move |_| rms),
                    func1(|_| 1.0),
                    func1(|_| 1.0),
                ]]))
            }
        }
    }
}

#[derive(Clone)]
pub struct FaceBc {
    pub kind: BcKind,
    /// `None` means zero data.
    pub data: Option<Func3>,
}

/// Boundary condition per face, indexed `[mode - 1][side]` with side 0 at
/// `-1` and side 1 at `+1`.
#[derive(Clone, Default)]
pub struct BoundarySpec {
    pub faces: [[Option<FaceBc>; 2]; 3],
}

impl BoundarySpec {
    /// Dirichlet on all six faces.
    pub fn dirichlet(data: Option<Func3>) -> Self {
        let face = FaceBc {
            kind: BcKind::Dirichlet,
            data,
        };
        BoundarySpec {
            faces: std::array::from_fn(|_| [Some(face.clone()), Some(face.clone())]),
        }
    }

    pub fn with_face(mut self, mode: usize, side: f64, kind: BcKind, data: Option<Func3>) -> Self {
        let s = usize::from(side > 0.0);
        self.faces[mode - 1][s] = Some(FaceBc { kind, data });
        self
    }

    pub fn assemble(&self, orders: [usize; 3], degrees: [usize; 3]) -> Result<BoundarySet> {
        let zero: Func3 = Arc::new(|_, _, _| Ok(0.0));
        let mut rows = Vec::new();
        for m in 0..3 {
            for (s, face) in self.faces[m].iter().enumerate() {
                let Some(face) = face else { continue };
                let side = if s == 0 { -1.0 } else { 1.0 };
                let data = face.data.as_ref().unwrap_or(&zero);
                let row = match face.kind {
                    BcKind::Dirichlet => dirichlet(m + 1, side, &**data, degrees)?,
                    BcKind::Neumann => neumann(m + 1, side, &**data, degrees)?,
                };
                rows.push(row);
            }
        }
        assemble_boundary_set(rows, orders, degrees)
    }
}

#[derive(Clone)]
pub enum Rhs {
    Function(Func3),
    /// Chebyshev coefficients of the right side.
    Coeffs(CoeffTensor3),
}

#[derive(Clone)]
pub enum Preconditioner {
    None,
    /// Constant-coefficient surrogate of the operator.
    Surrogate,
    Operator(OperatorSpec),
}

pub const DEFAULT_SAMPLE_SEED: u64 = 1000;
pub const DEFAULT_SAMPLES: usize = 1000;

#[derive(Clone)]
pub struct SolverOptions {
    /// `None` picks recursive when eligible, else preconditioned GMRES.
    pub backend: Option<Backend>,
    pub disc: DiscOptions,
    pub gmres: GmresOptions,
    pub recursive: RecursiveOptions,
    pub reshape_cap: usize,
    pub preconditioner: Preconditioner,
    pub sample_seed: u64,
    pub samples: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            backend: None,
            disc: DiscOptions::default(),
            gmres: GmresOptions::default(),
            recursive: RecursiveOptions::default(),
            reshape_cap: DEFAULT_RESHAPE_CAP,
            preconditioner: Preconditioner::Surrogate,
            sample_seed: DEFAULT_SAMPLE_SEED,
            samples: DEFAULT_SAMPLES,
        }
    }
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub operator: OperatorSpec,
    pub rhs: Rhs,
    pub boundary: BoundarySpec,
    pub degrees: [usize; 3],
    pub solver: SolverOptions,
    pub exact: Option<Func3>,
}

impl ProblemSpec {
    pub fn with_degree(mut self, n: usize) -> Self {
        self.degrees = [n; 3];
        self
    }

    pub fn with_backend(mut self, b: Backend) -> Self {
        self.solver.backend = Some(b);
        self
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub u: CoeffTensor3,
    pub report: SolveReport,
    /// `max(pde_residual, bc_residual)`.
    pub combined_residual: f64,
    pub pde_residual: f64,
    pub bc_residual: f64,
    pub sampled_error: Option<f64>,
    /// Discretization through reconstruction, excluding right-side
    /// interpolation and error sampling.
    pub wall_seconds: f64,
    pub degree_history: Vec<[usize; 3]>,
}

/// Discretized, boundary-substituted operator with solver factorizations.
pub struct PreparedOperator {
    pub disc: DiscretizedOperator,
    pub bset: BoundarySet,
    pub reduced: ReducedOperator,
    pub backend: Backend,
    laplace: Option<PreparedLaplace>,
    precond: Option<PreparedLaplace>,
    opts: SolverOptions,
}

impl PreparedOperator {
    pub fn new(op: &OperatorSpec, bset: BoundarySet, degrees: [usize; 3], opts: &SolverOptions) -> Result<Self> {
        let disc = op.discretize(degrees, &opts.disc).stage("discretize")?;
        let normalized = normalize_leading_identity(&bset).stage("normalize")?;
        let reduced = reduce_operator(&disc, &normalized).stage("reduce")?;
        let backend = opts.backend.unwrap_or(if disc.laplace_like {
            Backend::Recursive
        } else {
            Backend::Gmres
        });
        let mut laplace = None;
        let mut precond = None;
        match backend {
            Backend::Recursive => {
                laplace =
                    Some(PreparedLaplace::new(&reduced.lhat, reduced.laplace_like, opts.recursive).stage("solve")?);
            }
            Backend::Gmres => {
                let surrogate = match &opts.preconditioner {
                    Preconditioner::None => None,
                    Preconditioner::Surrogate => Some(op.surrogate(degrees).stage("preconditioner")?),
                    Preconditioner::Operator(s) => Some(s.clone()),
                };
                if let Some(s) = surrogate {
                    let sd = s.discretize(degrees, &opts.disc).stage("preconditioner")?;
                    let sr = reduce_operator(&sd, &normalized).stage("preconditioner")?;
                    precond =
                        Some(PreparedLaplace::new(&sr.lhat, sr.laplace_like, opts.recursive).stage("preconditioner")?);
                }
            }
            Backend::Reshape => {}
        }
        Ok(PreparedOperator {
            disc,
            bset,
            reduced,
            backend,
            laplace,
            precond,
            opts: opts.clone(),
        })
    }

    pub fn degrees(&self) -> [usize; 3] {
        self.disc.degrees
    }

    /// Solves for Chebyshev right-side coefficients `f`, with the boundary
    /// data of `bset` when given (same constraint matrices required).
    pub fn solve(&self, f: &CoeffTensor3, bset: Option<&BoundarySet>) -> Result<(CoeffTensor3, SolveReport)> {
        let fout = self.disc.to_output_basis(f).stage("rhs")?;
        let (normalized, owned);
        let data = match bset {
            Some(b) => {
                owned = normalize_leading_identity(b).stage("normalize")?;
                &owned
            }
            None => {
                normalized = &self.reduced.bset;
                normalized
            }
        };
        let fhat = self.reduced.reduce_rhs_with(&fout, data).stage("reduce")?;
        let (x, mut report) = match self.backend {
            Backend::Recursive => {
                let start = Instant::now();
                let prep = self.laplace.as_ref().expect("prepared recursive solver");
                let (x, depth) = prep.solve(&fhat).stage("solve")?;
                let mut r = SolveReport::new(Backend::Recursive);
                r.depth = depth;
                r.wall_seconds = start.elapsed().as_secs_f64();
                (x, r)
            }
            Backend::Reshape => {
                solve_reshape(&self.reduced.system(fhat.clone()), self.opts.reshape_cap).stage("solve")?
            }
            Backend::Gmres => {
                let sys = self.reduced.system(fhat.clone());
                solve_gmres(&sys, self.precond.as_ref(), &self.opts.gmres).stage("solve")?
            }
        };
        let u = reconstruct(&x, data).stage("reconstruct")?;
        report.cp_error = self.disc.cp_error;
        if self.disc.regularized {
            report.warnings.push("CP decomposition needed regularization".into());
        }
        Ok((u, report))
    }

    /// PDE residual over all rows of the discretized equation.
    pub fn pde_residual(&self, u: &CoeffTensor3, f: &CoeffTensor3) -> Result<f64> {
        let fout = self.disc.to_output_basis(f)?;
        Ok(self.disc.apply(u)?.sub(&fout)?.max_abs())
    }
}

/// Seeded uniform sample points in the cube.
pub fn sample_points(seed: u64, count: usize) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
        .collect()
}

pub fn sampled_max_error(u: &CoeffTensor3, exact: &Func3, points: &[[f64; 3]]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &[x, y, z] in points {
        worst = worst.max((eval_cheb_3d(u, x, y, z) - exact(x, y, z)?).abs());
    }
    Ok(worst)
}

pub fn sampled_max_diff(u: &CoeffTensor3, v: &CoeffTensor3, points: &[[f64; 3]]) -> f64 {
    points
        .iter()
        .map(|&[x, y, z]| (eval_cheb_3d(u, x, y, z) - eval_cheb_3d(v, x, y, z)).abs())
        .fold(0.0, f64::max)
}

fn rhs_coeffs(rhs: &Rhs, degrees: [usize; 3]) -> Result<CoeffTensor3> {
    match rhs {
        Rhs::Function(f) => try_cheb_interp_3d(|x, y, z| f(x, y, z), degrees),
        Rhs::Coeffs(c) => {
            let dims = degrees.map(|d| d + 1);
            let mut out = CoeffTensor3::zeros(dims);
            let cd = c.dims();
            let r: [usize; 3] = std::array::from_fn(|m| cd[m].min(dims[m]));
            out.assign_slice([0, 0, 0], &c.slice([0..r[0], 0..r[1], 0..r[2]])?)?;
            Ok(out)
        }
    }
}

fn finish(
    prep: &PreparedOperator,
    f: &CoeffTensor3,
    u: CoeffTensor3,
    report: SolveReport,
    exact: Option<&Func3>,
    opts: &SolverOptions,
    wall: f64,
) -> Result<Solution> {
    let pde = prep.pde_residual(&u, f).stage("residual")?;
    let bcr = prep.bset.residual(&u).stage("residual")?;
    let sampled_error = match exact {
        Some(e) => Some(sampled_max_error(&u, e, &sample_points(opts.sample_seed, opts.samples)).stage("sampling")?),
        None => None,
    };
    Ok(Solution {
        u,
        report,
        combined_residual: pde.max(bcr),
        pde_residual: pde,
        bc_residual: bcr,
        sampled_error,
        wall_seconds: wall,
        degree_history: vec![prep.degrees()],
    })
}

pub fn solve_stationary(p: &ProblemSpec) -> Result<Solution> {
    let orders = p.operator.orders();
    let f = rhs_coeffs(&p.rhs, p.degrees).stage("rhs")?;
    let start = Instant::now();
    let bset = p.boundary.assemble(orders, p.degrees).stage("boundary")?;
    let warnings = bset.warnings.clone();
    let prep = PreparedOperator::new(&p.operator, bset, p.degrees, &p.solver)?;
    let (u, mut report) = match prep.solve(&f, None) {
        Err(e) if p.solver.backend.is_none() && prep.backend == Backend::Gmres && is_nonconvergence(&e) => {
            let m: usize = prep.reduced.interior.iter().product();
            if m > p.solver.reshape_cap {
                return Err(e);
            }
            let mut fallback = p.solver.clone();
            fallback.backend = Some(Backend::Reshape);
            let prep2 = PreparedOperator::new(&p.operator, prep.bset.clone(), p.degrees, &fallback)?;
            let (u, mut r) = prep2.solve(&f, None)?;
            r.warnings.push(format!("GMRES failed ({e}); fell back to reshape"));
            (u, r)
        }
        other => other?,
    };
    let wall = start.elapsed().as_secs_f64();
    report.warnings.extend(warnings);
    finish(&prep, &f, u, report, p.exact.as_ref(), &p.solver, wall)
}

fn is_nonconvergence(e: &Error) -> bool {
    matches!(e.root(), Error::NonConvergence { .. })
}

/// Largest coefficient magnitude in the trailing 10% of indices of any mode.
pub fn trailing_coefficient_mass(u: &CoeffTensor3) -> f64 {
    let d = u.dims();
    let start: [usize; 3] = std::array::from_fn(|m| d[m] - d[m].div_ceil(10));
    let mut worst: f64 = 0.0;
    for k in 0..d[2] {
        for j in 0..d[1] {
            for i in 0..d[0] {
                if i >= start[0] || j >= start[1] || k >= start[2] {
                    worst = worst.max(u.get(i, j, k).abs());
                }
            }
        }
    }
    worst
}

/// Doubles the degrees until the combined residual and the trailing
/// coefficients fall below `tol` or every degree reaches `n_max`.
pub fn adaptive_solve(p: &ProblemSpec, tol: f64, n_max: usize) -> Result<Solution> {
    if p.degrees.iter().any(|&d| d > n_max) {
        return Err(Error::Input(format!(
            "n_max {n_max} is below the initial degrees {:?}",
            p.degrees
        )));
    }
    let mut spec = p.clone();
    let mut history = Vec::new();
    let mut best: Option<Solution> = None;
    loop {
        let sol = solve_stationary(&spec)?;
        history.push(spec.degrees);
        let done = sol.combined_residual <= tol && trailing_coefficient_mass(&sol.u) <= tol;
        if best
            .as_ref()
            .is_none_or(|b| sol.combined_residual <= b.combined_residual)
            || done
        {
            best = Some(sol);
        }
        if done {
            break;
        }
        if spec.degrees.iter().all(|&d| d >= n_max) {
            let b = best.as_mut().expect("at least one solve");
            b.report.warnings.push(format!(
                "degree cap {n_max} reached without meeting tolerance {tol:.3e}"
            ));
            break;
        }
        spec.degrees = spec.degrees.map(|d| (2 * d).min(n_max));
    }
    let mut out = best.expect("at least one solve");
    out.degree_history = history;
    Ok(out)
}

/// Implicit Euler for `u_t = G u` with homogeneous boundary conditions:
/// `(I - h G) u_{k+1} = u_k`. Returns `U_0, ..., U_steps`.
pub fn evolve_implicit_euler(
    generator: &DiffOperator3,
    u0: &Func3,
    h: f64,
    steps: usize,
    degrees: [usize; 3],
    boundary: &BoundarySpec,
    opts: &SolverOptions,
) -> Result<Vec<CoeffTensor3>> {
    if !h.is_finite() || h < 0.0 {
        return Err(Error::Input(format!(
            "time step must be finite and non-negative, got {h}"
        )));
    }
    let first = try_cheb_interp_3d(|x, y, z| u0(x, y, z), degrees).stage("initial data")?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(first);
    if h == 0.0 {
        for _ in 0..steps {
            out.push(out[0].clone());
        }
        return Ok(out);
    }
    let op = OperatorSpec::General(generator.shifted_scaled(1.0, -h)?);
    let bset = boundary.assemble(op.orders(), degrees).stage("boundary")?.homogeneous();
    let prep = PreparedOperator::new(&op, bset, degrees, opts)?;
    for _ in 0..steps {
        let (u, _) = prep.solve(out.last().expect("nonempty"), None)?;
        out.push(u);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    pub lambda: f64,
    /// Normalized in `L^2`.
    pub u: CoeffTensor3,
    pub history: Vec<f64>,
}

/// Inverse iteration with homogeneous boundary conditions; returns the
/// eigenvalue of smallest magnitude from the Rayleigh quotient.
pub fn inverse_iteration(
    op: &OperatorSpec,
    u0: &Func3,
    iters: usize,
    degrees: [usize; 3],
    boundary: &BoundarySpec,
    opts: &SolverOptions,
) -> Result<EigenResult> {
    if iters == 0 {
        return Err(Error::Input("inverse iteration needs at least one step".into()));
    }
    let mut u = try_cheb_interp_3d(|x, y, z| u0(x, y, z), degrees).stage("initial data")?;
    let bset = boundary.assemble(op.orders(), degrees).stage("boundary")?.homogeneous();
    let prep = PreparedOperator::new(op, bset, degrees, opts)?;
    let mut history = Vec::with_capacity(iters);
    let mut lambda = f64::NAN;
    for _ in 0..iters {
        let norm = inner_product_3d(&u, &u)?.sqrt();
        if !(norm > f64::MIN_POSITIVE) || !norm.is_finite() {
            return Err(Error::Breakdown(format!("iterate norm {norm:e} in inverse iteration")));
        }
        let q = u.scaled(1.0 / norm);
        let (us, _) = prep.solve(&q, None)?;
        let inv = inner_product_3d(&q, &us)?;
        if inv == 0.0 || !inv.is_finite() {
            return Err(Error::Breakdown("vanishing Rayleigh quotient".into()));
        }
        lambda = 1.0 / inv;
        history.push(lambda);
        u = us;
    }
    let norm = inner_product_3d(&u, &u)?.sqrt();
    if !(norm > f64::MIN_POSITIVE) {
        return Err(Error::Breakdown("eigenfunction estimate vanished".into()));
    }
    Ok(EigenResult {
        lambda,
        u: u.scaled(1.0 / norm),
        history,
    })
}

/// Problems from the numerical experiments, parameterized by degree.
pub mod presets {
    use std::f64::consts::PI;

    use super::*;
    use crate::expr::parse;
    use crate::opdisc::Coeff;

    pub const NAMES: [&str; 9] = [
        "poisson",
        "helmholtz-const",
        "helmholtz-gamma",
        "diffusion-sep",
        "diffusion-rank2",
        "helmholtz-sqrt",
        "helmholtz-mixed",
        "heat",
        "eig-potential",
    ];

    fn sin3(x: f64, y: f64, z: f64) -> f64 {
        (PI * x).sin() * (PI * y).sin() * (PI * z).sin()
    }

    fn stationary(
        operator: OperatorSpec,
        f: Func3,
        boundary: BoundarySpec,
        n: usize,
        exact: Option<Func3>,
    ) -> ProblemSpec {
        ProblemSpec {
            operator,
            rhs: Rhs::Function(f),
            boundary,
            degrees: [n; 3],
            solver: SolverOptions::default(),
            exact,
        }
    }

    /// `Delta u = f` with `u* = sin(pi x) sin(pi y) sin(pi z)`, zero Dirichlet.
    pub fn poisson(n: usize) -> ProblemSpec {
        stationary(
            OperatorSpec::General(DiffOperator3::laplacian()),
            func3(|x, y, z| -3.0 * PI * PI * sin3(x, y, z)),
            BoundarySpec::dirichlet(None),
            n,
            Some(func3(sin3)),
        )
    }

    pub const HELMHOLTZ_KAPPA: f64 = 2.0;

    fn helmholtz_const_exact(x: f64, y: f64, z: f64) -> f64 {
        (0.5 * x).exp() * (y + 0.3).sin() * (2.0 * z).cos()
    }

    /// `Delta u + kappa^2 u = f`, constant `kappa`, Dirichlet data from `u*`.
    pub fn helmholtz_const(n: usize) -> ProblemSpec {
        let k2 = HELMHOLTZ_KAPPA * HELMHOLTZ_KAPPA;
        let op = DiffOperator3::laplacian().with([0, 0, 0], k2).expect("valid index");
        let exact = func3(helmholtz_const_exact);
        stationary(
            OperatorSpec::General(op),
            func3(move |x, y, z| (k2 - 4.75) * helmholtz_const_exact(x, y, z)),
            BoundarySpec::dirichlet(Some(exact.clone())),
            n,
            Some(exact),
        )
    }

    pub const GAMMA: [f64; 3] = [5.0, 3.0, 5.0];

    fn gamma_kappa(x: f64) -> f64 {
        let [g1, g2, g3] = GAMMA;
        g1 - g2 * (PI * g3 * x / 2.0).cos()
    }

    fn gamma_exact(x: f64, y: f64, z: f64) -> f64 {
        let [g1, g2, g3] = GAMMA;
        (-gamma_kappa(x) / g3).exp() * (PI * g1 * y / 2.0).cos() * (PI * g2 * z / 2.0).cos()
    }

    fn gamma_rhs(x: f64, y: f64, z: f64) -> f64 {
        let [g1, g2, g3] = GAMMA;
        let w = PI * g3 / 2.0;
        let k = gamma_kappa(x);
        let dk = g2 * w * (w * x).sin();
        let ddk = g2 * w * w * (w * x).cos();
        let gx = dk * dk / (g3 * g3) - ddk / g3;
        let ky = PI * g1 / 2.0;
        let kz = PI * g2 / 2.0;
        (gx - ky * ky - kz * kz + k * k) * gamma_exact(x, y, z)
    }

    /// `Delta u + kappa(x)^2 u = f` with `kappa(x) = g1 - g2 cos(pi g3 x / 2)`.
    pub fn helmholtz_gamma(n: usize) -> ProblemSpec {
        let [g1, g2, g3] = GAMMA;
        let k2 = parse(&format!("({g1:?} - {g2:?}*cos(pi*{g3:?}*x/2))^2")).expect("valid expression");
        let op = DiffOperator3::laplacian().with([0, 0, 0], k2).expect("valid index");
        let exact = func3(gamma_exact);
        stationary(
            OperatorSpec::General(op),
            func3(gamma_rhs),
            BoundarySpec::dirichlet(Some(exact.clone())),
            n,
            Some(exact),
        )
    }

    /// `-(a u')'`-type term for `u = sin(pi s)` along one axis, divided by
    /// the product of the other sines: returns `(a(s) sin(pi s)')' `.
    fn flux_derivative(a: f64, da: f64, s: f64) -> f64 {
        da * PI * (PI * s).cos() - a * PI * PI * (PI * s).sin()
    }

    type Scalar = fn(f64) -> f64;

    /// `-div(a grad u*)` for separable `a = a1(x) a2(y) a3(z)` and the
    /// sin-product `u*`.
    fn separable_diffusion_rhs(a: [Scalar; 3], da: [Scalar; 3], x: f64, y: f64, z: f64) -> f64 {
        let p = [x, y, z];
        let s: [f64; 3] = std::array::from_fn(|m| (PI * p[m]).sin());
        let av: [f64; 3] = std::array::from_fn(|m| a[m](p[m]));
        let mut total = 0.0;
        for m in 0..3 {
            let mut term = flux_derivative(av[m], da[m](p[m]), p[m]);
            for o in 0..3 {
                if o != m {
                    term *= av[o] * s[o];
                }
            }
            total += term;
        }
        -total
    }

    fn one_plus_sq(s: f64) -> f64 {
        1.0 + s * s
    }

    fn two_s(s: f64) -> f64 {
        2.0 * s
    }

    /// `-div(a grad u) = f` with `a = (1+x^2)(1+y^2)(1+z^2)`.
    pub fn diffusion_sep(n: usize) -> ProblemSpec {
        let a = [one_plus_sq as Scalar; 3];
        let da = [two_s as Scalar; 3];
        stationary(
            OperatorSpec::Diffusion(vec![[func1(one_plus_sq), func1(one_plus_sq), func1(one_plus_sq)]]),
            func3(move |x, y, z| separable_diffusion_rhs(a, da, x, y, z)),
            BoundarySpec::dirichlet(None),
            n,
            Some(func3(sin3)),
        )
    }

    /// Coefficient `b2` of the separable preconditioner for the rank-2 case.
    pub fn diffusion_rank2_separable_preconditioner() -> Preconditioner {
        Preconditioner::Operator(OperatorSpec::Diffusion(vec![[
            func1(one_plus_sq),
            func1(one_plus_sq),
            func1(one_plus_sq),
        ]]))
    }

    /// `-div(a grad u) = f` with `a = (1+x^2)(1+y^2)(1+z^2) + exp(x+y+z)`;
    /// GMRES with the constant root-mean-square preconditioner by default.
    pub fn diffusion_rank2(n: usize) -> ProblemSpec {
        let a1 = [one_plus_sq as Scalar; 3];
        let d1 = [two_s as Scalar; 3];
        let a2 = [f64::exp as Scalar; 3];
        stationary(
            OperatorSpec::Diffusion(vec![
                [func1(one_plus_sq), func1(one_plus_sq), func1(one_plus_sq)],
                [func1(f64::exp), func1(f64::exp), func1(f64::exp)],
            ]),
            func3(move |x, y, z| separable_diffusion_rhs(a1, d1, x, y, z) + separable_diffusion_rhs(a2, a2, x, y, z)),
            BoundarySpec::dirichlet(None),
            n,
            Some(func3(sin3)),
        )
    }

    pub const SQRT_CP_RANK: usize = 10;
    pub const SQRT_SPLIT_RANK: usize = 7;

    fn sqrt_kappa() -> Coeff {
        Coeff::Expr(parse("sqrt(x + y + z + 42)").expect("valid expression"))
    }

    /// `Delta u + kappa u = f`, `kappa = sqrt(x+y+z+42)`, CP rank 10 on the
    /// full coefficient tensor.
    pub fn helmholtz_sqrt(n: usize) -> ProblemSpec {
        let op = DiffOperator3::laplacian()
            .with([0, 0, 0], sqrt_kappa())
            .expect("valid index");
        let mut p = stationary(
            OperatorSpec::General(op),
            func3(|x, y, z| ((x + y + z + 42.0).sqrt() - 3.0 * PI * PI) * sin3(x, y, z)),
            BoundarySpec::dirichlet(None),
            n,
            Some(func3(sin3)),
        );
        p.solver.disc.cp_rank = Some(SQRT_CP_RANK);
        p.solver.disc.split_identity = false;
        p
    }

    /// As [`helmholtz_sqrt`] but discretizing the Laplacian exactly and only
    /// decomposing `kappa` (rank 7).
    pub fn helmholtz_sqrt_split(n: usize) -> ProblemSpec {
        let mut p = helmholtz_sqrt(n);
        p.solver.disc.cp_rank = Some(SQRT_SPLIT_RANK);
        p.solver.disc.split_identity = true;
        p
    }

    /// `Delta u + kappa u = 1`, zero Neumann at `x = 1`, zero Dirichlet
    /// elsewhere; exact solution unknown.
    pub fn helmholtz_mixed(n: usize) -> ProblemSpec {
        let mut p = helmholtz_sqrt(n);
        p.rhs = Rhs::Function(func3(|_, _, _| 1.0));
        p.boundary = BoundarySpec::dirichlet(None).with_face(1, 1.0, BcKind::Neumann, None);
        p.exact = None;
        p
    }

    /// Heat equation `u_t = Delta u` from the sin-product.
    pub struct HeatProblem {
        pub generator: DiffOperator3,
        pub u0: Func3,
        pub h: f64,
        pub steps: usize,
        pub degrees: [usize; 3],
        pub boundary: BoundarySpec,
        pub solver: SolverOptions,
    }

    impl HeatProblem {
        pub fn run(&self) -> Result<Vec<CoeffTensor3>> {
            evolve_implicit_euler(
                &self.generator,
                &self.u0,
                self.h,
                self.steps,
                self.degrees,
                &self.boundary,
                &self.solver,
            )
        }

        /// Scalar recurrence `(1 + 3 pi^2 h)^(-k) u0`.
        pub fn oracle(&self, k: usize, x: f64, y: f64, z: f64) -> f64 {
            (1.0 + 3.0 * PI * PI * self.h).powi(-(k as i32)) * sin3(x, y, z)
        }
    }

    pub fn heat(n: usize, h: f64, steps: usize) -> HeatProblem {
        HeatProblem {
            generator: DiffOperator3::laplacian(),
            u0: func3(sin3),
            h,
            steps,
            degrees: [n; 3],
            boundary: BoundarySpec::dirichlet(None),
            solver: SolverOptions::default(),
        }
    }

    pub struct EigenProblem {
        pub operator: OperatorSpec,
        pub u0: Func3,
        pub iters: usize,
        pub degrees: [usize; 3],
        pub boundary: BoundarySpec,
        pub solver: SolverOptions,
    }

    impl EigenProblem {
        pub fn run(&self) -> Result<EigenResult> {
            inverse_iteration(
                &self.operator,
                &self.u0,
                self.iters,
                self.degrees,
                &self.boundary,
                &self.solver,
            )
        }
    }

    /// `-Delta u + v u = lambda u` with
    /// `v = sin(pi/2 (x+1)) sin(pi/2 (y+1)) sin(pi/2 (z+1))`; the potential is
    /// decomposed with rank 1.
    pub fn eig_potential(n: usize, iters: usize) -> EigenProblem {
        let v = parse("sin(pi/2*(x+1))*sin(pi/2*(y+1))*sin(pi/2*(z+1))").expect("valid expression");
        let op = DiffOperator3::laplacian()
            .shifted_scaled(0.0, -1.0)
            .and_then(|o| o.with([0, 0, 0], Coeff::Expr(v)))
            .expect("valid operator");
        let mut solver = SolverOptions::default();
        solver.disc.cp_rank = Some(1);
        solver.disc.split_identity = true;
        EigenProblem {
            operator: OperatorSpec::General(op),
            u0: func3(|_, _, _| 1.0),
            iters,
            degrees: [n; 3],
            boundary: BoundarySpec::dirichlet(None),
            solver,
        }
    }

    /// `-Delta u = lambda u`; smallest eigenvalue `3 pi^2 / 4`.
    pub fn eig_laplacian(n: usize, iters: usize) -> EigenProblem {
        let op = DiffOperator3::laplacian()
            .shifted_scaled(0.0, -1.0)
            .expect("valid operator");
        EigenProblem {
            operator: OperatorSpec::General(op),
            u0: func3(|_, _, _| 1.0),
            iters,
            degrees: [n; 3],
            boundary: BoundarySpec::dirichlet(None),
            solver: SolverOptions::default(),
        }
    }

    /// Stationary preset by name.
    pub fn stationary_by_name(name: &str, n: usize) -> Result<ProblemSpec> {
        Ok(match name {
            "poisson" => poisson(n),
            "helmholtz-const" => helmholtz_const(n),
            "helmholtz-gamma" => helmholtz_gamma(n),
            "diffusion-sep" => diffusion_sep(n),
            "diffusion-rank2" => diffusion_rank2(n),
            "helmholtz-sqrt" => helmholtz_sqrt(n),
            "helmholtz-mixed" => helmholtz_mixed(n),
            other => return Err(Error::Config(format!("unknown stationary preset {other:?}"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_deterministic() {
        assert_eq!(sample_points(7, 5), sample_points(7, 5));
        assert!(sample_points(7, 100).iter().flatten().all(|v| (-1.0..1.0).contains(v)));
    }

    #[test]
    fn quadratic_exact_solution() {
        // Delta u = 6 with u = x^2 + y^2 + z^2
        let exact = func3(|x, y, z| x * x + y * y + z * z);
        let p = ProblemSpec {
            operator: OperatorSpec::General(DiffOperator3::laplacian()),
            rhs: Rhs::Function(func3(|_, _, _| 6.0)),
            boundary: BoundarySpec::dirichlet(Some(exact.clone())),
            degrees: [4; 3],
            solver: SolverOptions::default(),
            exact: Some(exact),
        };
        let s = solve_stationary(&p).unwrap();
        assert!(s.sampled_error.unwrap() < 1e-12, "{:?}", s.sampled_error);
        assert!(s.combined_residual < 1e-12);
    }

    #[test]
    fn zero_step_euler_is_identity() {
        let h = presets::heat(6, 0.0, 3);
        let us = h.run().unwrap();
        assert_eq!(us.len(), 4);
        assert!(us.iter().all(|u| u == &us[0]));
    }

    #[test]
    fn zero_iterations_rejected() {
        let e = presets::eig_laplacian(6, 0);
        assert!(matches!(e.run(), Err(Error::Input(_))));
    }
}
