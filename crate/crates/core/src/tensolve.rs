//! Solvers for the reduced system `sum_r X x_1 A_r x_2 B_r x_3 C_r = F`.

use std::fmt;
use std::time::Instant;

use faer::prelude::*;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};

use crate::bc::ReducedSystem;
use crate::error::{Error, Result};
use crate::linalg::Lu;
use crate::matrix::DenseMatrix;
use crate::schur::{real_schur, SchurFactor};
use crate::tensor3::CoeffTensor3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Reshape,
    Recursive,
    Gmres,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Reshape => "reshape",
            Backend::Recursive => "recursive",
            Backend::Gmres => "gmres",
        })
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reshape" => Ok(Backend::Reshape),
            "recursive" => Ok(Backend::Recursive),
            "gmres" => Ok(Backend::Gmres),
            other => Err(Error::Config(format!("unknown backend {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub backend: Backend,
    /// Total inner GMRES iterations; zero for direct solvers.
    pub iterations: usize,
    /// Recursion depth of the blocked solver.
    pub depth: usize,
    /// Max-norm residual of the solved system (GMRES: relative 2-norm).
    pub residual: f64,
    /// Relative preconditioned residual (GMRES only).
    pub preconditioned_residual: Option<f64>,
    pub wall_seconds: f64,
    pub cp_error: Option<f64>,
    pub warnings: Vec<String>,
    /// Relative preconditioned residual after each GMRES iteration.
    pub history: Vec<f64>,
}

impl SolveReport {
    pub fn new(backend: Backend) -> Self {
        SolveReport {
            backend,
            iterations: 0,
            depth: 0,
            residual: 0.0,
            preconditioned_residual: None,
            wall_seconds: 0.0,
            cp_error: None,
            warnings: Vec::new(),
            history: Vec::new(),
        }
    }
}

/// `sum_r x x_1 t[0] x_2 t[1] x_3 t[2]`.
pub fn apply_terms(terms: &[[DenseMatrix; 3]], x: &CoeffTensor3) -> Result<CoeffTensor3> {
    let mut out: Option<CoeffTensor3> = None;
    for [a, b, c] in terms {
        let y = x.multilinear(a, b, c)?;
        match &mut out {
            None => out = Some(y),
            Some(acc) => acc.axpy(1.0, &y)?,
        }
    }
    out.ok_or_else(|| Error::Input("operator has no terms".into()))
}

pub fn apply_reduced_operator(sys: &ReducedSystem, x: &CoeffTensor3) -> Result<CoeffTensor3> {
    apply_terms(&sys.terms, x)
}

/// Max-norm residual `|A x - F|`.
pub fn reduced_residual(sys: &ReducedSystem, x: &CoeffTensor3) -> Result<f64> {
    Ok(apply_reduced_operator(sys, x)?.sub(&sys.fhat)?.max_abs())
}

pub const DEFAULT_RESHAPE_CAP: usize = 32768;

fn check_terms(terms: &[[DenseMatrix; 3]], dims: [usize; 3]) -> Result<()> {
    if terms.is_empty() {
        return Err(Error::Input("operator has no terms".into()));
    }
    for term in terms {
        for m in 0..3 {
            if term[m].rows() != dims[m] || term[m].cols() != dims[m] {
                return Err(Error::shape(
                    format!("reduced factor for mode {}", m + 1),
                    dims[m],
                    term[m].rows().max(term[m].cols()),
                ));
            }
        }
    }
    Ok(())
}

/// Assembles `sum_r C_r (x) B_r (x) A_r` in compressed-column form.
pub fn assemble_kronecker(terms: &[[DenseMatrix; 3]], dims: [usize; 3]) -> Result<SparseColMat<usize, f64>> {
    check_terms(terms, dims)?;
    let [d1, d2, d3] = dims;
    let m = d1 * d2 * d3;
    let cols_nz = |a: &DenseMatrix, j: usize| -> Vec<(usize, f64)> {
        a.col(j)
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .collect()
    };
    let mut col_ptr = Vec::with_capacity(m + 1);
    let mut row_idx = Vec::new();
    let mut vals = Vec::new();
    let mut acc = vec![0.0; m];
    let mut mark = vec![false; m];
    let mut touched: Vec<usize> = Vec::new();
    col_ptr.push(0);
    for k in 0..d3 {
        for j in 0..d2 {
            for i in 0..d1 {
                for [a, b, c] in terms {
                    let ca = cols_nz(a, i);
                    let cb = cols_nz(b, j);
                    for (rk, vc) in cols_nz(c, k) {
                        for &(rj, vb) in &cb {
                            let s = vc * vb;
                            let base = (rj + rk * d2) * d1;
                            for &(ri, va) in &ca {
                                let r = base + ri;
                                if !mark[r] {
                                    mark[r] = true;
                                    touched.push(r);
                                }
                                acc[r] += s * va;
                            }
                        }
                    }
                }
                touched.sort_unstable();
                for &r in &touched {
                    row_idx.push(r);
                    vals.push(acc[r]);
                    acc[r] = 0.0;
                    mark[r] = false;
                }
                touched.clear();
                col_ptr.push(row_idx.len());
            }
        }
    }
    let symbolic = SymbolicSparseColMat::new_checked(m, m, col_ptr, None, row_idx);
    Ok(SparseColMat::new(symbolic, vals))
}

/// Direct solve of the reshaped `m x m` system by sparse LU.
pub fn solve_reshape(sys: &ReducedSystem, cap: usize) -> Result<(CoeffTensor3, SolveReport)> {
    let start = Instant::now();
    let dims = sys.dims();
    let m: usize = dims.iter().product();
    if m > cap {
        return Err(Error::SizeCap { size: m, cap });
    }
    if !sys.fhat.is_finite() {
        return Err(Error::Input("right side has non-finite entries".into()));
    }
    let a = assemble_kronecker(&sys.terms, dims)?;
    let lu = a.sp_lu().map_err(|e| match e {
        faer::sparse::linalg::LuError::SymbolicSingular { index } => Error::Singular {
            what: "reshaped Kronecker system".into(),
            pivot: index,
        },
        other => Error::Breakdown(format!("sparse LU failed: {other:?}")),
    })?;
    let rhs = Col::from_fn(m, |i| sys.fhat.as_slice()[i]);
    let sol = lu.solve(&rhs);
    let data: Vec<f64> = (0..m).map(|i| sol[i]).collect();
    if let Some(p) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Singular {
            what: "reshaped Kronecker system".into(),
            pivot: p,
        });
    }
    let x = CoeffTensor3::from_vec(dims, data)?;
    let mut report = SolveReport::new(Backend::Reshape);
    report.residual = reduced_residual(sys, &x)?;
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((x, report))
}

/// `X x_1 U + X x_2 V + X x_3 W = F`.
#[derive(Clone, Debug)]
pub struct LaplaceLikeSystem {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    pub w: DenseMatrix,
    pub f: CoeffTensor3,
}

impl LaplaceLikeSystem {
    pub fn new(u: DenseMatrix, v: DenseMatrix, w: DenseMatrix, f: CoeffTensor3) -> Result<Self> {
        let d = f.dims();
        for (m, a) in [&u, &v, &w].into_iter().enumerate() {
            if a.rows() != d[m] || a.cols() != d[m] {
                return Err(Error::shape(
                    format!("Laplace-like matrix for mode {}", m + 1),
                    d[m],
                    a.rows(),
                ));
            }
        }
        Ok(LaplaceLikeSystem { u, v, w, f })
    }

    pub fn apply(&self, x: &CoeffTensor3) -> Result<CoeffTensor3> {
        let mut y = x.mode_mult(&self.u, 1)?;
        y.axpy(1.0, &x.mode_mult(&self.v, 2)?)?;
        y.axpy(1.0, &x.mode_mult(&self.w, 3)?)?;
        Ok(y)
    }

    pub fn residual(&self, x: &CoeffTensor3) -> Result<f64> {
        Ok(self.apply(x)?.sub(&self.f)?.max_abs())
    }
}

/// Largest condition number accepted for a companion matrix.
pub const COMPANION_CONDITION_MAX: f64 = 1e12;

/// Factorized companion matrices of a Laplace-like eligible operator.
#[derive(Clone, Debug)]
pub struct LaplaceTransform {
    companions: [Lu; 3],
    /// `U`, `V`, `W`.
    pub mats: [DenseMatrix; 3],
}

impl LaplaceTransform {
    /// Requires three terms where term `m` differs from the others only in
    /// mode `m`.
    pub fn from_terms(terms: &[[DenseMatrix; 3]], laplace_like: bool) -> Result<Self> {
        if !laplace_like || terms.len() != 3 {
            return Err(Error::NotLaplaceLike(format!(
                "need the symmetric rank-3 structure, got rank {}{}",
                terms.len(),
                if laplace_like {
                    ""
                } else {
                    " without the structure flag"
                }
            )));
        }
        let mut companions = Vec::with_capacity(3);
        let mut mats = Vec::with_capacity(3);
        for m in 0..3 {
            let others: Vec<usize> = (0..3).filter(|&r| r != m).collect();
            let p = &terms[others[0]][m];
            let p2 = &terms[others[1]][m];
            let scale = p.max_abs().max(f64::MIN_POSITIVE);
            if p.sub(p2)?.max_abs() > 1e-13 * scale {
                return Err(Error::NotLaplaceLike(format!(
                    "mode-{} factors of the non-derivative terms differ",
                    m + 1
                )));
            }
            let what = format!("companion matrix of mode {}", m + 1);
            let lu = Lu::new(p, &what).map_err(|_| Error::IllConditioned {
                what: what.clone(),
                condition: f64::INFINITY,
            })?;
            let cond = lu.condition_estimate();
            if !(cond < COMPANION_CONDITION_MAX) {
                return Err(Error::IllConditioned { what, condition: cond });
            }
            mats.push(lu.solve_matrix(&terms[m][m])?);
            companions.push(lu);
        }
        Ok(LaplaceTransform {
            companions: companions.try_into().expect("three modes"),
            mats: mats.try_into().expect("three modes"),
        })
    }

    /// `F x_1 P_x^-1 x_2 P_y^-1 x_3 P_z^-1`.
    pub fn transform_rhs(&self, f: &CoeffTensor3) -> Result<CoeffTensor3> {
        let mut g = f.clone();
        for (m, lu) in self.companions.iter().enumerate() {
            let mat = g.mode_matricize(m + 1)?;
            g = CoeffTensor3::refold(&lu.solve_matrix(&mat)?, m + 1, g.dims())?;
        }
        Ok(g)
    }
}

pub fn to_laplace_like(sys: &ReducedSystem) -> Result<LaplaceLikeSystem> {
    let t = LaplaceTransform::from_terms(&sys.terms, sys.laplace_like)?;
    let f = t.transform_rhs(&sys.fhat)?;
    let [u, v, w] = t.mats;
    LaplaceLikeSystem::new(u, v, w, f)
}

/// Base-case size (product of extents) for the blocked solver. Dense
/// Kronecker-sum solves of this size are cheap; larger bases cost cubic time.
pub const DEFAULT_BASE_CAP: usize = 64;

#[derive(Clone, Copy, Debug)]
pub struct RecursiveOptions {
    pub base_cap: usize,
}

impl Default for RecursiveOptions {
    fn default() -> Self {
        RecursiveOptions {
            base_cap: DEFAULT_BASE_CAP,
        }
    }
}

/// Relative threshold for a vanishing eigenvalue sum.
pub const EIGEN_SUM_TOL: f64 = 1e-13;

/// Schur-factorized Laplace-like operator, reusable across right sides.
#[derive(Clone, Debug)]
pub struct LaplaceSolver {
    pub schur: [SchurFactor; 3],
    pub opts: RecursiveOptions,
}

impl LaplaceSolver {
    pub fn new(u: &DenseMatrix, v: &DenseMatrix, w: &DenseMatrix, opts: RecursiveOptions) -> Result<Self> {
        let schur = [real_schur(u)?, real_schur(v)?, real_schur(w)?];
        let threshold = EIGEN_SUM_TOL * (u.frobenius_norm() + v.frobenius_norm() + w.frobenius_norm());
        let [eu, ev, ew] = [schur[0].eigenvalues(), schur[1].eigenvalues(), schur[2].eigenvalues()];
        let mut min = f64::INFINITY;
        for a in &eu {
            for b in &ev {
                let (re, im) = (a.0 + b.0, a.1 + b.1);
                for c in &ew {
                    min = min.min((re + c.0).hypot(im + c.1));
                }
            }
        }
        if min < threshold {
            return Err(Error::SingularLaplaceLike { sum: min, threshold });
        }
        Ok(LaplaceSolver { schur, opts })
    }

    pub fn dims(&self) -> [usize; 3] {
        std::array::from_fn(|m| self.schur[m].dim())
    }

    /// Solution and recursion depth.
    pub fn solve(&self, f: &CoeffTensor3) -> Result<(CoeffTensor3, usize)> {
        let dims = self.dims();
        if f.dims() != dims {
            return Err(Error::shape("Laplace-like right side", dims.iter().product(), f.len()));
        }
        let [qu, qv, qw] = [&self.schur[0].q, &self.schur[1].q, &self.schur[2].q];
        let ft = f.multilinear(&qu.transpose(), &qv.transpose(), &qw.transpose())?;
        let mut depth = 0;
        let y = self.recurse([0..dims[0], 0..dims[1], 0..dims[2]], ft, 0, &mut depth)?;
        Ok((y.multilinear(qu, qv, qw)?, depth))
    }

    fn t(&self, m: usize) -> &DenseMatrix {
        &self.schur[m].t
    }

    fn split_point(&self, m: usize, r: &std::ops::Range<usize>) -> Option<usize> {
        let t = self.t(m);
        let mid = r.start + r.len() / 2;
        (r.start + 1..r.end)
            .filter(|&s| t[(s, s - 1)] == 0.0)
            .min_by_key(|&s| (s.abs_diff(mid), s))
    }

    fn recurse(
        &self,
        r: [std::ops::Range<usize>; 3],
        mut f: CoeffTensor3,
        level: usize,
        depth: &mut usize,
    ) -> Result<CoeffTensor3> {
        *depth = (*depth).max(level);
        let ext = [r[0].len(), r[1].len(), r[2].len()];
        if ext.iter().product::<usize>() <= self.opts.base_cap {
            return self.base(&r, &f);
        }
        let mut order = [0, 1, 2];
        order.sort_by_key(|&m| std::cmp::Reverse(ext[m]));
        let Some((m, s)) = order.iter().find_map(|&m| self.split_point(m, &r[m]).map(|s| (m, s))) else {
            return self.base(&r, &f);
        };
        let local = s - r[m].start;
        let mut r1 = r.clone();
        let mut r2 = r.clone();
        r1[m] = r[m].start..s;
        r2[m] = s..r[m].end;
        let dims = f.dims();
        let mut lr1 = [0..dims[0], 0..dims[1], 0..dims[2]];
        let mut lr2 = lr1.clone();
        lr1[m] = 0..local;
        lr2[m] = local..dims[m];
        let f2 = f.slice(lr2)?;
        let x2 = self.recurse(r2.clone(), f2, level + 1, depth)?;
        let t12 = self.t(m).submatrix(r1[m].clone(), r2[m].clone());
        let mut f1 = f.slice(lr1)?;
        f1.axpy(-1.0, &x2.mode_mult(&t12, m + 1)?)?;
        let x1 = self.recurse(r1, f1, level + 1, depth)?;
        let mut origin = [0; 3];
        f.assign_slice(origin, &x1)?;
        origin[m] = local;
        f.assign_slice(origin, &x2)?;
        Ok(f)
    }

    fn base(&self, r: &[std::ops::Range<usize>; 3], f: &CoeffTensor3) -> Result<CoeffTensor3> {
        let [d1, d2, d3] = [r[0].len(), r[1].len(), r[2].len()];
        let n = d1 * d2 * d3;
        let mut a = DenseMatrix::zeros(n, n);
        let [tu, tv, tw] = [self.t(0), self.t(1), self.t(2)];
        let (o1, o2, o3) = (r[0].start, r[1].start, r[2].start);
        for k in 0..d3 {
            for j in 0..d2 {
                for i in 0..d1 {
                    let row = i + d1 * (j + d2 * k);
                    for i2 in 0..d1 {
                        a[(row, i2 + d1 * (j + d2 * k))] += tu[(o1 + i, o1 + i2)];
                    }
                    for j2 in 0..d2 {
                        a[(row, i + d1 * (j2 + d2 * k))] += tv[(o2 + j, o2 + j2)];
                    }
                    for k2 in 0..d3 {
                        a[(row, i + d1 * (j + d2 * k2))] += tw[(o3 + k, o3 + k2)];
                    }
                }
            }
        }
        let lu = Lu::new(&a, "Laplace-like base block").map_err(|_| Error::SingularLaplaceLike {
            sum: 0.0,
            threshold: EIGEN_SUM_TOL,
        })?;
        let mut x = f.as_slice().to_vec();
        lu.solve_in_place(&mut x);
        CoeffTensor3::from_vec([d1, d2, d3], x)
    }
}

pub fn solve_laplace_recursive(sys: &LaplaceLikeSystem, opts: RecursiveOptions) -> Result<(CoeffTensor3, SolveReport)> {
    let start = Instant::now();
    let solver = LaplaceSolver::new(&sys.u, &sys.v, &sys.w, opts)?;
    let (x, depth) = solver.solve(&sys.f)?;
    let mut report = SolveReport::new(Backend::Recursive);
    report.depth = depth;
    report.residual = sys.residual(&x)?;
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((x, report))
}

/// Laplace-like eligible reduced operator with all factorizations cached.
#[derive(Clone, Debug)]
pub struct PreparedLaplace {
    pub transform: LaplaceTransform,
    pub solver: LaplaceSolver,
}

impl PreparedLaplace {
    pub fn new(terms: &[[DenseMatrix; 3]], laplace_like: bool, opts: RecursiveOptions) -> Result<Self> {
        let transform = LaplaceTransform::from_terms(terms, laplace_like)?;
        let [u, v, w] = &transform.mats;
        let solver = LaplaceSolver::new(u, v, w, opts)?;
        Ok(PreparedLaplace { transform, solver })
    }

    /// Solves the reduced system with right side `fhat`.
    pub fn solve(&self, fhat: &CoeffTensor3) -> Result<(CoeffTensor3, usize)> {
        self.solver.solve(&self.transform.transform_rhs(fhat)?)
    }
}

/// Reduced-system solve through the Laplace-like form.
pub fn solve_recursive(sys: &ReducedSystem, opts: RecursiveOptions) -> Result<(CoeffTensor3, SolveReport)> {
    let start = Instant::now();
    let prep = PreparedLaplace::new(&sys.terms, sys.laplace_like, opts)?;
    let (x, depth) = prep.solve(&sys.fhat)?;
    let mut report = SolveReport::new(Backend::Recursive);
    report.depth = depth;
    report.residual = reduced_residual(sys, &x)?;
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((x, report))
}

/// `y -> solution of the surrogate system with right side y`.
pub fn make_preconditioner(surrogate: &ReducedSystem) -> Result<PreparedLaplace> {
    PreparedLaplace::new(&surrogate.terms, surrogate.laplace_like, RecursiveOptions::default())
}

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    pub restart: usize,
    pub tol: f64,
    pub maxouter: usize,
    /// Cap on total inner iterations.
    pub max_iterations: Option<usize>,
    /// Consecutive restarts without improvement before giving up.
    pub stagnation_restarts: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            restart: 15,
            tol: 1e-12,
            maxouter: 200,
            max_iterations: None,
            stagnation_restarts: 3,
        }
    }
}

pub type LinearMap<'a> = &'a dyn Fn(&CoeffTensor3) -> Result<CoeffTensor3>;

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Left-preconditioned restarted GMRES.
pub fn gmres_solve(
    op: LinearMap,
    precond: Option<LinearMap>,
    rhs: &CoeffTensor3,
    x0: Option<&CoeffTensor3>,
    opts: &GmresOptions,
) -> Result<(CoeffTensor3, SolveReport)> {
    let start = Instant::now();
    if !rhs.is_finite() {
        return Err(Error::Input("right side has non-finite entries".into()));
    }
    if opts.restart == 0 {
        return Err(Error::Config("GMRES restart length must be positive".into()));
    }
    let dims = rhs.dims();
    let apply_m = |v: &CoeffTensor3| -> Result<CoeffTensor3> {
        match precond {
            Some(p) => p(v),
            None => Ok(v.clone()),
        }
    };
    let mut report = SolveReport::new(Backend::Gmres);
    let bnorm = rhs.norm();
    let pb = apply_m(rhs)?;
    let pbnorm = pb.norm();
    let mut x = match x0 {
        Some(x0) => x0.clone(),
        None => CoeffTensor3::zeros(dims),
    };
    if pbnorm == 0.0 || bnorm == 0.0 {
        report.wall_seconds = start.elapsed().as_secs_f64();
        report.preconditioned_residual = Some(0.0);
        return Ok((CoeffTensor3::zeros(dims), report));
    }
    let budget = opts.max_iterations.unwrap_or(usize::MAX);
    let mut best = x.clone();
    let mut best_res = f64::INFINITY;
    let mut stall = 0;
    let mut total = 0usize;
    let mut converged = false;
    let mut last_rel = f64::INFINITY;
    for outer in 0..=opts.maxouter {
        let r_true = rhs.sub(&op(&x)?)?;
        let r = apply_m(&r_true)?;
        let beta = r.norm();
        let rel = beta / pbnorm;
        last_rel = rel;
        if !rel.is_finite() {
            return Err(Error::Breakdown("GMRES residual is not finite".into()));
        }
        if rel < best_res {
            best_res = rel;
            best = x.clone();
            stall = 0;
        } else {
            stall += 1;
        }
        if rel <= opts.tol {
            converged = true;
            break;
        }
        if stall >= opts.stagnation_restarts || total >= budget || outer == opts.maxouter {
            break;
        }
        let m = opts.restart.min(budget - total);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.as_slice().iter().map(|v| v / beta).collect());
        let mut hcols: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<f64> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m {
            let vk = CoeffTensor3::from_vec(dims, basis[k].clone())?;
            let mut w = apply_m(&op(&vk)?)?.into_vec();
            let mut h = vec![0.0; k + 2];
            for _pass in 0..2 {
                for (i, vi) in basis.iter().enumerate() {
                    let c = dotv(&w, vi);
                    h[i] += c;
                    for (wj, vj) in w.iter_mut().zip(vi) {
                        *wj -= c * vj;
                    }
                }
            }
            let hn = norm2(&w);
            h[k + 1] = hn;
            for i in 0..k {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let den = h[k].hypot(h[k + 1]);
            let (c, s) = if den == 0.0 {
                (1.0, 0.0)
            } else {
                (h[k] / den, h[k + 1] / den)
            };
            cs.push(c);
            sn.push(s);
            h[k] = den;
            h[k + 1] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            hcols.push(h);
            total += 1;
            k += 1;
            let est = g[k].abs() / pbnorm;
            report.history.push(est);
            if est <= opts.tol || hn <= f64::EPSILON * beta {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= hcols[j][i] * y[j];
            }
            y[i] = if hcols[i][i] == 0.0 { 0.0 } else { s / hcols[i][i] };
        }
        let xs = x.as_mut_slice();
        for (j, yj) in y.iter().enumerate() {
            for (xi, vi) in xs.iter_mut().zip(&basis[j]) {
                *xi += yj * vi;
            }
        }
    }
    report.iterations = total;
    report.wall_seconds = start.elapsed().as_secs_f64();
    if !converged {
        return Err(Error::NonConvergence {
            iterations: total,
            residual: best_res,
            best: Box::new(best),
        });
    }
    report.preconditioned_residual = Some(last_rel);
    report.residual = rhs.sub(&op(&x)?)?.norm() / bnorm;
    Ok((x, report))
}

/// GMRES on a reduced system with an optional prepared preconditioner.
pub fn solve_gmres(
    sys: &ReducedSystem,
    precond: Option<&PreparedLaplace>,
    opts: &GmresOptions,
) -> Result<(CoeffTensor3, SolveReport)> {
    let op = |x: &CoeffTensor3| apply_terms(&sys.terms, x);
    let pm = |y: &CoeffTensor3| precond.expect("preconditioner present").solve(y).map(|(x, _)| x);
    let pm_ref: Option<LinearMap> = if precond.is_some() { Some(&pm) } else { None };
    gmres_solve(&op, pm_ref, &sys.fhat, None, opts)
}
