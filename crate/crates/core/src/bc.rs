//! Boundary conditions as linear constraints `U x_k B_k = G_k`, their
//! substitution into the discretized operator, and reconstruction of the full
//! coefficient tensor from the interior block.

use crate::cheb::try_cheb_interp_3d;
use crate::error::{Error, Result};
use crate::linalg::Lu;
use crate::matrix::DenseMatrix;
use crate::opdisc::DiscretizedOperator;
use crate::tensor3::{BlockId, BlockSplit, CoeffTensor3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

/// A single constraint row: a functional `b` on the coefficients of `mode`
/// together with its data slab (extent 1 in `mode`).
#[derive(Clone, Debug)]
pub struct BoundaryRow {
    pub mode: usize,
    pub side: f64,
    pub kind: BcKind,
    pub b: Vec<f64>,
    pub g: CoeffTensor3,
}

fn check_mode(mode: usize) -> Result<()> {
    if (1..=3).contains(&mode) {
        Ok(())
    } else {
        Err(Error::Input(format!("mode must be 1, 2 or 3, got {mode}")))
    }
}

fn check_side(side: f64) -> Result<()> {
    if side == 1.0 || side == -1.0 {
        Ok(())
    } else {
        Err(Error::Input(format!("side must be -1 or +1, got {side}")))
    }
}

/// Interpolates face data; `data` is called with the `mode` coordinate fixed
/// to `side`.
fn face_slab(
    mode: usize,
    side: f64,
    data: &dyn Fn(f64, f64, f64) -> Result<f64>,
    degrees: [usize; 3],
) -> Result<CoeffTensor3> {
    let mut deg = degrees;
    deg[mode - 1] = 0;
    try_cheb_interp_3d(
        |x, y, z| {
            let mut p = [x, y, z];
            p[mode - 1] = side;
            data(p[0], p[1], p[2])
        },
        deg,
    )
}

/// `u = h` on the face where coordinate `mode` equals `side`.
pub fn dirichlet(
    mode: usize,
    side: f64,
    data: &dyn Fn(f64, f64, f64) -> Result<f64>,
    degrees: [usize; 3],
) -> Result<BoundaryRow> {
    check_mode(mode)?;
    check_side(side)?;
    let n = degrees[mode - 1];
    let b = (0..=n)
        .map(|i| if side > 0.0 || i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    Ok(BoundaryRow {
        mode,
        side,
        kind: BcKind::Dirichlet,
        b,
        g: face_slab(mode, side, data, degrees)?,
    })
}

/// Normal-coordinate derivative `du/d(coordinate) = h` on the face. The row
/// holds `T_i'(side)`, which is `i^2` at `+1` and `(-1)^(i+1) i^2` at `-1`.
pub fn neumann(
    mode: usize,
    side: f64,
    data: &dyn Fn(f64, f64, f64) -> Result<f64>,
    degrees: [usize; 3],
) -> Result<BoundaryRow> {
    check_mode(mode)?;
    check_side(side)?;
    let n = degrees[mode - 1];
    let b = (0..=n)
        .map(|i| {
            let v = (i * i) as f64;
            if side > 0.0 || i % 2 == 1 {
                v
            } else {
                -v
            }
        })
        .collect();
    Ok(BoundaryRow {
        mode,
        side,
        kind: BcKind::Neumann,
        b,
        g: face_slab(mode, side, data, degrees)?,
    })
}

/// Stacked constraints `U x_mode B = G` for one mode.
#[derive(Clone, Debug)]
pub struct BoundaryOperator {
    pub mode: usize,
    pub b: DenseMatrix,
    pub g: CoeffTensor3,
}

impl BoundaryOperator {
    pub fn count(&self) -> usize {
        self.b.rows()
    }

    /// Max-norm violation of the constraints by `u`.
    pub fn residual(&self, u: &CoeffTensor3) -> Result<f64> {
        if self.count() == 0 {
            return Ok(0.0);
        }
        Ok(u.mode_mult(&self.b, self.mode)?.sub(&self.g)?.max_abs())
    }
}

#[derive(Clone, Debug)]
pub struct BoundarySet {
    pub ops: [BoundaryOperator; 3],
    pub warnings: Vec<String>,
}

impl BoundarySet {
    pub fn counts(&self) -> [usize; 3] {
        std::array::from_fn(|m| self.ops[m].count())
    }

    pub fn residual(&self, u: &CoeffTensor3) -> Result<f64> {
        let mut r: f64 = 0.0;
        for op in &self.ops {
            r = r.max(op.residual(u)?);
        }
        Ok(r)
    }

    /// Copy with all data slabs zeroed.
    pub fn homogeneous(&self) -> BoundarySet {
        let ops = self.ops.clone().map(|mut op| {
            op.g = CoeffTensor3::zeros(op.g.dims());
            op
        });
        BoundarySet {
            ops,
            warnings: Vec::new(),
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.ops.iter().all(|op| op.g.as_slice().iter().all(|v| *v == 0.0))
    }
}

/// Default tolerance for the shared-edge compatibility check.
pub const COMPATIBILITY_TOL: f64 = 1e-8;

/// Stacks rows per mode (side -1 before side +1) and checks that each
/// mode receives as many rows as the operator order.
pub fn assemble_boundary_set(rows: Vec<BoundaryRow>, orders: [usize; 3], degrees: [usize; 3]) -> Result<BoundarySet> {
    assemble_boundary_set_with_tol(rows, orders, degrees, COMPATIBILITY_TOL)
}

pub fn assemble_boundary_set_with_tol(
    rows: Vec<BoundaryRow>,
    orders: [usize; 3],
    degrees: [usize; 3],
    tol: f64,
) -> Result<BoundarySet> {
    let dims = degrees.map(|d| d + 1);
    let mut per_mode: [Vec<BoundaryRow>; 3] = Default::default();
    for row in rows {
        check_mode(row.mode)?;
        let mut expected = dims;
        expected[row.mode - 1] = 1;
        if row.b.len() != dims[row.mode - 1] || row.g.dims() != expected {
            return Err(Error::Config(format!(
                "boundary row for mode {} does not match degrees {degrees:?}",
                row.mode
            )));
        }
        per_mode[row.mode - 1].push(row);
    }
    for m in 0..3 {
        if per_mode[m].len() != orders[m] {
            return Err(Error::Config(format!(
                "mode {} needs {} boundary conditions for an order-{} operator, got {}",
                m + 1,
                orders[m],
                orders[m],
                per_mode[m].len()
            )));
        }
        per_mode[m].sort_by(|a, b| a.side.total_cmp(&b.side));
    }
    let ops: [BoundaryOperator; 3] = std::array::from_fn(|m| {
        let rows = &per_mode[m];
        let b = DenseMatrix::from_fn(rows.len(), dims[m], |r, c| rows[r].b[c]);
        let mut gdims = dims;
        gdims[m] = rows.len();
        let mut g = CoeffTensor3::zeros(gdims);
        for (r, row) in rows.iter().enumerate() {
            let mut origin = [0; 3];
            origin[m] = r;
            g.assign_slice(origin, &row.g).expect("slab fits");
        }
        BoundaryOperator { mode: m + 1, b, g }
    });
    let mut set = BoundarySet {
        ops,
        warnings: Vec::new(),
    };
    let mismatch = compatibility_mismatch(&set)?;
    if mismatch > tol {
        set.warnings.push(format!(
            "boundary data incompatible along shared edges: max mismatch {mismatch:.3e}"
        ));
    }
    Ok(set)
}

/// Largest disagreement between the two representations of every pair of
/// constraints acting on different modes.
pub fn compatibility_mismatch(set: &BoundarySet) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..3 {
        for l in k + 1..3 {
            let (bk, bl) = (&set.ops[k], &set.ops[l]);
            for r in 0..bk.count() {
                for q in 0..bl.count() {
                    let rk = DenseMatrix::from_fn(1, bk.b.cols(), |_, c| bk.b[(r, c)]);
                    let rl = DenseMatrix::from_fn(1, bl.b.cols(), |_, c| bl.b[(q, c)]);
                    let gk = slab(&bk.g, k, r)?;
                    let gl = slab(&bl.g, l, q)?;
                    let from_k = gk.mode_mult(&rl, l + 1)?;
                    let from_l = gl.mode_mult(&rk, k + 1)?;
                    worst = worst.max(from_k.sub(&from_l)?.max_abs());
                }
            }
        }
    }
    Ok(worst)
}

fn slab(g: &CoeffTensor3, m: usize, r: usize) -> Result<CoeffTensor3> {
    let d = g.dims();
    let mut ranges = [0..d[0], 0..d[1], 0..d[2]];
    ranges[m] = r..r + 1;
    g.slice(ranges)
}

/// Largest condition number accepted for the leading block of a constraint
/// matrix.
pub const LEADING_CONDITION_MAX: f64 = 1e10;

/// Rewrites each constraint set as `[I, B_bar]` by multiplying with the
/// inverse of its leading block.
pub fn normalize_leading_identity(set: &BoundarySet) -> Result<BoundarySet> {
    let mut out = set.clone();
    for (m, op) in out.ops.iter_mut().enumerate() {
        let nb = op.count();
        if nb == 0 {
            continue;
        }
        let lead = op.b.submatrix(0..nb, 0..nb);
        let what = format!("leading boundary block of mode {}", m + 1);
        let lu = Lu::new(&lead, &what).map_err(|_| Error::IllConditioned {
            what: format!("{what} is singular; reorder the coefficient columns or constraints"),
            condition: f64::INFINITY,
        })?;
        let cond = lu.condition_estimate();
        if !(cond < LEADING_CONDITION_MAX) {
            return Err(Error::IllConditioned {
                what: format!("{what}; reorder the coefficient columns or constraints"),
                condition: cond,
            });
        }
        let mut b = lu.solve_matrix(&op.b)?;
        for j in 0..nb {
            for i in 0..nb {
                b[(i, j)] = if i == j { 1.0 } else { 0.0 };
            }
        }
        let gm = op.g.mode_matricize(op.mode)?;
        let g = CoeffTensor3::refold(&lu.solve_matrix(&gm)?, op.mode, op.g.dims())?;
        op.b = b;
        op.g = g;
    }
    Ok(out)
}

/// Interior system `sum_r X x_1 Lhat_r^x x_2 Lhat_r^y x_3 Lhat_r^z = Fhat`.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub terms: Vec<[DenseMatrix; 3]>,
    pub fhat: CoeffTensor3,
    pub laplace_like: bool,
}

impl ReducedSystem {
    pub fn dims(&self) -> [usize; 3] {
        self.fhat.dims()
    }
}

/// Operator part of the substitution; reusable across right sides.
#[derive(Clone, Debug)]
pub struct ReducedOperator {
    pub bset: BoundarySet,
    pub full: Vec<[DenseMatrix; 3]>,
    pub tilde: Vec<[DenseMatrix; 3]>,
    pub lhat: Vec<[DenseMatrix; 3]>,
    pub laplace_like: bool,
    pub dims: [usize; 3],
    pub interior: [usize; 3],
}

/// Relative size allowed for the structurally zero leading columns of
/// `L - L[:, :N] B`.
const ZERO_COLUMN_TOL: f64 = 1e-12;

pub fn reduce_operator(d: &DiscretizedOperator, bset: &BoundarySet) -> Result<ReducedOperator> {
    let counts = bset.counts();
    let dims = d.dims();
    for m in 0..3 {
        if bset.ops[m].b.cols() != dims[m] {
            return Err(Error::shape(
                format!("boundary matrix columns for mode {}", m + 1),
                dims[m],
                bset.ops[m].b.cols(),
            ));
        }
        if counts[m] >= dims[m] {
            return Err(Error::Input(format!(
                "mode {} has {} constraints but only {} coefficients",
                m + 1,
                counts[m],
                dims[m]
            )));
        }
    }
    let mut tilde = Vec::with_capacity(d.rank());
    let mut lhat = Vec::with_capacity(d.rank());
    for term in &d.terms {
        let mut t_term: Vec<DenseMatrix> = Vec::with_capacity(3);
        let mut h_term: Vec<DenseMatrix> = Vec::with_capacity(3);
        for m in 0..3 {
            let l = &term[m];
            let nb = counts[m];
            let n1 = dims[m];
            let lead = l.submatrix(0..n1, 0..nb);
            let mut lt = l.sub(&lead.matmul(&bset.ops[m].b)?)?;
            let scale = l.max_abs().max(f64::MIN_POSITIVE);
            let lead_cols = lt.submatrix(0..n1, 0..nb).max_abs();
            if lead_cols > ZERO_COLUMN_TOL * scale {
                return Err(Error::Consistency(format!(
                    "leading columns of the substituted mode-{} operator are not zero ({lead_cols:.3e}); \
                     boundary constraints must be normalized first",
                    m + 1
                )));
            }
            for j in 0..nb {
                lt.col_mut(j).fill(0.0);
            }
            h_term.push(lt.submatrix(0..n1 - nb, nb..n1));
            t_term.push(lt);
        }
        tilde.push(to_array(t_term));
        lhat.push(to_array(h_term));
    }
    Ok(ReducedOperator {
        bset: bset.clone(),
        full: d.terms.clone(),
        tilde,
        lhat,
        laplace_like: d.laplace_like,
        dims,
        interior: std::array::from_fn(|m| dims[m] - counts[m]),
    })
}

fn to_array(v: Vec<DenseMatrix>) -> [DenseMatrix; 3] {
    v.try_into().expect("three modes")
}

impl ReducedOperator {
    /// `Fhat` for a right side `f` given in the operator's output basis, with
    /// the boundary data of `self.bset`.
    pub fn reduce_rhs(&self, f: &CoeffTensor3) -> Result<CoeffTensor3> {
        self.reduce_rhs_with(f, &self.bset)
    }

    /// As [`Self::reduce_rhs`] but with boundary data from `bset`, whose
    /// constraint matrices must equal the ones used for the operator.
    pub fn reduce_rhs_with(&self, f: &CoeffTensor3, bset: &BoundarySet) -> Result<CoeffTensor3> {
        if f.dims() != self.dims {
            return Err(Error::shape("right side size", self.dims.iter().product(), f.len()));
        }
        let counts = bset.counts();
        let mut ft = f.clone();
        if !bset.is_homogeneous() {
            let [g1, g2, g3] = [&bset.ops[0].g, &bset.ops[1].g, &bset.ops[2].g];
            for (full, tilde) in self.full.iter().zip(&self.tilde) {
                let lead = |m: usize| full[m].submatrix(0..self.dims[m], 0..counts[m]);
                if counts[0] > 0 {
                    ft.axpy(-1.0, &g1.multilinear(&lead(0), &full[1], &full[2])?)?;
                }
                if counts[1] > 0 {
                    ft.axpy(-1.0, &g2.multilinear(&tilde[0], &lead(1), &full[2])?)?;
                }
                if counts[2] > 0 {
                    ft.axpy(-1.0, &g3.multilinear(&tilde[0], &tilde[1], &lead(2))?)?;
                }
            }
        }
        ft.slice([0..self.interior[0], 0..self.interior[1], 0..self.interior[2]])
    }

    pub fn system(&self, fhat: CoeffTensor3) -> ReducedSystem {
        ReducedSystem {
            terms: self.lhat.clone(),
            fhat,
            laplace_like: self.laplace_like,
        }
    }
}

/// Substitutes normalized constraints into the discretized equation.
pub fn reduce(d: &DiscretizedOperator, f: &CoeffTensor3, bset: &BoundarySet) -> Result<ReducedSystem> {
    let op = reduce_operator(d, bset)?;
    let fhat = op.reduce_rhs(f)?;
    Ok(op.system(fhat))
}

/// Rebuilds the full coefficient tensor from the interior block `u222` and
/// normalized constraints.
pub fn reconstruct(u222: &CoeffTensor3, bset: &BoundarySet) -> Result<CoeffTensor3> {
    let counts = bset.counts();
    let interior = u222.dims();
    let dims: [usize; 3] = std::array::from_fn(|m| interior[m] + counts[m]);
    for m in 0..3 {
        if bset.ops[m].b.cols() != dims[m] {
            return Err(Error::shape(
                format!("boundary matrix columns for mode {}", m + 1),
                dims[m],
                bset.ops[m].b.cols(),
            ));
        }
    }
    let split = BlockSplit::new(counts, dims)?;
    let bbar: [DenseMatrix; 3] = std::array::from_fn(|m| {
        let b = &bset.ops[m].b;
        b.submatrix(0..counts[m], counts[m]..dims[m])
    });
    let g = |m: usize, which: [u8; 3]| -> Result<CoeffTensor3> {
        // blocks of G_m: its own mode is always the full constraint range
        let r = split.ranges(BlockId(which));
        let mut ranges = r;
        ranges[m] = 0..counts[m];
        bset.ops[m].g.slice(ranges)
    };
    let id = |a, b, c| BlockId([a, b, c]);
    let u122 = g(0, [1, 2, 2])?.sub(&u222.mode_mult(&bbar[0], 1)?)?;
    let u212 = g(1, [2, 1, 2])?.sub(&u222.mode_mult(&bbar[1], 2)?)?;
    let u221 = g(2, [2, 2, 1])?.sub(&u222.mode_mult(&bbar[2], 3)?)?;
    let u112 = g(0, [1, 1, 2])?.sub(&u212.mode_mult(&bbar[0], 1)?)?;
    let u121 = g(0, [1, 2, 1])?.sub(&u221.mode_mult(&bbar[0], 1)?)?;
    let u211 = g(2, [2, 1, 1])?.sub(&u212.mode_mult(&bbar[2], 3)?)?;
    let u111 = g(0, [1, 1, 1])?.sub(&u211.mode_mult(&bbar[0], 1)?)?;
    let mut u = CoeffTensor3::zeros(dims);
    for (which, block) in [
        (id(2, 2, 2), u222),
        (id(1, 2, 2), &u122),
        (id(2, 1, 2), &u212),
        (id(2, 2, 1), &u221),
        (id(1, 1, 2), &u112),
        (id(1, 2, 1), &u121),
        (id(2, 1, 1), &u211),
        (id(1, 1, 1), &u111),
    ] {
        u.insert_block(&split, which, block)?;
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero(_: f64, _: f64, _: f64) -> Result<f64> {
        Ok(0.0)
    }

    #[test]
    fn dirichlet_rows() {
        let r = dirichlet(1, 1.0, &zero, [3, 2, 2]).unwrap();
        assert_eq!(r.b, vec![1.0; 4]);
        let r = dirichlet(1, -1.0, &zero, [3, 2, 2]).unwrap();
        assert_eq!(r.b, vec![1.0, -1.0, 1.0, -1.0]);
        let r = dirichlet(1, 1.0, &|_, y, z| Ok(y * z), [3, 2, 2]).unwrap();
        assert_eq!(r.g.dims(), [1, 3, 3]);
        for (l, v) in r.g.as_slice().iter().enumerate() {
            let e = if l == 4 { 1.0 } else { 0.0 };
            assert!((v - e).abs() < 1e-15);
        }
    }

    #[test]
    fn neumann_rows() {
        assert_eq!(
            neumann(2, 1.0, &zero, [3, 4, 3]).unwrap().b,
            vec![0.0, 1.0, 4.0, 9.0, 16.0]
        );
        let r = neumann(1, -1.0, &zero, [3, 3, 3]).unwrap();
        assert_eq!(r.b, vec![0.0, 1.0, -4.0, 9.0]);
        assert!(r.g.as_slice().iter().all(|v| *v == 0.0));
    }

    fn zero_dirichlet_set(n: usize) -> BoundarySet {
        let deg = [n; 3];
        let mut rows = Vec::new();
        for m in 1..=3 {
            for s in [1.0, -1.0] {
                rows.push(dirichlet(m, s, &zero, deg).unwrap());
            }
        }
        assemble_boundary_set(rows, [2, 2, 2], deg).unwrap()
    }

    #[test]
    fn stacked_zero_dirichlet() {
        let set = zero_dirichlet_set(5);
        let expected = DenseMatrix::from_rows(&[vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0], vec![1.0; 6]]);
        for op in &set.ops {
            assert_eq!(op.b, expected);
            assert!(op.g.as_slice().iter().all(|v| *v == 0.0));
        }
        assert!(set.warnings.is_empty());
    }

    #[test]
    fn wrong_row_count_is_config_error() {
        let deg = [3; 3];
        let rows = vec![dirichlet(1, 1.0, &zero, deg).unwrap()];
        assert!(matches!(
            assemble_boundary_set(rows, [2, 2, 2], deg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn normalize_two_sided_dirichlet() {
        let set = normalize_leading_identity(&zero_dirichlet_set(3)).unwrap();
        let expected = DenseMatrix::from_rows(&[vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]]);
        for op in &set.ops {
            assert_eq!(op.b, expected);
        }
        let again = normalize_leading_identity(&set).unwrap();
        assert_eq!(again.ops[0].b, set.ops[0].b);
    }

    #[test]
    fn incompatible_edges_warn() {
        let deg = [3; 3];
        let mut rows = Vec::new();
        for m in 1..=3 {
            for s in [1.0, -1.0] {
                let data: &dyn Fn(f64, f64, f64) -> Result<f64> =
                    if m == 1 && s > 0.0 { &|_, _, _| Ok(1.0) } else { &zero };
                rows.push(dirichlet(m, s, data, deg).unwrap());
            }
        }
        let set = assemble_boundary_set(rows, [2, 2, 2], deg).unwrap();
        assert_eq!(set.warnings.len(), 1);
        assert!(compatibility_mismatch(&set).unwrap() > 0.5);
    }

    #[test]
    fn reconstruct_zero() {
        let set = normalize_leading_identity(&zero_dirichlet_set(4)).unwrap();
        let u = reconstruct(&CoeffTensor3::zeros([3, 3, 3]), &set).unwrap();
        assert_eq!(u.dims(), [5, 5, 5]);
        assert!(u.as_slice().iter().all(|v| *v == 0.0));
    }
}
