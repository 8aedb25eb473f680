//! Discretization of linear differential operators with the ultraspherical
//! method.
//!
//! An operator `sum alpha_abc d^a/dx^a d^b/dy^b d^c/dz^c` is split into a sum
//! of `R` tensor products of one-dimensional operators. Each one-dimensional
//! factor is stored as a coefficient matrix whose row `a` holds the Chebyshev
//! coefficients of the function multiplying the `a`-th derivative; a constant
//! factor is a single column.

use std::collections::BTreeMap;

use crate::cheb::{
    conv_chain, conv_matrix, diff_matrix, inner_product_3d, mult_matrix_cheb, mult_matrix_ultra, try_cheb_interp_1d,
    try_cheb_interp_3d, ChebCoeffs1D, UltraCoeffs1D,
};
use crate::cp::{cp_decompose, CpOptions};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::matrix::DenseMatrix;
use crate::tensor3::CoeffTensor3;

#[derive(Clone, Debug)]
pub enum Coeff {
    Const(f64),
    Expr(Expr),
}

impl Coeff {
    pub fn eval(&self, x: f64, y: f64, z: f64) -> Result<f64> {
        match self {
            Coeff::Const(c) => Ok(*c),
            Coeff::Expr(e) => e.eval(x, y, z),
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Coeff::Const(c) => Some(*c),
            Coeff::Expr(e) => e.constant_value(),
        }
    }

    pub fn vars_used(&self) -> [bool; 3] {
        match self {
            Coeff::Const(_) => [false; 3],
            Coeff::Expr(e) if e.constant_value().is_some() => [false; 3],
            Coeff::Expr(e) => e.vars_used(),
        }
    }

    fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }
}

impl From<f64> for Coeff {
    fn from(c: f64) -> Self {
        Coeff::Const(c)
    }
}

impl From<Expr> for Coeff {
    fn from(e: Expr) -> Self {
        Coeff::Expr(e)
    }
}

/// `sum alpha_abc(x, y, z) d^a/dx^a d^b/dy^b d^c/dz^c`.
#[derive(Clone, Debug)]
pub struct DiffOperator3 {
    orders: [usize; 3],
    coeffs: BTreeMap<[usize; 3], Coeff>,
}

impl DiffOperator3 {
    pub fn new(orders: [usize; 3]) -> Self {
        DiffOperator3 {
            orders,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, idx: [usize; 3], c: impl Into<Coeff>) -> Result<()> {
        if (0..3).any(|m| idx[m] > self.orders[m]) {
            return Err(Error::Input(format!(
                "derivative index {idx:?} exceeds operator orders {:?}",
                self.orders
            )));
        }
        let c = c.into();
        if c.is_zero() {
            self.coeffs.remove(&idx);
        } else {
            self.coeffs.insert(idx, c);
        }
        Ok(())
    }

    pub fn with(mut self, idx: [usize; 3], c: impl Into<Coeff>) -> Result<Self> {
        self.set(idx, c)?;
        Ok(self)
    }

    /// `d2/dx2 + d2/dy2 + d2/dz2`
    pub fn laplacian() -> Self {
        let mut op = DiffOperator3::new([2, 2, 2]);
        for idx in [[2, 0, 0], [0, 2, 0], [0, 0, 2]] {
            op.coeffs.insert(idx, Coeff::Const(1.0));
        }
        op
    }

    pub fn orders(&self) -> [usize; 3] {
        self.orders
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&[usize; 3], &Coeff)> {
        self.coeffs.iter()
    }

    pub fn coeff(&self, idx: [usize; 3]) -> Option<&Coeff> {
        self.coeffs.get(&idx)
    }

    /// Removes and returns the coefficient of the undifferentiated term.
    pub fn take_identity_part(&mut self) -> Option<Coeff> {
        self.coeffs.remove(&[0, 0, 0])
    }

    /// Checks that every mode with positive order has a coefficient reaching it.
    pub fn validate(&self) -> Result<()> {
        for m in 0..3 {
            if self.orders[m] > 0 && !self.coeffs.keys().any(|idx| idx[m] == self.orders[m]) {
                return Err(Error::Input(format!(
                    "operator order {} in mode {} is not attained by any coefficient",
                    self.orders[m],
                    m + 1
                )));
            }
        }
        if self.coeffs.is_empty() {
            return Err(Error::Input("operator has no nonzero coefficients".into()));
        }
        Ok(())
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.values().all(|c| c.as_const().is_some())
    }

    pub fn has_mixed(&self) -> bool {
        self.coeffs.keys().any(|idx| idx.iter().filter(|&&a| a > 0).count() > 1)
    }

    /// `c0 * I + s * self`; used for implicit time stepping.
    pub fn shifted_scaled(&self, c0: f64, s: f64) -> Result<Self> {
        let mut out = DiffOperator3::new(self.orders);
        for (idx, c) in &self.coeffs {
            let scaled = match c {
                Coeff::Const(v) => Coeff::Const(s * v),
                Coeff::Expr(e) => match e.constant_value() {
                    Some(v) => Coeff::Const(s * v),
                    None => Coeff::Expr(scale_expr(e, s)),
                },
            };
            out.set(*idx, scaled)?;
        }
        let id = match out.coeffs.remove(&[0, 0, 0]) {
            None => Coeff::Const(c0),
            Some(Coeff::Const(v)) => Coeff::Const(v + c0),
            Some(Coeff::Expr(e)) => Coeff::Expr(add_expr(&e, c0)),
        };
        out.set([0, 0, 0], id)?;
        Ok(out)
    }
}

fn scale_expr(e: &Expr, s: f64) -> Expr {
    use crate::expr::{BinOp, Node};
    Expr {
        node: Node::Binary(BinOp::Mul, Box::new(Expr::constant(s)), Box::new(e.clone())),
        offset: e.offset,
    }
}

fn add_expr(e: &Expr, c: f64) -> Expr {
    use crate::expr::{BinOp, Node};
    Expr {
        node: Node::Binary(BinOp::Add, Box::new(e.clone()), Box::new(Expr::constant(c))),
        offset: e.offset,
    }
}

/// Coefficient tensor of the operator. With coefficient degrees `p` the
/// order-6 tensor is stored with fused indices `a * (p_x + 1) + i` (derivative
/// order slowest); `p = [0, 0, 0]` gives the plain tensor of constants.
pub fn build_coeff_tensor(op: &DiffOperator3, p: [usize; 3]) -> Result<CoeffTensor3> {
    let n = op.orders;
    let dims: [usize; 3] = std::array::from_fn(|m| (n[m] + 1) * (p[m] + 1));
    let mut t = CoeffTensor3::zeros(dims);
    for (idx, c) in &op.coeffs {
        let origin: [usize; 3] = std::array::from_fn(|m| idx[m] * (p[m] + 1));
        let block = match c.as_const() {
            Some(v) => {
                let mut b = CoeffTensor3::zeros([p[0] + 1, p[1] + 1, p[2] + 1]);
                b.set(0, 0, 0, v);
                b
            }
            None => try_cheb_interp_3d(|x, y, z| c.eval(x, y, z), p)?,
        };
        t.assign_slice(origin, &block)?;
    }
    Ok(t)
}

/// One-dimensional factors of a rank-`R` splitting. `terms[r][m]` has shape
/// `(N_m + 1) x (p_m + 1)`; row `a` holds the Chebyshev coefficients of the
/// function multiplying the `a`-th derivative.
#[derive(Clone, Debug)]
pub struct OperatorSplit {
    pub orders: [usize; 3],
    pub terms: Vec<[DenseMatrix; 3]>,
    /// Rank-3 structure where term `m` is the identity in the other modes.
    pub laplace_like: bool,
    pub cp_error: Option<f64>,
    pub regularized: bool,
}

impl OperatorSplit {
    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    /// Reshapes CP factors of a fused coefficient tensor.
    pub fn from_cp(orders: [usize; 3], p: [usize; 3], cp: &crate::cp::CpFactors) -> Self {
        let terms = cp
            .factors
            .iter()
            .map(|f| {
                std::array::from_fn(|m| DenseMatrix::from_fn(orders[m] + 1, p[m] + 1, |a, i| f[m][a * (p[m] + 1) + i]))
            })
            .collect();
        OperatorSplit {
            orders,
            terms,
            laplace_like: false,
            cp_error: Some(cp.error),
            regularized: cp.regularized,
        }
    }

    /// Concatenates two splittings of operators with equal orders.
    pub fn sum(mut self, other: OperatorSplit) -> Result<Self> {
        if self.orders != other.orders {
            return Err(Error::Input(format!(
                "cannot add splittings with orders {:?} and {:?}",
                self.orders, other.orders
            )));
        }
        self.terms.extend(other.terms);
        self.laplace_like = false;
        self.cp_error = match (self.cp_error, other.cp_error) {
            (Some(a), Some(b)) => Some(a + b),
            (a, b) => a.or(b),
        };
        self.regularized |= other.regularized;
        Ok(self)
    }
}

fn identity_factor(order: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(order + 1, 1);
    m[(0, 0)] = 1.0;
    m
}

fn univariate(c: &Coeff, mode: usize, degree: usize) -> Result<ChebCoeffs1D> {
    if let Some(v) = c.as_const() {
        return Ok(ChebCoeffs1D::constant(v));
    }
    try_cheb_interp_1d(
        |s| {
            let mut pt = [0.0; 3];
            pt[mode] = s;
            c.eval(pt[0], pt[1], pt[2])
        },
        degree,
    )
}

/// Rank-3 splitting for operators without mixed derivatives whose
/// coefficients depend only on their own mode's variable. Non-constant
/// coefficients are interpolated at the degrees `n`.
pub fn closed_form_split(op: &DiffOperator3, n: [usize; 3]) -> Result<OperatorSplit> {
    if op.has_mixed() {
        return Err(Error::NotSeparable("operator has mixed derivatives".into()));
    }
    // mode each coefficient belongs to
    let mut owner: BTreeMap<[usize; 3], usize> = BTreeMap::new();
    for (idx, c) in &op.coeffs {
        let used = c.vars_used();
        let mode = match idx.iter().position(|&a| a > 0) {
            Some(m) => m,
            None => match used.iter().filter(|&&u| u).count() {
                0 => 0,
                1 => used.iter().position(|&u| u).expect("one variable"),
                _ => {
                    return Err(Error::NotSeparable(
                        "undifferentiated coefficient depends on several variables".into(),
                    ))
                }
            },
        };
        if (0..3).any(|v| v != mode && used[v]) {
            return Err(Error::NotSeparable(format!(
                "coefficient of derivative {idx:?} depends on a variable of another mode"
            )));
        }
        owner.insert(*idx, mode);
    }
    let orders = op.orders;
    let terms = (0..3)
        .map(|mode| -> Result<[DenseMatrix; 3]> {
            let mine: Vec<_> = op.coeffs.iter().filter(|(idx, _)| owner[*idx] == mode).collect();
            let p = if mine.iter().all(|(_, c)| c.as_const().is_some()) {
                0
            } else {
                n[mode]
            };
            let mut f = DenseMatrix::zeros(orders[mode] + 1, p + 1);
            for (idx, c) in mine {
                let a = idx[mode];
                let coeffs = univariate(c, mode, p)?;
                for (i, v) in coeffs.coeffs.iter().enumerate().take(p + 1) {
                    f[(a, i)] = *v;
                }
            }
            Ok(std::array::from_fn(|m| {
                if m == mode {
                    f.clone()
                } else {
                    identity_factor(orders[m])
                }
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OperatorSplit {
        orders,
        terms,
        laplace_like: true,
        cp_error: None,
        regularized: false,
    })
}

/// Exact splitting of a constant-coefficient operator with one rank-1 term
/// per nonzero coefficient.
pub fn trivial_split(op: &DiffOperator3) -> Result<OperatorSplit> {
    let orders = op.orders;
    let terms = op
        .coeffs
        .iter()
        .map(|(idx, c)| {
            let v = c
                .as_const()
                .ok_or_else(|| Error::Input("trivial split needs constant coefficients".into()))?;
            Ok(std::array::from_fn(|m| {
                let mut f = DenseMatrix::zeros(orders[m] + 1, 1);
                f[(idx[m], 0)] = if m == 0 { v } else { 1.0 };
                f
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OperatorSplit {
        orders,
        terms,
        laplace_like: false,
        cp_error: None,
        regularized: false,
    })
}

/// One-dimensional operator
/// `M^(N)[a_N] D_N + S_{N-1} M^(N-1)[a_{N-1}] D_{N-1} + ... + S_{N-1}...S_0 M[a_0]`
/// at degree `n`. Row `a` of `coeffs` holds the Chebyshev coefficients of
/// `a_a`; they are converted to `C^(a)` internally. The output basis is
/// `C^(N)` with `N = coeffs.rows() - 1`.
pub fn assemble_l_1d(coeffs: &DenseMatrix, n: usize) -> DenseMatrix {
    let order = coeffs.rows() - 1;
    let p = coeffs.cols() - 1;
    let mut out = DenseMatrix::zeros(n + 1, n + 1);
    for a in 0..=order {
        let row = coeffs.row(a);
        if row.iter().all(|v| *v == 0.0) {
            continue;
        }
        let mult = if row[1..].iter().all(|v| *v == 0.0) {
            DenseMatrix::identity(n + 1).scaled(row[0])
        } else if a == 0 {
            mult_matrix_cheb(&ChebCoeffs1D { coeffs: row }, n)
        } else {
            let c = conv_chain(0, a, p).matvec(&row).expect("square chain");
            mult_matrix_ultra(&UltraCoeffs1D { lambda: a, coeffs: c }, n)
        };
        let term = mult.matmul(&diff_matrix(a, n)).expect("square");
        let term = if a < order {
            conv_chain(a, order, n).matmul(&term).expect("square")
        } else {
            term
        };
        out.axpy(1.0, &term).expect("same shape");
    }
    out
}

/// `sum_r L_r^(x) (x) L_r^(y) (x) L_r^(z)` acting on Chebyshev coefficients of
/// degrees `degrees`, with outputs in `C^(N_x) (x) C^(N_y) (x) C^(N_z)`.
#[derive(Clone, Debug)]
pub struct DiscretizedOperator {
    pub degrees: [usize; 3],
    pub orders: [usize; 3],
    pub terms: Vec<[DenseMatrix; 3]>,
    pub laplace_like: bool,
    pub cp_error: Option<f64>,
    pub regularized: bool,
}

impl DiscretizedOperator {
    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    pub fn dims(&self) -> [usize; 3] {
        self.degrees.map(|d| d + 1)
    }

    pub fn apply(&self, u: &CoeffTensor3) -> Result<CoeffTensor3> {
        apply_operator(self, u)
    }

    /// Chebyshev-to-output-basis conversion for each mode.
    pub fn output_conversions(&self) -> [DenseMatrix; 3] {
        std::array::from_fn(|m| conv_chain(0, self.orders[m], self.degrees[m]))
    }

    /// Converts Chebyshev coefficients to the output basis.
    pub fn to_output_basis(&self, f: &CoeffTensor3) -> Result<CoeffTensor3> {
        let [a, b, c] = self.output_conversions();
        f.multilinear(&a, &b, &c)
    }

    pub fn sum(mut self, other: DiscretizedOperator) -> Result<Self> {
        if self.orders != other.orders || self.degrees != other.degrees {
            return Err(Error::Input(format!(
                "cannot add discretizations with orders/degrees {:?}/{:?} and {:?}/{:?}",
                self.orders, self.degrees, other.orders, other.degrees
            )));
        }
        self.terms.extend(other.terms);
        self.laplace_like = false;
        self.cp_error = match (self.cp_error, other.cp_error) {
            (Some(a), Some(b)) => Some(a + b),
            (a, b) => a.or(b),
        };
        self.regularized |= other.regularized;
        Ok(self)
    }
}

pub fn discretize(split: &OperatorSplit, degrees: [usize; 3]) -> Result<DiscretizedOperator> {
    for m in 0..3 {
        if degrees[m] < split.orders[m] {
            return Err(Error::Input(format!(
                "degree {} in mode {} is below the operator order {}",
                degrees[m],
                m + 1,
                split.orders[m]
            )));
        }
    }
    let terms = split
        .terms
        .iter()
        .map(|t| std::array::from_fn(|m| assemble_l_1d(&t[m], degrees[m])))
        .collect();
    Ok(DiscretizedOperator {
        degrees,
        orders: split.orders,
        terms,
        laplace_like: split.laplace_like && split.rank() == 3,
        cp_error: split.cp_error,
        regularized: split.regularized,
    })
}

pub fn apply_operator(d: &DiscretizedOperator, u: &CoeffTensor3) -> Result<CoeffTensor3> {
    if u.dims() != d.dims() {
        return Err(Error::shape(
            "apply_operator tensor size",
            d.dims().iter().product(),
            u.len(),
        ));
    }
    let mut out = CoeffTensor3::zeros(d.dims());
    for [a, b, c] in &d.terms {
        out.axpy(1.0, &u.multilinear(a, b, c)?)?;
    }
    Ok(out)
}

/// Discretization strategy knobs.
#[derive(Clone, Copy, Debug)]
pub struct DiscOptions {
    /// CP rank for coefficient tensors without a closed-form splitting.
    pub cp_rank: Option<usize>,
    pub cp: CpOptions,
    /// Discretize the derivative part exactly and decompose only the
    /// undifferentiated coefficient.
    pub split_identity: bool,
}

impl Default for DiscOptions {
    fn default() -> Self {
        DiscOptions {
            cp_rank: None,
            cp: CpOptions::default(),
            split_identity: true,
        }
    }
}

/// Picks a splitting: closed form when separable, otherwise the
/// split-identity scheme or a CP decomposition of the full coefficient tensor.
pub fn split_operator(op: &DiffOperator3, degrees: [usize; 3], opts: &DiscOptions) -> Result<OperatorSplit> {
    op.validate()?;
    match closed_form_split(op, degrees) {
        Ok(s) => return Ok(s),
        Err(Error::NotSeparable(_)) => {}
        Err(e) => return Err(e),
    }
    let derivative_part_constant = op
        .coeffs
        .iter()
        .all(|(idx, c)| *idx == [0, 0, 0] || c.as_const().is_some());
    if op.is_constant() {
        return trivial_split(op);
    }
    let rank = opts
        .cp_rank
        .ok_or_else(|| Error::NotSeparable("no closed-form splitting; a CP rank is required".into()))?;
    if opts.split_identity && derivative_part_constant {
        let mut deriv = op.clone();
        let id = deriv.take_identity_part().expect("non-constant identity part");
        let deriv_split = match closed_form_split(&deriv, degrees) {
            Ok(s) => s,
            Err(Error::NotSeparable(_)) => trivial_split(&deriv)?,
            Err(e) => return Err(e),
        };
        let t = try_cheb_interp_3d(|x, y, z| id.eval(x, y, z), degrees)?;
        let cp = cp_decompose(&t, rank, &opts.cp)?;
        let mult = OperatorSplit::from_cp([0, 0, 0], degrees, &cp);
        // lift the undifferentiated factors to the operator's orders
        let lifted = OperatorSplit {
            orders: op.orders,
            terms: mult
                .terms
                .into_iter()
                .map(|t| {
                    std::array::from_fn(|m| {
                        let mut f = DenseMatrix::zeros(op.orders[m] + 1, t[m].cols());
                        f.set_submatrix(0, 0, &t[m]);
                        f
                    })
                })
                .collect(),
            ..mult
        };
        return deriv_split.sum(lifted);
    }
    let t = build_coeff_tensor(op, degrees)?;
    let cp = cp_decompose(&t, rank, &opts.cp)?;
    Ok(OperatorSplit::from_cp(op.orders, degrees, &cp))
}

pub fn discretize_operator(op: &DiffOperator3, degrees: [usize; 3], opts: &DiscOptions) -> Result<DiscretizedOperator> {
    discretize(&split_operator(op, degrees, opts)?, degrees)
}

/// Solves `S_0 x = y` by back substitution on the banded upper-triangular
/// conversion matrix, column by column.
fn s0_solve(y: &DenseMatrix) -> DenseMatrix {
    let n = y.rows() - 1;
    let mut x = y.clone();
    for c in 0..y.cols() {
        let col = x.col_mut(c);
        for k in (0..=n).rev() {
            let diag = if k == 0 { 1.0 } else { 0.5 };
            let upper = if k + 2 <= n { -0.5 * col[k + 2] } else { 0.0 };
            col[k] = (col[k] - upper) / diag;
        }
    }
    x
}

/// `-div(a1(x) a2(y) a3(z) grad u)` as a rank-3 Laplace-like discretization.
/// Each factor function is interpolated at its mode's degree.
pub fn discretize_separable_diffusion(a: [&dyn Fn(f64) -> f64; 3], degrees: [usize; 3]) -> Result<DiscretizedOperator> {
    let coeffs: Vec<ChebCoeffs1D> = (0..3)
        .map(|m| try_cheb_interp_1d(|s| Ok(a[m](s)), degrees[m]))
        .collect::<Result<_>>()?;
    let mut diffusion = Vec::with_capacity(3);
    let mut weight = Vec::with_capacity(3);
    for m in 0..3 {
        let n = degrees[m];
        if n < 2 {
            return Err(Error::Input("diffusion needs degree at least 2 per mode".into()));
        }
        let s0 = conv_matrix(0, n);
        let s1 = conv_matrix(1, n);
        let d1 = diff_matrix(1, n);
        let s10 = s1.matmul(&s0)?;
        let c = &coeffs[m];
        // a u' in C^(1), back to Chebyshev, differentiate, convert to C^(2)
        let a1 = UltraCoeffs1D {
            lambda: 1,
            coeffs: conv_chain(0, 1, c.degree()).matvec(&c.coeffs)?,
        };
        let flux = mult_matrix_ultra(&a1, n).matmul(&d1)?;
        let flux_cheb = s0_solve(&flux);
        let l = s1.matmul(&d1.matmul(&flux_cheb)?)?.scaled(-1.0);
        let a2 = UltraCoeffs1D {
            lambda: 2,
            coeffs: conv_chain(0, 2, c.degree()).matvec(&c.coeffs)?,
        };
        let w = mult_matrix_ultra(&a2, n).matmul(&s10)?;
        diffusion.push(l);
        weight.push(w);
    }
    let terms = (0..3)
        .map(|r| {
            std::array::from_fn(|m| {
                if m == r {
                    diffusion[m].clone()
                } else {
                    weight[m].clone()
                }
            })
        })
        .collect();
    Ok(DiscretizedOperator {
        degrees,
        orders: [2, 2, 2],
        terms,
        laplace_like: true,
        cp_error: None,
        regularized: false,
    })
}

/// Root mean square of a coefficient over the cube, `sqrt(<a, a> / 8)`,
/// signed by its mean.
pub fn rms_coefficient(c: &Coeff, degrees: [usize; 3]) -> Result<f64> {
    if let Some(v) = c.as_const() {
        return Ok(v);
    }
    let t = try_cheb_interp_3d(|x, y, z| c.eval(x, y, z), degrees)?;
    let rms = (inner_product_3d(&t, &t)? / 8.0).sqrt();
    let mean = crate::cheb::cheb_integral_3d(&t);
    Ok(if mean < 0.0 { -rms } else { rms })
}

/// Constant-coefficient operator without mixed derivatives, used as a
/// preconditioning surrogate: mixed terms are dropped and variable
/// coefficients are replaced by their root mean square.
pub fn surrogate_operator(op: &DiffOperator3, degrees: [usize; 3]) -> Result<DiffOperator3> {
    let mut out = DiffOperator3::new(op.orders);
    for (idx, c) in &op.coeffs {
        if idx.iter().filter(|&&a| a > 0).count() > 1 {
            continue;
        }
        out.set(*idx, rms_coefficient(c, degrees)?)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheb::eval_ultra;

    #[test]
    fn laplacian_constant_tensor() {
        let t = build_coeff_tensor(&DiffOperator3::laplacian(), [0, 0, 0]).unwrap();
        assert_eq!(t.dims(), [3, 3, 3]);
        let nz: Vec<_> = (0..27).filter(|&l| t.as_slice()[l] != 0.0).collect();
        assert_eq!(nz, vec![2, 6, 18]);
    }

    #[test]
    fn helmholtz_constant_tensor() {
        let op = DiffOperator3::laplacian().with([0, 0, 0], 4.0).unwrap();
        let t = build_coeff_tensor(&op, [0, 0, 0]).unwrap();
        assert_eq!(t.get(0, 0, 0), 4.0);
        assert_eq!(t.get(2, 0, 0), 1.0);
        let s = closed_form_split(&op, [6, 6, 6]).unwrap();
        assert_eq!(s.terms[0][0].as_slice(), &[4.0, 0.0, 1.0]);
        assert_eq!(s.terms[0][1].as_slice(), &[1.0, 0.0, 0.0]);
        assert!(s.laplace_like);
    }

    #[test]
    fn x_coefficient_fused_tensor() {
        let op = DiffOperator3::new([0, 0, 0])
            .with([0, 0, 0], crate::expr::parse("x").unwrap())
            .unwrap();
        let t = build_coeff_tensor(&op, [1, 0, 0]).unwrap();
        assert_eq!(t.dims(), [2, 1, 1]);
        assert!(t.get(0, 0, 0).abs() < 1e-15 && (t.get(1, 0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn l1d_matches_differentiation_matrices() {
        let d1 = assemble_l_1d(&DenseMatrix::from_rows(&[vec![0.0], vec![1.0]]), 3);
        assert_eq!(d1, diff_matrix(1, 3));
        let d2 = assemble_l_1d(&DenseMatrix::from_rows(&[vec![0.0], vec![0.0], vec![1.0]]), 4);
        assert_eq!(d2[(0, 2)], 4.0);
        assert_eq!(d2[(1, 3)], 6.0);
        assert_eq!(d2[(2, 4)], 8.0);
    }

    #[test]
    fn l1d_helmholtz_on_t3() {
        let k2 = 2.5;
        let l = assemble_l_1d(&DenseMatrix::from_rows(&[vec![k2], vec![0.0], vec![1.0]]), 8);
        let mut u = vec![0.0; 9];
        u[3] = 1.0;
        let v = l.matvec(&u).unwrap();
        for i in 0..30 {
            let x = -1.0 + 2.0 * i as f64 / 29.0;
            let exact = 24.0 * x + k2 * (4.0 * x * x * x - 3.0 * x);
            assert!((eval_ultra(2, &v, x) - exact).abs() < 1e-11);
        }
    }

    #[test]
    fn unit_diffusion_is_negative_laplacian() {
        let one = |_: f64| 1.0;
        let d = discretize_separable_diffusion([&one, &one, &one], [4, 4, 4]).unwrap();
        let mut u = CoeffTensor3::zeros([5, 5, 5]);
        u.set(2, 0, 0, 1.0);
        let v = d.apply(&u).unwrap();
        let x = 0.3;
        let val = crate::cheb::eval_ultra_3d(&v, [2, 2, 2], x, -0.2, 0.5);
        assert!((val + 4.0).abs() < 1e-12, "{val}");
    }

    #[test]
    fn mixed_operator_not_separable() {
        let op = DiffOperator3::laplacian().with([1, 1, 0], 1.0).unwrap();
        assert!(matches!(closed_form_split(&op, [4, 4, 4]), Err(Error::NotSeparable(_))));
        let s = trivial_split(&op).unwrap();
        assert_eq!(s.rank(), 4);
    }

    #[test]
    fn orders_must_be_attained() {
        let op = DiffOperator3::new([2, 2, 2]).with([1, 0, 0], 1.0).unwrap();
        assert!(op.validate().is_err());
    }
}
