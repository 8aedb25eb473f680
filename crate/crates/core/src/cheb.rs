//! Chebyshev and ultraspherical basis machinery.
//!
//! Solutions live in the Chebyshev basis `T_k`; operator outputs live in the
//! ultraspherical basis `C^(lambda)_k`, where differentiation is sparse.
//! All coefficient vectors are indexed from 0.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::tensor3::CoeffTensor3;

/// Chebyshev coefficients `c_0 .. c_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebCoeffs1D {
    pub coeffs: Vec<f64>,
}

impl ChebCoeffs1D {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Input("Chebyshev series needs at least one coefficient".into()));
        }
        Ok(ChebCoeffs1D { coeffs })
    }

    pub fn constant(c: f64) -> Self {
        ChebCoeffs1D { coeffs: vec![c] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Clenshaw evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        clenshaw(&self.coeffs, x)
    }

    /// Coefficients zero-padded or truncated to degree `n`.
    pub fn resized(&self, n: usize) -> Vec<f64> {
        let mut c = self.coeffs.clone();
        c.resize(n + 1, 0.0);
        c
    }

    /// Converts to the `C^(lambda)` basis by applying `S_{lambda-1} ... S_0`.
    pub fn to_ultra(&self, lambda: usize) -> UltraCoeffs1D {
        let n = self.degree();
        let c = if lambda == 0 {
            self.coeffs.clone()
        } else {
            conv_chain(0, lambda, n).matvec(&self.coeffs).expect("square chain")
        };
        UltraCoeffs1D { lambda, coeffs: c }
    }
}

/// Coefficients in the `C^(lambda)` basis. `lambda == 0` denotes Chebyshev.
#[derive(Clone, Debug, PartialEq)]
pub struct UltraCoeffs1D {
    pub lambda: usize,
    pub coeffs: Vec<f64>,
}

impl UltraCoeffs1D {
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.lambda == 0 {
            clenshaw(&self.coeffs, x)
        } else {
            ultra_basis(self.lambda, self.degree(), x)
                .iter()
                .zip(&self.coeffs)
                .map(|(b, c)| b * c)
                .sum()
        }
    }
}

/// `cos(pi * num / den)` with the argument reduced exactly.
fn cos_pi_frac(num: usize, den: usize) -> f64 {
    let r = num % (2 * den);
    (PI * r as f64 / den as f64).cos()
}

/// Chebyshev points of the second kind `cos(j pi / n)`, `j = 0..n`, ordered
/// from `+1` to `-1`. For `n == 0` the single point is `0`.
pub fn cheb_points(n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![0.0];
    }
    // sin form keeps the set exactly symmetric
    (0..=n)
        .map(|j| (PI * (n as f64 - 2.0 * j as f64) / (2.0 * n as f64)).sin())
        .collect()
}

/// Matrix mapping samples at `cheb_points(n)` to Chebyshev coefficients.
pub fn values_to_coeffs_matrix(n: usize) -> DenseMatrix {
    if n == 0 {
        return DenseMatrix::identity(1);
    }
    let nf = n as f64;
    DenseMatrix::from_fn(n + 1, n + 1, |k, j| {
        let wj = if j == 0 || j == n { 0.5 } else { 1.0 };
        let wk = if k == 0 || k == n { 0.5 } else { 1.0 };
        2.0 / nf * wj * wk * cos_pi_frac(j * k, n)
    })
}

/// Matrix `E` with `E[j, k] = T_k(x_j)` for the degree-`m` point set and
/// coefficient degree `n`.
pub fn coeffs_to_values_matrix(m: usize, n: usize) -> DenseMatrix {
    if m == 0 {
        return DenseMatrix::from_fn(1, n + 1, |_, k| cheb_basis_at_zero(k));
    }
    DenseMatrix::from_fn(m + 1, n + 1, |j, k| cos_pi_frac(j * k, m))
}

fn cheb_basis_at_zero(k: usize) -> f64 {
    match k % 4 {
        0 => 1.0,
        2 => -1.0,
        _ => 0.0,
    }
}

fn check_sample(v: f64, at: &dyn Fn() -> String) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Input(format!("non-finite sample {v} at {}", at())))
    }
}

/// Degree-`n` interpolant of `f` at the Chebyshev points.
pub fn cheb_interp_1d(f: impl Fn(f64) -> f64, n: usize) -> Result<ChebCoeffs1D> {
    let pts = cheb_points(n);
    let vals = pts
        .iter()
        .map(|&x| check_sample(f(x), &|| format!("x = {x}")))
        .collect::<Result<Vec<_>>>()?;
    let c = values_to_coeffs_matrix(n).matvec(&vals)?;
    ChebCoeffs1D::new(c)
}

/// Fallible variant of [`cheb_interp_1d`].
pub fn try_cheb_interp_1d(f: impl Fn(f64) -> Result<f64>, n: usize) -> Result<ChebCoeffs1D> {
    let pts = cheb_points(n);
    let vals = pts
        .iter()
        .map(|&x| f(x).and_then(|v| check_sample(v, &|| format!("x = {x}"))))
        .collect::<Result<Vec<_>>>()?;
    ChebCoeffs1D::new(values_to_coeffs_matrix(n).matvec(&vals)?)
}

/// Tensorized interpolation on the grid of degrees `n`.
pub fn cheb_interp_3d(f: impl Fn(f64, f64, f64) -> f64, n: [usize; 3]) -> Result<CoeffTensor3> {
    try_cheb_interp_3d(|x, y, z| Ok(f(x, y, z)), n)
}

/// Fallible variant of [`cheb_interp_3d`].
pub fn try_cheb_interp_3d(f: impl Fn(f64, f64, f64) -> Result<f64>, n: [usize; 3]) -> Result<CoeffTensor3> {
    let px = cheb_points(n[0]);
    let py = cheb_points(n[1]);
    let pz = cheb_points(n[2]);
    let dims = [n[0] + 1, n[1] + 1, n[2] + 1];
    let mut vals = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
    for &z in &pz {
        for &y in &py {
            for &x in &px {
                let v = f(x, y, z)?;
                vals.push(check_sample(v, &|| format!("(x, y, z) = ({x}, {y}, {z})"))?);
            }
        }
    }
    values_to_coeffs_3d(&CoeffTensor3::from_vec(dims, vals)?)
}

/// Tensorized transform from grid samples to coefficients.
pub fn values_to_coeffs_3d(vals: &CoeffTensor3) -> Result<CoeffTensor3> {
    let d = vals.dims();
    vals.multilinear(
        &values_to_coeffs_matrix(d[0] - 1),
        &values_to_coeffs_matrix(d[1] - 1),
        &values_to_coeffs_matrix(d[2] - 1),
    )
}

/// Samples of the coefficient tensor on the Chebyshev grid of degrees `m`.
pub fn coeffs_to_values_3d(u: &CoeffTensor3, m: [usize; 3]) -> Result<CoeffTensor3> {
    let d = u.dims();
    u.multilinear(
        &coeffs_to_values_matrix(m[0], d[0] - 1),
        &coeffs_to_values_matrix(m[1], d[1] - 1),
        &coeffs_to_values_matrix(m[2], d[2] - 1),
    )
}

/// Clenshaw evaluation of a Chebyshev series.
pub fn clenshaw(c: &[f64], x: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = ck + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    c.first().copied().unwrap_or(0.0) + x * b1 - b2
}

/// Value of the trivariate Chebyshev series at `(x, y, z)`; points outside the
/// cube are extrapolated.
pub fn eval_cheb_3d(u: &CoeffTensor3, x: f64, y: f64, z: f64) -> f64 {
    let [d1, d2, d3] = u.dims();
    let data = u.as_slice();
    let mut plane = vec![0.0; d2 * d3];
    for (col, out) in plane.iter_mut().enumerate() {
        *out = clenshaw(&data[col * d1..(col + 1) * d1], x);
    }
    let mut line = vec![0.0; d3];
    for (k, out) in line.iter_mut().enumerate() {
        *out = clenshaw(&plane[k * d2..(k + 1) * d2], y);
    }
    clenshaw(&line, z)
}

/// `C^(lambda)_0 .. C^(lambda)_n` at `x` by the three-term recurrence.
pub fn ultra_basis(lambda: usize, n: usize, x: f64) -> Vec<f64> {
    assert!(lambda >= 1, "ultraspherical basis needs lambda >= 1");
    let l = lambda as f64;
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(2.0 * l * x);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = (2.0 * (kf + l) * x * out[k] - (kf + 2.0 * l - 1.0) * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Value of a series in the basis `C^(lambda)` (`lambda == 0`: Chebyshev).
pub fn eval_ultra(lambda: usize, c: &[f64], x: f64) -> f64 {
    if lambda == 0 {
        return clenshaw(c, x);
    }
    if c.is_empty() {
        return 0.0;
    }
    ultra_basis(lambda, c.len() - 1, x)
        .iter()
        .zip(c)
        .map(|(b, v)| b * v)
        .sum()
}

/// Value of a trivariate series whose modes use bases `C^(lambda_m)`.
pub fn eval_ultra_3d(u: &CoeffTensor3, lambdas: [usize; 3], x: f64, y: f64, z: f64) -> f64 {
    let [d1, d2, d3] = u.dims();
    let basis = |lambda: usize, d: usize, t: f64| -> Vec<f64> {
        if d == 0 {
            Vec::new()
        } else if lambda == 0 {
            (0..d).map(|k| (k as f64 * t.clamp(-1.0, 1.0).acos()).cos()).collect()
        } else {
            ultra_basis(lambda, d - 1, t)
        }
    };
    let bx = basis(lambdas[0], d1, x);
    let by = basis(lambdas[1], d2, y);
    let bz = basis(lambdas[2], d3, z);
    let mut s = 0.0;
    for k in 0..d3 {
        for j in 0..d2 {
            let w = by[j] * bz[k];
            let mut inner = 0.0;
            for i in 0..d1 {
                inner += bx[i] * u.get(i, j, k);
            }
            s += w * inner;
        }
    }
    s
}

/// Differentiation matrix `D_lambda` mapping Chebyshev coefficients to the
/// `C^(lambda)` coefficients of the `lambda`-th derivative. For
/// `lambda > n` the matrix is zero.
pub fn diff_matrix(lambda: usize, n: usize) -> DenseMatrix {
    let mut d = DenseMatrix::zeros(n + 1, n + 1);
    if lambda == 0 {
        return DenseMatrix::identity(n + 1);
    }
    if lambda > n {
        return d;
    }
    let mut prefactor = 2f64.powi(lambda as i32 - 1);
    for f in 1..lambda {
        prefactor *= f as f64;
    }
    for k in 0..=n - lambda {
        d[(k, k + lambda)] = prefactor * (k + lambda) as f64;
    }
    d
}

/// Conversion matrix: `S_0` (Chebyshev to `C^(1)`) for `lambda == 0`,
/// otherwise `S_lambda` (`C^(lambda)` to `C^(lambda+1)`).
pub fn conv_matrix(lambda: usize, n: usize) -> DenseMatrix {
    let mut s = DenseMatrix::zeros(n + 1, n + 1);
    if lambda == 0 {
        s[(0, 0)] = 1.0;
        for k in 1..=n {
            s[(k, k)] = 0.5;
        }
        for k in 0..n.saturating_sub(1) {
            s[(k, k + 2)] = -0.5;
        }
    } else {
        let l = lambda as f64;
        for k in 0..=n {
            s[(k, k)] = l / (l + k as f64);
        }
        for k in 0..n.saturating_sub(1) {
            s[(k, k + 2)] = -l / (l + k as f64 + 2.0);
        }
    }
    s
}

/// `S_{to-1} ... S_from`, mapping `C^(from)` to `C^(to)` coefficients
/// (`from == 0` is the Chebyshev basis). Identity when `from == to`.
pub fn conv_chain(from: usize, to: usize, n: usize) -> DenseMatrix {
    assert!(from <= to);
    let mut out = DenseMatrix::identity(n + 1);
    for lambda in from..to {
        out = conv_matrix(lambda, n).matmul(&out).expect("square");
    }
    out
}

/// Chebyshev multiplication matrix `M[v]` at representation degree `n`.
/// Coefficients of `v` beyond degree `n` still contribute through the Hankel
/// part, so the result is the exact truncated product.
pub fn mult_matrix_cheb(v: &ChebCoeffs1D, n: usize) -> DenseMatrix {
    let at = |k: usize| v.coeffs.get(k).copied().unwrap_or(0.0);
    DenseMatrix::from_fn(n + 1, n + 1, |i, j| {
        let toeplitz = if i == j { at(0) } else { 0.5 * at(i.abs_diff(j)) };
        let hankel = if i >= 1 { 0.5 * at(i + j) } else { 0.0 };
        toeplitz + hankel
    })
}

/// Tridiagonal matrix of multiplication by `x` in the `C^(lambda)` basis.
pub fn ultra_x_matrix(lambda: usize, n: usize) -> DenseMatrix {
    let l = lambda as f64;
    let mut m = DenseMatrix::zeros(n + 1, n + 1);
    for r in 0..=n {
        let rf = r as f64;
        if r >= 1 {
            m[(r, r - 1)] = rf / (2.0 * (rf - 1.0 + l));
        }
        if r < n {
            m[(r, r + 1)] = (rf + 2.0 * l) / (2.0 * (rf + 1.0 + l));
        }
    }
    m
}

/// `C^(lambda)` multiplication matrix `sum_i v_i M_i` at representation
/// degree `n`, built by the three-term recurrence in the tridiagonal
/// multiplication-by-`x` matrix. The recurrence runs on a padded size so the
/// leading block is the exact truncated product.
pub fn mult_matrix_ultra(v: &UltraCoeffs1D, n: usize) -> DenseMatrix {
    let lambda = v.lambda;
    if lambda == 0 {
        return mult_matrix_cheb(
            &ChebCoeffs1D {
                coeffs: v.coeffs.clone(),
            },
            n,
        );
    }
    let Some(last) = v.coeffs.iter().rposition(|c| *c != 0.0) else {
        return DenseMatrix::zeros(n + 1, n + 1);
    };
    if last == 0 {
        return DenseMatrix::identity(n + 1).scaled(v.coeffs[0]);
    }
    let l = lambda as f64;
    let work = n + last;
    let size = work + 1;
    let x = ultra_x_matrix(lambda, work);
    // only the first n+1 columns are ever needed
    let cols = n + 1;
    let tri_mul = |m: &DenseMatrix| -> DenseMatrix {
        DenseMatrix::from_fn(size, cols, |r, c| {
            let mut s = 0.0;
            if r >= 1 {
                s += x[(r, r - 1)] * m[(r - 1, c)];
            }
            if r + 1 < size {
                s += x[(r, r + 1)] * m[(r + 1, c)];
            }
            s
        })
    };
    let mut prev = DenseMatrix::from_fn(size, cols, |r, c| if r == c { 1.0 } else { 0.0 });
    let mut out = prev.scaled(v.coeffs[0]);
    let mut cur = x.submatrix(0..size, 0..cols).scaled(2.0 * l);
    out.axpy(v.coeffs[1], &cur).expect("same shape");
    for i in 0..last - 1 {
        let fi = i as f64;
        let mut next = tri_mul(&cur).scaled(2.0 * (fi + l + 1.0));
        next.axpy(-(fi + 2.0 * l), &prev).expect("same shape");
        let next = next.scaled(1.0 / (fi + 2.0));
        if v.coeffs[i + 2] != 0.0 {
            out.axpy(v.coeffs[i + 2], &next).expect("same shape");
        }
        prev = cur;
        cur = next;
    }
    out.submatrix(0..n + 1, 0..n + 1)
}

/// `int_{-1}^{1} T_k(x) dx`.
pub fn cheb_moment(k: usize) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        let kf = k as f64;
        2.0 / (1.0 - kf * kf)
    }
}

/// Exact integral of a Chebyshev series over `[-1, 1]`.
pub fn cheb_integral(u: &ChebCoeffs1D) -> f64 {
    u.coeffs.iter().enumerate().map(|(k, c)| c * cheb_moment(k)).sum()
}

/// Integral of a trivariate Chebyshev series over the cube.
pub fn cheb_integral_3d(u: &CoeffTensor3) -> f64 {
    let [d1, d2, d3] = u.dims();
    let mut s = 0.0;
    for k in (0..d3).step_by(2) {
        for j in (0..d2).step_by(2) {
            let w = cheb_moment(j) * cheb_moment(k);
            for i in (0..d1).step_by(2) {
                s += w * cheb_moment(i) * u.get(i, j, k);
            }
        }
    }
    s
}

/// L2 inner product over the cube of two Chebyshev series, computed by
/// interpolating the pointwise product at the summed degrees and integrating
/// the interpolant exactly.
pub fn inner_product_3d(u: &CoeffTensor3, v: &CoeffTensor3) -> Result<f64> {
    let du = u.dims();
    let dv = v.dims();
    let m: [usize; 3] = std::array::from_fn(|i| du[i] + dv[i] - 2);
    let uv = coeffs_to_values_3d(u, m)?;
    let vv = coeffs_to_values_3d(v, m)?;
    let prod: Vec<f64> = uv.as_slice().iter().zip(vv.as_slice()).map(|(a, b)| a * b).collect();
    let prod = CoeffTensor3::from_vec(uv.dims(), prod)?;
    Ok(cheb_integral_3d(&values_to_coeffs_3d(&prod)?))
}

/// `sqrt(<u, u>)`.
pub fn l2_norm_3d(u: &CoeffTensor3) -> Result<f64> {
    Ok(inner_product_3d(u, u)?.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_small() {
        assert_eq!(cheb_points(0), vec![0.0]);
        assert_eq!(cheb_points(1), vec![1.0, -1.0]);
        let p2 = cheb_points(2);
        assert_eq!(p2, vec![1.0, 0.0, -1.0]);
        let p8 = cheb_points(8);
        for j in 0..=8 {
            assert_eq!(p8[j], -p8[8 - j]);
        }
    }

    #[test]
    fn interp_reproduces_t3() {
        let c = cheb_interp_1d(|x| 4.0 * x * x * x - 3.0 * x, 5).unwrap();
        let expected = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        for (a, b) in c.coeffs.iter().zip(expected) {
            assert!((a - b).abs() < 1e-13, "{:?}", c.coeffs);
        }
    }

    #[test]
    fn interp_x_squared() {
        let c = cheb_interp_1d(|x| x * x, 2).unwrap();
        for (a, b) in c.coeffs.iter().zip([0.5, 0.0, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn interp_exact_at_grid() {
        let f = |x: f64| (3.0 * x).sin() + x.exp();
        let n = 17;
        let c = cheb_interp_1d(f, n).unwrap();
        for x in cheb_points(n) {
            assert!((c.eval(x) - f(x)).abs() < 1e-12 * 4.0);
        }
    }

    #[test]
    fn interp_rejects_non_finite() {
        assert!(matches!(cheb_interp_1d(|x| 1.0 / x, 2), Err(Error::Input(_))));
    }

    #[test]
    fn interp_3d_basis_reproduction() {
        let t = |k: usize, x: f64| (k as f64 * x.acos()).cos();
        let u = cheb_interp_3d(|x, y, z| t(1, x) * t(2, y) * t(3, z), [3, 3, 3]).unwrap();
        for k in 0..4 {
            for j in 0..4 {
                for i in 0..4 {
                    let e = if (i, j, k) == (1, 2, 3) { 1.0 } else { 0.0 };
                    assert!((u.get(i, j, k) - e).abs() < 1e-14);
                }
            }
        }
        let one = cheb_interp_3d(|_, _, _| 1.0, [2, 3, 1]).unwrap();
        assert!((one.get(0, 0, 0) - 1.0).abs() < 1e-15);
        assert!(one.as_slice()[1..].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn eval_3d_simple_coefficients() {
        let mut u = CoeffTensor3::zeros([3, 2, 2]);
        u.set(0, 0, 0, 2.5);
        assert_eq!(eval_cheb_3d(&u, 0.3, -0.2, 0.9), 2.5);
        let mut v = CoeffTensor3::zeros([3, 2, 2]);
        v.set(1, 0, 0, 1.0);
        assert!((eval_cheb_3d(&v, 0.37, -0.2, 0.9) - 0.37).abs() < 1e-16);
    }

    #[test]
    fn diff_matrix_reference_entries() {
        let d1 = diff_matrix(1, 3);
        let mut expected = DenseMatrix::zeros(4, 4);
        expected[(0, 1)] = 1.0;
        expected[(1, 2)] = 2.0;
        expected[(2, 3)] = 3.0;
        assert_eq!(d1, expected);
        let d2 = diff_matrix(2, 3);
        let mut expected = DenseMatrix::zeros(4, 4);
        expected[(0, 2)] = 4.0;
        expected[(1, 3)] = 6.0;
        assert_eq!(d2, expected);
        assert_eq!(diff_matrix(4, 3), DenseMatrix::zeros(4, 4));
    }

    #[test]
    fn conversion_reference_entries() {
        let s0 = conv_matrix(0, 4);
        assert_eq!(s0.row(0), vec![1.0, 0.0, -0.5, 0.0, 0.0]);
        let s1 = conv_matrix(1, 4);
        assert_eq!(s1[(1, 1)], 0.5);
        assert!((s1[(0, 2)] + 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn derivative_identity_integer_check() {
        let n = 20;
        let d = diff_matrix(1, n);
        for k in 1..=n {
            let mut e = vec![0.0; n + 1];
            e[k] = 1.0;
            let out = d.matvec(&e).unwrap();
            for (i, v) in out.iter().enumerate() {
                let expected = if i == k - 1 { k as f64 } else { 0.0 };
                assert_eq!(*v, expected);
            }
        }
    }

    #[test]
    fn chebyshev_multiplication_t1_t1() {
        let v = ChebCoeffs1D::new(vec![0.0, 1.0]).unwrap();
        let m = mult_matrix_cheb(&v, 3);
        let out = m.matvec(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(out, vec![0.5, 0.0, 0.5, 0.0]);
        let id = mult_matrix_cheb(&ChebCoeffs1D::constant(1.0), 5);
        assert_eq!(id, DenseMatrix::identity(6));
    }

    #[test]
    fn ultra_multiplication_reference_entries() {
        let id = mult_matrix_ultra(
            &UltraCoeffs1D {
                lambda: 3,
                coeffs: vec![1.0],
            },
            4,
        );
        assert_eq!(id, DenseMatrix::identity(5));
        let m = mult_matrix_ultra(
            &UltraCoeffs1D {
                lambda: 1,
                coeffs: vec![0.0, 1.0],
            },
            2,
        );
        // M = 2 N^(1)
        assert_eq!(m[(0, 1)], 2.0 * 0.5);
        assert_eq!(m[(1, 0)], 2.0 * 0.5);
        assert_eq!(m[(1, 2)], 2.0 * 0.5);
        assert_eq!(m[(2, 1)], 2.0 * 0.5);
        assert_eq!(m[(0, 0)], 0.0);
    }

    #[test]
    fn integrals_of_basis() {
        assert_eq!(cheb_integral(&ChebCoeffs1D::constant(1.0)), 2.0);
        assert_eq!(cheb_integral(&ChebCoeffs1D::new(vec![0.0, 1.0]).unwrap()), 0.0);
        assert!((cheb_integral(&ChebCoeffs1D::new(vec![0.0, 0.0, 1.0]).unwrap()) + 2.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn inner_product_volume() {
        let one = cheb_interp_3d(|_, _, _| 1.0, [0, 0, 0]).unwrap();
        assert!((inner_product_3d(&one, &one).unwrap() - 8.0).abs() < 1e-14);
    }
}
