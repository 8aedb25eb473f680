//! Real Schur factorization `A = Q T Q^T` by Householder reduction to
//! Hessenberg form followed by Francis double-shift QR iteration.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Clone, Debug)]
pub struct SchurFactor {
    pub q: DenseMatrix,
    /// Quasi-upper-triangular; 2x2 diagonal blocks hold complex pairs.
    pub t: DenseMatrix,
}

impl SchurFactor {
    pub fn dim(&self) -> usize {
        self.t.rows()
    }

    /// Start index and size (1 or 2) of each diagonal block.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        diagonal_blocks(&self.t)
    }

    /// Eigenvalues as `(re, im)` pairs in diagonal order.
    pub fn eigenvalues(&self) -> Vec<(f64, f64)> {
        let t = &self.t;
        let mut out = Vec::with_capacity(self.dim());
        for (s, size) in self.blocks() {
            if size == 1 {
                out.push((t[(s, s)], 0.0));
            } else {
                let (a, b, c, d) = (t[(s, s)], t[(s, s + 1)], t[(s + 1, s)], t[(s + 1, s + 1)]);
                let mean = 0.5 * (a + d);
                let disc = 0.25 * (a - d) * (a - d) + b * c;
                if disc >= 0.0 {
                    let r = disc.sqrt();
                    out.push((mean + r, 0.0));
                    out.push((mean - r, 0.0));
                } else {
                    let r = (-disc).sqrt();
                    out.push((mean, r));
                    out.push((mean, -r));
                }
            }
        }
        out
    }
}

/// Diagonal blocks of a quasi-triangular matrix as `(start, size)`.
pub fn diagonal_blocks(t: &DenseMatrix) -> Vec<(usize, usize)> {
    let n = t.rows();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            out.push((i, 2));
            i += 2;
        } else {
            out.push((i, 1));
            i += 1;
        }
    }
    out
}

pub fn real_schur(a: &DenseMatrix) -> Result<SchurFactor> {
    if !a.is_square() {
        return Err(Error::shape("Schur input columns", a.rows(), a.cols()));
    }
    if !a.as_slice().iter().all(|v| v.is_finite()) {
        return Err(Error::Input("Schur input has non-finite entries".into()));
    }
    let n = a.rows();
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| a.row(i)).collect();
    let mut v = vec![vec![0.0; n]; n];
    if n > 0 {
        hessenberg(&mut h, &mut v);
        hqr(&mut h, &mut v, a.frobenius_norm())?;
    }
    for (i, row) in h.iter_mut().enumerate() {
        for x in row.iter_mut().take(i.saturating_sub(1)) {
            *x = 0.0;
        }
    }
    let t = DenseMatrix::from_fn(n, n, |i, j| h[i][j]);
    let q = DenseMatrix::from_fn(n, n, |i, j| v[i][j]);
    Ok(SchurFactor { q, t })
}

fn hessenberg(h: &mut [Vec<f64>], v: &mut [Vec<f64>]) {
    let n = h.len();
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[i][m - 1].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[i][m - 1] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;
        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[i][j];
            }
            f /= hh;
            for i in m..=high {
                h[i][j] -= f * ort[i];
            }
        }
        for row in h.iter_mut() {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * row[j];
            }
            f /= hh;
            for j in m..=high {
                row[j] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[m][m - 1] = scale * g;
    }
    for (i, row) in v.iter_mut().enumerate() {
        row.fill(0.0);
        row[i] = 1.0;
    }
    for m in (1..high).rev() {
        if h[m][m - 1] == 0.0 {
            continue;
        }
        for i in m + 1..=high {
            ort[i] = h[i][m - 1];
        }
        for j in m..=high {
            let mut g = 0.0;
            for i in m..=high {
                g += ort[i] * v[i][j];
            }
            g = (g / ort[m]) / h[m][m - 1];
            for i in m..=high {
                v[i][j] += g * ort[i];
            }
        }
    }
    for (i, row) in h.iter_mut().enumerate() {
        for x in row.iter_mut().take(i.saturating_sub(1)) {
            *x = 0.0;
        }
    }
}

fn hqr(h: &mut [Vec<f64>], v: &mut [Vec<f64>], anorm: f64) -> Result<()> {
    let nn = h.len();
    let eps = f64::EPSILON;
    let max_total = 30 * nn.max(1);
    let mut total = 0usize;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z): (f64, f64, f64, f64, f64);
    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[i][j].abs();
        }
    }
    let mut n = nn as isize - 1;
    let mut iter = 0;
    while n >= 0 {
        let nu = n as usize;
        let mut l = nu;
        while l > 0 {
            s = h[l - 1][l - 1].abs() + h[l][l].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[l][l - 1].abs() < eps * s {
                break;
            }
            l -= 1;
        }
        if l == nu {
            h[nu][nu] += exshift;
            if nu > 0 {
                h[nu][nu - 1] = 0.0;
            }
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            let w = h[nu][nu - 1] * h[nu - 1][nu];
            p = (h[nu - 1][nu - 1] - h[nu][nu]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[nu][nu] += exshift;
            h[nu - 1][nu - 1] += exshift;
            if nu >= 2 {
                h[nu - 1][nu - 2] = 0.0;
            }
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                let x = h[nu][nu - 1];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in nu - 1..nn {
                    z = h[nu - 1][j];
                    h[nu - 1][j] = q * z + p * h[nu][j];
                    h[nu][j] = q * h[nu][j] - p * z;
                }
                for row in h.iter_mut().take(nu + 1) {
                    z = row[nu - 1];
                    row[nu - 1] = q * z + p * row[nu];
                    row[nu] = q * row[nu] - p * z;
                }
                for row in v.iter_mut() {
                    z = row[nu - 1];
                    row[nu - 1] = q * z + p * row[nu];
                    row[nu] = q * row[nu] - p * z;
                }
                h[nu][nu - 1] = 0.0;
            }
            n -= 2;
            iter = 0;
        } else {
            total += 1;
            if total > max_total {
                return Err(Error::SchurNonConvergence {
                    n: nn,
                    norm: anorm,
                    block_end: nu,
                });
            }
            let mut x = h[nu][nu];
            let mut y = 0.0;
            let mut w = 0.0;
            if l < nu {
                y = h[nu - 1][nu - 1];
                w = h[nu][nu - 1] * h[nu - 1][nu];
            }
            if iter == 10 {
                exshift += x;
                for i in 0..=nu {
                    h[i][i] -= x;
                }
                s = h[nu][nu - 1].abs() + h[nu - 1][nu - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h[i][i] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            let mut m = nu - 2;
            loop {
                z = h[m][m];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[m + 1][m] + h[m][m + 1];
                q = h[m + 1][m + 1] - z - r - s;
                r = h[m + 2][m + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[m][m - 1].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[m - 1][m - 1].abs() + z.abs() + h[m + 1][m + 1].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                h[i][i - 2] = 0.0;
                if i > m + 2 {
                    h[i][i - 3] = 0.0;
                }
            }
            let mut k = m;
            while k < nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[k][k - 1];
                    q = h[k + 1][k - 1];
                    r = if notlast { h[k + 2][k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[k][k - 1] = -s * x;
                    } else if l != m {
                        h[k][k - 1] = -h[k][k - 1];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..nn {
                        p = h[k][j] + q * h[k + 1][j];
                        if notlast {
                            p += r * h[k + 2][j];
                            h[k + 2][j] -= p * z;
                        }
                        h[k][j] -= p * x;
                        h[k + 1][j] -= p * y;
                    }
                    for row in h.iter_mut().take(nu.min(k + 3) + 1) {
                        p = x * row[k] + y * row[k + 1];
                        if notlast {
                            p += z * row[k + 2];
                            row[k + 2] -= p * r;
                        }
                        row[k] -= p;
                        row[k + 1] -= p * q;
                    }
                    for row in v.iter_mut() {
                        p = x * row[k] + y * row[k + 1];
                        if notlast {
                            p += z * row[k + 2];
                            row[k + 2] -= p * r;
                        }
                        row[k] -= p;
                        row[k + 1] -= p * q;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(a: &DenseMatrix) -> SchurFactor {
        let f = real_schur(a).unwrap();
        let n = a.rows();
        let qtq = f.q.transpose().matmul(&f.q).unwrap();
        assert!(qtq.sub(&DenseMatrix::identity(n)).unwrap().max_abs() <= 1e-12);
        let rec = f.q.matmul(&f.t).unwrap().matmul(&f.q.transpose()).unwrap();
        assert!(rec.sub(a).unwrap().frobenius_norm() <= 1e-12 * a.frobenius_norm().max(1.0));
        for i in 0..n {
            for j in 0..i.saturating_sub(1) {
                assert_eq!(f.t[(i, j)], 0.0);
            }
            if i >= 2 {
                assert!(f.t[(i, i - 1)] == 0.0 || f.t[(i - 1, i - 2)] == 0.0);
            }
        }
        f
    }

    #[test]
    fn rotation_keeps_pair() {
        let a = DenseMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        let f = check(&a);
        assert_eq!(f.blocks(), vec![(0, 2)]);
        let t = &f.t;
        assert!((t[(0, 0)] + t[(1, 1)]).abs() < 1e-15);
        assert!((t[(0, 0)] * t[(1, 1)] - t[(0, 1)] * t[(1, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn triangular_input() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![0.0, 4.0, 5.0], vec![0.0, 0.0, 6.0]]);
        let f = check(&a);
        let mut ev: Vec<f64> = f.eigenvalues().iter().map(|e| e.0).collect();
        ev.sort_by(f64::total_cmp);
        assert_eq!(ev, vec![1.0, 4.0, 6.0]);
    }

    #[test]
    fn small_sizes() {
        check(&DenseMatrix::zeros(0, 0));
        check(&DenseMatrix::from_rows(&[vec![3.0]]));
        check(&DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]));
    }

    #[test]
    fn pseudo_random_matrix() {
        let a = DenseMatrix::from_fn(20, 20, |i, j| ((i * 7 + j * 13) as f64 * 0.37).sin());
        let f = check(&a);
        let tr: f64 = f.eigenvalues().iter().map(|e| e.0).sum();
        let tra: f64 = (0..20).map(|i| a[(i, i)]).sum();
        assert!((tr - tra).abs() < 1e-11);
    }
}
