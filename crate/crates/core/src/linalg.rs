//! Small dense factorizations used throughout the solvers.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
    norm_1: f64,
}

impl Lu {
    pub fn new(a: &DenseMatrix, what: &str) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::shape(format!("LU of {what} (square)"), a.rows(), a.cols()));
        }
        let n = a.rows();
        let norm_1 = a.norm_1();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let tiny = f64::EPSILON * norm_1.max(f64::MIN_POSITIVE) * 1e-3;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if pmax <= tiny || !pmax.is_finite() {
                return Err(Error::Singular {
                    what: what.to_string(),
                    pivot: k,
                });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let s = lu.as_mut_slice();
                    s.swap(p + j * n, k + j * n);
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                lu[(i, k)] /= pivot;
            }
            for j in k + 1..n {
                let ukj = lu[(k, j)];
                if ukj != 0.0 {
                    let data = lu.as_mut_slice();
                    let (left, right) = data.split_at_mut(j * n);
                    let lk = &left[k * n..(k + 1) * n];
                    let cj = &mut right[..n];
                    for i in k + 1..n {
                        cj[i] -= lk[i] * ukj;
                    }
                }
            }
        }
        Ok(Lu { lu, perm, norm_1 })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                let col = self.lu.col(j);
                for i in j + 1..n {
                    x[i] -= col[i] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = self.lu.col(j);
            x[j] /= col[j];
            let xj = x[j];
            if xj != 0.0 {
                for i in 0..j {
                    x[i] -= col[i] * xj;
                }
            }
        }
        b.copy_from_slice(&x);
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        let mut y = b.to_vec();
        for j in 0..n {
            let col = self.lu.col(j);
            let mut s = y[j];
            for i in 0..j {
                s -= col[i] * y[i];
            }
            y[j] = s / col[j];
        }
        for j in (0..n).rev() {
            let col = self.lu.col(j);
            let mut s = y[j];
            for i in j + 1..n {
                s -= col[i] * y[i];
            }
            y[j] = s;
        }
        for (i, &p) in self.perm.iter().enumerate() {
            b[p] = y[i];
        }
    }

    pub fn solve_matrix(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if b.rows() != self.dim() {
            return Err(Error::shape("LU solve rows", self.dim(), b.rows()));
        }
        let mut x = b.clone();
        for j in 0..b.cols() {
            self.solve_in_place(x.col_mut(j));
        }
        Ok(x)
    }

    /// Explicit inverse; used only by test oracles and condition estimates.
    pub fn inverse(&self) -> DenseMatrix {
        self.solve_matrix(&DenseMatrix::identity(self.dim()))
            .expect("square identity")
    }

    /// 1-norm condition number estimate (Hager's method).
    pub fn condition_estimate(&self) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 1.0;
        }
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for _ in 0..5 {
            let mut y = x.clone();
            self.solve_in_place(&mut y);
            let ynorm: f64 = y.iter().map(|v| v.abs()).sum();
            if ynorm <= est {
                break;
            }
            est = ynorm;
            let mut z: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            self.solve_transpose_in_place(&mut z);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .fold((0, -1.0), |b, (i, v)| if v.abs() > b.1 { (i, v.abs()) } else { b });
            let zx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= zx {
                break;
            }
            x = vec![0.0; n];
            x[jmax] = 1.0;
        }
        est * self.norm_1
    }
}

/// Solves the symmetric positive (semi)definite system `G x = b` for several
/// right sides via Cholesky, adding `ridge * trace/n` to the diagonal when the
/// plain factorization breaks down. Returns whether regularization was used.
pub fn spd_solve_rows(g: &DenseMatrix, rhs: &mut DenseMatrix, ridge: f64) -> Result<bool> {
    let n = g.rows();
    let trace: f64 = (0..n).map(|i| g[(i, i)]).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut regularized = false;
    let chol = match cholesky(g) {
        Some(c) => c,
        None => {
            regularized = true;
            let mut gr = g.clone();
            let shift = ridge * trace / n as f64;
            for i in 0..n {
                gr[(i, i)] += shift;
            }
            cholesky(&gr).ok_or_else(|| Error::Singular {
                what: "regularized Gram matrix".into(),
                pivot: 0,
            })?
        }
    };
    // rhs holds right sides as rows (rhs is m x n); solve x G = rhs row-wise.
    let m = rhs.rows();
    let mut row = vec![0.0; n];
    for r in 0..m {
        for (j, v) in row.iter_mut().enumerate() {
            *v = rhs[(r, j)];
        }
        chol_solve(&chol, &mut row);
        for (j, v) in row.iter().enumerate() {
            rhs[(r, j)] = *v;
        }
    }
    Ok(regularized)
}

fn cholesky(g: &DenseMatrix) -> Option<DenseMatrix> {
    let n = g.rows();
    let mut l = DenseMatrix::zeros(n, n);
    let scale = (0..n).map(|i| g[(i, i)].abs()).fold(0.0, f64::max);
    for j in 0..n {
        let mut d = g[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 1e-14 * scale || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

fn chol_solve(l: &DenseMatrix, b: &mut [f64]) {
    let n = l.rows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
    let n = a.rows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off <= 1e-30 * m.frobenius_norm().powi(2).max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    ev
}

/// Singular values of a short-and-wide matrix via the eigenvalues of `B B^T`.
pub fn singular_values(b: &DenseMatrix) -> Vec<f64> {
    let bbt = b.matmul(&b.transpose()).expect("conformal");
    symmetric_eigenvalues(&bbt)
        .into_iter()
        .map(|v| v.max(0.0).sqrt())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_with_pivoting() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]);
        let lu = Lu::new(&a, "test").unwrap();
        let x_true = [1.0, -2.0, 0.5];
        let mut b = a.matvec(&x_true).unwrap();
        lu.solve_in_place(&mut b);
        for (x, t) in b.iter().zip(x_true) {
            assert!((x - t).abs() < 1e-14);
        }
        let mut bt = a.transpose().matvec(&x_true).unwrap();
        lu.solve_transpose_in_place(&mut bt);
        for (x, t) in bt.iter().zip(x_true) {
            assert!((x - t).abs() < 1e-14);
        }
    }

    #[test]
    fn lu_reports_singular_pivot() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        match Lu::new(&a, "rank one").unwrap_err() {
            Error::Singular { pivot, .. } => assert_eq!(pivot, 1),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn condition_estimate_of_diagonal() {
        let a = DenseMatrix::diagonal(&[1.0, 1e-6, 10.0]);
        let c = Lu::new(&a, "diag").unwrap().condition_estimate();
        assert!((c / 1e7 - 1.0).abs() < 1e-12, "{c}");
    }

    #[test]
    fn jacobi_eigenvalues() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let ev = symmetric_eigenvalues(&a);
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }
}
