//! CP decomposition by alternating least squares.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::spd_solve_rows;
use crate::matrix::DenseMatrix;
use crate::tensor3::CoeffTensor3;

#[derive(Clone, Copy, Debug)]
pub struct CpOptions {
    pub max_iter: usize,
    /// Stop when the relative change of the fit falls below this.
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for CpOptions {
    fn default() -> Self {
        CpOptions {
            max_iter: 500,
            tol: 1e-12,
            restarts: 5,
            seed: 0x5eed_cafe,
        }
    }
}

/// Rank-`R` factors; term `r` is `factors[r][0] o factors[r][1] o factors[r][2]`.
#[derive(Clone, Debug)]
pub struct CpFactors {
    pub dims: [usize; 3],
    pub factors: Vec<[Vec<f64>; 3]>,
    /// Max-norm reconstruction error against the decomposed tensor.
    pub error: f64,
    /// Set when a Gram matrix needed the ridge shift.
    pub regularized: bool,
    pub iterations: usize,
}

impl CpFactors {
    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    pub fn reconstruct(&self) -> CoeffTensor3 {
        let [d1, d2, d3] = self.dims;
        let mut out = CoeffTensor3::zeros(self.dims);
        let data = out.as_mut_slice();
        for [a, b, c] in &self.factors {
            for k in 0..d3 {
                for j in 0..d2 {
                    let s = b[j] * c[k];
                    if s == 0.0 {
                        continue;
                    }
                    let base = (j + k * d2) * d1;
                    for i in 0..d1 {
                        data[base + i] += a[i] * s;
                    }
                }
            }
        }
        out
    }

    /// Max-norm distance between the reconstruction and `t`.
    pub fn max_error(&self, t: &CoeffTensor3) -> f64 {
        self.reconstruct()
            .as_slice()
            .iter()
            .zip(t.as_slice())
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }
}

struct Sparse {
    idx: Vec<[usize; 3]>,
    val: Vec<f64>,
}

fn nonzeros(t: &CoeffTensor3) -> Sparse {
    let [d1, d2, _] = t.dims();
    let mut idx = Vec::new();
    let mut val = Vec::new();
    for (l, &v) in t.as_slice().iter().enumerate() {
        if v != 0.0 {
            idx.push([l % d1, (l / d1) % d2, l / (d1 * d2)]);
            val.push(v);
        }
    }
    Sparse { idx, val }
}

/// Alternating least squares with seeded random starts; keeps the run with
/// the smallest max-norm error.
pub fn cp_decompose(t: &CoeffTensor3, rank: usize, opts: &CpOptions) -> Result<CpFactors> {
    if rank == 0 {
        return Err(Error::Input("CP rank must be at least 1".into()));
    }
    if !t.is_finite() {
        return Err(Error::Input("CP input tensor has non-finite entries".into()));
    }
    let sp = nonzeros(t);
    let dims = t.dims();
    if sp.val.is_empty() {
        return Ok(CpFactors {
            dims,
            factors: vec![[vec![0.0; dims[0]], vec![0.0; dims[1]], vec![0.0; dims[2]]]; rank],
            error: 0.0,
            regularized: false,
            iterations: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<CpFactors> = None;
    for _ in 0..opts.restarts.max(1) {
        let init: [DenseMatrix; 3] =
            std::array::from_fn(|m| DenseMatrix::from_fn(dims[m], rank, |_, _| rng.random_range(-1.0..1.0)));
        let run = als(t, &sp, init, opts)?;
        if best.as_ref().is_none_or(|b| run.error < b.error) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn als(t: &CoeffTensor3, sp: &Sparse, mut f: [DenseMatrix; 3], opts: &CpOptions) -> Result<CpFactors> {
    let dims = t.dims();
    let rank = f[0].cols();
    let tnorm = t.norm().max(f64::MIN_POSITIVE);
    let mut regularized = false;
    let mut prev_err = f64::INFINITY;
    let mut iterations = 0;
    let check_every = 10;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        for mode in 0..3 {
            let (p, q) = match mode {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let mut g = gram(&f[p]);
            let gq = gram(&f[q]);
            for (a, b) in g.as_mut_slice().iter_mut().zip(gq.as_slice()) {
                *a *= b;
            }
            let mut m = mttkrp(sp, &f, mode, dims[mode]);
            regularized |= spd_solve_rows(&g, &mut m, 1e-12)?;
            f[mode] = m;
        }
        balance(&mut f);
        if iterations % check_every == 0 || iterations == opts.max_iter {
            let err = residual_norm(t, &f) / tnorm;
            if !err.is_finite() {
                return Err(Error::Breakdown("CP-ALS diverged".into()));
            }
            if (prev_err - err).abs() <= opts.tol * err.max(f64::EPSILON) || err <= 1e-15 {
                break;
            }
            prev_err = err;
        }
    }
    let factors = (0..rank)
        .map(|r| std::array::from_fn(|m| f[m].col(r).to_vec()))
        .collect();
    let mut out = CpFactors {
        dims,
        factors,
        error: 0.0,
        regularized,
        iterations,
    };
    out.error = out.max_error(t);
    Ok(out)
}

fn gram(a: &DenseMatrix) -> DenseMatrix {
    let r = a.cols();
    DenseMatrix::from_fn(r, r, |i, j| a.col(i).iter().zip(a.col(j)).map(|(x, y)| x * y).sum())
}

fn mttkrp(sp: &Sparse, f: &[DenseMatrix; 3], mode: usize, rows: usize) -> DenseMatrix {
    let rank = f[0].cols();
    let mut out = DenseMatrix::zeros(rows, rank);
    let (p, q) = match mode {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    for (ix, &v) in sp.idx.iter().zip(&sp.val) {
        for r in 0..rank {
            out[(ix[mode], r)] += v * f[p][(ix[p], r)] * f[q][(ix[q], r)];
        }
    }
    out
}

/// Equalizes column norms across the three factors.
fn balance(f: &mut [DenseMatrix; 3]) {
    let rank = f[0].cols();
    for r in 0..rank {
        let norms: [f64; 3] = std::array::from_fn(|m| f[m].col(r).iter().map(|v| v * v).sum::<f64>().sqrt());
        let prod = norms[0] * norms[1] * norms[2];
        if prod == 0.0 || !prod.is_finite() {
            continue;
        }
        let target = prod.cbrt();
        for m in 0..3 {
            let s = target / norms[m];
            for v in f[m].col_mut(r) {
                *v *= s;
            }
        }
    }
}

fn residual_norm(t: &CoeffTensor3, f: &[DenseMatrix; 3]) -> f64 {
    let cp = CpFactors {
        dims: t.dims(),
        factors: (0..f[0].cols())
            .map(|r| std::array::from_fn(|m| f[m].col(r).to_vec()))
            .collect(),
        error: 0.0,
        regularized: false,
        iterations: 0,
    };
    cp.reconstruct().sub(t).map(|d| d.norm()).unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_rank_one() {
        let a = [0.3, -1.2, 2.0];
        let b = [1.0, 0.5];
        let c = [-0.7, 0.1, 0.4, 1.1];
        let t = CoeffTensor3::from_fn([3, 2, 4], |i, j, k| a[i] * b[j] * c[k]);
        let cp = cp_decompose(&t, 1, &CpOptions::default()).unwrap();
        assert!(cp.error <= 1e-10, "{}", cp.error);
        assert!((cp.max_error(&t) - cp.error).abs() <= 1e-14);
    }

    #[test]
    fn helmholtz_constant_tensor_rank_three() {
        let mut t = CoeffTensor3::zeros([3, 3, 3]);
        t.set(0, 0, 0, 4.0);
        t.set(2, 0, 0, 1.0);
        t.set(0, 2, 0, 1.0);
        t.set(0, 0, 2, 1.0);
        let cp = cp_decompose(&t, 3, &CpOptions::default()).unwrap();
        assert!(cp.error <= 1e-12, "{}", cp.error);
    }

    #[test]
    fn deterministic_for_seed() {
        let t = CoeffTensor3::from_fn([4, 3, 3], |i, j, k| ((i + 2 * j + 3 * k) as f64).sin());
        let opts = CpOptions {
            max_iter: 50,
            ..CpOptions::default()
        };
        let a = cp_decompose(&t, 2, &opts).unwrap();
        let b = cp_decompose(&t, 2, &opts).unwrap();
        assert_eq!(a.factors, b.factors);
    }

    #[test]
    fn zero_rank_rejected() {
        assert!(cp_decompose(&CoeffTensor3::zeros([1, 1, 1]), 0, &CpOptions::default()).is_err());
    }
}
