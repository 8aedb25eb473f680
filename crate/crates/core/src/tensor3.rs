//! Dense order-3 tensors.
//!
//! Storage is contiguous and mode-1 fastest: entry `(i, j, k)` of a tensor with
//! extents `(d1, d2, d3)` lives at `i + j*d1 + k*d1*d2`. With this convention
//! `vec(T x1 A x2 B x3 C) = (C kron B kron A) vec(T)` holds verbatim.

use std::fmt::Write as _;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::matrix::{gemm_acc, gemm_nt_acc, DenseMatrix};

#[derive(Clone, PartialEq)]
pub struct CoeffTensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl std::fmt::Debug for CoeffTensor3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CoeffTensor3 {:?} (max |entry| {:.3e})", self.dims, self.max_abs())
    }
}

/// Mode index `1 | 2 | 3`.
fn mode_index(mode: usize) -> Result<usize> {
    match mode {
        1..=3 => Ok(mode - 1),
        _ => Err(Error::Input(format!("mode must be 1, 2 or 3, got {mode}"))),
    }
}

impl CoeffTensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        CoeffTensor3 {
            dims,
            data: vec![0.0; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2];
        if data.len() != n {
            return Err(Error::shape("tensor storage", n, data.len()));
        }
        Ok(CoeffTensor3 { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    data.push(f(i, j, k));
                }
            }
        }
        CoeffTensor3 { dims, data }
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && k < self.dims[2]);
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        CoeffTensor3 {
            dims: self.dims,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &CoeffTensor3) -> Result<()> {
        self.check_same_dims(other, "axpy")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &CoeffTensor3) -> Result<CoeffTensor3> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn add(&self, other: &CoeffTensor3) -> Result<CoeffTensor3> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn dot(&self, other: &CoeffTensor3) -> Result<f64> {
        self.check_same_dims(other, "dot")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    fn check_same_dims(&self, other: &CoeffTensor3, ctx: &str) -> Result<()> {
        for m in 0..3 {
            if self.dims[m] != other.dims[m] {
                return Err(Error::shape(
                    format!("{ctx}: extent of mode {}", m + 1),
                    self.dims[m],
                    other.dims[m],
                ));
            }
        }
        Ok(())
    }

    /// Mode-`mode` matricization: columns are the mode fibers, remaining
    /// indices ordered with the lower mode fastest.
    pub fn mode_matricize(&self, mode: usize) -> Result<DenseMatrix> {
        let m = mode_index(mode)?;
        let [d1, d2, d3] = self.dims;
        let out = match m {
            0 => DenseMatrix::from_col_major(d1, d2 * d3, self.data.clone())?,
            1 => DenseMatrix::from_fn(d2, d1 * d3, |j, c| self.get(c % d1, j, c / d1)),
            _ => DenseMatrix::from_fn(d3, d1 * d2, |k, c| self.get(c % d1, c / d1, k)),
        };
        Ok(out)
    }

    /// Inverse of [`mode_matricize`](Self::mode_matricize).
    pub fn refold(mat: &DenseMatrix, mode: usize, dims: [usize; 3]) -> Result<Self> {
        let m = mode_index(mode)?;
        let d1 = dims[0];
        if mat.rows() != dims[m] {
            return Err(Error::shape(format!("refold rows of mode {mode}"), dims[m], mat.rows()));
        }
        let others = dims[0] * dims[1] * dims[2] / dims[m].max(1);
        if mat.cols() != others && dims[m] != 0 {
            return Err(Error::shape(format!("refold cols of mode {mode}"), others, mat.cols()));
        }
        let t = match m {
            0 => CoeffTensor3::from_vec(dims, mat.as_slice().to_vec())?,
            1 => CoeffTensor3::from_fn(dims, |i, j, k| mat[(j, i + k * d1)]),
            _ => CoeffTensor3::from_fn(dims, |i, j, k| mat[(k, i + j * d1)]),
        };
        Ok(t)
    }

    /// Mode-`mode` product `self x_mode m`.
    pub fn mode_mult(&self, m: &DenseMatrix, mode: usize) -> Result<CoeffTensor3> {
        let mi = mode_index(mode)?;
        let [d1, d2, d3] = self.dims;
        if m.cols() != self.dims[mi] {
            return Err(Error::shape(
                format!("mode-{mode} product: matrix columns vs tensor extent"),
                self.dims[mi],
                m.cols(),
            ));
        }
        let r = m.rows();
        let mut out_dims = self.dims;
        out_dims[mi] = r;
        let mut out = CoeffTensor3::zeros(out_dims);
        if out.is_empty() || self.is_empty() {
            return Ok(out);
        }
        match mi {
            0 => gemm_acc(r, d2 * d3, d1, 1.0, m.as_slice(), &self.data, &mut out.data),
            1 => {
                for k in 0..d3 {
                    let src = &self.data[k * d1 * d2..(k + 1) * d1 * d2];
                    let dst = &mut out.data[k * d1 * r..(k + 1) * d1 * r];
                    gemm_nt_acc(d1, r, d2, 1.0, src, m.as_slice(), dst);
                }
            }
            _ => gemm_nt_acc(d1 * d2, r, d3, 1.0, &self.data, m.as_slice(), &mut out.data),
        }
        Ok(out)
    }

    /// `self x1 a x2 b x3 c`
    pub fn multilinear(&self, a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> Result<CoeffTensor3> {
        self.mode_mult(a, 1)?.mode_mult(b, 2)?.mode_mult(c, 3)
    }

    /// Data in linearization order.
    pub fn vectorize(&self) -> Vec<f64> {
        self.data.clone()
    }

    /// Copy of the sub-tensor over the given index ranges.
    pub fn slice(&self, r: [Range<usize>; 3]) -> Result<CoeffTensor3> {
        for m in 0..3 {
            if r[m].end > self.dims[m] || r[m].start > r[m].end {
                return Err(Error::Input(format!(
                    "slice range {:?} out of bounds for extent {} of mode {}",
                    r[m],
                    self.dims[m],
                    m + 1
                )));
            }
        }
        let dims = [r[0].len(), r[1].len(), r[2].len()];
        Ok(CoeffTensor3::from_fn(dims, |i, j, k| {
            self.get(r[0].start + i, r[1].start + j, r[2].start + k)
        }))
    }

    /// Writes `block` into `self` starting at `origin`.
    pub fn assign_slice(&mut self, origin: [usize; 3], block: &CoeffTensor3) -> Result<()> {
        for m in 0..3 {
            if origin[m] + block.dims[m] > self.dims[m] {
                return Err(Error::shape(
                    format!("assign_slice extent of mode {}", m + 1),
                    self.dims[m],
                    origin[m] + block.dims[m],
                ));
            }
        }
        let [b1, b2, b3] = block.dims;
        for k in 0..b3 {
            for j in 0..b2 {
                let src = block.offset_unchecked(0, j, k);
                let dst = self.offset(origin[0], origin[1] + j, origin[2] + k);
                self.data[dst..dst + b1].copy_from_slice(&block.data[src..src + b1]);
            }
        }
        Ok(())
    }

    #[inline]
    fn offset_unchecked(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn extract_block(&self, split: &BlockSplit, which: BlockId) -> Result<CoeffTensor3> {
        split.check(self.dims)?;
        self.slice(split.ranges(which))
    }

    pub fn insert_block(&mut self, split: &BlockSplit, which: BlockId, block: &CoeffTensor3) -> Result<()> {
        split.check(self.dims)?;
        let r = split.ranges(which);
        let expected = [r[0].len(), r[1].len(), r[2].len()];
        for m in 0..3 {
            if block.dims[m] != expected[m] {
                return Err(Error::shape(
                    format!("block {which} extent of mode {}", m + 1),
                    expected[m],
                    block.dims[m],
                ));
            }
        }
        self.assign_slice([r[0].start, r[1].start, r[2].start], block)
    }

    /// Text dump: header `tensor3 d1 d2 d3`, then one `%.17e` value per line.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(26 * self.data.len() + 32);
        let [d1, d2, d3] = self.dims;
        let _ = writeln!(s, "tensor3 {d1} {d2} {d3}");
        for &v in &self.data {
            s.push_str(&format_e17(v));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Input("empty tensor dump".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("tensor3") {
            return Err(Error::Input(format!("bad tensor dump header: {header:?}")));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = parts
                .next()
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| Error::Input(format!("bad tensor dump header: {header:?}")))?;
        }
        let data = lines
            .enumerate()
            .map(|(i, l)| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Input(format!("tensor dump line {}: {e}", i + 2)))
            })
            .collect::<Result<Vec<_>>>()?;
        CoeffTensor3::from_vec(dims, data)
    }
}

/// C-style `%.17e` formatting (`-1.23456789012345678e-05`).
pub fn format_e17(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.17e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// Kronecker matrix-vector product `(c kron b kron a) vec(t)` via three mode
/// products.
pub fn kron3_matvec(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix, t: &CoeffTensor3) -> Result<Vec<f64>> {
    Ok(t.multilinear(a, b, c)?.into_vec())
}

/// Selects one of the eight blocks; each component is 1 (leading boundary
/// rows) or 2 (trailing rows).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockId(pub [u8; 3]);

impl BlockId {
    pub fn new(a: u8, b: u8, c: u8) -> Result<Self> {
        if [a, b, c].iter().all(|&p| p == 1 || p == 2) {
            Ok(BlockId([a, b, c]))
        } else {
            Err(Error::Input(format!("block id must use parts 1|2, got {a}{b}{c}")))
        }
    }

    pub const B222: BlockId = BlockId([2, 2, 2]);

    pub fn all() -> [BlockId; 8] {
        let mut out = [BlockId([1, 1, 1]); 8];
        for (n, slot) in out.iter_mut().enumerate() {
            *slot = BlockId([1 + (n & 1) as u8, 1 + ((n >> 1) & 1) as u8, 1 + ((n >> 2) & 1) as u8]);
        }
        out
    }
}

impl std::fmt::Display for BlockId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}{}", self.0[0], self.0[1], self.0[2])
    }
}

/// Boundary-row counts per mode splitting a tensor into eight blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockSplit {
    pub counts: [usize; 3],
    pub dims: [usize; 3],
}

impl BlockSplit {
    pub fn new(counts: [usize; 3], dims: [usize; 3]) -> Result<Self> {
        let s = BlockSplit { counts, dims };
        s.check(dims)?;
        Ok(s)
    }

    fn check(&self, dims: [usize; 3]) -> Result<()> {
        if dims != self.dims {
            return Err(Error::Input(format!(
                "block split built for dims {:?}, applied to {:?}",
                self.dims, dims
            )));
        }
        for m in 0..3 {
            if self.counts[m] >= dims[m] {
                return Err(Error::Input(format!(
                    "invalid split: {} boundary rows in mode {} of extent {}",
                    self.counts[m],
                    m + 1,
                    dims[m]
                )));
            }
        }
        Ok(())
    }

    pub fn ranges(&self, which: BlockId) -> [Range<usize>; 3] {
        std::array::from_fn(|m| {
            if which.0[m] == 1 {
                0..self.counts[m]
            } else {
                self.counts[m]..self.dims[m]
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iota(dims: [usize; 3]) -> CoeffTensor3 {
        let n = dims[0] * dims[1] * dims[2];
        CoeffTensor3::from_vec(dims, (0..n).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn mode1_matricization_columns_are_fibers() {
        let t = iota([2, 2, 2]);
        let m = t.mode_matricize(1).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 4));
        for c in 0..4 {
            assert_eq!(m.col(c), &[2.0 * c as f64, 2.0 * c as f64 + 1.0]);
        }
    }

    #[test]
    fn mode2_matricization_row_holds_fixed_j() {
        let t = iota([3, 4, 5]);
        let m = t.mode_matricize(2).unwrap();
        for r in 0..4 {
            let mut expected = Vec::new();
            for k in 0..5 {
                for i in 0..3 {
                    expected.push(t.get(i, r, k));
                }
            }
            assert_eq!(m.row(r), expected);
        }
    }

    #[test]
    fn refold_inverts_matricize() {
        let t = iota([3, 4, 5]);
        for mode in 1..=3 {
            let back = CoeffTensor3::refold(&t.mode_matricize(mode).unwrap(), mode, t.dims()).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn invalid_mode_rejected() {
        assert!(iota([2, 2, 2]).mode_matricize(4).is_err());
    }

    #[test]
    fn mode_mult_shape_error_names_mode() {
        let err = iota([2, 3, 4]).mode_mult(&DenseMatrix::zeros(5, 2), 2).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mode-2") && msg.contains("expected 3, got 2"), "{msg}");
    }

    #[test]
    fn ones_kron_all_eights() {
        let t = CoeffTensor3::from_fn([2, 2, 2], |_, _, _| 1.0);
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(kron3_matvec(&a, &a, &a, &t).unwrap(), vec![8.0; 8]);
    }

    #[test]
    fn trivial_split_block_222_is_whole() {
        let t = iota([3, 3, 3]);
        let s = BlockSplit::new([0, 0, 0], t.dims()).unwrap();
        assert_eq!(t.extract_block(&s, BlockId::B222).unwrap(), t);
        for b in BlockId::all() {
            if b != BlockId::B222 {
                assert!(t.extract_block(&s, b).unwrap().is_empty());
            }
        }
    }

    #[test]
    fn blocks_tile_the_tensor() {
        let t = iota([4, 4, 4]);
        let s = BlockSplit::new([2, 2, 2], t.dims()).unwrap();
        let mut rebuilt = CoeffTensor3::zeros(t.dims());
        for b in BlockId::all() {
            let blk = t.extract_block(&s, b).unwrap();
            assert_eq!(blk.dims(), [2, 2, 2]);
            rebuilt.insert_block(&s, b, &blk).unwrap();
        }
        assert_eq!(rebuilt, t);
    }

    #[test]
    fn block_122_by_index_loops() {
        let t = iota([5, 4, 6]);
        let s = BlockSplit::new([2, 1, 3], t.dims()).unwrap();
        let blk = t.extract_block(&s, BlockId::new(1, 2, 2).unwrap()).unwrap();
        assert_eq!(blk.dims(), [2, 3, 3]);
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..3 {
                    assert_eq!(blk.get(i, j, k), t.get(i, 1 + j, 3 + k));
                }
            }
        }
    }

    #[test]
    fn invalid_split_rejected() {
        assert!(BlockSplit::new([3, 0, 0], [3, 2, 2]).is_err());
        assert!(BlockId::new(1, 3, 2).is_err());
    }

    #[test]
    fn text_dump_round_trip_and_format() {
        let t = CoeffTensor3::from_vec([1, 2, 1], vec![1.0, -2.5e-5]).unwrap();
        let text = t.to_text();
        assert_eq!(
            text,
            "tensor3 1 2 1\n1.00000000000000000e+00\n-2.50000000000000012e-05\n"
        );
        assert_eq!(CoeffTensor3::from_text(&text).unwrap(), t);
    }

    #[test]
    fn format_e17_matches_c() {
        assert_eq!(format_e17(0.0), "0.00000000000000000e+00");
        assert_eq!(format_e17(1.5e300), "1.50000000000000008e+300");
        assert_eq!(format_e17(-3.0e-7), "-2.99999999999999986e-07");
    }
}
