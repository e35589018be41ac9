//! Dense order-m tensors in dimensional order, index permutation, mode
//! grouping, and mode-k products cast to matrix multiplication.
//!
//! Dimensional order is the generalization of column-major order: index
//! `i_0` varies fastest and the element at `(i_0, ..., i_{m-1})` sits at
//! offset `sum_k i_k * prod_{j<k} I_j`.

use std::fmt;

use crate::counter::OpCounter;
use crate::error::{shape_err, Error, Result};

/// A multi-index `(i_0, ..., i_{m-1})`.
pub type MultiIndex = Vec<usize>;

/// Strides of a dimensional-order layout.
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(dims.len());
    let mut s = 1usize;
    for &d in dims {
        out.push(s);
        s *= d;
    }
    out
}

/// Offset of `idx` in a dimensional-order buffer with extents `dims`.
pub fn linear_offset(dims: &[usize], idx: &[usize]) -> Result<usize> {
    if dims.len() != idx.len() || idx.iter().zip(dims).any(|(&i, &d)| i >= d) {
        return Err(Error::Range {
            index: idx.to_vec(),
            extents: dims.to_vec(),
        });
    }
    let mut off = 0usize;
    let mut s = 1usize;
    for (&i, &d) in idx.iter().zip(dims) {
        off += i * s;
        s *= d;
    }
    Ok(off)
}

/// Inverse of [`linear_offset`]; `offset` must be below `prod(dims)`.
pub fn unravel(dims: &[usize], mut offset: usize) -> MultiIndex {
    dims.iter()
        .map(|&d| {
            let i = offset % d;
            offset /= d;
            i
        })
        .collect()
}

/// Advance `idx` to the next multi-index in dimensional order. Returns
/// `false` after wrapping past the last index.
#[inline]
pub fn next_index(dims: &[usize], idx: &mut [usize]) -> bool {
    for (i, &d) in idx.iter_mut().zip(dims) {
        *i += 1;
        if *i < d {
            return true;
        }
        *i = 0;
    }
    false
}

fn checked_len(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or(Error::Overflow("tensor element count"))
}

/// Dense order-m tensor of doubles in dimensional order.
#[derive(Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for DenseTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DenseTensor")
            .field("dims", &self.dims)
            .field("len", &self.data.len())
            .finish()
    }
}

impl DenseTensor {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return shape_err("tensor order must be positive");
        }
        if dims.contains(&0) {
            return shape_err(format!("zero extent in dims {dims:?}"));
        }
        let len = checked_len(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        })
    }

    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return shape_err("tensor order must be positive");
        }
        if dims.contains(&0) {
            return shape_err(format!("zero extent in dims {dims:?}"));
        }
        let len = checked_len(dims)?;
        if len != data.len() {
            return shape_err(format!(
                "dims {dims:?} need {len} elements, got {}",
                data.len()
            ));
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    /// Build a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        let mut idx = vec![0; dims.len()];
        for v in t.data.iter_mut() {
            *v = f(&idx);
            next_index(dims, &mut idx);
        }
        Ok(t)
    }

    /// Order-2 tensor from row-major nested rows; handy in tests.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return shape_err("ragged rows");
        }
        Self::from_fn(&[r, c], |i| rows[i[0]][i[1]])
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_fn(&[n, n], |i| if i[0] == i[1] { 1.0 } else { 0.0 })
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn offset(&self, idx: &[usize]) -> Result<usize> {
        linear_offset(&self.dims, idx)
    }

    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.data[self.offset(idx)?])
    }

    pub fn set(&mut self, idx: &[usize], v: f64) -> Result<()> {
        let off = self.offset(idx)?;
        self.data[off] = v;
        Ok(())
    }

    /// Reinterpret the buffer under new extents with the same element count.
    pub fn reshape(self, dims: &[usize]) -> Result<Self> {
        Self::from_vec(dims, self.data)
    }

    /// View an order-2 tensor as a matrix.
    pub fn as_matrix(&self) -> Result<MatView<'_>> {
        if self.order() != 2 {
            return shape_err(format!("expected a matrix, got order {}", self.order()));
        }
        Ok(MatView {
            rows: self.dims[0],
            cols: self.dims[1],
            data: &self.data,
        })
    }

    /// Copy the box `start .. start + extents` into a new tensor.
    pub fn subtensor(&self, start: &[usize], extents: &[usize]) -> Result<Self> {
        if start.len() != self.order()
            || extents.len() != self.order()
            || start
                .iter()
                .zip(extents)
                .zip(&self.dims)
                .any(|((&s, &e), &d)| s + e > d)
        {
            return Err(Error::Range {
                index: start.to_vec(),
                extents: self.dims.clone(),
            });
        }
        let src_strides = strides(&self.dims);
        let base: usize = start.iter().zip(&src_strides).map(|(a, b)| a * b).sum();
        Self::from_fn(extents, |i| {
            let off: usize = i.iter().zip(&src_strides).map(|(a, b)| a * b).sum();
            self.data[base + off]
        })
    }

    /// Write `block` into the box starting at `start`.
    pub fn write_subtensor(&mut self, start: &[usize], block: &DenseTensor) -> Result<()> {
        if start.len() != self.order()
            || block.order() != self.order()
            || start
                .iter()
                .zip(block.dims())
                .zip(&self.dims)
                .any(|((&s, &e), &d)| s + e > d)
        {
            return Err(Error::Range {
                index: start.to_vec(),
                extents: self.dims.clone(),
            });
        }
        let dst_strides = strides(&self.dims);
        let base: usize = start.iter().zip(&dst_strides).map(|(a, b)| a * b).sum();
        let mut idx = vec![0; block.order()];
        for &v in &block.data {
            let off: usize = idx.iter().zip(&dst_strides).map(|(a, b)| a * b).sum();
            self.data[base + off] = v;
            next_index(block.dims(), &mut idx);
        }
        Ok(())
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Max absolute difference normalized by the largest entry of `reference`.
///
/// Falls back to the absolute difference when the reference is identically
/// zero.
pub fn max_rel_error(value: &DenseTensor, reference: &DenseTensor) -> f64 {
    if value.dims() != reference.dims() {
        return f64::INFINITY;
    }
    let diff = value
        .data()
        .iter()
        .zip(reference.data())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = reference.max_abs();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// A bijection on mode indices `0..m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; mapping.len()];
        for &p in &mapping {
            if p >= mapping.len() || seen[p] {
                return Err(Error::InvalidPermutation(mapping));
            }
            seen[p] = true;
        }
        Ok(Self(mapping))
    }

    pub fn identity(m: usize) -> Self {
        Self((0..m).collect())
    }

    /// `{k, 0, ..., k-1, k+1, ..., m-1}`: brings mode `k` to the front.
    pub fn mode_to_front(m: usize, k: usize) -> Self {
        let mut v = Vec::with_capacity(m);
        v.push(k);
        v.extend((0..m).filter(|&j| j != k));
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(k, &p)| k == p)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (k, &p) in self.0.iter().enumerate() {
            inv[p] = k;
        }
        Self(inv)
    }

    /// The permutation equal to permuting by `self` and then by `then`.
    pub fn then(&self, then: &Permutation) -> Self {
        Self(then.0.iter().map(|&k| self.0[k]).collect())
    }

    /// Extend with fixed points up to length `m`.
    pub fn extend_identity(&self, m: usize) -> Self {
        let mut v = self.0.clone();
        v.extend(self.0.len()..m);
        Self(v)
    }

    /// Re-order `idx` so that `out[k] = idx[self[k]]`.
    pub fn apply<T: Copy>(&self, idx: &[T]) -> Vec<T> {
        self.0.iter().map(|&k| idx[k]).collect()
    }
}

/// `permute(t, p)`: the result has extents `(I_{p_0}, ..., I_{p_{m-1}})`
/// and holds `t[i]` at `i'` with `i'_k = i_{p_k}`.
pub fn permute(t: &DenseTensor, p: &Permutation) -> Result<DenseTensor> {
    permute_counted(t, p, &mut OpCounter::new())
}

/// [`permute`] charging one read and one write per element to `counter`.
pub fn permute_counted(
    t: &DenseTensor,
    p: &Permutation,
    counter: &mut OpCounter,
) -> Result<DenseTensor> {
    if p.len() != t.order() {
        return shape_err(format!(
            "permutation of length {} applied to order-{} tensor",
            p.len(),
            t.order()
        ));
    }
    counter.add_memops(2 * t.len() as u128);
    if p.is_identity() {
        return Ok(t.clone());
    }
    let src_strides = strides(t.dims());
    let dims = p.apply(t.dims());
    let pstrides = p.apply(&src_strides);
    let mut out = Vec::with_capacity(t.len());
    gather(&dims, &pstrides, t.data(), &mut out);
    Ok(DenseTensor { dims, data: out })
}

// Walk `dims` in dimensional order, reading `src` through `src_strides`.
fn gather(dims: &[usize], src_strides: &[usize], src: &[f64], out: &mut Vec<f64>) {
    let m = dims.len();
    let d0 = dims[0];
    let s0 = src_strides[0];
    let mut idx = vec![0usize; m];
    let mut base = 0usize;
    loop {
        for i in 0..d0 {
            out.push(src[base + i * s0]);
        }
        // advance modes 1.. and maintain base offset
        let mut k = 1;
        loop {
            if k == m {
                return;
            }
            idx[k] += 1;
            base += src_strides[k];
            if idx[k] < dims[k] {
                break;
            }
            base -= src_strides[k] * dims[k];
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Inverse of [`permute`]: `ipermute(permute(t, p), p) == t`.
pub fn ipermute(t: &DenseTensor, p: &Permutation) -> Result<DenseTensor> {
    permute(t, &p.inverse())
}

pub fn ipermute_counted(
    t: &DenseTensor,
    p: &Permutation,
    counter: &mut OpCounter,
) -> Result<DenseTensor> {
    permute_counted(t, &p.inverse(), counter)
}

/// Borrowed column-major matrix.
#[derive(Debug, Clone, Copy)]
pub struct MatView<'a> {
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

impl<'a> MatView<'a> {
    pub fn new(rows: usize, cols: usize, data: &'a [f64]) -> Result<Self> {
        if rows * cols != data.len() {
            return shape_err(format!(
                "{rows}x{cols} matrix needs {} elements, got {}",
                rows * cols,
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r + c * self.rows]
    }
}

/// Group modes `0..r` into rows and `r..m` into columns without moving data.
pub fn group_modes(t: &DenseTensor, r: usize) -> Result<MatView<'_>> {
    if r == 0 || r >= t.order() {
        return shape_err(format!(
            "split {r} out of range for order-{} tensor",
            t.order()
        ));
    }
    let rows = t.dims[..r].iter().product();
    let cols = t.dims[r..].iter().product();
    MatView::new(rows, cols, &t.data)
}

/// Matrix-multiply backend. Operands are contiguous column-major buffers.
pub trait GemmKernel {
    /// `c := a * b` (or `c += a * b` when `accumulate`), with `a` of shape
    /// `m x k`, `b` of shape `k x n` and `c` of shape `m x n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        &self,
        m: usize,
        n: usize,
        k: usize,
        a: &[f64],
        b: &[f64],
        c: &mut [f64],
        accumulate: bool,
    );
}

/// Plain triple loop. Each `c[i, j]` accumulates over `k` in ascending order.
#[derive(Debug, Default, Clone, Copy)]
pub struct ReferenceGemm;

impl GemmKernel for ReferenceGemm {
    fn gemm(
        &self,
        m: usize,
        n: usize,
        k: usize,
        a: &[f64],
        b: &[f64],
        c: &mut [f64],
        accumulate: bool,
    ) {
        debug_assert_eq!(a.len(), m * k);
        debug_assert_eq!(b.len(), k * n);
        debug_assert_eq!(c.len(), m * n);
        if !accumulate {
            c.fill(0.0);
        }
        for j in 0..n {
            let ccol = &mut c[j * m..(j + 1) * m];
            for l in 0..k {
                let blj = b[l + j * k];
                let acol = &a[l * m..(l + 1) * m];
                for (ci, &ai) in ccol.iter_mut().zip(acol) {
                    *ci += ai * blj;
                }
            }
        }
    }
}

/// `a * b` with the reference kernel; the result is an order-2 tensor.
pub fn matmul_ref(a: MatView<'_>, b: MatView<'_>) -> Result<DenseTensor> {
    matmul_with(&ReferenceGemm, a, b, &mut OpCounter::new())
}

pub fn matmul_with<K: GemmKernel + ?Sized>(
    kernel: &K,
    a: MatView<'_>,
    b: MatView<'_>,
    counter: &mut OpCounter,
) -> Result<DenseTensor> {
    if a.cols != b.rows {
        return shape_err(format!(
            "inner dimensions disagree: {}x{} times {}x{}",
            a.rows, a.cols, b.rows, b.cols
        ));
    }
    let mut c = DenseTensor::zeros(&[a.rows, b.cols])?;
    kernel.gemm(a.rows, b.cols, a.cols, a.data, b.data, &mut c.data, false);
    counter.add_flops(2 * (a.rows * b.cols * a.cols) as u128);
    Ok(c)
}

/// `t x_k b` for `b` of shape `J x I_k`: permute mode `k` to the front, view
/// as an `I_k x (rest)` matrix, multiply by `b`, and permute back.
pub fn mode_multiply(t: &DenseTensor, k: usize, b: MatView<'_>) -> Result<DenseTensor> {
    mode_multiply_with(&ReferenceGemm, t, k, b, &mut OpCounter::new())
}

pub fn mode_multiply_counted(
    t: &DenseTensor,
    k: usize,
    b: MatView<'_>,
    counter: &mut OpCounter,
) -> Result<DenseTensor> {
    mode_multiply_with(&ReferenceGemm, t, k, b, counter)
}

pub fn mode_multiply_with<K: GemmKernel + ?Sized>(
    kernel: &K,
    t: &DenseTensor,
    k: usize,
    b: MatView<'_>,
    counter: &mut OpCounter,
) -> Result<DenseTensor> {
    let m = t.order();
    if k >= m {
        return Err(Error::Mode { mode: k, order: m });
    }
    if b.cols != t.dims[k] {
        return shape_err(format!(
            "matrix has {} columns but mode {k} has extent {}",
            b.cols, t.dims[k]
        ));
    }
    let front = Permutation::mode_to_front(m, k);
    let pa = permute_counted(t, &front, counter)?;
    let rest = pa.len() / t.dims[k];
    let a = MatView::new(t.dims[k], rest, &pa.data)?;
    let c = matmul_with(kernel, b, a, counter)?;
    let mut pc_dims = pa.dims.clone();
    pc_dims[0] = b.rows;
    let pc = c.reshape(&pc_dims)?;
    ipermute_counted(&pc, &front, counter)
}
