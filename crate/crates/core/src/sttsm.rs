//! The change-of-basis kernel `C := [A; X, ..., X]` for symmetric `A`.
//!
//! Entry `C[j_0, ..., j_{m-1}] = sum_i A[i_0, ..., i_{m-1}] X[j_0, i_0] ... X[j_{m-1}, i_{m-1}]`
//! with `A` of extent `n` in every mode and `X` of shape `p x n`.
//!
//! Four routes are provided:
//!
//! * [`sttsm_naive`]: every unique output entry summed over the full input box.
//! * [`sttsm_scalar_temps`]: one output entry at a time, reusing vector
//!   temporaries across loop levels.
//! * [`sttsm_dense_ttm`]: `m` dense mode products, ignoring symmetry.
//! * [`sttsm_bcss`]: algorithm-by-blocks on blocked compact storage. For
//!   nondecreasing output block indices `j̄_1 <= ... <= j̄_{m-1}` it forms
//!   `T^(m-1) = A x_{m-1} X[j̄_{m-1}, :]`, then
//!   `T^(k) = T^(k+1) x_k X[j̄_k, :]`, and finally each unique output block
//!   `C[j̄_0, ..., j̄_{m-1}] = T^(1) x_0 X[j̄_0, :]` for `j̄_0 <= j̄_1`.
//!   `T^(k)` is symmetric in modes `0..k`, so by default only its
//!   canonical blocks are computed and stored.

use crate::bcss::{BcssTensor, BlockGrid, PartialSymTensor};
use crate::counter::OpCounter;
use crate::dense::{
    ipermute_counted, mode_multiply_counted, next_index, permute_counted, strides, DenseTensor,
    GemmKernel, MatView, Permutation, ReferenceGemm,
};
use crate::error::{shape_err, Error, Result};
use crate::sym_index::hypertriangle_iter;

fn check_operands(a_dims: &[usize], x: &MatView<'_>) -> Result<(usize, usize, usize)> {
    let m = a_dims.len();
    if m < 2 {
        return Err(Error::Parameter(format!(
            "tensor order must be at least 2, got {m}"
        )));
    }
    let n = a_dims[0];
    if a_dims.iter().any(|&d| d != n) {
        return shape_err(format!("input needs equal extents, got {a_dims:?}"));
    }
    if x.cols != n {
        return shape_err(format!(
            "X is {}x{} but the tensor has extent {n}",
            x.rows, x.cols
        ));
    }
    if x.rows == 0 {
        return shape_err("X has no rows");
    }
    Ok((m, n, x.rows))
}

/// Copy `out[j] = out[sort(j)]` for every non-sorted `j`.
fn replicate_from_sorted(out: &mut DenseTensor) {
    let dims = out.dims().to_vec();
    let st = strides(&dims);
    let mut idx = vec![0; dims.len()];
    let mut sorted = idx.clone();
    for off in 0..out.len() {
        sorted.copy_from_slice(&idx);
        sorted.sort_unstable();
        let src: usize = sorted.iter().zip(&st).map(|(a, b)| a * b).sum();
        if src != off {
            out.data_mut()[off] = out.data()[src];
        }
        next_index(&dims, &mut idx);
    }
}

/// Each unique entry (`j` nondecreasing) computed directly from its
/// defining sum, then replicated.
pub fn sttsm_naive(a: &DenseTensor, x: MatView<'_>) -> Result<DenseTensor> {
    sttsm_naive_counted(a, x, &mut OpCounter::new())
}

/// [`sttsm_naive`] charging `m + 1` flops per summand (m multiplies, one add).
pub fn sttsm_naive_counted(
    a: &DenseTensor,
    x: MatView<'_>,
    counter: &mut OpCounter,
) -> Result<DenseTensor> {
    let (m, _, p) = check_operands(a.dims(), &x)?;
    let mut out = DenseTensor::zeros(&vec![p; m])?;
    let out_strides = strides(out.dims());
    for j in hypertriangle_iter(p, m) {
        let v = naive_entry(a, &x, &j);
        let off: usize = j.iter().zip(&out_strides).map(|(a, b)| a * b).sum();
        out.data_mut()[off] = v;
        counter.add_flops((m as u128 + 1) * a.len() as u128);
    }
    replicate_from_sorted(&mut out);
    Ok(out)
}

/// Every entry of the `p^m` output computed independently from the full
/// nested sum; the strictest and slowest oracle.
pub fn sttsm_naive_full(a: &DenseTensor, x: MatView<'_>) -> Result<DenseTensor> {
    let (m, _, p) = check_operands(a.dims(), &x)?;
    DenseTensor::from_fn(&vec![p; m], |j| naive_entry(a, &x, j))
}

fn naive_entry(a: &DenseTensor, x: &MatView<'_>, j: &[usize]) -> f64 {
    let dims = a.dims();
    let mut i = vec![0; dims.len()];
    let mut acc = 0.0;
    for &alpha in a.data() {
        let mut term = alpha;
        for (&jk, &ik) in j.iter().zip(&i) {
            term *= x.get(jk, ik);
        }
        acc += term;
        next_index(dims, &mut i);
    }
    acc
}

/// Scalar loop nest with temporaries: for each `j_{m-1}` form the order
/// `m-1` tensor `A x_{m-1} x_{j_{m-1}}`, then contract one mode per level
/// for nondecreasing `j_{m-2} <= j_{m-1}` and so on.
pub fn sttsm_scalar_temps(a: &DenseTensor, x: MatView<'_>) -> Result<DenseTensor> {
    sttsm_scalar_temps_counted(a, x, &mut OpCounter::new())
}

pub fn sttsm_scalar_temps_counted(
    a: &DenseTensor,
    x: MatView<'_>,
    counter: &mut OpCounter,
) -> Result<DenseTensor> {
    let (m, n, p) = check_operands(a.dims(), &x)?;
    // temps[k] holds T^(k), the n^k entries left after contracting modes k..m
    let mut temps: Vec<Vec<f64>> = (0..m).map(|k| vec![0.0; n.pow(k as u32)]).collect();
    let mut out = DenseTensor::zeros(&vec![p; m])?;
    let out_strides = strides(out.dims());
    let mut j = vec![0; m];
    scalar_level(
        a.data(),
        m - 1,
        p - 1,
        n,
        &x,
        &mut temps,
        &mut j,
        &mut out,
        &out_strides,
        counter,
    );
    replicate_from_sorted(&mut out);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn scalar_level(
    a: &[f64],
    k: usize,
    bound: usize,
    n: usize,
    x: &MatView<'_>,
    temps: &mut [Vec<f64>],
    j: &mut [usize],
    out: &mut DenseTensor,
    out_strides: &[usize],
    counter: &mut OpCounter,
) {
    for jk in 0..=bound {
        j[k] = jk;
        // the slowest mode of the source is the one being contracted
        let (lo, hi) = temps.split_at_mut(k + 1);
        let src: &[f64] = if k + 1 == hi.len() + lo.len() {
            a
        } else {
            &hi[0]
        };
        let dst = &mut lo[k];
        let slice = dst.len();
        dst.fill(0.0);
        for l in 0..n {
            let xl = x.get(jk, l);
            for (d, &s) in dst.iter_mut().zip(&src[l * slice..(l + 1) * slice]) {
                *d += xl * s;
            }
        }
        counter.add_flops(2 * (slice * n) as u128);
        if k == 0 {
            let off: usize = j.iter().zip(out_strides).map(|(a, b)| a * b).sum();
            out.data_mut()[off] = lo[0][0];
        } else {
            scalar_level(a, k - 1, jk, n, x, temps, j, out, out_strides, counter);
        }
    }
}

/// `A x_{m-1} X ... x_1 X x_0 X` through [`mode_multiply_counted`].
///
/// Modes are processed from `m-1` down to `0`, the order the blocked
/// kernel visits them, so a single-block run reproduces this result exactly.
pub fn sttsm_dense_ttm(a: &DenseTensor, x: MatView<'_>) -> Result<DenseTensor> {
    sttsm_dense_ttm_counted(a, x, &mut OpCounter::new())
}

pub fn sttsm_dense_ttm_counted(
    a: &DenseTensor,
    x: MatView<'_>,
    counter: &mut OpCounter,
) -> Result<DenseTensor> {
    let m = a.order();
    if m < 2 {
        return Err(Error::Parameter(format!(
            "tensor order must be at least 2, got {m}"
        )));
    }
    if a.dims().iter().any(|&d| d != x.cols) {
        return shape_err(format!(
            "X is {}x{} but the tensor has dims {:?}",
            x.rows,
            x.cols,
            a.dims()
        ));
    }
    let mut t = mode_multiply_counted(a, m - 1, x, counter)?;
    for k in (0..m - 1).rev() {
        t = mode_multiply_counted(&t, k, x, counter)?;
    }
    Ok(t)
}

/// Behaviour switches for [`sttsm_bcss_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BcssOptions {
    /// Store and compute only canonical blocks of each temporary `T^(k)`.
    /// When off, temporaries are dense and formed by full mode products.
    pub exploit_partial_symmetry: bool,
}

impl Default for BcssOptions {
    fn default() -> Self {
        Self {
            exploit_partial_symmetry: true,
        }
    }
}

/// A temporary as materialized inside the blocked kernel.
#[derive(Debug, Clone, Copy)]
pub enum Temporary<'a> {
    Partial(&'a PartialSymTensor),
    Dense(&'a DenseTensor),
}

impl Temporary<'_> {
    pub fn to_dense(&self) -> DenseTensor {
        match self {
            Temporary::Partial(t) => t.decompress_partial(),
            Temporary::Dense(t) => (*t).clone(),
        }
    }
}

/// Emitted after each temporary `T^(level)` is formed.
#[derive(Debug, Clone, Copy)]
pub struct TemporaryEvent<'a> {
    /// `k` in `T^(k)`; the temporary is symmetric in modes `0..k`.
    pub level: usize,
    /// Output block indices `j̄_k, ..., j̄_{m-1}` fixed so far.
    pub fixed: &'a [usize],
    pub temp: Temporary<'a>,
}

/// Blocked kernel with partially symmetric temporaries; `b_c` is the block
/// dimension of the output and must divide `p`.
pub fn sttsm_bcss(a: &BcssTensor, x: MatView<'_>, b_c: usize) -> Result<BcssTensor> {
    sttsm_bcss_with(
        a,
        x,
        b_c,
        BcssOptions::default(),
        &mut OpCounter::new(),
        |_| {},
    )
}

pub fn sttsm_bcss_with(
    a: &BcssTensor,
    x: MatView<'_>,
    b_c: usize,
    opts: BcssOptions,
    counter: &mut OpCounter,
    mut observer: impl FnMut(&TemporaryEvent<'_>),
) -> Result<BcssTensor> {
    let m = a.order();
    let (_, n, p) = check_operands(&vec![a.dim(); m], &x)?;
    let b_a = a.block_dim();
    if b_c == 0 || p % b_c != 0 {
        return Err(Error::BlockDivisibility { dim: p, block: b_c });
    }
    let nbar = a.grid_extent();
    let pbar = p / b_c;
    let mut ctx = Ctx {
        m,
        n,
        b_a,
        b_c,
        nbar,
        xblocks: x_blocks(&x, b_a, b_c)?,
        xrows: x_row_panels(&x, b_c)?,
        kernel: ReferenceGemm,
        fixed: vec![0; m],
        out: BcssTensor::zeros(m, p, b_c)?,
        counter,
    };
    if opts.exploit_partial_symmetry {
        let mut temps: Vec<PartialSymTensor> = Vec::with_capacity(m);
        for k in 0..m {
            // slot 0 is unused; T^(0) blocks go straight to the output
            let s = k.max(1);
            temps.push(PartialSymTensor::zeros(s, n, b_a, &vec![b_c; m - s])?);
        }
        ctx.partial_level(&a.grid, &mut temps, m - 1, pbar - 1, &mut observer)?;
    } else {
        let mut temps: Vec<Option<DenseTensor>> = vec![None; m];
        ctx.dense_level(&a.grid, &mut temps, m - 1, pbar - 1, &mut observer)?;
    }
    Ok(ctx.out)
}

/// `X[j̄ b_c.., ī b_a..]` blocks indexed `[j̄][ī]`.
fn x_blocks(x: &MatView<'_>, b_a: usize, b_c: usize) -> Result<Vec<Vec<DenseTensor>>> {
    (0..x.rows / b_c)
        .map(|jb| {
            (0..x.cols / b_a)
                .map(|ib| {
                    DenseTensor::from_fn(&[b_c, b_a], |e| x.get(jb * b_c + e[0], ib * b_a + e[1]))
                })
                .collect()
        })
        .collect()
}

/// Row panels `X[j̄ b_c.., :]`.
fn x_row_panels(x: &MatView<'_>, b_c: usize) -> Result<Vec<DenseTensor>> {
    (0..x.rows / b_c)
        .map(|jb| DenseTensor::from_fn(&[b_c, x.cols], |e| x.get(jb * b_c + e[0], e[1])))
        .collect()
}

struct Ctx<'c> {
    m: usize,
    n: usize,
    b_a: usize,
    b_c: usize,
    nbar: usize,
    xblocks: Vec<Vec<DenseTensor>>,
    xrows: Vec<DenseTensor>,
    kernel: ReferenceGemm,
    fixed: Vec<usize>,
    out: BcssTensor,
    counter: &'c mut OpCounter,
}

impl Ctx<'_> {
    /// Block `key` (length `k`, the symmetric part) of `src x_k X[j̄, :]`,
    /// summing over the `n̄` blocks along mode `k`.
    ///
    /// Each source block is fetched from its stored representative and
    /// brought to mode-`k`-first layout in one permutation; the products
    /// accumulate in that layout and are permuted back once.
    fn contract_block(
        &mut self,
        src: &BlockGrid,
        key: &[usize],
        k: usize,
        jbar: usize,
    ) -> Result<DenseTensor> {
        let front = Permutation::mode_to_front(self.m, k);
        let mut full = key.to_vec();
        full.push(0);
        let mut acc: Vec<f64> = Vec::new();
        let mut acc_dims: Vec<usize> = Vec::new();
        for ib in 0..self.nbar {
            full[k] = ib;
            let (slot, perm) = src.locate(&full)?;
            let composite = perm.then(&front);
            let moved = permute_counted(src.block(slot), &composite, self.counter)?;
            let rest = moved.len() / self.b_a;
            if ib == 0 {
                acc = vec![0.0; self.b_c * rest];
                acc_dims = moved.dims().to_vec();
                acc_dims[0] = self.b_c;
            }
            self.kernel.gemm(
                self.b_c,
                rest,
                self.b_a,
                self.xblocks[jbar][ib].data(),
                moved.data(),
                &mut acc,
                ib > 0,
            );
            self.counter
                .add_flops(2 * (self.b_c * rest * self.b_a) as u128);
        }
        let acc = DenseTensor::from_vec(&acc_dims, acc)?;
        ipermute_counted(&acc, &front, self.counter)
    }

    fn store_output(&mut self, block: DenseTensor) -> Result<()> {
        *self.out.stored_block_mut(&self.fixed)? = block;
        Ok(())
    }

    fn partial_level(
        &mut self,
        a: &BlockGrid,
        temps: &mut [PartialSymTensor],
        k: usize,
        bound: usize,
        observer: &mut impl FnMut(&TemporaryEvent<'_>),
    ) -> Result<()> {
        for jbar in 0..=bound {
            self.fixed[k] = jbar;
            let (lo, hi) = temps.split_at_mut(k + 1);
            let src = if k + 1 == self.m { a } else { &hi[0].grid };
            if k == 0 {
                let block = self.contract_block(src, &[], 0, jbar)?;
                self.store_output(block)?;
                continue;
            }
            let dst = &mut lo[k];
            for (slot, key) in hypertriangle_iter(self.nbar, k).enumerate() {
                let block = self.contract_block(src, &key, k, jbar)?;
                *dst.grid.block_mut(slot) = block;
            }
            observer(&TemporaryEvent {
                level: k,
                fixed: &self.fixed[k..],
                temp: Temporary::Partial(&lo[k]),
            });
            self.partial_level(a, temps, k - 1, jbar, observer)?;
        }
        Ok(())
    }

    fn dense_level(
        &mut self,
        a: &BlockGrid,
        temps: &mut [Option<DenseTensor>],
        k: usize,
        bound: usize,
        observer: &mut impl FnMut(&TemporaryEvent<'_>),
    ) -> Result<()> {
        for jbar in 0..=bound {
            self.fixed[k] = jbar;
            let t = if k + 1 == self.m {
                self.first_dense_temp(a, jbar)?
            } else {
                let src = temps[k + 1].as_ref().expect("outer level formed");
                let panel = self.xrows[jbar].as_matrix()?;
                mode_multiply_counted(src, k, panel, self.counter)?
            };
            if k == 0 {
                self.store_output(t)?;
                continue;
            }
            temps[k] = Some(t);
            observer(&TemporaryEvent {
                level: k,
                fixed: &self.fixed[k..],
                temp: Temporary::Dense(temps[k].as_ref().unwrap()),
            });
            self.dense_level(a, temps, k - 1, jbar, observer)?;
        }
        Ok(())
    }

    /// `A x_{m-1} X[j̄, :]` with every block of the result computed.
    fn first_dense_temp(&mut self, a: &BlockGrid, jbar: usize) -> Result<DenseTensor> {
        let k = self.m - 1;
        let mut dims = vec![self.n; k];
        dims.push(self.b_c);
        if k == 0 {
            return self.contract_block(a, &[], 0, jbar);
        }
        let mut t = DenseTensor::zeros(&dims)?;
        let grid_dims = vec![self.nbar; k];
        let mut key = vec![0; k];
        loop {
            let block = self.contract_block(a, &key, k, jbar)?;
            let mut start: Vec<usize> = key.iter().map(|&i| i * self.b_a).collect();
            start.push(0);
            t.write_subtensor(&start, &block)?;
            self.counter.add_memops(2 * block.len() as u128);
            if !next_index(&grid_dims, &mut key) {
                break;
            }
        }
        Ok(t)
    }
}

/// Average every entry over all permutations of its index.
///
/// Each orbit is averaged once, in a fixed order, and written to all of its
/// members, so the result is exactly symmetric.
pub fn symmetrize(t: &DenseTensor) -> Result<DenseTensor> {
    let m = t.order();
    let n = t.dims()[0];
    if t.dims().iter().any(|&d| d != n) {
        return shape_err(format!(
            "symmetrize needs equal extents, got {:?}",
            t.dims()
        ));
    }
    let perms = all_permutations(m);
    let mut out = DenseTensor::zeros(t.dims())?;
    let st = strides(t.dims());
    for key in hypertriangle_iter(n, m) {
        let sum: f64 = perms
            .iter()
            .map(|p| {
                let off: usize = p.apply(&key).iter().zip(&st).map(|(a, b)| a * b).sum();
                t.data()[off]
            })
            .sum();
        let off: usize = key.iter().zip(&st).map(|(a, b)| a * b).sum();
        out.data_mut()[off] = sum / perms.len() as f64;
    }
    replicate_from_sorted(&mut out);
    Ok(out)
}

/// All permutations of `0..m` in lexicographic order.
pub(crate) fn all_permutations(m: usize) -> Vec<Permutation> {
    let mut cur: Vec<usize> = (0..m).collect();
    let mut out = vec![Permutation::identity(m)];
    loop {
        let Some(i) = (1..m).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..m).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(Permutation::new(cur.clone()).unwrap());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{matmul_ref, max_rel_error, permute};
    use crate::random::{random_matrix, random_symmetric};
    use crate::sym_index::is_sym_in_modes;

    fn xat(x: &DenseTensor) -> MatView<'_> {
        x.as_matrix().unwrap()
    }

    /// X A X^T through the reference matmul.
    fn xaxt(a: &DenseTensor, x: &DenseTensor) -> DenseTensor {
        let ax = matmul_ref(
            a.as_matrix().unwrap(),
            permute(x, &Permutation::new(vec![1, 0]).unwrap())
                .unwrap()
                .as_matrix()
                .unwrap(),
        )
        .unwrap();
        matmul_ref(x.as_matrix().unwrap(), ax.as_matrix().unwrap()).unwrap()
    }

    #[test]
    fn permutations_enumerated() {
        let p = all_permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[1].as_slice(), &[0, 2, 1]);
        assert_eq!(p[5].as_slice(), &[2, 1, 0]);
        assert_eq!(all_permutations(1).len(), 1);
    }

    #[test]
    fn naive_identity_and_gram() {
        let a = random_symmetric(3, 3, 1);
        let id = DenseTensor::identity(3).unwrap();
        assert_eq!(sttsm_naive(&a, xat(&id)).unwrap(), a);

        let x = random_matrix(4, 3, 2);
        let c = sttsm_naive(&id, xat(&x)).unwrap();
        let gram = xaxt(&id, &x);
        assert!(max_rel_error(&c, &gram) < 1e-14);
    }

    #[test]
    fn naive_matches_full_nest_and_dense() {
        let a = random_symmetric(3, 2, 3);
        let x = random_matrix(2, 2, 4);
        let c = sttsm_naive(&a, xat(&x)).unwrap();
        assert!(max_rel_error(&c, &sttsm_naive_full(&a, xat(&x)).unwrap()) < 1e-15);
        assert!(max_rel_error(&c, &sttsm_dense_ttm(&a, xat(&x)).unwrap()) < 1e-12);
    }

    #[test]
    fn order_one_rejected() {
        let a = DenseTensor::zeros(&[3]).unwrap();
        let x = random_matrix(2, 3, 0);
        assert!(matches!(sttsm_naive(&a, xat(&x)), Err(Error::Parameter(_))));
        assert!(matches!(
            sttsm_dense_ttm(&a, xat(&x)),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = random_symmetric(2, 3, 0);
        let x = random_matrix(2, 4, 0);
        assert!(matches!(sttsm_naive(&a, xat(&x)), Err(Error::Shape(_))));
        assert!(matches!(
            sttsm_scalar_temps(&a, xat(&x)),
            Err(Error::Shape(_))
        ));
        assert!(matches!(sttsm_dense_ttm(&a, xat(&x)), Err(Error::Shape(_))));
        let ab = BcssTensor::compress(&a, 1, 0.0).unwrap();
        assert!(matches!(sttsm_bcss(&ab, xat(&x), 1), Err(Error::Shape(_))));
        let x = random_matrix(3, 3, 0);
        assert!(matches!(
            sttsm_bcss(&ab, xat(&x), 2),
            Err(Error::BlockDivisibility { .. })
        ));
    }

    #[test]
    fn scalar_temps_cases() {
        let a = random_symmetric(2, 4, 5);
        let id = DenseTensor::identity(4).unwrap();
        assert!(max_rel_error(&sttsm_scalar_temps(&a, xat(&id)).unwrap(), &a) < 1e-15);

        let x = random_matrix(3, 4, 6);
        let c = sttsm_scalar_temps(&a, xat(&x)).unwrap();
        assert!(max_rel_error(&c, &xaxt(&a, &x)) < 1e-12);

        let a = random_symmetric(4, 3, 7);
        let x = random_matrix(2, 3, 8);
        let c = sttsm_scalar_temps(&a, xat(&x)).unwrap();
        assert!(max_rel_error(&c, &sttsm_naive(&a, xat(&x)).unwrap()) < 1e-12);
    }

    #[test]
    fn scalar_temps_flops() {
        // each level contracts n^(k+1) entries once per nondecreasing tuple
        let (m, n, p) = (3usize, 4usize, 2usize);
        let a = random_symmetric(m, n, 1);
        let x = random_matrix(p, n, 2);
        let mut ctr = OpCounter::new();
        sttsm_scalar_temps_counted(&a, xat(&x), &mut ctr).unwrap();
        // tuples: 2, C(3,2)=3, C(4,3)=4
        assert_eq!(ctr.flops, (2 * 2 * 64 + 2 * 3 * 16 + 2 * 4 * 4) as u128);
    }

    #[test]
    fn dense_ttm_cases() {
        let a = random_symmetric(3, 4, 9);
        let id = DenseTensor::identity(4).unwrap();
        assert_eq!(sttsm_dense_ttm(&a, xat(&id)).unwrap(), a);

        let a2 = random_symmetric(2, 4, 10);
        let x = random_matrix(3, 4, 11);
        assert!(max_rel_error(&sttsm_dense_ttm(&a2, xat(&x)).unwrap(), &xaxt(&a2, &x)) < 1e-12);

        let x = random_matrix(2, 4, 12);
        let mut ctr = OpCounter::new();
        sttsm_dense_ttm_counted(&a, xat(&x), &mut ctr).unwrap();
        assert_eq!(ctr.flops, 448);
    }

    #[test]
    fn bcss_matches_naive_small() {
        for m in 2..=4 {
            for n in [4, 6] {
                let a = random_symmetric(m, n, 100 + m as u64);
                let x = random_matrix(n, n, 200 + n as u64);
                let reference = sttsm_naive(&a, xat(&x)).unwrap();
                for b in [1, 2] {
                    let ab = BcssTensor::compress(&a, b, 0.0).unwrap();
                    let c = sttsm_bcss(&ab, xat(&x), b).unwrap();
                    assert_eq!(
                        c.num_blocks() as u128,
                        crate::sym_index::simplex_count(n / b, m).unwrap()
                    );
                    let err = max_rel_error(&c.decompress(), &reference);
                    assert!(err <= 1e-10, "m={m} n={n} b={b} err={err}");
                }
            }
        }
    }

    #[test]
    fn bcss_single_block_is_dense_ttm() {
        for m in 2..=4 {
            let a = random_symmetric(m, 4, 30);
            let x = random_matrix(3, 4, 31);
            let ab = BcssTensor::compress(&a, 4, 0.0).unwrap();
            for exploit in [true, false] {
                let c = sttsm_bcss_with(
                    &ab,
                    xat(&x),
                    3,
                    BcssOptions {
                        exploit_partial_symmetry: exploit,
                    },
                    &mut OpCounter::new(),
                    |_| {},
                )
                .unwrap();
                assert_eq!(c.num_blocks(), 1);
                assert_eq!(c.decompress(), sttsm_dense_ttm(&a, xat(&x)).unwrap());
            }
        }
    }

    #[test]
    fn bcss_rectangular_blocks() {
        // b_A != b_C and n != p
        let a = random_symmetric(3, 6, 40);
        let x = random_matrix(4, 6, 41);
        let reference = sttsm_naive(&a, xat(&x)).unwrap();
        let ab = BcssTensor::compress(&a, 3, 0.0).unwrap();
        for b_c in [1, 2, 4] {
            let c = sttsm_bcss(&ab, xat(&x), b_c).unwrap();
            assert!(max_rel_error(&c.decompress(), &reference) <= 1e-10);
        }
    }

    #[test]
    fn bcss_flops_m2() {
        let a = random_symmetric(2, 4, 1);
        let x = random_matrix(4, 4, 2);
        let ab = BcssTensor::compress(&a, 2, 0.0).unwrap();
        for exploit in [true, false] {
            let mut ctr = OpCounter::new();
            sttsm_bcss_with(
                &ab,
                xat(&x),
                2,
                BcssOptions {
                    exploit_partial_symmetry: exploit,
                },
                &mut ctr,
                |_| {},
            )
            .unwrap();
            assert_eq!(ctr.flops, 224);
        }
    }

    #[test]
    fn observer_sees_every_temporary() {
        let a = random_symmetric(3, 4, 3);
        let x = random_matrix(4, 4, 4);
        let ab = BcssTensor::compress(&a, 2, 0.0).unwrap();
        let mut seen = vec![0usize; 3];
        sttsm_bcss_with(
            &ab,
            xat(&x),
            2,
            BcssOptions::default(),
            &mut OpCounter::new(),
            |e| {
                seen[e.level] += 1;
                let t = e.temp.to_dense();
                let modes: Vec<usize> = (0..e.level).collect();
                assert!(is_sym_in_modes(&t, &modes, 1e-12).unwrap());
            },
        )
        .unwrap();
        // p̄ = 2: level 2 runs 2 times, level 1 runs C(3,2) = 3 times
        assert_eq!(seen, vec![0, 3, 2]);
    }

    #[test]
    fn symmetrize_cases() {
        let a = random_symmetric(3, 3, 5);
        assert!(max_rel_error(&symmetrize(&a).unwrap(), &a) <= 1e-15);

        let m = random_matrix(3, 3, 6);
        let s = symmetrize(&m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = (m.get(&[i, j]).unwrap() + m.get(&[j, i]).unwrap()) / 2.0;
                assert!((s.get(&[i, j]).unwrap() - want).abs() <= 1e-16);
            }
        }

        let t = crate::random::random_dense(&[3, 3, 3], 7);
        let s = symmetrize(&t).unwrap();
        assert!(is_sym_in_modes(&s, &[0, 1, 2], 0.0).unwrap());
        assert!(symmetrize(&random_matrix(2, 3, 0)).is_err());
    }
}
