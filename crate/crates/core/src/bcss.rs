//! Blocked compact symmetric storage.
//!
//! A tensor whose first `s` modes are symmetric (extent `n`, blocked at `b`)
//! is cut into blocks of extent `b` along those modes. Only blocks whose
//! block index is nondecreasing are stored; every other position of the
//! dense `n̄^s` meta-grid (`n̄ = n / b`) records which stored block it
//! aliases and the mode permutation that maps one onto the other. Diagonal
//! blocks are kept fully dense.
//!
//! [`BcssTensor`] covers fully symmetric tensors. [`PartialSymTensor`] adds
//! trailing non-symmetric modes, each held as a single block of its full
//! extent; these are the temporaries of the blocked change-of-basis kernel.

use std::mem::size_of;

use crate::counter::OpCounter;
use crate::dense::{
    linear_offset, next_index, permute, permute_counted, DenseTensor, MultiIndex, Permutation,
};
use crate::error::{shape_err, Error, Result};
use crate::sym_index::{
    canonicalize, hypertriangle_iter, simplex_count, worst_asymmetry, CanonicalRef,
};

/// Largest symmetric-group size the meta-grid can describe.
pub const MAX_SYM_ORDER: usize = 8;

/// One meta-grid record: index of the stored block and the permutation of
/// the symmetric modes taking it to this position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct MetaEntry {
    slot: u32,
    perm: [u8; MAX_SYM_ORDER],
}

impl MetaEntry {
    fn permutation(&self, s: usize) -> Permutation {
        Permutation::new(self.perm[..s].iter().map(|&p| p as usize).collect())
            .expect("meta-grid holds valid permutations")
    }
}

/// Exact storage accounting for a blocked symmetric store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StorageCount {
    /// Doubles held in stored blocks.
    pub payload: u128,
    /// Number of meta-grid records.
    pub meta_entries: u128,
}

impl StorageCount {
    /// Payload plus `meta_words` float-equivalents per meta record.
    pub fn total_with_meta(&self, meta_words: f64) -> f64 {
        self.payload as f64 + meta_words * self.meta_entries as f64
    }
}

/// Bytes taken by one meta-grid record.
pub fn meta_entry_bytes() -> usize {
    size_of::<MetaEntry>()
}

/// Meta-record size of this implementation, in units of one double.
pub fn meta_words_per_entry() -> f64 {
    meta_entry_bytes() as f64 / size_of::<f64>() as f64
}

/// Storage shared by [`BcssTensor`] and [`PartialSymTensor`].
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BlockGrid {
    sym: usize,
    n: usize,
    b: usize,
    grid: usize,
    tail: Vec<usize>,
    blocks: Vec<DenseTensor>,
    meta: Vec<MetaEntry>,
}

fn check_block_dim(n: usize, b: usize) -> Result<usize> {
    if b == 0 || n == 0 || !n.is_multiple_of(b) {
        return Err(Error::BlockDivisibility { dim: n, block: b });
    }
    Ok(n / b)
}

impl BlockGrid {
    fn zeros(sym: usize, n: usize, b: usize, tail: &[usize]) -> Result<Self> {
        if sym > MAX_SYM_ORDER {
            return shape_err(format!(
                "symmetric group of {sym} modes exceeds the supported {MAX_SYM_ORDER}"
            ));
        }
        if tail.contains(&0) {
            return shape_err(format!("zero extent in tail modes {tail:?}"));
        }
        let grid = check_block_dim(n, b)?;
        let count = simplex_count(grid, sym)?;
        if count > u32::MAX as u128 {
            return Err(Error::Overflow("stored block count"));
        }
        let meta_len = grid
            .checked_pow(sym as u32)
            .ok_or(Error::Overflow("meta-grid size"))?;
        let mut block_dims = vec![b; sym];
        block_dims.extend_from_slice(tail);
        let zero = DenseTensor::zeros(&block_dims)?;
        let blocks = vec![zero; count as usize];
        let meta = build_meta(grid, sym, meta_len);
        Ok(Self {
            sym,
            n,
            b,
            grid,
            tail: tail.to_vec(),
            blocks,
            meta,
        })
    }

    pub(crate) fn order(&self) -> usize {
        self.sym + self.tail.len()
    }

    pub(crate) fn block_dims(&self) -> Vec<usize> {
        let mut d = vec![self.b; self.sym];
        d.extend_from_slice(&self.tail);
        d
    }

    fn full_dims(&self) -> Vec<usize> {
        let mut d = vec![self.n; self.sym];
        d.extend_from_slice(&self.tail);
        d
    }

    fn meta_offset(&self, idx: &[usize]) -> Result<usize> {
        linear_offset(&vec![self.grid; self.sym], idx)
    }

    /// Stored slot and the permutation (over all modes) for block `idx`.
    pub(crate) fn locate(&self, idx: &[usize]) -> Result<(usize, Permutation)> {
        let e = self.meta[self.meta_offset(idx)?];
        let perm = e.permutation(self.sym).extend_identity(self.order());
        Ok((e.slot as usize, perm))
    }

    pub(crate) fn slot_of_canonical(&self, key: &[usize]) -> Result<usize> {
        if !crate::sym_index::is_nondecreasing(key) {
            return Err(Error::Parameter(format!(
                "block index {key:?} is not canonical"
            )));
        }
        Ok(self.meta[self.meta_offset(key)?].slot as usize)
    }

    pub(crate) fn block(&self, slot: usize) -> &DenseTensor {
        &self.blocks[slot]
    }

    pub(crate) fn block_mut(&mut self, slot: usize) -> &mut DenseTensor {
        &mut self.blocks[slot]
    }

    fn canonical_ref(&self, idx: &[usize]) -> Result<CanonicalRef> {
        self.meta_offset(idx)?;
        Ok(canonicalize(idx))
    }

    fn block_at(&self, idx: &[usize], counter: &mut OpCounter) -> Result<DenseTensor> {
        let (slot, perm) = self.locate(idx)?;
        if perm.is_identity() {
            Ok(self.blocks[slot].clone())
        } else {
            permute_counted(&self.blocks[slot], &perm, counter)
        }
    }

    fn compress(t: &DenseTensor, sym: usize, b: usize, tail: &[usize], tol: f64) -> Result<Self> {
        let mut grid = Self::zeros(sym, t.dims()[0], b, tail)?;
        if t.dims() != grid.full_dims() {
            return shape_err(format!(
                "tensor dims {:?} do not match {:?}",
                t.dims(),
                grid.full_dims()
            ));
        }
        let modes: Vec<usize> = (0..sym).collect();
        if let Some((index, partner, rel_err)) = worst_asymmetry(t, &modes, tol)? {
            return Err(Error::Asymmetric {
                index,
                partner,
                rel_err,
                tol,
            });
        }
        let extents = grid.block_dims();
        for (slot, key) in hypertriangle_iter(grid.grid, sym).enumerate() {
            let mut start: Vec<usize> = key.iter().map(|&k| k * b).collect();
            start.resize(grid.order(), 0);
            grid.blocks[slot] = t.subtensor(&start, &extents)?;
        }
        Ok(grid)
    }

    fn decompress(&self) -> DenseTensor {
        let mut out = DenseTensor::zeros(&self.full_dims()).expect("validated extents");
        let mut idx = vec![0; self.sym];
        let grid_dims = vec![self.grid; self.sym];
        loop {
            let block = self
                .block_at(&idx, &mut OpCounter::new())
                .expect("index within grid");
            let mut start: Vec<usize> = idx.iter().map(|&k| k * self.b).collect();
            start.resize(self.order(), 0);
            out.write_subtensor(&start, &block)
                .expect("block lies inside tensor");
            if !next_index(&grid_dims, &mut idx) {
                break;
            }
        }
        out
    }

    fn storage(&self) -> StorageCount {
        StorageCount {
            payload: self.blocks.iter().map(|b| b.len() as u128).sum(),
            meta_entries: self.meta.len() as u128,
        }
    }
}

fn build_meta(grid: usize, sym: usize, meta_len: usize) -> Vec<MetaEntry> {
    let mut meta = vec![
        MetaEntry {
            slot: 0,
            perm: [0; MAX_SYM_ORDER],
        };
        meta_len
    ];
    let grid_dims = vec![grid; sym];
    for (slot, key) in hypertriangle_iter(grid, sym).enumerate() {
        let off = linear_offset(&grid_dims, &key).expect("key within grid");
        meta[off].slot = slot as u32;
    }
    let mut idx = vec![0; sym];
    for off in 0..meta_len {
        let r = canonicalize(&idx);
        let canon_off = linear_offset(&grid_dims, &r.canonical).expect("key within grid");
        let mut perm = [0u8; MAX_SYM_ORDER];
        for (p, &a) in perm.iter_mut().zip(r.applied.as_slice()) {
            *p = a as u8;
        }
        meta[off] = MetaEntry {
            slot: meta[canon_off].slot,
            perm,
        };
        next_index(&grid_dims, &mut idx);
    }
    meta
}

/// Fully symmetric order-m tensor of extent `n` in blocked compact storage.
#[derive(Debug, Clone, PartialEq)]
pub struct BcssTensor {
    pub(crate) grid: BlockGrid,
}

impl BcssTensor {
    /// All-zero store with the given shape.
    pub fn zeros(order: usize, n: usize, b: usize) -> Result<Self> {
        if order == 0 {
            return shape_err("tensor order must be positive");
        }
        Ok(Self {
            grid: BlockGrid::zeros(order, n, b, &[])?,
        })
    }

    /// Build from canonical blocks listed in hypertriangle order.
    pub fn from_blocks(order: usize, n: usize, b: usize, blocks: Vec<DenseTensor>) -> Result<Self> {
        let mut t = Self::zeros(order, n, b)?;
        if blocks.len() != t.grid.blocks.len() {
            return shape_err(format!(
                "expected {} canonical blocks, got {}",
                t.grid.blocks.len(),
                blocks.len()
            ));
        }
        let dims = t.grid.block_dims();
        if let Some(bad) = blocks.iter().find(|blk| blk.dims() != dims) {
            return shape_err(format!("block dims {:?} differ from {dims:?}", bad.dims()));
        }
        t.grid.blocks = blocks;
        Ok(t)
    }

    /// Copy the unique blocks of a symmetric tensor.
    ///
    /// Fails if `b` does not divide the extent or if any pair of entries
    /// related by a transposition differs by more than `tol` relative to the
    /// largest entry.
    pub fn compress(t: &DenseTensor, b: usize, tol: f64) -> Result<Self> {
        let n = t.dims()[0];
        if t.dims().iter().any(|&d| d != n) {
            return shape_err(format!(
                "symmetric tensor needs equal extents, got {:?}",
                t.dims()
            ));
        }
        check_block_dim(n, b)?;
        Ok(Self {
            grid: BlockGrid::compress(t, t.order(), b, &[], tol)?,
        })
    }

    pub fn decompress(&self) -> DenseTensor {
        self.grid.decompress()
    }

    /// The block at grid position `idx`, permuted from its stored
    /// representative when `idx` is not nondecreasing.
    pub fn block_at(&self, idx: &[usize]) -> Result<DenseTensor> {
        self.grid.block_at(idx, &mut OpCounter::new())
    }

    /// Meta-grid record for `idx`, expanded.
    pub fn meta_at(&self, idx: &[usize]) -> Result<CanonicalRef> {
        self.grid.canonical_ref(idx)
    }

    /// Stored block for a nondecreasing block index.
    pub fn stored_block(&self, key: &[usize]) -> Result<&DenseTensor> {
        Ok(self.grid.block(self.grid.slot_of_canonical(key)?))
    }

    pub fn stored_block_mut(&mut self, key: &[usize]) -> Result<&mut DenseTensor> {
        let slot = self.grid.slot_of_canonical(key)?;
        Ok(self.grid.block_mut(slot))
    }

    /// Stored blocks with their keys, in hypertriangle order.
    pub fn canonical_blocks(&self) -> impl Iterator<Item = (MultiIndex, &DenseTensor)> {
        hypertriangle_iter(self.grid.grid, self.grid.sym).zip(self.grid.blocks.iter())
    }

    pub fn order(&self) -> usize {
        self.grid.sym
    }

    pub fn dim(&self) -> usize {
        self.grid.n
    }

    pub fn block_dim(&self) -> usize {
        self.grid.b
    }

    pub fn grid_extent(&self) -> usize {
        self.grid.grid
    }

    pub fn num_blocks(&self) -> usize {
        self.grid.blocks.len()
    }

    pub fn num_meta_entries(&self) -> usize {
        self.grid.meta.len()
    }

    /// Payload doubles and meta-record count.
    pub fn storage(&self) -> StorageCount {
        self.grid.storage()
    }

    /// `(payload, payload + meta_words * n̄^m)`.
    pub fn stored_element_count(&self, meta_words: f64) -> (u128, f64) {
        let s = self.storage();
        (s.payload, s.total_with_meta(meta_words))
    }
}

/// Tensor symmetric in modes `0..s` (extent `n`, blocked at `b`) with
/// trailing modes of arbitrary extent held unblocked.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSymTensor {
    pub(crate) grid: BlockGrid,
}

impl PartialSymTensor {
    pub fn zeros(sym: usize, n: usize, b: usize, tail: &[usize]) -> Result<Self> {
        if sym == 0 {
            return shape_err("partially symmetric tensor needs at least one symmetric mode");
        }
        Ok(Self {
            grid: BlockGrid::zeros(sym, n, b, tail)?,
        })
    }

    /// Copy the unique blocks of a tensor symmetric in its first `sym` modes.
    pub fn compress_partial(t: &DenseTensor, sym: usize, b: usize, tol: f64) -> Result<Self> {
        if sym == 0 || sym > t.order() {
            return shape_err(format!(
                "symmetric mode count {sym} invalid for order {}",
                t.order()
            ));
        }
        let n = t.dims()[0];
        if t.dims()[..sym].iter().any(|&d| d != n) {
            return shape_err(format!(
                "symmetric modes need equal extents, got {:?}",
                t.dims()
            ));
        }
        check_block_dim(n, b)?;
        let tail = t.dims()[sym..].to_vec();
        Ok(Self {
            grid: BlockGrid::compress(t, sym, b, &tail, tol)?,
        })
    }

    pub fn decompress_partial(&self) -> DenseTensor {
        self.grid.decompress()
    }

    /// Block at symmetric grid position `sym_idx`; tail modes pass through.
    pub fn partial_block_at(&self, sym_idx: &[usize]) -> Result<DenseTensor> {
        self.grid.block_at(sym_idx, &mut OpCounter::new())
    }

    pub fn meta_at(&self, sym_idx: &[usize]) -> Result<CanonicalRef> {
        self.grid.canonical_ref(sym_idx)
    }

    pub fn stored_block(&self, key: &[usize]) -> Result<&DenseTensor> {
        Ok(self.grid.block(self.grid.slot_of_canonical(key)?))
    }

    pub fn canonical_blocks(&self) -> impl Iterator<Item = (MultiIndex, &DenseTensor)> {
        hypertriangle_iter(self.grid.grid, self.grid.sym).zip(self.grid.blocks.iter())
    }

    pub fn sym_order(&self) -> usize {
        self.grid.sym
    }

    pub fn order(&self) -> usize {
        self.grid.order()
    }

    pub fn dim(&self) -> usize {
        self.grid.n
    }

    pub fn block_dim(&self) -> usize {
        self.grid.b
    }

    pub fn tail_dims(&self) -> &[usize] {
        &self.grid.tail
    }

    pub fn grid_extent(&self) -> usize {
        self.grid.grid
    }

    pub fn num_blocks(&self) -> usize {
        self.grid.blocks.len()
    }

    pub fn storage(&self) -> StorageCount {
        self.grid.storage()
    }
}

impl From<BcssTensor> for PartialSymTensor {
    fn from(t: BcssTensor) -> Self {
        Self { grid: t.grid }
    }
}

/// Permuted copy of `block` as it would appear at a non-canonical position.
pub fn apply_ref(block: &DenseTensor, r: &CanonicalRef) -> Result<DenseTensor> {
    permute(block, &r.applied.extend_identity(block.order()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_symmetric;
    use crate::sym_index::is_sym_in_modes;

    fn sym4x4() -> DenseTensor {
        DenseTensor::from_fn(&[4, 4], |i| {
            (i[0] * i[1]) as f64 + (i[0] + i[1]) as f64 * 0.5
        })
        .unwrap()
    }

    #[test]
    fn single_block_is_the_tensor() {
        let t = random_symmetric(3, 4, 7);
        let a = BcssTensor::compress(&t, 4, 0.0).unwrap();
        assert_eq!(a.num_blocks(), 1);
        assert_eq!(a.num_meta_entries(), 1);
        assert_eq!(a.stored_block(&[0, 0, 0]).unwrap(), &t);
        assert_eq!(a.block_at(&[0, 0, 0]).unwrap(), t);
        assert_eq!(a.decompress(), t);
    }

    #[test]
    fn matrix_with_two_by_two_grid() {
        let t = sym4x4();
        let a = BcssTensor::compress(&t, 2, 0.0).unwrap();
        assert_eq!(a.num_blocks(), 3);
        let keys: Vec<_> = a.canonical_blocks().map(|(k, _)| k).collect();
        assert_eq!(keys, vec![vec![0, 0], vec![0, 1], vec![1, 1]]);
        let r = a.meta_at(&[1, 0]).unwrap();
        assert_eq!(r.canonical, vec![0, 1]);
        assert_eq!(r.applied.as_slice(), &[1, 0]);
        assert!(a.meta_at(&[0, 1]).unwrap().applied.is_identity());
        // block (1,0) is the transpose of block (0,1)
        let b01 = a.block_at(&[0, 1]).unwrap();
        let b10 = a.block_at(&[1, 0]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(b10.get(&[i, j]).unwrap(), b01.get(&[j, i]).unwrap());
                assert_eq!(b10.get(&[i, j]).unwrap(), t.get(&[2 + i, j]).unwrap());
            }
        }
    }

    #[test]
    fn order_three_block_count() {
        let t = random_symmetric(3, 4, 1);
        let a = BcssTensor::compress(&t, 2, 0.0).unwrap();
        let brute = (0..8)
            .map(|o| crate::dense::unravel(&[2, 2, 2], o))
            .filter(|v| crate::sym_index::is_nondecreasing(v))
            .count();
        assert_eq!(brute, 4);
        assert_eq!(a.num_blocks(), 4);
        assert_eq!(a.storage().payload, 4 * 8);
        assert_eq!(a.num_meta_entries(), 8);
    }

    #[test]
    fn compress_errors() {
        let t = random_symmetric(2, 6, 3);
        assert!(matches!(
            BcssTensor::compress(&t, 4, 0.0),
            Err(Error::BlockDivisibility { dim: 6, block: 4 })
        ));
        let mut asym = t.clone();
        asym.set(&[1, 4], 10.0).unwrap();
        match BcssTensor::compress(&asym, 3, 1e-12) {
            Err(Error::Asymmetric { index, partner, .. }) => {
                assert_eq!(index, vec![1, 4]);
                assert_eq!(partner, vec![4, 1]);
            }
            other => panic!("expected asymmetry error, got {other:?}"),
        }
        let rect = DenseTensor::zeros(&[4, 6]).unwrap();
        assert!(matches!(
            BcssTensor::compress(&rect, 2, 0.0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn round_trip_n6_b3_m3() {
        let t = random_symmetric(3, 6, 11);
        let a = BcssTensor::compress(&t, 3, 0.0).unwrap();
        assert_eq!(a.decompress(), t);
    }

    #[test]
    fn block_at_matches_dense_subtensor() {
        let t = random_symmetric(3, 6, 5);
        let a = BcssTensor::compress(&t, 2, 0.0).unwrap();
        let blk = a.block_at(&[2, 0, 1]).unwrap();
        assert_eq!(blk, t.subtensor(&[4, 0, 2], &[2, 2, 2]).unwrap());
        assert!(matches!(a.block_at(&[3, 0, 0]), Err(Error::Range { .. })));
        assert!(a.block_at(&[0, 0]).is_err());
    }

    #[test]
    fn storage_counts() {
        let t = random_symmetric(2, 16, 2);
        let a = BcssTensor::compress(&t, 4, 0.0).unwrap();
        let (payload, total) = a.stored_element_count(4.0);
        assert_eq!(payload, 160);
        assert_eq!(total, 224.0);
        assert_eq!(a.stored_element_count(0.0), (160, 160.0));
    }

    #[test]
    fn measured_meta_words() {
        // slot index plus a byte per permuted mode
        assert_eq!(meta_words_per_entry(), 1.5);
    }

    #[test]
    fn partial_reduces_to_full_and_singleton() {
        let t = random_symmetric(3, 4, 9);
        let p = PartialSymTensor::compress_partial(&t, 3, 2, 0.0).unwrap();
        let a = BcssTensor::compress(&t, 2, 0.0).unwrap();
        assert_eq!(p.grid, a.grid);

        let dense =
            DenseTensor::from_fn(&[4, 3, 2], |i| (i[0] * 7 + i[1] * 3 + i[2]) as f64).unwrap();
        let p = PartialSymTensor::compress_partial(&dense, 1, 2, 0.0).unwrap();
        assert_eq!(p.num_blocks(), 2);
        assert_eq!(p.storage().payload as usize, dense.len());
        assert_eq!(p.decompress_partial(), dense);
    }

    #[test]
    fn partial_block_transpose_on_symmetric_modes() {
        let base = random_symmetric(3, 4, 4);
        let p = PartialSymTensor::compress_partial(&base, 2, 2, 0.0).unwrap();
        assert_eq!(p.tail_dims(), &[4]);
        let b01 = p.partial_block_at(&[0, 1]).unwrap();
        let b10 = p.partial_block_at(&[1, 0]).unwrap();
        assert_eq!(b10.dims(), &[2, 2, 4]);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..4 {
                    assert_eq!(b10.get(&[i, j, k]).unwrap(), b01.get(&[j, i, k]).unwrap());
                }
            }
        }
        assert_eq!(p.stored_block(&[0, 1]).unwrap(), &b01);
        assert!(p.stored_block(&[1, 0]).is_err());
    }

    #[test]
    fn partial_rejects_bad_shapes() {
        let t = DenseTensor::zeros(&[4, 6, 2]).unwrap();
        assert!(PartialSymTensor::compress_partial(&t, 2, 2, 0.0).is_err());
        assert!(PartialSymTensor::compress_partial(&t, 1, 3, 0.0).is_err());
        assert!(PartialSymTensor::compress_partial(&t, 0, 2, 0.0).is_err());
        let asym = DenseTensor::from_fn(&[4, 4, 2], |i| (i[0] + 2 * i[1]) as f64).unwrap();
        assert!(matches!(
            PartialSymTensor::compress_partial(&asym, 2, 2, 0.0),
            Err(Error::Asymmetric { .. })
        ));
        assert!(is_sym_in_modes(&asym, &[0], 0.0).unwrap());
    }
}
