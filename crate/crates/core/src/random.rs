//! Seeded, platform-independent random inputs.
//!
//! Symmetric tensors are filled by drawing the unique entries from a
//! uniform(-1, 1) stream in hypertriangle order and replicating them, so a
//! seed fixes the tensor regardless of block size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bcss::BcssTensor;
use crate::dense::{next_index, DenseTensor};
use crate::error::Result;
use crate::sym_index::{hypertriangle_iter, SimplexRanker};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unique_entries(m: usize, n: usize, seed: u64) -> (Vec<f64>, SimplexRanker) {
    let mut r = rng(seed);
    let unique = hypertriangle_iter(n, m)
        .map(|_| r.gen_range(-1.0..1.0))
        .collect();
    let ranker = SimplexRanker::new(n, m).expect("extent fits in memory");
    (unique, ranker)
}

/// Symmetric order-`m` tensor of extent `n`.
pub fn random_symmetric(m: usize, n: usize, seed: u64) -> DenseTensor {
    let (unique, ranker) = unique_entries(m, n, seed);
    let dims = vec![n; m];
    let mut t = DenseTensor::zeros(&dims).expect("positive extents");
    let mut idx = vec![0; m];
    let mut sorted = vec![0; m];
    for v in t.data_mut() {
        sorted.copy_from_slice(&idx);
        sorted.sort_unstable();
        *v = unique[ranker.rank(&sorted)];
        next_index(&dims, &mut idx);
    }
    t
}

/// The tensor of [`random_symmetric`] built directly in blocked storage,
/// without ever holding the dense `n^m` array.
pub fn random_symmetric_bcss(m: usize, n: usize, b: usize, seed: u64) -> Result<BcssTensor> {
    let mut t = BcssTensor::zeros(m, n, b)?;
    let (unique, ranker) = unique_entries(m, n, seed);
    let block_dims = vec![b; m];
    let mut global = vec![0; m];
    for key in hypertriangle_iter(n / b, m) {
        let block = t.stored_block_mut(&key)?;
        let mut local = vec![0; m];
        for v in block.data_mut() {
            for ((g, &k), &l) in global.iter_mut().zip(&key).zip(&local) {
                *g = k * b + l;
            }
            global.sort_unstable();
            *v = unique[ranker.rank(&global)];
            next_index(&block_dims, &mut local);
        }
    }
    Ok(t)
}

/// Dense tensor with independent uniform(-1, 1) entries.
pub fn random_dense(dims: &[usize], seed: u64) -> DenseTensor {
    let mut r = rng(seed);
    DenseTensor::from_fn(dims, |_| r.gen_range(-1.0..1.0)).expect("positive extents")
}

/// `rows x cols` matrix with independent uniform(-1, 1) entries.
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseTensor {
    random_dense(&[rows, cols], seed)
}
