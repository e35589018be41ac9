//! Index combinatorics for symmetric tensors: canonical representatives,
//! upper-hypertriangle enumeration and symmetry checks.

use crate::dense::{next_index, DenseTensor, MultiIndex, Permutation};
use crate::error::{shape_err, Error, Result};

/// Redirection from an arbitrary index to its sorted representative.
///
/// `applied` satisfies `idx[k] == canonical[applied[k]]`, the same convention
/// [`crate::dense::permute`] uses, so the block stored under `canonical`
/// permuted by `applied` is the block at `idx`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalRef {
    pub canonical: MultiIndex,
    pub applied: Permutation,
}

impl CanonicalRef {
    /// Reconstruct the queried index.
    pub fn index(&self) -> MultiIndex {
        self.applied.apply(&self.canonical)
    }
}

/// Sort `idx` and record the permutation that restores it.
///
/// For repeated values the lexicographically smallest `applied` is chosen:
/// each position takes the earliest unused slot holding its value.
pub fn canonicalize(idx: &[usize]) -> CanonicalRef {
    let mut canonical = idx.to_vec();
    canonical.sort_unstable();
    let mut used = vec![false; idx.len()];
    let applied = idx
        .iter()
        .map(|&v| {
            // first slot of value v in the sorted copy
            let start = canonical.partition_point(|&c| c < v);
            let mut j = start;
            while used[j] {
                j += 1;
            }
            used[j] = true;
            j
        })
        .collect();
    CanonicalRef {
        canonical,
        applied: Permutation::new(applied).expect("sorting yields a bijection"),
    }
}

pub fn is_nondecreasing(idx: &[usize]) -> bool {
    idx.windows(2).all(|w| w[0] <= w[1])
}

/// Nondecreasing `m`-tuples over `0..extent` in lexicographic order.
#[derive(Debug, Clone)]
pub struct HypertriangleIter {
    extent: usize,
    cur: Option<MultiIndex>,
}

impl Iterator for HypertriangleIter {
    type Item = MultiIndex;

    fn next(&mut self) -> Option<MultiIndex> {
        let out = self.cur.clone()?;
        let cur = self.cur.as_mut().unwrap();
        // bump the rightmost entry that can grow, reset the tail to it
        match (0..cur.len()).rev().find(|&k| cur[k] + 1 < self.extent) {
            Some(k) => {
                let v = cur[k] + 1;
                for c in &mut cur[k..] {
                    *c = v;
                }
            }
            None => self.cur = None,
        }
        Some(out)
    }
}

/// Iterate the upper hypertriangle `{i_0 <= ... <= i_{m-1}}` of an
/// `extent^m` grid. Yields nothing when `extent == 0`; yields one empty tuple
/// when `m == 0`.
pub fn hypertriangle_iter(extent: usize, m: usize) -> HypertriangleIter {
    HypertriangleIter {
        extent,
        cur: (extent > 0 || m == 0).then(|| vec![0; m]),
    }
}

/// Binomial coefficient with overflow detection.
pub fn binomial(n: u128, k: u128) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        // acc * (n - k + i) is divisible by i since acc == C(n-k+i-1, i-1)
        let num = acc
            .checked_mul(n - k + i)
            .ok_or(Error::Overflow("binomial"))?;
        acc = num / i;
    }
    Ok(acc)
}

/// Number of nondecreasing `m`-tuples over `n` values: `C(n + m - 1, m)`.
pub fn simplex_count(n: usize, m: usize) -> Result<u128> {
    if n == 0 {
        return Ok(u128::from(m == 0));
    }
    binomial(n as u128 + m as u128 - 1, m as u128)
}

/// Position of a nondecreasing tuple in [`hypertriangle_iter`] order.
#[derive(Debug, Clone)]
pub struct SimplexRanker {
    // prefix[len][v]: tuples of length `len` whose first entry is below `v`
    prefix: Vec<Vec<usize>>,
}

impl SimplexRanker {
    pub fn new(extent: usize, m: usize) -> Result<Self> {
        let mut prefix = Vec::with_capacity(m);
        for len in 0..m {
            let mut row = vec![0usize; extent + 1];
            for v in 0..extent {
                // tuples of length len + 1 starting at v: v, then len entries in v..extent
                let c = simplex_count(extent - v, len)?;
                let c = usize::try_from(c).map_err(|_| Error::Overflow("simplex rank"))?;
                row[v + 1] = row[v]
                    .checked_add(c)
                    .ok_or(Error::Overflow("simplex rank"))?;
            }
            prefix.push(row);
        }
        Ok(Self { prefix })
    }

    /// `idx` must be nondecreasing with entries below the extent.
    pub fn rank(&self, idx: &[usize]) -> usize {
        let m = idx.len();
        let mut lo = 0;
        let mut r = 0;
        for (k, &i) in idx.iter().enumerate() {
            let row = &self.prefix[m - k - 1];
            r += row[i] - row[lo];
            lo = i;
        }
        r
    }
}

/// Partition of the modes `0..m` into disjoint symmetric groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModePartition {
    groups: Vec<Vec<usize>>,
}

impl ModePartition {
    pub fn new(order: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; order];
        for g in &groups {
            if g.is_empty() {
                return Err(Error::Parameter("empty mode group".into()));
            }
            for &k in g {
                if k >= order || seen[k] {
                    return Err(Error::Parameter(format!(
                        "mode groups {groups:?} are not a partition of 0..{order}"
                    )));
                }
                seen[k] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Parameter(format!(
                "mode groups {groups:?} do not cover 0..{order}"
            )));
        }
        Ok(Self { groups })
    }

    /// Modes `0..s` grouped together, every later mode a singleton.
    pub fn leading(order: usize, s: usize) -> Result<Self> {
        if s == 0 || s > order {
            return Err(Error::Parameter(format!(
                "leading group of {s} modes in order {order}"
            )));
        }
        let mut groups = vec![(0..s).collect::<Vec<_>>()];
        groups.extend((s..order).map(|k| vec![k]));
        Self::new(order, groups)
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }
}

/// The worst violation of symmetry within `modes`, if any exceeds `tol`.
///
/// Deviation is measured as `|t[i] - t[i']| / max|t|`, checking the adjacent
/// transpositions of `modes`, which generate every permutation of them.
pub fn worst_asymmetry(
    t: &DenseTensor,
    modes: &[usize],
    tol: f64,
) -> Result<Option<(MultiIndex, MultiIndex, f64)>> {
    let mut modes = modes.to_vec();
    modes.sort_unstable();
    modes.dedup();
    if let Some(&k) = modes.iter().find(|&&k| k >= t.order()) {
        return Err(Error::Mode {
            mode: k,
            order: t.order(),
        });
    }
    if let Some(&first) = modes.first() {
        let n = t.dims()[first];
        if modes.iter().any(|&k| t.dims()[k] != n) {
            return shape_err(format!(
                "modes {modes:?} have unequal extents in {:?}",
                t.dims()
            ));
        }
    }
    if modes.len() < 2 {
        return Ok(None);
    }
    let scale = t.max_abs();
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut worst: Option<(MultiIndex, MultiIndex, f64)> = None;
    let mut idx = vec![0; t.order()];
    let data = t.data();
    let strides = crate::dense::strides(t.dims());
    let mut off = 0usize;
    loop {
        for w in modes.windows(2) {
            let (a, b) = (w[0], w[1]);
            if idx[a] < idx[b] {
                let d = idx[b] - idx[a];
                let partner_off = off + d * strides[a] - d * strides[b];
                let rel = (data[off] - data[partner_off]).abs() / scale;
                if rel > tol && worst.as_ref().is_none_or(|w| rel > w.2) {
                    let mut partner = idx.clone();
                    partner.swap(a, b);
                    worst = Some((idx.clone(), partner, rel));
                }
            }
        }
        if !next_index(t.dims(), &mut idx) {
            break;
        }
        off += 1;
    }
    Ok(worst)
}

/// Whether `t` is symmetric in the modes `modes` to within `tol` (relative to
/// the largest entry). Singletons and empty sets are trivially symmetric.
pub fn is_sym_in_modes(t: &DenseTensor, modes: &[usize], tol: f64) -> Result<bool> {
    Ok(worst_asymmetry(t, modes, tol)?.is_none())
}
