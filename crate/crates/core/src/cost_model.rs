//! Closed-form storage, flop and memop counts for the change-of-basis kernel.
//!
//! Every count is evaluated in exact integer arithmetic. The only
//! non-integer input is the meta-record size `meta_k` (in doubles), kept as
//! an exact rational so totals that include meta-data stay exact too.
//!
//! Counting conventions match [`crate::sttsm`]: a multiply-add is two flops,
//! and a memop is one element read or written while reorganizing data.

use std::fmt;

use num_rational::Ratio;

use crate::bcss::meta_entry_bytes;
use crate::error::{Error, Result};
use crate::sym_index::binomial;

/// Exact non-negative rational.
pub type Exact = Ratio<u128>;

/// Meta-record size of this implementation in doubles (12 bytes → 3/2).
pub fn measured_meta_k() -> Exact {
    Ratio::new(meta_entry_bytes() as u128, 8)
}

/// Render an exact value as an integer when it is one, else as a decimal.
pub fn format_exact(v: &Exact) -> String {
    if v.is_integer() {
        v.to_integer().to_string()
    } else {
        format!("{}", *v.numer() as f64 / *v.denom() as f64)
    }
}

fn mul(a: u128, b: u128) -> Result<u128> {
    a.checked_mul(b).ok_or(Error::Overflow("cost formula"))
}

fn add(a: u128, b: u128) -> Result<u128> {
    a.checked_add(b).ok_or(Error::Overflow("cost formula"))
}

fn pow(b: usize, e: usize) -> Result<u128> {
    (b as u128)
        .checked_pow(e as u32)
        .ok_or(Error::Overflow("cost formula"))
}

fn choose(n: usize, k: usize) -> Result<u128> {
    binomial(n as u128, k as u128)
}

fn scale(k: Exact, count: u128) -> Exact {
    k * Ratio::from_integer(count)
}

/// Which algorithm a [`CostReport`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Blocked kernel computing only canonical blocks of each temporary.
    Bcss,
    /// Blocked kernel with dense temporaries (no partial-symmetry reuse).
    BcssDenseTemps,
    /// Mode products on dense storage, ignoring symmetry.
    Dense,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Bcss => "bcss",
            Variant::BcssDenseTemps => "bcss_dense_temps",
            Variant::Dense => "dense",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Elements of block payload plus the number of meta-grid records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Storage {
    pub payload: u128,
    pub meta_entries: u128,
}

impl Storage {
    fn dense(payload: u128) -> Self {
        Self {
            payload,
            meta_entries: 0,
        }
    }

    /// Payload plus `meta_k` doubles per meta record.
    pub fn total(&self, meta_k: Exact) -> Exact {
        Ratio::from_integer(self.payload) + scale(meta_k, self.meta_entries)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostParams {
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub b_a: usize,
    pub b_c: usize,
    pub meta_k: Exact,
}

/// One column of the cost table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostReport {
    pub variant: Variant,
    pub params: CostParams,
    pub storage_a: Storage,
    pub storage_c: Storage,
    pub storage_x: u128,
    pub storage_temps: Storage,
    pub flops: u128,
    pub memops: u128,
}

impl CostReport {
    pub fn storage_a_total(&self) -> Exact {
        self.storage_a.total(self.params.meta_k)
    }

    pub fn storage_c_total(&self) -> Exact {
        self.storage_c.total(self.params.meta_k)
    }

    pub fn storage_temps_total(&self) -> Exact {
        self.storage_temps.total(self.params.meta_k)
    }
}

fn check_blocked(m: usize, n: usize, p: usize, b_a: usize, b_c: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::Parameter(format!(
            "order must be at least 2, got {m}"
        )));
    }
    if n == 0 || p == 0 {
        return Err(Error::Parameter("dimensions must be positive".into()));
    }
    if b_a == 0 || !n.is_multiple_of(b_a) {
        return Err(Error::Parameter(format!("b_A={b_a} does not divide n={n}")));
    }
    if b_c == 0 || !p.is_multiple_of(b_c) {
        return Err(Error::Parameter(format!("b_C={b_c} does not divide p={p}")));
    }
    Ok(())
}

/// Blocked storage of a symmetric order-`m` tensor of extent `n`, block `b`.
pub fn bcss_storage(m: usize, n: usize, b: usize) -> Result<Storage> {
    if b == 0 || !n.is_multiple_of(b) {
        return Err(Error::Parameter(format!("b={b} does not divide n={n}")));
    }
    let nbar = n / b;
    Ok(Storage {
        payload: mul(pow(b, m)?, choose(nbar + m - 1, m)?)?,
        meta_entries: pow(nbar, m)?,
    })
}

/// Per-level factors shared by the blocked flop and memop rows: for
/// `d = 0..m` (level `k = m-1-d`) the pair
/// `(C(p̄+d, d+1) C(n̄+m-d-2, m-d-1), d)`.
fn blocked_terms(m: usize, nbar: usize, pbar: usize) -> Result<Vec<(u128, usize)>> {
    (0..m)
        .map(|d| {
            Ok((
                mul(
                    choose(pbar + d, d + 1)?,
                    choose(nbar + m - d - 2, m - d - 1)?,
                )?,
                d,
            ))
        })
        .collect()
}

/// Blocked kernel with partially symmetric temporaries.
///
/// Flops: `2 n̄ b_C b_A^m Σ_d C(p̄+d,d+1) C(n̄+m-d-2,m-d-1) (b_C/b_A)^d`.
/// Memops: `(n̄ + 2 b_C/b_A) b_A^m Σ_d (same summand)`.
/// Every `(b_C/b_A)^d` is absorbed into `b_A^{m-d} b_C^d`, so the sums stay
/// integral.
pub fn bcss_costs(
    m: usize,
    n: usize,
    p: usize,
    b_a: usize,
    b_c: usize,
    meta_k: Exact,
) -> Result<CostReport> {
    check_blocked(m, n, p, b_a, b_c)?;
    let (nbar, pbar) = (n / b_a, p / b_c);
    let mut flops = 0u128;
    let mut memops = 0u128;
    for (count, d) in blocked_terms(m, nbar, pbar)? {
        // one input block b_A^{m-d} b_C^d, one output block b_A^{m-d-1} b_C^{d+1}
        let input = mul(pow(b_a, m - d)?, pow(b_c, d)?)?;
        let output = mul(pow(b_a, m - d - 1)?, pow(b_c, d + 1)?)?;
        flops = add(
            flops,
            mul(count, mul(2 * nbar as u128, mul(input, b_c as u128)?)?)?,
        )?;
        let moved = add(mul(nbar as u128, input)?, mul(2, output)?)?;
        memops = add(memops, mul(count, moved)?)?;
    }
    let mut temps = Storage::default();
    for d in 0..m - 1 {
        // T^(k) with k = m-1-d: k symmetric modes at b_A, d+1 modes at b_C
        let k = m - 1 - d;
        let block = mul(pow(b_a, k)?, pow(b_c, d + 1)?)?;
        temps.payload = add(temps.payload, mul(block, choose(nbar + k - 1, k)?)?)?;
        temps.meta_entries = add(temps.meta_entries, pow(nbar, k)?)?;
    }
    Ok(CostReport {
        variant: Variant::Bcss,
        params: CostParams {
            m,
            n,
            p,
            b_a,
            b_c,
            meta_k,
        },
        storage_a: bcss_storage(m, n, b_a)?,
        storage_c: bcss_storage(m, p, b_c)?,
        storage_x: mul(p as u128, n as u128)?,
        storage_temps: temps,
        flops,
        memops,
    })
}

/// Blocked kernel with dense temporaries.
///
/// Flops are the total of the plain algorithm-by-blocks,
/// `Σ_d 2 b_C^{d+1} n^{m-d} C(p̄+d, d+1)`, and temporaries take
/// `Σ_{d<m-1} b_C^{d+1} n^{m-1-d}` elements. Memops follow the dense
/// convention per level: the source once, the result twice.
pub fn bcss_dense_temp_costs(
    m: usize,
    n: usize,
    p: usize,
    b_a: usize,
    b_c: usize,
    meta_k: Exact,
) -> Result<CostReport> {
    check_blocked(m, n, p, b_a, b_c)?;
    let pbar = p / b_c;
    let mut flops = 0u128;
    let mut memops = 0u128;
    let mut temps = 0u128;
    for d in 0..m {
        let count = choose(pbar + d, d + 1)?;
        let input = mul(pow(b_c, d)?, pow(n, m - d)?)?;
        let output = mul(pow(b_c, d + 1)?, pow(n, m - d - 1)?)?;
        flops = add(flops, mul(count, mul(2, mul(input, b_c as u128)?)?)?)?;
        memops = add(memops, mul(count, add(input, mul(2, output)?)?)?)?;
        if d + 1 < m {
            temps = add(temps, output)?;
        }
    }
    Ok(CostReport {
        variant: Variant::BcssDenseTemps,
        params: CostParams {
            m,
            n,
            p,
            b_a,
            b_c,
            meta_k,
        },
        storage_a: bcss_storage(m, n, b_a)?,
        storage_c: bcss_storage(m, p, b_c)?,
        storage_x: mul(p as u128, n as u128)?,
        storage_temps: Storage::dense(temps),
        flops,
        memops,
    })
}

/// Dense mode-product chain.
///
/// Flops `2 p n^m Σ_d (p/n)^d`, memops `(1 + 2p/n) n^m Σ_d (p/n)^d`,
/// temporaries `Σ_{d<m-1} p^{d+1} n^{m-1-d}`.
pub fn dense_costs(m: usize, n: usize, p: usize) -> Result<CostReport> {
    if m < 2 {
        return Err(Error::Parameter(format!(
            "order must be at least 2, got {m}"
        )));
    }
    if n == 0 || p == 0 {
        return Err(Error::Parameter("dimensions must be positive".into()));
    }
    let mut flops = 0u128;
    let mut memops = 0u128;
    let mut temps = 0u128;
    for d in 0..m {
        let input = mul(pow(p, d)?, pow(n, m - d)?)?;
        let output = mul(pow(p, d + 1)?, pow(n, m - d - 1)?)?;
        flops = add(flops, mul(2 * p as u128, input)?)?;
        memops = add(memops, add(input, mul(2, output)?)?)?;
        if d + 1 < m {
            temps = add(temps, output)?;
        }
    }
    Ok(CostReport {
        variant: Variant::Dense,
        params: CostParams {
            m,
            n,
            p,
            b_a: n,
            b_c: p,
            meta_k: Ratio::from_integer(0),
        },
        storage_a: Storage::dense(pow(n, m)?),
        storage_c: Storage::dense(pow(p, m)?),
        storage_x: mul(p as u128, n as u128)?,
        storage_temps: Storage::dense(temps),
        flops,
        memops,
    })
}

/// Leading-order costs for `n = p` and `b_A = b_C = b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ApproxCosts {
    pub bcss_storage: Exact,
    pub bcss_temps: Exact,
    pub bcss_flops: Exact,
    pub bcss_memops: Exact,
    pub dense_storage: Exact,
    pub dense_temps: Exact,
    pub dense_flops: Exact,
    pub dense_memops: Exact,
    /// `(m+1)!/2^m`, the commonly quoted flop reduction.
    pub speedup_limit: Exact,
    /// `m·m!/2^m`, the ratio of the two leading terms above.
    pub exact_asymptote: Exact,
}

fn factorial(m: usize) -> Result<u128> {
    (1..=m as u128).try_fold(1u128, mul)
}

/// `(m+1)!/2^m`.
pub fn speedup_limit(m: usize) -> Result<Exact> {
    Ok(Ratio::new(factorial(m + 1)?, pow(2, m)?))
}

/// `m·m!/2^m`.
pub fn exact_asymptote(m: usize) -> Result<Exact> {
    Ok(Ratio::new(mul(m as u128, factorial(m)?)?, pow(2, m)?))
}

pub fn approx_costs(m: usize, n: usize, p: usize, b_a: usize, b_c: usize) -> Result<ApproxCosts> {
    if n != p || b_a != b_c {
        return Err(Error::Parameter(format!(
            "approximations need n = p and b_A = b_C, got n={n} p={p} b_A={b_a} b_C={b_c}"
        )));
    }
    check_blocked(m, n, p, b_a, b_c)?;
    let nbar = (n / b_a) as u128;
    let fact = factorial(m)?;
    let two_n_m = pow(2 * n, m)?;
    let int = |v: u128| Ratio::from_integer(v);
    Ok(ApproxCosts {
        bcss_storage: int(mul(pow(b_a, m)?, choose(n / b_a + m - 1, m)?)?),
        bcss_temps: Ratio::new(pow(n, m)?, fact),
        bcss_flops: Ratio::new(mul(two_n_m, 2 * n as u128)?, fact),
        bcss_memops: Ratio::new(mul(nbar + 2, two_n_m)?, fact),
        dense_storage: int(pow(n, m)?),
        dense_temps: int(mul(m as u128 - 1, pow(n, m)?)?),
        dense_flops: int(mul(2 * m as u128, pow(n, m + 1)?)?),
        dense_memops: int(mul(3 * m as u128, pow(n, m)?)?),
        speedup_limit: speedup_limit(m)?,
        exact_asymptote: exact_asymptote(m)?,
    })
}

/// Storage ratios against blocked compact storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SavingsRow {
    pub b: usize,
    /// `C(n+m-1, m) / (b^m C(n̄+m-1, m))`
    pub minimal_over_bcss: Exact,
    /// `n^m / (b^m C(n̄+m-1, m))`
    pub dense_over_bcss: Exact,
}

pub fn savings_table(m: usize, n: usize, b: usize) -> Result<SavingsRow> {
    let bcss = bcss_storage(m, n, b)?.payload;
    Ok(SavingsRow {
        b,
        minimal_over_bcss: Ratio::new(choose(n + m - 1, m)?, bcss),
        dense_over_bcss: Ratio::new(pow(n, m)?, bcss),
    })
}

/// Divisors of `n`, ascending.
pub fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|b| n.is_multiple_of(*b)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetaPoint {
    pub b: usize,
    pub storage: Storage,
    /// `k n̄^m + b^m C(n̄+m-1, m)`
    pub total: Exact,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaSweep {
    pub points: Vec<MetaPoint>,
    /// Index into `points` of the smallest total (first on ties).
    pub argmin: usize,
    pub dense: u128,
}

impl MetaSweep {
    pub fn best(&self) -> &MetaPoint {
        &self.points[self.argmin]
    }
}

/// Storage including meta-data for every block dimension dividing `n`.
pub fn metadata_sweep(m: usize, n: usize, meta_k: Exact) -> Result<MetaSweep> {
    if n == 0 {
        return Err(Error::Parameter("n must be positive".into()));
    }
    let points = divisors(n)
        .into_iter()
        .map(|b| {
            let storage = bcss_storage(m, n, b)?;
            Ok(MetaPoint {
                b,
                storage,
                total: storage.total(meta_k),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let argmin = (0..points.len())
        .min_by(|&i, &j| points[i].total.cmp(&points[j].total))
        .unwrap_or(0);
    Ok(MetaSweep {
        points,
        argmin,
        dense: pow(n, m)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossoverRow {
    pub b: usize,
    pub flops: u128,
    pub memops: u128,
}

/// Blocked flops and memops for each `b = b_A = b_C` dividing both `n` and `p`.
pub fn crossover_table(m: usize, n: usize, p: usize) -> Result<Vec<CrossoverRow>> {
    divisors(n)
        .into_iter()
        .filter(|b| p.is_multiple_of(*b))
        .map(|b| {
            let r = bcss_costs(m, n, p, b, b, Ratio::from_integer(0))?;
            Ok(CrossoverRow {
                b,
                flops: r.flops,
                memops: r.memops,
            })
        })
        .collect()
}
