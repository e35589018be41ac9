//! `--cmd bench`: median wall time and instrumented counts per algorithm.

use std::io::Write;
use std::time::{Duration, Instant};

use symtensor::dense::{DenseTensor, MatView};
use symtensor::random::{random_matrix, random_symmetric, random_symmetric_bcss};
use symtensor::sttsm::{
    sttsm_bcss_with, sttsm_dense_ttm_counted, sttsm_naive_counted, sttsm_scalar_temps_counted,
    BcssOptions,
};
use symtensor::sym_index::simplex_count;
use symtensor::OpCounter;

use crate::config::{max_dense_elems, pow_sat, usage, Algo, CliResult, RunConfig, Shape};

/// Naive summands above this are skipped rather than run for hours.
const MAX_NAIVE_TERMS: u128 = 1_000_000_000;

pub const HEADER: [&str; 10] = [
    "algorithm",
    "m",
    "n",
    "p",
    "b_A",
    "b_C",
    "seed",
    "wall_seconds",
    "flops",
    "memops",
];

pub fn shape(cfg: &RunConfig) -> CliResult<Shape> {
    let n = cfg.n.unwrap_or(16);
    let ba = cfg.ba.unwrap_or(4);
    Shape::new(
        cfg.m.unwrap_or(3),
        n,
        cfg.p.unwrap_or(n),
        ba,
        cfg.bc.unwrap_or(ba),
    )
}

enum Outcome {
    Ran { wall: Duration, counts: OpCounter },
    Skipped(String),
}

fn timed(reps: usize, mut f: impl FnMut(&mut OpCounter) -> CliResult<()>) -> CliResult<Outcome> {
    let mut walls = Vec::with_capacity(reps);
    let mut counts = OpCounter::new();
    for _ in 0..reps {
        counts = OpCounter::new();
        let start = Instant::now();
        f(&mut counts)?;
        walls.push(start.elapsed());
    }
    walls.sort();
    Ok(Outcome::Ran {
        wall: walls[walls.len() / 2],
        counts,
    })
}

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    if cfg.reps < 3 {
        return usage(format!("--reps must be at least 3, got {}", cfg.reps));
    }
    let s = shape(cfg)?;
    let cap = max_dense_elems()?;
    // dense baselines hold A, C and the largest temporary at once
    let dense_fits = pow_sat(s.n, s.m) <= cap && pow_sat(s.p, s.m) <= cap;
    let x = random_matrix(s.p, s.n, cfg.seed.wrapping_add(1));
    let xv: MatView<'_> = x.as_matrix()?;
    let mut dense_a: Option<DenseTensor> = None;
    let mut rows = Vec::new();
    for algo in cfg.algo.expand() {
        let outcome = match algo {
            Algo::Bcss => {
                let a = random_symmetric_bcss(s.m, s.n, s.ba, cfg.seed)?;
                timed(cfg.reps, |ctr| {
                    sttsm_bcss_with(&a, xv, s.bc, BcssOptions::default(), ctr, |_| {})?;
                    Ok(())
                })?
            }
            _ if !dense_fits => Outcome::Skipped(format!(
                "dense storage exceeds SYMTENSOR_MAX_DENSE_ELEMS = {cap}"
            )),
            Algo::Naive
                if simplex_count(s.p, s.m)?.saturating_mul(pow_sat(s.n, s.m)) > MAX_NAIVE_TERMS =>
            {
                Outcome::Skipped(format!("more than {MAX_NAIVE_TERMS} naive terms"))
            }
            _ => {
                let a = dense_a.get_or_insert_with(|| random_symmetric(s.m, s.n, cfg.seed));
                timed(cfg.reps, |ctr| {
                    match algo {
                        Algo::Naive => sttsm_naive_counted(a, xv, ctr)?,
                        Algo::Scalar => sttsm_scalar_temps_counted(a, xv, ctr)?,
                        _ => sttsm_dense_ttm_counted(a, xv, ctr)?,
                    };
                    Ok(())
                })?
            }
        };
        rows.push((algo, outcome));
    }

    let mut out = cfg.sink()?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(HEADER)?;
        for (algo, outcome) in &rows {
            let (wall, flops, memops) = match outcome {
                Outcome::Ran { wall, counts } => (
                    format!("{:.6}", wall.as_secs_f64()),
                    counts.flops.to_string(),
                    counts.memops.to_string(),
                ),
                Outcome::Skipped(_) => ("skipped".into(), String::new(), String::new()),
            };
            w.write_record([
                algo.name().to_string(),
                s.m.to_string(),
                s.n.to_string(),
                s.p.to_string(),
                s.ba.to_string(),
                s.bc.to_string(),
                cfg.seed.to_string(),
                wall,
                flops,
                memops,
            ])?;
        }
        w.flush()?;
    }
    out.flush()?;

    for (algo, outcome) in &rows {
        if let Outcome::Skipped(why) = outcome {
            eprintln!("{} skipped: {why}", algo.name());
        }
    }
    let wall_of = |want: Algo| {
        rows.iter().find_map(|(a, o)| match o {
            Outcome::Ran { wall, .. } if *a == want => Some(wall.as_secs_f64()),
            _ => None,
        })
    };
    if let (Some(d), Some(b)) = (wall_of(Algo::Dense), wall_of(Algo::Bcss)) {
        eprintln!("speedup dense/bcss = {:.2}", d / b.max(f64::MIN_POSITIVE));
    }
    Ok(())
}
