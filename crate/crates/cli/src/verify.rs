//! `--cmd verify`: every algorithm against the naive oracle, plus the
//! storage, round-trip, temporary-symmetry and counter invariants.

use std::io::Write;

use symtensor::cost_model::{bcss_costs, bcss_dense_temp_costs, bcss_storage, dense_costs, Exact};
use symtensor::dense::{max_rel_error, DenseTensor, MatView};
use symtensor::random::{random_matrix, random_symmetric};
use symtensor::sttsm::{
    sttsm_bcss_with, sttsm_dense_ttm_counted, sttsm_naive, sttsm_scalar_temps, BcssOptions,
};
use symtensor::sym_index::is_sym_in_modes;
use symtensor::{BcssTensor, OpCounter};

use crate::config::{max_dense_elems, pow_sat, usage, Algo, CliError, CliResult, RunConfig, Shape};

pub const TOLERANCE: f64 = 1e-10;
const TEMP_TOLERANCE: f64 = 1e-12;

struct Row {
    shape: Shape,
    check: &'static str,
    err: Option<f64>,
    failure: Option<String>,
}

fn cases(cfg: &RunConfig) -> CliResult<Vec<Shape>> {
    let ms = cfg.m.map_or(vec![2, 3, 4], |m| vec![m]);
    let ns = cfg.n.map_or(vec![4, 6], |n| vec![n]);
    let bs = cfg.ba.map_or(vec![1, 2], |b| vec![b]);
    let mut out = Vec::new();
    for &m in &ms {
        for &n in &ns {
            for &b in &bs {
                let p = cfg.p.unwrap_or(n);
                out.push(Shape::new(m, n, p, b, cfg.bc.unwrap_or(b))?);
            }
        }
    }
    Ok(out)
}

/// Largest relative deviation per canonical block of `got` from the
/// corresponding block of `reference`, normalized by the whole reference.
fn worst_block(got: &BcssTensor, reference: &DenseTensor) -> (Vec<usize>, f64) {
    let scale = reference.max_abs().max(f64::MIN_POSITIVE);
    let b = got.block_dim();
    let mut worst = (Vec::new(), 0.0);
    for (key, block) in got.canonical_blocks() {
        let start: Vec<usize> = key.iter().map(|k| k * b).collect();
        let want = reference
            .subtensor(&start, block.dims())
            .expect("block inside tensor");
        let dev = block
            .data()
            .iter()
            .zip(want.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
            / scale;
        if dev > worst.1 || dev.is_nan() {
            worst = (key, dev);
        }
    }
    worst
}

/// First stored block that differs bitwise from the source tensor.
fn first_bad_block(t: &BcssTensor, source: &DenseTensor) -> Option<Vec<usize>> {
    let b = t.block_dim();
    t.canonical_blocks().find_map(|(key, block)| {
        let start: Vec<usize> = key.iter().map(|k| k * b).collect();
        let want = source
            .subtensor(&start, block.dims())
            .expect("block inside tensor");
        let same = block
            .data()
            .iter()
            .zip(want.data())
            .all(|(x, y)| x.to_bits() == y.to_bits());
        (!same).then_some(key)
    })
}

fn check_err(
    rows: &mut Vec<Row>,
    shape: Shape,
    check: &'static str,
    err: f64,
    extra: Option<String>,
) {
    let failure = if err <= TOLERANCE {
        None
    } else {
        Some(match extra {
            Some(e) => format!("max relative error {err:.3e} > {TOLERANCE:e}; {e}"),
            None => format!("max relative error {err:.3e} > {TOLERANCE:e}"),
        })
    };
    rows.push(Row {
        shape,
        check,
        err: Some(err),
        failure,
    });
}

fn check_flag(rows: &mut Vec<Row>, shape: Shape, check: &'static str, failure: Option<String>) {
    rows.push(Row {
        shape,
        check,
        err: None,
        failure,
    });
}

fn run_case(cfg: &RunConfig, s: Shape, rows: &mut Vec<Row>) -> CliResult<()> {
    let algos = cfg.algo.expand();
    let a = random_symmetric(s.m, s.n, cfg.seed);
    let x = random_matrix(s.p, s.n, cfg.seed.wrapping_add(1));
    let xv: MatView<'_> = x.as_matrix()?;
    let reference = sttsm_naive(&a, xv)?;

    if algos.contains(&Algo::Naive) {
        check_err(rows, s, "naive", 0.0, None);
    }
    if algos.contains(&Algo::Scalar) {
        let c = sttsm_scalar_temps(&a, xv)?;
        check_err(rows, s, "scalar", max_rel_error(&c, &reference), None);
    }
    if algos.contains(&Algo::Dense) {
        let mut ctr = OpCounter::new();
        let c = sttsm_dense_ttm_counted(&a, xv, &mut ctr)?;
        check_err(rows, s, "dense", max_rel_error(&c, &reference), None);
        let want = dense_costs(s.m, s.n, s.p)?.flops;
        check_flag(
            rows,
            s,
            "dense_flops",
            (ctr.flops != want).then(|| format!("counted {} flops, model {want}", ctr.flops)),
        );
    }
    if !algos.contains(&Algo::Bcss) {
        return Ok(());
    }

    let mut ab = BcssTensor::compress(&a, s.ba, 0.0)?;
    if let Some(key) = cfg.corrupt_key(s.m)? {
        let block = ab
            .stored_block_mut(&key)
            .map_err(|e| CliError::Usage(format!("--corrupt-block {key:?}: {e}")))?;
        block.data_mut()[0] += 1.0;
    }
    check_flag(
        rows,
        s,
        "round_trip",
        first_bad_block(&ab, &a)
            .map(|k| format!("stored input block {k:?} differs from the source tensor")),
    );
    let want = bcss_storage(s.m, s.n, s.ba)?;
    let got = ab.storage();
    check_flag(
        rows,
        s,
        "storage",
        (got.payload != want.payload || got.meta_entries != want.meta_entries).then(|| {
            format!(
                "payload {} meta {} vs model {} {}",
                got.payload, got.meta_entries, want.payload, want.meta_entries
            )
        }),
    );

    let zero = Exact::from_integer(0);
    for exploit in [true, false] {
        let mut ctr = OpCounter::new();
        let mut asym = None;
        let opts = BcssOptions {
            exploit_partial_symmetry: exploit,
        };
        let c = sttsm_bcss_with(&ab, xv, s.bc, opts, &mut ctr, |e| {
            let modes: Vec<usize> = (0..e.level).collect();
            if asym.is_none()
                && !is_sym_in_modes(&e.temp.to_dense(), &modes, TEMP_TOLERANCE).unwrap_or(false)
            {
                asym = Some(format!(
                    "temporary T^({}) for output blocks {:?} not symmetric",
                    e.level, e.fixed
                ));
            }
        })?;
        let (name, flops_name, model) = if exploit {
            (
                "bcss",
                "bcss_flops",
                bcss_costs(s.m, s.n, s.p, s.ba, s.bc, zero)?,
            )
        } else {
            (
                "bcss_dense_temps",
                "bcss_dense_temps_flops",
                bcss_dense_temp_costs(s.m, s.n, s.p, s.ba, s.bc, zero)?,
            )
        };
        let err = max_rel_error(&c.decompress(), &reference);
        let (key, _) = worst_block(&c, &reference);
        check_err(
            rows,
            s,
            name,
            err,
            Some(format!("worst output block {key:?}")),
        );
        check_flag(
            rows,
            s,
            flops_name,
            (ctr.flops != model.flops)
                .then(|| format!("counted {} flops, model {}", ctr.flops, model.flops)),
        );
        if exploit {
            check_flag(rows, s, "temporaries", asym);
        }
    }
    Ok(())
}

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let shapes = cases(cfg)?;
    let cap = max_dense_elems()?;
    for s in &shapes {
        if pow_sat(s.n, s.m) > cap || pow_sat(s.p, s.m) > cap {
            return usage(format!(
                "{s}: dense oracle exceeds SYMTENSOR_MAX_DENSE_ELEMS = {cap}"
            ));
        }
    }
    if cfg.corrupt_block.is_some() && !cfg.algo.expand().contains(&Algo::Bcss) {
        return usage("--corrupt-block needs the bcss algorithm");
    }
    let mut rows = Vec::new();
    for s in shapes {
        run_case(cfg, s, &mut rows)?;
    }

    let mut out = cfg.sink()?;
    if cfg.csv {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record([
            "m",
            "n",
            "p",
            "b_A",
            "b_C",
            "check",
            "max_rel_err",
            "status",
            "detail",
        ])?;
        for r in &rows {
            w.write_record([
                r.shape.m.to_string(),
                r.shape.n.to_string(),
                r.shape.p.to_string(),
                r.shape.ba.to_string(),
                r.shape.bc.to_string(),
                r.check.to_string(),
                r.err.map_or(String::new(), |e| format!("{e:e}")),
                if r.failure.is_some() { "FAIL" } else { "ok" }.to_string(),
                r.failure.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
    } else {
        for r in &rows {
            let err = r
                .err
                .map_or(String::new(), |e| format!(" max_rel_err={e:.3e}"));
            match &r.failure {
                None => writeln!(out, "ok   {} {}{err}", r.shape, r.check)?,
                Some(f) => writeln!(out, "FAIL {} {}{err}: {f}", r.shape, r.check)?,
            }
        }
    }
    out.flush()?;

    let failures: Vec<String> = rows
        .iter()
        .filter_map(|r| {
            r.failure.as_ref().map(|f| {
                format!(
                    "(m,n,p,b_A,b_C)=({},{},{},{},{}) {}: {f}",
                    r.shape.m, r.shape.n, r.shape.p, r.shape.ba, r.shape.bc, r.check
                )
            })
        })
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failures.join("\n")))
    }
}
