//! `--cmd model` and `--cmd storage`: cost-model tables.

use std::io::Write;

use symtensor::bcss::meta_entry_bytes;
use symtensor::cost_model::{
    bcss_costs, dense_costs, format_exact, measured_meta_k, metadata_sweep, CostReport, Exact,
};
use symtensor::BcssTensor;

use crate::config::{usage, CliResult, RunConfig, Shape, Sweep};

pub const MODEL_HEADER: [&str; 12] = [
    "variant",
    "m",
    "n",
    "p",
    "b_A",
    "b_C",
    "storage_A",
    "storage_C",
    "storage_X",
    "storage_temps",
    "flops",
    "memops",
];

fn model_points(cfg: &RunConfig) -> CliResult<Vec<Shape>> {
    let ms = cfg.m.map_or((2..=6).collect(), |m| vec![m]);
    let n_max = cfg.n.unwrap_or(64);
    let mut out = Vec::new();
    match cfg.sweep {
        Sweep::Point => {
            let m = cfg.m.unwrap_or(2);
            let n = cfg.n.unwrap_or(512);
            let p = cfg.p.unwrap_or(n);
            let ba = match (cfg.ba, cfg.nbar) {
                (Some(b), _) => b,
                (None, Some(nbar)) if nbar > 0 && n.is_multiple_of(nbar) => n / nbar,
                (None, Some(nbar)) => return usage(format!("--nbar {nbar} must divide n = {n}")),
                (None, None) => return usage("point sweep needs --ba or --nbar"),
            };
            let bc = cfg.bc.unwrap_or(if p == n { ba } else { p });
            out.push(Shape::new(m, n, p, ba, bc)?);
        }
        Sweep::Block => {
            let b = cfg.ba.unwrap_or(8);
            if b == 0 || b > n_max {
                return usage(format!(
                    "block sweep needs 0 < --ba <= n, got {b} and n = {n_max}"
                ));
            }
            for &m in &ms {
                for n in (b..=n_max).step_by(b) {
                    out.push(Shape::new(m, n, n, b, b)?);
                }
            }
        }
        Sweep::Grid => {
            let nbar = cfg.nbar.unwrap_or(2);
            if nbar == 0 || nbar > n_max {
                return usage(format!(
                    "grid sweep needs 0 < --nbar <= n, got {nbar} and n = {n_max}"
                ));
            }
            for &m in &ms {
                for n in (nbar..=n_max).step_by(nbar) {
                    out.push(Shape::new(m, n, n, n / nbar, n / nbar)?);
                }
            }
        }
    }
    Ok(out)
}

fn model_row(r: &CostReport) -> Vec<String> {
    let p = &r.params;
    vec![
        r.variant.to_string(),
        p.m.to_string(),
        p.n.to_string(),
        p.p.to_string(),
        p.b_a.to_string(),
        p.b_c.to_string(),
        format_exact(&r.storage_a_total()),
        format_exact(&r.storage_c_total()),
        r.storage_x.to_string(),
        format_exact(&r.storage_temps_total()),
        r.flops.to_string(),
        r.memops.to_string(),
    ]
}

pub fn run_model(cfg: &RunConfig) -> CliResult<()> {
    let k = measured_meta_k();
    let mut out = cfg.sink()?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(MODEL_HEADER)?;
        for s in model_points(cfg)? {
            w.write_record(model_row(&bcss_costs(s.m, s.n, s.p, s.ba, s.bc, k)?))?;
            w.write_record(model_row(&dense_costs(s.m, s.n, s.p)?))?;
        }
        w.flush()?;
    }
    out.flush()?;
    Ok(())
}

/// Largest blocked tensor the storage report allocates to measure.
const MEASURE_BUDGET_BYTES: u128 = 1 << 28;

pub const STORAGE_HEADER: [&str; 10] = [
    "b",
    "payload",
    "meta_entries",
    "meta_bytes",
    "meta_k",
    "total_with_meta",
    "dense",
    "measured_payload",
    "measured_meta_entries",
    "argmin",
];

pub fn run_storage(cfg: &RunConfig) -> CliResult<()> {
    let m = cfg.m.unwrap_or(5);
    let n = cfg.n.unwrap_or(64);
    // validates the order; the block dimension is swept
    Shape::new(m, n, n, 1, 1)?;
    let k = measured_meta_k();
    let sweep = metadata_sweep(m, n, k)?;
    let entry_bytes = meta_entry_bytes() as u128;

    let mut rows = Vec::new();
    for (i, pt) in sweep.points.iter().enumerate() {
        let bytes = 8 * pt.storage.payload + entry_bytes * pt.storage.meta_entries;
        let measured = if bytes <= MEASURE_BUDGET_BYTES {
            Some(BcssTensor::zeros(m, n, pt.b)?.storage())
        } else {
            None
        };
        rows.push(vec![
            pt.b.to_string(),
            pt.storage.payload.to_string(),
            pt.storage.meta_entries.to_string(),
            (pt.storage.meta_entries * entry_bytes).to_string(),
            format_exact(&k),
            format_exact(&pt.total),
            sweep.dense.to_string(),
            measured.map_or(String::new(), |s| s.payload.to_string()),
            measured.map_or(String::new(), |s| s.meta_entries.to_string()),
            (i == sweep.argmin).to_string(),
        ]);
    }

    let mut out = cfg.sink()?;
    if cfg.csv {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(STORAGE_HEADER)?;
        for r in &rows {
            w.write_record(r)?;
        }
        w.flush()?;
    } else {
        writeln!(
            out,
            "m={m} n={n}: meta record {entry_bytes} bytes = {} doubles; dense {}",
            format_exact(&k),
            sweep.dense
        )?;
        writeln!(
            out,
            "{:>6} {:>16} {:>14} {:>18} {:>16}",
            "b", "payload", "meta", "total", "measured"
        )?;
        for r in &rows {
            let measured = if r[7].is_empty() {
                "-".to_string()
            } else {
                format!("{}+{}", r[7], r[8])
            };
            writeln!(
                out,
                "{:>6} {:>16} {:>14} {:>18} {:>16}",
                r[0], r[1], r[2], r[5], measured
            )?;
        }
        let best = sweep.best();
        let vs = if best.total < Exact::from_integer(sweep.dense) {
            "below"
        } else {
            "not below"
        };
        writeln!(
            out,
            "argmin b={} total {} ({vs} dense {})",
            best.b,
            format_exact(&best.total),
            sweep.dense
        )?;
    }
    out.flush()?;
    Ok(())
}
