use std::collections::HashMap;
use std::process::{Command, Output};

use symtensor::cost_model::{bcss_costs, dense_costs, Exact};

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_symtensor"));
    cmd.args(args).env_remove("SYMTENSOR_MAX_DENSE_ELEMS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// CSV rows keyed by header name.
fn records(text: &str) -> Vec<HashMap<String, String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            headers
                .iter()
                .map(String::from)
                .zip(rec.iter().map(String::from))
                .collect()
        })
        .collect()
}

fn num(row: &HashMap<String, String>, key: &str) -> f64 {
    row[key]
        .parse()
        .unwrap_or_else(|_| panic!("{key} = {:?}", row[key]))
}

#[test]
fn verify_defaults_pass() {
    let o = run(&["--cmd", "verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().count() > 20);
    assert!(text.lines().all(|l| l.starts_with("ok ")), "{text}");
}

#[test]
fn verify_csv_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("verify.csv");
    let o = run(&[
        "--cmd",
        "verify",
        "--m",
        "3",
        "--n",
        "6",
        "--ba",
        "3",
        "--bc",
        "2",
        "--p",
        "4",
        "--csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = records(&std::fs::read_to_string(&path).unwrap());
    assert!(rows.iter().any(|r| r["check"] == "bcss"));
    for r in &rows {
        assert_eq!(r["status"], "ok", "{r:?}");
        assert_eq!(
            (r["m"].as_str(), r["p"].as_str(), r["b_C"].as_str()),
            ("3", "4", "2")
        );
    }
}

#[test]
fn corrupted_block_is_named() {
    let o = run(&[
        "--cmd",
        "verify",
        "--m",
        "3",
        "--n",
        "4",
        "--ba",
        "2",
        "--corrupt-block",
        "0,1,1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("[0, 1, 1]"), "{err}");
    assert!(err.contains("(m,n,p,b_A,b_C)=(3,4,4,2,2)"), "{err}");
}

#[test]
fn non_canonical_corrupt_block_is_usage_error() {
    let o = run(&[
        "--cmd",
        "verify",
        "--m",
        "2",
        "--n",
        "4",
        "--ba",
        "2",
        "--corrupt-block",
        "1,0",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["--cmd", "verify", "--m", "1"][..],
        &["--cmd", "bench", "--n", "10", "--ba", "4"],
        &["--cmd", "bench", "--reps", "2"],
        &["--cmd", "model", "--sweep", "point"],
        &["--cmd", "frobnicate"],
        &["--cmd", "verify", "--no-such-flag"],
        &["--cmd", "verify", "--m", "x"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn bad_env_cap_is_usage_error() {
    let o = run_env(
        &["--cmd", "verify", "--m", "2", "--n", "4"],
        &[("SYMTENSOR_MAX_DENSE_ELEMS", "lots")],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_respects_dense_cap() {
    let o = run_env(
        &["--cmd", "verify", "--m", "3", "--n", "6"],
        &[("SYMTENSOR_MAX_DENSE_ELEMS", "100")],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("SYMTENSOR_MAX_DENSE_ELEMS"));
}

fn bench(args: &[&str]) -> Vec<HashMap<String, String>> {
    let o = run(&[&["--cmd", "bench"], args].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    records(&stdout(&o))
}

#[test]
fn bench_is_deterministic_apart_from_timing() {
    let args = ["--m", "3", "--n", "8", "--ba", "2", "--seed", "7"];
    let strip = |rows: Vec<HashMap<String, String>>| {
        rows.into_iter()
            .map(|mut r| {
                r.remove("wall_seconds");
                let mut v: Vec<_> = r.into_iter().collect();
                v.sort();
                v
            })
            .collect::<Vec<_>>()
    };
    let a = strip(bench(&args));
    assert_eq!(a.len(), 4);
    assert_eq!(a, strip(bench(&args)));
}

#[test]
fn bench_counts_match_cost_model() {
    let (m, n, p, ba, bc) = (3, 8, 6, 4, 3);
    let rows = bench(&[
        "--m", "3", "--n", "8", "--p", "6", "--ba", "4", "--bc", "3", "--algo", "all",
    ]);
    let row = |name: &str| rows.iter().find(|r| r["algorithm"] == name).unwrap();
    let k0 = Exact::from_integer(0);
    let b = bcss_costs(m, n, p, ba, bc, k0).unwrap();
    let d = dense_costs(m, n, p).unwrap();
    assert_eq!(row("bcss")["flops"], b.flops.to_string());
    assert_eq!(row("dense")["flops"], d.flops.to_string());
    for (name, model) in [("bcss", b.memops), ("dense", d.memops)] {
        let ratio = num(row(name), "memops") / model as f64;
        assert!((1.0..=2.0).contains(&ratio), "{name} memops ratio {ratio}");
    }
    for r in &rows {
        assert_eq!(r["seed"], "1");
        assert!(num(r, "wall_seconds") >= 0.0);
    }
}

#[test]
fn single_block_bcss_matches_dense_flops() {
    let rows = bench(&["--m", "3", "--n", "6", "--ba", "6", "--algo", "all"]);
    let flops = |name: &str| rows.iter().find(|r| r["algorithm"] == name).unwrap()["flops"].clone();
    assert_eq!(flops("bcss"), flops("dense"));
}

#[test]
fn oversized_dense_is_skipped() {
    for algo in ["naive", "scalar", "dense"] {
        let rows = bench(&["--m", "8", "--n", "16", "--ba", "8", "--algo", algo]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0]["algorithm"], algo);
        assert_eq!(rows[0]["wall_seconds"], "skipped");
        assert!(rows[0]["flops"].is_empty() && rows[0]["memops"].is_empty());
    }
    // the blocked kernel never needs the dense tensor
    let rows = bench(&["--m", "8", "--n", "2", "--ba", "1", "--algo", "bcss"]);
    assert!(num(&rows[0], "flops") > 0.0);
}

#[test]
fn env_cap_skips_dense_baselines() {
    let o = run_env(
        &["--cmd", "bench", "--m", "3", "--n", "8", "--ba", "2"],
        &[("SYMTENSOR_MAX_DENSE_ELEMS", "100")],
    );
    assert_eq!(o.status.code(), Some(0));
    let rows = records(&stdout(&o));
    assert_eq!(
        rows.iter()
            .filter(|r| r["wall_seconds"] == "skipped")
            .count(),
        3
    );
    assert!(stderr(&o).contains("skipped"));
}

#[test]
fn model_point_storage_ratio() {
    let o = run(&[
        "--cmd", "model", "--sweep", "point", "--m", "2", "--n", "512", "--nbar", "16",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = records(&stdout(&o));
    assert_eq!(rows.len(), 2);
    let get = |v: &str| rows.iter().find(|r| r["variant"] == v).unwrap();
    let ratio = num(get("dense"), "storage_A") / num(get("bcss"), "storage_A");
    assert!((ratio - 1.88).abs() < 0.01, "{ratio}");
    assert_eq!(get("bcss")["b_A"], "32");
}

#[test]
fn model_block_sweep_beats_dense_storage() {
    let o = run(&["--cmd", "model", "--ba", "4", "--n", "32", "--m", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = records(&stdout(&o));
    assert_eq!(rows.len(), 16);
    for pair in rows.chunks(2) {
        let (b, d) = (&pair[0], &pair[1]);
        assert_eq!(
            (b["variant"].as_str(), d["variant"].as_str()),
            ("bcss", "dense")
        );
        assert_eq!(b["n"], d["n"]);
        if num(b, "n") > 4.0 {
            assert!(num(b, "storage_A") < num(d, "storage_A"), "{b:?}");
        }
    }
}

#[test]
fn storage_argmin_beats_dense() {
    let o = run(&["--cmd", "storage", "--m", "4", "--n", "32", "--csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows = records(&stdout(&o));
    assert_eq!(rows.len(), 6);
    let best: Vec<_> = rows.iter().filter(|r| r["argmin"] == "true").collect();
    assert_eq!(best.len(), 1);
    let b = best[0];
    assert!(num(b, "total_with_meta") < num(b, "dense"));
    assert!(rows
        .iter()
        .all(|r| num(r, "total_with_meta") >= num(b, "total_with_meta")));
    for r in rows.iter().filter(|r| !r["measured_payload"].is_empty()) {
        assert_eq!(r["measured_payload"], r["payload"]);
        assert_eq!(r["measured_meta_entries"], r["meta_entries"]);
    }
}

#[test]
fn storage_human_output() {
    let o = run(&["--cmd", "storage", "--m", "3", "--n", "16"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("argmin b="));
}
