use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn rankhc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rankhc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "stderr: {}\nstdout: {}",
        String::from_utf8_lossy(&o.stderr),
        String::from_utf8_lossy(&o.stdout)
    );
}

fn read_json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// 30 x 4 tie-free panel with two shifted subjects.
fn write_panel(dir: &Path, negate_col: Option<usize>) -> PathBuf {
    let mut s = String::new();
    for i in 0..30 {
        let row: Vec<String> = (0..4)
            .map(|j| {
                let mut v = ((i * 37 + j * 11) % 30) as f64 + 0.1 * j as f64 + if i < 2 { 40.0 } else { 0.0 };
                if negate_col == Some(j) {
                    v = -v;
                }
                format!("{v}")
            })
            .collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    let p = dir.join(match negate_col {
        Some(j) => format!("neg{j}.csv"),
        None => "panel.csv".into(),
    });
    std::fs::write(&p, s).unwrap();
    p
}

const SMALL_TABLE: &[&str] = &["--mc-pq", "500", "--mc-t", "500", "--auto-tabulate", "--table-dir", "tables"];

#[test]
fn tie_free_panel_gives_identical_p_values() {
    let d = tempfile::tempdir().unwrap();
    write_panel(d.path(), None);
    let mut a = vec!["test", "--input", "panel.csv", "--seed", "5", "--out", "a.json", "--method", "random-ties"];
    a.extend_from_slice(SMALL_TABLE);
    ok(&rankhc(d.path(), &a));
    let mut b = vec!["test", "--input", "panel.csv", "--seed", "5", "--out", "b.json", "--method", "midrank-naive"];
    b.extend_from_slice(SMALL_TABLE);
    ok(&rankhc(d.path(), &b));
    let (ra, rb) = (read_json(d.path().join("a.json")), read_json(d.path().join("b.json")));
    assert_eq!(ra["result"]["p_value"], rb["result"]["p_value"]);
    assert_eq!(ra["result"]["statistic"], rb["result"]["statistic"]);
    assert_eq!(ra["rejects"], Value::Bool(true));
    // the second run found the cached table
    let m = read_json(d.path().join("b.json.manifest.json"));
    assert_eq!(m["tables"][0]["source"], "cache");
}

#[test]
fn direction_low_matches_negated_input() {
    let d = tempfile::tempdir().unwrap();
    write_panel(d.path(), None);
    write_panel(d.path(), Some(2));
    let mut a = vec![
        "test", "--input", "panel.csv", "--seed", "3", "--out", "a.json", "--subjects",
    ];
    a.extend_from_slice(SMALL_TABLE);
    ok(&rankhc(d.path(), &a));
    let mut b = vec![
        "test",
        "--input",
        "neg2.csv",
        "--direction",
        "high,high,low,high",
        "--seed",
        "3",
        "--out",
        "b.json",
        "--subjects",
    ];
    b.extend_from_slice(SMALL_TABLE);
    ok(&rankhc(d.path(), &b));
    let (ra, rb) = (read_json(d.path().join("a.json")), read_json(d.path().join("b.json")));
    assert_eq!(ra["result"], rb["result"]);
    assert_eq!(ra["result"]["subject_p"].as_array().unwrap().len(), 30);
}

#[test]
fn missing_table_is_a_json_error() {
    let d = tempfile::tempdir().unwrap();
    write_panel(d.path(), None);
    let o = rankhc(d.path(), &["test", "--input", "panel.csv", "--seed", "1"]);
    assert!(!o.status.success());
    let e: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(e["error"]["kind"], "table-missing");
    assert_eq!(e["error"]["n"], 30);
    assert_eq!(e["error"]["t"], 4);
}

#[test]
fn bad_input_is_a_json_error() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("bad.csv"), "1,2\n3,x\n").unwrap();
    let o = rankhc(d.path(), &["perm-hc", "--input", "bad.csv", "--seed", "1"]);
    assert!(!o.status.success());
    let e: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(e["error"]["kind"], "parse");
    assert_eq!(e["error"]["row"], 1);
    assert_eq!(e["error"]["col"], 1);
}

#[test]
fn seed_is_required() {
    let d = tempfile::tempdir().unwrap();
    write_panel(d.path(), None);
    let o = rankhc(d.path(), &["friedman", "--input", "panel.csv"]);
    assert!(!o.status.success());
}

#[test]
fn tabulate_is_reproducible() {
    let d = tempfile::tempdir().unwrap();
    for name in ["t1.json", "t2.json"] {
        ok(&rankhc(
            d.path(),
            &["tabulate", "--n", "20", "--t", "3", "--seed", "9", "--mc-pq", "300", "--mc-t", "300", "--out", name],
        ));
    }
    let (a, b) = (read_json(d.path().join("t1.json")), read_json(d.path().join("t2.json")));
    assert_eq!(a["checksum"], b["checksum"]);
    assert_eq!(a["n"], 20);
    assert_eq!(a["t"], 3);
    let rt = rankhc::load_table(d.path().join("t1.json")).unwrap();
    assert_eq!((rt.n(), rt.t()), (20, 3));
}

#[test]
fn simulate_writes_csv_and_manifest_and_replays() {
    let d = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--n", "60", "--t", "3", "--anomalies", "2", "--taus", "0", "--trials", "300", "--random-seed",
        "--mc-pq", "1000", "--mc-t", "1000", "--auto-tabulate", "--out", "power.csv",
    ];
    ok(&rankhc(d.path(), &args));
    let csv = std::fs::read_to_string(d.path().join("power.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().contains("tau,method,power,ci_lo,ci_hi,trials"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let power: f64 = row[8].parse().unwrap();
    assert!(power < 0.12, "level at tau = 0 was {power}");

    let m = read_json(d.path().join("power.csv.manifest.json"));
    assert_eq!(m["seed_source"], "random");
    let seed = m["seed"].as_u64().unwrap();
    assert!(m["replay_args"].as_array().unwrap().iter().any(|a| a == &Value::String(seed.to_string())));

    ok(&rankhc(d.path(), &["replay", "power.csv.manifest.json", "--out", "again.csv"]));
    assert_eq!(csv, std::fs::read_to_string(d.path().join("again.csv")).unwrap());
    let m2 = read_json(d.path().join("again.csv.manifest.json"));
    assert_eq!(m["outputs"][0]["sha256"], m2["outputs"][0]["sha256"]);
}

#[test]
fn thread_count_does_not_change_results() {
    let d = tempfile::tempdir().unwrap();
    write_panel(d.path(), None);
    for (threads, out) in [("1", "one.json"), ("3", "three.json")] {
        ok(&rankhc(
            d.path(),
            &[
                "test", "--input", "panel.csv", "--method", "midrank-perm", "--permutations", "199", "--seed", "4",
                "--threads", threads, "--out", out,
            ],
        ));
    }
    assert_eq!(
        std::fs::read(d.path().join("one.json")).unwrap(),
        std::fs::read(d.path().join("three.json")).unwrap()
    );
}

#[test]
fn boundary_at_zero_sigma_is_linear() {
    let d = tempfile::tempdir().unwrap();
    ok(&rankhc(d.path(), &["boundary", "--beta-points", "9", "--sigmas", "0,1", "--out", "b.csv"]));
    let csv = std::fs::read_to_string(d.path().join("b.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        if v[1] == 0.0 {
            assert_eq!(v[2], 2.0 * v[0] - 1.0);
            rows += 1;
        }
    }
    assert_eq!(rows, 9);
    assert!(d.path().join("b.csv.manifest.json").exists());
}

#[test]
fn comparators_and_fixtures_run() {
    let d = tempfile::tempdir().unwrap();
    write_panel(d.path(), None);
    for (cmd, extra) in [
        ("friedman", vec!["--mc", "500"]),
        ("dist-hc", vec!["--mc", "1000", "--family", "uniform", "--mu0", "15", "--sigma0", "8.7"]),
        ("perm-hc", vec!["--permutations", "99"]),
    ] {
        let out = format!("{cmd}.json");
        let mut a = vec![cmd, "--input", "panel.csv", "--seed", "2", "--out", out.as_str()];
        a.extend(extra);
        ok(&rankhc(d.path(), &a));
        let v = read_json(d.path().join(&out));
        let p = v["result"]["p_value"].as_f64().unwrap();
        assert!(p > 0.0 && p <= 1.0);
    }
    ok(&rankhc(d.path(), &["fixtures", "--seed", "1", "--mc", "20000", "--out", "fx.json"]));
    let v = read_json(d.path().join("fx.json"));
    assert_eq!(v["pass"], true);
    assert_eq!(v["covariance_counterexample"]["stated_identity_holds"], false);
}
