use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn evoseq(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evoseq"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn evoseq")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const RESIDUES: &[u8] = b"ACDE";

/// Every length-3 variant over ACDE with a made-up smooth fitness.
fn write_toy_table(path: &Path, skip_every: Option<usize>) {
    let mut text = String::from("sequence,fitness\n");
    let mut i = 0;
    for a in RESIDUES {
        for b in RESIDUES {
            for c in RESIDUES {
                i += 1;
                if skip_every.is_some_and(|n| i % n == 0) {
                    continue;
                }
                let f = (*a as f64 - 65.0) * 0.5 + (*b as f64 - 65.0) * 0.25 - (*c as f64 - 67.0).abs();
                text.push_str(&format!("{}{}{},{f}\n", *a as char, *b as char, *c as char));
            }
        }
    }
    fs::write(path, text).unwrap();
}

fn toy_config(dir: &Path, regime: &str, extra: &str) -> PathBuf {
    write_toy_table(&dir.join("toy.csv"), None);
    let text = format!(
        r#"[landscape]
kind = "exact"
name = "toy"
path = "toy.csv"
wild_type = "AAA"
residues = "ACDE"

[regime]
{regime}

[campaign]
population = 6
iterations = 3
topk = [1, 3]
{extra}
"#
    );
    let p = dir.join("toy.toml");
    fs::write(&p, text).unwrap();
    p
}

fn read_jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn run_writes_one_trajectory_per_seed_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    toy_config(dir.path(), "kind = \"single\"", "");
    let o = evoseq(&["run", "--config", "toy.toml", "--seeds", "1,2,3", "--out", "runs"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for s in 1..=3 {
        assert!(dir.path().join(format!("runs/seed{s}.jsonl")).is_file());
    }
    let m: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("runs/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m["seeds"], serde_json::json!([1, 2, 3]));
    assert_eq!(m["complete"], true);
    assert_eq!(
        m["config_snapshot"].as_str().unwrap(),
        fs::read_to_string(dir.path().join("toy.toml")).unwrap()
    );
    assert!(m["engine_version"].as_str().is_some_and(|v| !v.is_empty()));
    assert_eq!(m["config_resolved"]["campaign"]["population"], 6);
}

#[test]
fn reruns_and_parallel_seeds_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    toy_config(dir.path(), "kind = \"constrained\"\nh = 2", "");
    let a = evoseq(&["run", "--config", "toy.toml", "--seeds", "4,5", "--out", "a"], dir.path());
    let b = evoseq(
        &["run", "--config", "toy.toml", "--seeds", "4,5", "--out", "b", "--parallel-seeds"],
        dir.path(),
    );
    assert!(a.status.success() && b.status.success());
    for s in [4, 5] {
        let name = format!("seed{s}.jsonl");
        assert_eq!(
            fs::read(dir.path().join("a").join(&name)).unwrap(),
            fs::read(dir.path().join("b").join(&name)).unwrap()
        );
    }
}

#[test]
fn invalid_regime_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    toy_config(dir.path(), "kind = \"sideways\"", "");
    let o = evoseq(&["run", "--config", "toy.toml", "--out", "runs"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("regime.kind"), "{}", stderr(&o));

    let o = evoseq(&["validate-config", "toy.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("regime.kind"));
}

#[test]
fn oracle_failure_exits_3_with_partial_marker() {
    let dir = tempfile::tempdir().unwrap();
    toy_config(dir.path(), "kind = \"single\"", "");
    // Drop a third of the table; missing variants are errors by default.
    write_toy_table(&dir.path().join("toy.csv"), Some(3));
    let o = evoseq(&["run", "--config", "toy.toml", "--seeds", "1", "--out", "runs"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let m: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("runs/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m["complete"], false);
    assert_eq!(m["results"][0]["complete"], false);
    assert!(m["results"][0]["error"].as_str().is_some());
    // The trajectory still ends with a metrics record marked incomplete.
    let recs = read_jsonl(&dir.path().join("runs/seed1.jsonl"));
    let last = recs.last().unwrap();
    assert_eq!(last["kind"], "metrics");
    assert_eq!(last["complete"], false);
}

#[test]
fn reference_config_validates_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = evoseq(&["validate-config", "--reference"], dir.path());
    assert!(o.status.success());
    fs::write(dir.path().join("ref.toml"), &o.stdout).unwrap();
    let o = evoseq(&["validate-config", "ref.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn report_counts_rows() {
    let dir = tempfile::tempdir().unwrap();
    toy_config(dir.path(), "kind = \"single\"", "");
    assert!(evoseq(&["run", "--config", "toy.toml", "--seeds", "1,2,3", "--out", "runs"], dir.path())
        .status
        .success());
    let o = evoseq(
        &[
            "report", "--out", "rep", "--k", "1,10,50", "runs/seed1.jsonl", "runs/seed2.jsonl",
            "runs/seed3.jsonl",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = fs::read_to_string(dir.path().join("rep/metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines[0], "metric,mean,std,k,seeds");
    assert_eq!(lines.len(), 4);
    let curve = fs::read_to_string(dir.path().join("rep/curve.csv")).unwrap();
    // N + 1 rows per seed (iterations 0..=3).
    assert_eq!(curve.lines().count() - 1, 3 * 4);

    let o = evoseq(&["report", "--out", "one", "runs/seed2.jsonl"], dir.path());
    assert!(o.status.success());
    let one = fs::read_to_string(dir.path().join("one/metrics.csv")).unwrap();
    for line in one.lines().skip(1) {
        let std: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(std, 0.0, "{line}");
    }
}

#[test]
fn report_rejects_mixed_configs() {
    let dir = tempfile::tempdir().unwrap();
    toy_config(dir.path(), "kind = \"single\"", "");
    assert!(evoseq(&["run", "--config", "toy.toml", "--seeds", "1", "--out", "x"], dir.path())
        .status
        .success());
    toy_config(dir.path(), "kind = \"constrained\"\nh = 1", "");
    assert!(evoseq(&["run", "--config", "toy.toml", "--seeds", "1", "--out", "y"], dir.path())
        .status
        .success());
    let o = evoseq(&["report", "--out", "r", "x/seed1.jsonl", "y/seed1.jsonl"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("fingerprint"), "{}", stderr(&o));
}

fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 >= b.0 && a.1 >= b.1 && (a.0 > b.0 || a.1 > b.1)
}

#[test]
fn pareto_frontier_matches_brute_force_over_the_ledger() {
    let dir = tempfile::tempdir().unwrap();
    toy_config(dir.path(), "kind = \"multi_pareto\"", "");
    assert!(evoseq(&["run", "--config", "toy.toml", "--seeds", "7", "--out", "runs"], dir.path())
        .status
        .success());
    let o = evoseq(&["frontier", "--mode", "pareto", "--out", "front.csv", "runs/seed7.jsonl"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));

    let mut points: Vec<(f64, f64, String)> = Vec::new();
    let mut seen = BTreeSet::new();
    for r in read_jsonl(&dir.path().join("runs/seed7.jsonl")) {
        if r["kind"] == "evaluation" {
            let s = r["sequence"].as_str().unwrap().to_string();
            if seen.insert(s.clone()) {
                let o = r["objectives"].as_array().unwrap();
                points.push((o[0].as_f64().unwrap(), o[1].as_f64().unwrap(), s));
            }
        }
    }
    let expected: BTreeSet<String> = points
        .iter()
        .filter(|p| !points.iter().any(|q| dominates((q.0, q.1), (p.0, p.1))))
        .map(|p| p.2.clone())
        .collect();
    let text = fs::read_to_string(dir.path().join("front.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("f1,f2,sequence"));
    let got: BTreeSet<String> = lines.map(|l| l.rsplit(',').next().unwrap().to_string()).collect();
    assert_eq!(got, expected);
}

#[test]
fn pareto_mode_needs_two_objectives() {
    let dir = tempfile::tempdir().unwrap();
    toy_config(dir.path(), "kind = \"single\"", "");
    assert!(evoseq(&["run", "--config", "toy.toml", "--seeds", "1", "--out", "runs"], dir.path())
        .status
        .success());
    let o = evoseq(&["frontier", "runs/seed1.jsonl"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("2 objectives"));
    let o = evoseq(&["frontier", "--mode", "per-distance", "runs/seed1.jsonl"], dir.path());
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("distance,fitness\n"));
}

#[test]
fn stats_groups_by_position() {
    let dir = tempfile::tempdir().unwrap();
    write_toy_table(&dir.path().join("toy.csv"), None);
    let o = evoseq(
        &["stats", "--table", "toy.csv", "--wild-type", "AAA", "--sites", "1,2,3", "--positions", "1", "--out", "h.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("h.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "combination,mean_fitness,count");
    assert_eq!(rows.len(), 5);
    let avg = |f: &dyn Fn(f64) -> f64| RESIDUES.iter().map(|&r| f(r as f64)).sum::<f64>() / 4.0;
    let rest = avg(&|b| (b - 65.0) * 0.25) + avg(&|c| -(c - 67.0).abs());
    for (row, &a) in rows[1..].iter().zip(RESIDUES) {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[0], (a as char).to_string());
        let mean: f64 = cols[1].parse().unwrap();
        assert!((mean - ((a as f64 - 65.0) * 0.5 + rest)).abs() < 1e-12, "{row}");
        assert_eq!(cols[2], "16");
    }

    let o = evoseq(
        &["stats", "--table", "toy.csv", "--wild-type", "AAAA", "--sites", "1,2,4", "--positions", "3"],
        dir.path(),
    );
    assert!(!o.status.success());
}

#[test]
fn replay_config_reproduces_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fixtures");
    fs::create_dir(&fx).unwrap();
    let mut names = Vec::new();
    for t in 1..=3 {
        for k in 0..6 {
            let name = format!("iter{t}_slot{k}.txt");
            // Alternate a usable answer with an unparseable one.
            let body = if k % 2 == 0 { "\\box{E D C}" } else { "no idea" };
            fs::write(fx.join(&name), body).unwrap();
            names.push(name);
        }
    }
    fs::write(
        fx.join("manifest.json"),
        serde_json::json!({"model": "m", "fixtures": names}).to_string(),
    )
    .unwrap();
    toy_config(dir.path(), "kind = \"single\"", "");
    let cfg = dir.path().join("toy.toml");
    let mut text = fs::read_to_string(&cfg).unwrap();
    text.push_str(
        r#"
[proposer]
mode = "llm"

[llm]
transport = "replay"
replay_dir = "fixtures"
description = "A three-residue toy."
objective = "fitness"
"#,
    );
    fs::write(&cfg, text).unwrap();
    for out in ["a", "b"] {
        let o = evoseq(&["run", "--config", "toy.toml", "--seeds", "2", "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = fs::read(dir.path().join("a/seed2.jsonl")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/seed2.jsonl")).unwrap());
    let recs = read_jsonl(&dir.path().join("a/seed2.jsonl"));
    assert!(recs
        .iter()
        .any(|r| r["kind"] == "proposal" && r["source"] == "llm" && r["sequence"] == "EDC"));
}
