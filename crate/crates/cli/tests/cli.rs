use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const VLMC: &str = r#"{"order":2,"alphabet":2,"rows":[
  {"context":[0,0],"probs":[0.9,0.1]},
  {"context":[0,1],"probs":[0.5,0.5]},
  {"context":[1,0],"probs":[0.1,0.9]},
  {"context":[1,1],"probs":[0.5,0.5]}]}"#;

fn memword(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memword"))
        .args(args)
        .output()
        .expect("spawn memword")
}

fn ok(args: &[&str]) -> String {
    let out = memword(args);
    assert!(
        out.status.success(),
        "memword {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(name);
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(schema_name: &str, doc: &Value) {
    let v = jsonschema::validator_for(&schema(schema_name)).unwrap();
    let errors: Vec<String> = v.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema_name}: {errors:?}");
}

fn chain_file(dir: &TempDir) -> PathBuf {
    let p = dir.path().join("chain.json");
    fs::write(&p, VLMC).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn oracle_report_matches_schema_and_fixture() {
    let dir = TempDir::new().unwrap();
    let chain = chain_file(&dir);
    assert_valid(
        "chain_spec.schema.json",
        &serde_json::from_str(VLMC).unwrap(),
    );
    let doc: Value = serde_json::from_str(&ok(&["oracle", "--chain", s(&chain)])).unwrap();
    assert_valid("oracle_report.schema.json", &doc);
    assert_eq!(doc["longest_minimal_length"], 2);
    assert_eq!(doc["shortest_memory_length"], 1);
    let words: Vec<Vec<u64>> = serde_json::from_value(doc["minimal_words"].clone()).unwrap();
    assert_eq!(words, vec![vec![0, 0], vec![1], vec![1, 0]]);
}

#[test]
fn simulate_then_estimate_round_trip() {
    let dir = TempDir::new().unwrap();
    let chain = chain_file(&dir);
    let seq = dir.path().join("seq.txt");
    let report = ok(&[
        "simulate",
        "--chain",
        s(&chain),
        "--length",
        "5001",
        "--seed",
        "4",
        "--output",
        s(&seq),
    ]);
    let doc: Value = serde_json::from_str(&report).unwrap();
    assert_valid("oracle_report.schema.json", &doc);
    assert!(doc["suffix_memory_length"].as_u64().unwrap() <= 2);
    assert_eq!(fs::read_to_string(&seq).unwrap().lines().count(), 5001);

    let csv = ok(&[
        "estimate",
        "--input",
        s(&seq),
        "--checkpoints",
        "50,500,5000",
    ]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,chi,threshold,deltas,support_sizes"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2][0], "5000");
    let chi: usize = rows[2][1].parse().unwrap();
    assert_eq!(chi, 2);
    // one discrepancy per tested order, the last one accepted
    let deltas: Vec<f64> = rows[2][3].split(';').map(|x| x.parse().unwrap()).collect();
    assert_eq!(deltas.len(), chi + 1);
    assert!(deltas[chi] <= rows[2][2].parse::<f64>().unwrap());
}

#[test]
fn simulated_estimate_prefixes_seed_column() {
    let csv = ok(&[
        "estimate",
        "--process",
        "ryabko-f0",
        "--seeds",
        "1,2,3",
        "--checkpoints",
        "100,1000",
    ]);
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("seed,n,chi"));
    assert_eq!(lines.len(), 1 + 6);
    assert!(lines[1].starts_with("1,100,"));
    assert!(lines[6].starts_with("3,1000,"));
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"n":[10,20],"gamma":0.5,"beta":0.1}"#).unwrap();
    let from_file = ok(&["--config", s(&cfg), "bound", "chi"]);
    assert_eq!(from_file.lines().count(), 3);
    assert!(from_file.lines().nth(1).unwrap().starts_with("10,0.5,0.1,"));
    let overridden = ok(&[
        "--config",
        s(&cfg),
        "bound",
        "chi",
        "--n",
        "30",
        "--beta",
        "0.2",
    ]);
    let rows: Vec<&str> = overridden.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("30,0.5,0.2,"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"gama":0.5}"#).unwrap();
    assert!(!memword(&["--config", s(&cfg), "bound", "chi"])
        .status
        .success());
}

#[test]
fn hoeffding_row() {
    let csv = ok(&[
        "bound",
        "hoeffding",
        "--n",
        "1",
        "--width",
        "1",
        "--epsilon",
        "1",
    ]);
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let b: f64 = row[3].parse().unwrap();
    assert!((b - 2.0 * (-2.0f64).exp()).abs() < 1e-12);
}

#[test]
fn invalid_parameters_fail_cleanly() {
    for args in [
        vec!["adversary", "--replicates", "0"],
        vec!["bound", "chi", "--beta", "0.3"],
        vec![
            "estimate",
            "--process",
            "ryabko",
            "--seeds",
            "1",
            "--length",
            "10",
            "--checkpoints",
            "5,3",
        ],
        vec!["simulate", "--process", "nope", "--length", "10"],
        vec![
            "simulate",
            "--process",
            "even",
            "--chain",
            "x.json",
            "--length",
            "10",
        ],
    ] {
        let out = memword(&args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
}

#[test]
fn adversary_plan_validates_and_drives_simulation() {
    let dir = TempDir::new().unwrap();
    let plan = dir.path().join("plan.json");
    let csv = dir.path().join("search.csv");
    ok(&[
        "adversary",
        "--replicates",
        "100",
        "--stages",
        "2",
        "--seed",
        "9",
        "--output",
        s(&plan),
        "--csv",
        s(&csv),
    ]);
    let doc: Value = serde_json::from_str(&fs::read_to_string(&plan).unwrap()).unwrap();
    assert_valid("stage_plan.schema.json", &doc);
    assert_eq!(doc["stages"].as_array().unwrap().len(), 2);

    let table = fs::read_to_string(&csv).unwrap();
    let accepted = table.lines().filter(|l| l.contains(",true,")).count();
    assert_eq!(accepted, 2);

    let path = ok(&[
        "simulate",
        "--plan",
        s(&plan),
        "--length",
        "2000",
        "--seed",
        "1",
    ]);
    // folded bands are mirrored away, so their letters never appear
    let letters: Vec<u64> = path.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(letters.len(), 2000);
    for stage in doc["stages"].as_array().unwrap() {
        let lo = stage["fold_band"][0].as_u64().unwrap();
        let hi = stage["fold_band"][1].as_u64().unwrap();
        assert!(
            letters.iter().all(|&a| a < lo || a > hi),
            "band {lo}..={hi}"
        );
    }
    assert!(!letters.contains(&1), "state 1 merges into letter 0");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    for run in ["a", "b"] {
        let d = dir.path().join(run);
        fs::create_dir(&d).unwrap();
        ok(&[
            "adversary",
            "--replicates",
            "50",
            "--seed",
            "3",
            "--output",
            s(&d.join("p.json")),
        ]);
        ok(&[
            "simulate",
            "--process",
            "even",
            "--length",
            "3000",
            "--seed",
            "5",
            "--output",
            s(&d.join("s.txt")),
        ]);
        ok(&[
            "estimate",
            "--input",
            s(&d.join("s.txt")),
            "--output",
            s(&d.join("e.csv")),
        ]);
    }
    for f in ["p.json", "s.txt", "e.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between runs");
    }
}
