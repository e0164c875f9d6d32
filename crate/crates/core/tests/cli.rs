mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{layout4, reference};
use hetnet_sleep::scenario::save_scenario;

fn hetnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetnet")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_prints_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.json");
    save_scenario(&layout4(), &file).unwrap();
    let out = hetnet(&["solve", path(&file)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("algorithm,mode,p_het_w"));
    assert_eq!(text.lines().count(), 2);

    let out = hetnet(&["solve", path(&file), "--format", "json", "--algorithm", "nonuniform"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["mode"].as_str().unwrap().len(), 4);
    assert!(v["p_het_w"].as_f64().unwrap() > 712.0);
}

#[test]
fn oracle_and_thresholds_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.json");
    save_scenario(&layout4(), &file).unwrap();
    let out = hetnet(&["oracle", path(&file)]);
    assert!(out.status.success());
    let out = hetnet(&["thresholds", path(&file), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["cells"].as_array().unwrap().len(), 4);
    let target = dir.path().join("mc.json");
    let out = hetnet(&[
        "validate", path(&file), "--mode", "1010", "--draws", "2000", "--seed", "5",
        "--format", "json", "--out", path(&target),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(v["n_draws"], 2000);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{}").unwrap();
    assert_eq!(hetnet(&["solve", path(&bad)]).status.code(), Some(2));

    let wrong_mode = dir.path().join("s.json");
    save_scenario(&layout4(), &wrong_mode).unwrap();
    assert_eq!(hetnet(&["validate", path(&wrong_mode), "--mode", "10"]).status.code(), Some(2));

    let mut heavy = layout4();
    heavy.lambda0 = 5e-3;
    let heavy_file = dir.path().join("heavy.json");
    save_scenario(&heavy, &heavy_file).unwrap();
    assert_eq!(hetnet(&["solve", path(&heavy_file)]).status.code(), Some(3));
    let out = hetnet(&["solve", path(&heavy_file), "--admission"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains(",false,"));

    let positions: Vec<[f64; 2]> = (0..25)
        .map(|i| [-240.0 + 40.0 * (i % 13) as f64, if i < 13 { 100.0 } else { -100.0 }])
        .collect();
    let big = reference(positions, 1e-4, vec![1e-2; 25]);
    let big_file = dir.path().join("big.json");
    save_scenario(&big, &big_file).unwrap();
    assert_eq!(hetnet(&["oracle", path(&big_file)]).status.code(), Some(4));
}

#[test]
fn sweep_and_table2_from_spec_files() {
    let dir = tempfile::tempdir().unwrap();
    save_scenario(&layout4(), dir.path().join("base.json")).unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"lambda0_grid": [2e-4, 6e-4], "seeds": [3], "sigma2": 1e-6, "base": {"scenario": "base.json"}}"#,
    )
    .unwrap();
    let a = hetnet(&["sweep", path(&spec)]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = hetnet(&["sweep", path(&spec)]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8(a.stdout).unwrap().lines().count(), 1 + 2 * 4);

    let out = hetnet(&["table2", path(&spec)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("lambda0,sigma2,n_seeds,mean_ratio,min_ratio\n"));
    assert_eq!(text.lines().count(), 3);
}
