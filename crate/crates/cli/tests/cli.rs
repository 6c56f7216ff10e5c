// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn idani(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idani"))
        .args(args)
        .output()
        .expect("spawn idani")
}

fn ok(args: &[&str]) -> Output {
    let out = idani(args);
    assert!(
        out.status.success(),
        "idani {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Small leaky-head dataset so sweeps stay fast.
fn small_synth(dir: &Path) {
    ok(&[
        "synth", "--seed", "7", "--out", p(dir), "--d", "32", "--n", "300", "--m", "5",
        "--head-leakage", "0.15",
    ]);
}

#[test]
fn synth_then_probeless_sweep_has_zero_delta_at_k0() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_synth(&data);
    let out = tmp.path().join("sweep");
    ok(&[
        "sweep", "--source", p(&data.join("source.idnr")), "--target", p(&data.join("target.idnr")),
        "--head", p(&data.join("head.json")), "--method", "probeless", "--out", p(&out),
    ]);
    let report = json(&out.join("sweep.json"));
    assert_eq!(report["tool_version"], format!("idani {}", env!("CARGO_PKG_VERSION")));
    assert_eq!(report["config"]["subcommand"], "sweep");
    let cells = report["grid"].as_array().unwrap();
    assert!(!cells.is_empty());
    for cell in cells.iter().filter(|c| c["k"] == 0) {
        assert_eq!(cell["delta"].as_f64().unwrap(), 0.0);
    }
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("k,beta,method,score,delta\n"));
    assert_eq!(csv.lines().count(), cells.len() + 1);
}

#[test]
fn probeless_top_m_matches_planted_neurons() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "--seed", "7", "--out", p(&data)]);
    let out = tmp.path().join("rank");
    ok(&[
        "rank", "--source", p(&data.join("source.idnr")), "--target", p(&data.join("target.idnr")),
        "--method", "probeless", "--out", p(&out),
    ]);
    let ranking = json(&out.join("ranking_probeless.json"));
    let mut top: Vec<u64> = ranking["order"].as_array().unwrap()[..20]
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    top.sort_unstable();
    let truth = json(&data.join("truth.json"));
    let planted: Vec<u64> = truth["domain_neurons"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(top, planted);
}

#[test]
fn aggregate_over_five_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_synth(&data);
    let out = tmp.path().join("sweeps");
    ok(&[
        "sweep", "--source", p(&data.join("source.idnr")), "--target", p(&data.join("target.idnr")),
        "--head", p(&data.join("head.json")), "--seeds", "1,2,3,4,5", "--k-grid", "0,1,5,10",
        "--beta-grid", "1,4,8", "--out", p(&out),
    ]);
    let reports: Vec<String> =
        (1..=5).map(|s| p(&out.join(format!("sweep_seed{s}.json"))).to_string()).collect();
    let mut args = vec!["aggregate"];
    args.extend(reports.iter().map(String::as_str));
    args.extend(["--out", p(tmp.path())]);
    ok(&args);
    let agg = json(&tmp.path().join("aggregate.json"));
    assert_eq!(agg["seeds"].as_array().unwrap().len(), 5);
    for m in agg["methods"].as_array().unwrap() {
        assert!(m["delta_oracle"]["mean"].is_number());
        assert!(m["delta_oracle"]["sem"].is_number());
        assert!(m["category_oracle"].is_string());
    }
    assert!(!agg["table"].as_array().unwrap().is_empty());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_synth(&data);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "intervene", "--source", p(&data.join("source.idnr")), "--target",
            p(&data.join("target.idnr")), "--method", "linear", "--k", "5", "--seed", "3",
            "--out", p(&out),
        ]);
        (
            fs::read(out.join("counterfactual.idnr")).unwrap(),
            fs::read(out.join("plan.json")).unwrap(),
        )
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a.0, b.0);
    // plan.json embeds the output path, so compare after dropping the config.
    let strip = |bytes: &[u8]| {
        let mut v: Value = serde_json::from_slice(bytes).unwrap();
        v.as_object_mut().unwrap().remove("config");
        v
    };
    assert_eq!(strip(&a.1), strip(&b.1));

    let again = tmp.path().join("data2");
    small_synth(&again);
    for f in ["source.idnr", "target.idnr", "head.json", "truth.json"] {
        assert_eq!(fs::read(data.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn select_then_apply_writes_selection() {
    let tmp = tempfile::tempdir().unwrap();
    let dev = tmp.path().join("dev");
    let test = tmp.path().join("test");
    small_synth(&dev);
    ok(&[
        "synth", "--seed", "8", "--out", p(&test), "--d", "32", "--n", "300", "--m", "5",
        "--head-leakage", "0.15",
    ]);
    let out = tmp.path().join("sel");
    ok(&[
        "select-then-apply", "--source", p(&dev.join("source.idnr")), "--dev",
        p(&dev.join("target.idnr")), "--test", p(&test.join("target.idnr")), "--head",
        p(&dev.join("head.json")), "--k-grid", "0,2,5,10", "--beta-grid", "2,8", "--out", p(&out),
    ]);
    let sel = json(&out.join("selection.json"));
    assert!(sel["selected"]["oracle_k"].is_u64());
    assert!(sel["test"]["score"].is_number());
    assert!(out.join("adapted_test.idnr").exists());
}

#[test]
fn exit_codes() {
    let out = idani(&["rank", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    let out = idani(&["mean", "--source", "/definitely/missing.idnr"]);
    assert_eq!(out.status.code(), Some(2));

    let tmp = tempfile::tempdir().unwrap();
    small_synth(tmp.path());
    let out = idani(&[
        "intervene", "--source", p(&tmp.path().join("source.idnr")), "--target",
        p(&tmp.path().join("target.idnr")), "--beta", "12", "--out", p(&tmp.path().join("x")),
    ]);
    assert_eq!(out.status.code(), Some(1));

    assert_eq!(idani(&["--help"]).status.code(), Some(0));
    assert_eq!(idani(&["--version"]).status.code(), Some(0));
}
