use std::process::Command;

use serde_json::Value;

fn seurat(args: &[&str]) -> (i32, Value, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_seurat")).args(args).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    let json = serde_json::from_str(&stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), json, String::from_utf8(out.stderr).unwrap())
}

#[test]
fn gen_emits_graph_files() {
    let (code, g, _) = seurat(&["gen", "stockmeyer", "--family", "D", "--m", "2", "--n", "1", "--star"]);
    assert_eq!(code, 0);
    assert_eq!(g["format"], "seurat-graph-v1");
    assert_eq!(g["n"], 6);
    let (_, t, _) = seurat(&["gen", "tournament", "--k", "2"]);
    assert_eq!(t["edges"].as_array().unwrap().len(), 6);
    let (_, c, _) = seurat(&["gen", "cfi", "--base", "K3", "--twisted"]);
    assert_eq!(c["directed"], false);
    assert!(c["labels"].is_object());
    let (code, _, err) = seurat(&["gen", "named", "--name", "stars"]);
    assert_eq!(code, 1);
    assert!(err.contains("pair"));
}

#[test]
fn graph_files_round_trip_through_analyses() {
    let dir = tempfile::tempdir().unwrap();
    let (_, g, _) = seurat(&["gen", "named", "--name", "fig6"]);
    let path = dir.path().join("g.json");
    std::fs::write(&path, g.to_string()).unwrap();
    let p = path.to_str().unwrap();
    let (code, spectra, _) = seurat(&["spectra", p]);
    assert_eq!(code, 0);
    assert_eq!(spectra["n"], 6);
    let (_, iso, _) = seurat(&["iso", p, "fig6"]);
    assert_eq!(iso["isomorphic"], true);
    let (_, deck, _) = seurat(&["deck", p, "fig7"]);
    assert_eq!(deck["decks_equal"], true);
    let (_, wl, _) = seurat(&["wl", "stars#0", "stars#1", "--k", "1"]);
    assert_eq!(wl["distinguishes"], false);
}

#[test]
fn solve_and_verify_exit_codes() {
    let (code, v, _) = seurat(&["solve", "--pair", "stockmeyer:D:2:1", "--colours", "2"]);
    assert_eq!(code, 10);
    assert_eq!(v["winner"], "forall");
    assert_eq!(v["certified"], true);
    let (code, v, _) = seurat(&["solve", "--pair", "fig1", "--colours", "1"]);
    assert_eq!(code, 11);
    assert_eq!(v["winner"], "exists");
    let (code, v, _) = seurat(&["solve", "--pair", "fig1", "--colours", "2", "--force-search", "--max-rounds", "1"]);
    assert_eq!(code, 11, "{v}");
    assert_eq!(v["certified"], false);
    let (code, v, _) = seurat(&["solve", "--pair", "fig1", "--colours", "2", "--force-search", "--node-budget", "1"]);
    assert_eq!(code, 12, "{v}");

    let (code, v, _) = seurat(&["verify", "--strategy", "stars", "--adversary", "filtered", "--rules", "S1,S4", "--depth", "3"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"], "certified");
    assert_eq!(v["rules"], serde_json::json!(["S1", "S4"]));
    let (code, v, _) = seurat(&["verify", "--strategy", "empty", "--pair", "stars", "--adversary", "heuristic", "--seeds", "1,2", "--depth", "4"]);
    assert_eq!(code, 1, "{v}");
}

#[test]
fn search_prints_report_and_table() {
    let (code, v, err) = seurat(&["search", "--max-n", "2", "--colours", "1", "--no-loops"]);
    assert_eq!(code, 0);
    assert_eq!(v["pairs_examined"], 3);
    assert!(err.contains("pairs examined"));
}
