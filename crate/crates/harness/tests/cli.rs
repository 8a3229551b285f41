use std::path::PathBuf;
use std::process::Command;

use crtwalk::discrete_tree::OrderedTree;
use crtwalk::io::{read_walk_log, WalkLogMeta};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("crtwalk-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn crtwalk(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_crtwalk")).args(args).output().unwrap()
}

#[test]
fn sample_tree_then_walk_round_trip() {
    let dir = scratch("walk");
    let t = dir.join("t");
    let w = dir.join("w");
    let out = crtwalk(&["sample-tree", "--n", "40", "--seed", "5", "--out", t.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let tree: OrderedTree = serde_json::from_str(&std::fs::read_to_string(t.join("tree.json")).unwrap()).unwrap();
    assert_eq!(tree.n(), 40);
    let contour = std::fs::read_to_string(t.join("contour.csv")).unwrap();
    assert_eq!(contour.lines().count(), 1 + 2 * 40 + 1);

    let tree_file = t.join("tree.json");
    let out = crtwalk(&["simulate-walk", "--tree", tree_file.to_str().unwrap(), "--steps", "500", "--out", w.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let steps = read_walk_log(std::fs::File::open(w.join("walk.bin")).unwrap()).unwrap();
    assert_eq!(steps.len(), 501);
    assert!(steps.windows(2).all(|p| tree.neighbors(p[0] as usize).contains(&(p[1] as usize))));
    let meta: WalkLogMeta = serde_json::from_str(&std::fs::read_to_string(w.join("walk.json")).unwrap()).unwrap();
    assert_eq!(meta.tree_vertices, 40);
    assert_eq!(meta.tree_hash.len(), 64);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn trend_command_writes_outputs_and_reports_verdict() {
    let dir = scratch("trend");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, r#"{"name":"small","n_list":[400],"k_list":[2,4],"seeds":3}"#).unwrap();
    let out_dir = dir.join("out");
    let out = crtwalk(&["tightness", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--threads", "2"]);
    let code = out.status.code().unwrap();
    assert!(code == 0 || code == 1, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["raw.csv", "summary.csv", "verdicts.csv", "metadata.json"] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code == 0, !stdout.contains("FAIL"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn bad_config_is_an_error() {
    let dir = scratch("bad");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, r#"{"n_list":[]}"#).unwrap();
    let out = crtwalk(&["tightness", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let _ = std::fs::remove_dir_all(&dir);
}
