//! End-to-end checks of the command-line contract: exit codes, output
//! files, flag precedence and the documented failure modes.

use std::path::Path;
use std::process::{Command, Output};

fn areamatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_areamatch"))
        .args(args)
        .env_remove("AREAMATCH_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json_of(out: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(out)).expect("stdout is JSON")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).expect("test file writes");
}

fn path_str(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

const EMPTY_SEG: &str = r#"{"image": {"width": 640, "height": 480}, "areas": []}"#;

#[test]
fn empty_segmentation_builds_an_empty_graph() {
    let dir = tempfile::tempdir().unwrap();
    let seg = dir.path().join("seg.json");
    write(&seg, EMPTY_SEG);
    let out = areamatch(&["build-graph", "--input", path_str(&seg)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("nodes: 0"));
}

#[test]
fn malformed_json_fails_with_a_parse_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let seg = dir.path().join("seg.json");
    write(&seg, r#"{"image": {"width": 640"#);
    let out = areamatch(&["build-graph", "--input", path_str(&seg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("malformed"), "stderr: {}", stderr(&out));
}

#[test]
fn generated_scenes_build_and_check_clean() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("scene");
    let out = areamatch(&[
        "gen-scene",
        "--seed",
        "11",
        "--mode",
        "perturbed",
        "--out-dir",
        path_str(&out_dir),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    for seg in ["seg0.json", "seg1.json"] {
        let dump = dir.path().join(format!("{seg}.graph"));
        let built = areamatch(&[
            "build-graph",
            "--input",
            path_str(&out_dir.join(seg)),
            "--out",
            path_str(&dump),
        ]);
        assert!(built.status.success(), "{}", stderr(&built));
        let checked = areamatch(&["check-graph", "--input", path_str(&dump)]);
        assert!(checked.status.success(), "{}", stderr(&checked));
        assert!(stdout(&checked).starts_with("ok:"));
    }
}

#[test]
fn identity_scene_matches_every_node_to_itself() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("scene");
    let out = areamatch(&[
        "gen-scene",
        "--seed",
        "2",
        "--mode",
        "identity",
        "--out-dir",
        path_str(&out_dir),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    let matched = areamatch(&[
        "match",
        "--seg0",
        path_str(&out_dir.join("seg0.json")),
        "--seg1",
        path_str(&out_dir.join("seg1.json")),
        "--provider",
        "ground-truth",
    ]);
    assert!(matched.status.success(), "{}", stderr(&matched));
    let pairs = json_of(&matched)["pairs"].as_array().unwrap().clone();
    assert!(!pairs.is_empty());
    for p in &pairs {
        assert_eq!(p["src_node"], p["dst_node"], "identity scenes self-match");
        assert!(p["e_g"].as_f64().unwrap() <= 1e-9);
    }
}

#[test]
fn disjoint_scenes_produce_an_empty_match_set() {
    let dir = tempfile::tempdir().unwrap();
    let seg = dir.path().join("seg.json");
    write(
        &seg,
        r#"{"image": {"width": 640, "height": 480},
            "areas": [{"id": "a", "bbox": [16.0, 16.0, 146.0, 146.0]}]}"#,
    );
    // The transform shifts image 0's only area fully clear of image 1's.
    let out = areamatch(&[
        "match",
        "--seg0",
        path_str(&seg),
        "--seg1",
        path_str(&seg),
        "--provider",
        "ground-truth",
        "--tx",
        "480",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(json_of(&out)["pairs"].as_array().unwrap().len(), 0);
}

#[test]
fn missing_provider_data_fails_without_an_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let seg = dir.path().join("seg.json");
    write(&seg, EMPTY_SEG);
    let out_file = dir.path().join("match.json");
    let out = areamatch(&[
        "match",
        "--seg0",
        path_str(&seg),
        "--seg1",
        path_str(&seg),
        "--provider",
        "ncc",
        "--out",
        path_str(&out_file),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--image0"));
    assert!(!out_file.exists(), "failed command must not leave output");
}

#[test]
fn constant_provider_reads_similarities_from_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("scene");
    areamatch(&["gen-scene", "--seed", "2", "--mode", "identity", "--out-dir", path_str(&out_dir)]);
    let table = dir.path().join("table.json");
    write(&table, r#"{"default": 1.0, "pairs": []}"#);
    let out = areamatch(&[
        "match",
        "--seg0",
        path_str(&out_dir.join("seg0.json")),
        "--seg1",
        path_str(&out_dir.join("seg1.json")),
        "--provider",
        "constant",
        "--table",
        path_str(&table),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(!json_of(&out)["pairs"].as_array().unwrap().is_empty());
}

#[test]
fn config_file_overrides_defaults_and_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let seg = dir.path().join("seg.json");
    write(&seg, EMPTY_SEG);
    let cfg = dir.path().join("run.toml");
    write(&cfg, "[graph]\nt_r = 7\n");

    let from_file = dir.path().join("g1.json");
    let out = areamatch(&[
        "build-graph",
        "--input",
        path_str(&seg),
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&from_file),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let dump: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&from_file).unwrap()).unwrap();
    assert_eq!(dump["config"]["t_r"].as_f64(), Some(7.0));

    let from_flag = dir.path().join("g2.json");
    let out = areamatch(&[
        "build-graph",
        "--input",
        path_str(&seg),
        "--config",
        path_str(&cfg),
        "--t-r",
        "9",
        "--out",
        path_str(&from_flag),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let dump: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&from_flag).unwrap()).unwrap();
    assert_eq!(dump["config"]["t_r"].as_f64(), Some(9.0));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let seg = dir.path().join("seg.json");
    write(&seg, EMPTY_SEG);
    let cfg = dir.path().join("run.toml");
    write(&cfg, "[graph]\nbogus = 1\n");
    let out = areamatch(&[
        "build-graph",
        "--input",
        path_str(&seg),
        "--config",
        path_str(&cfg),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("bogus"));
}

#[test]
fn fuzzing_accepts_small_instances_and_refuses_oversized_ones() {
    let ok = areamatch(&["fuzz-mrf", "--trials", "50"]);
    assert!(ok.status.success(), "{}", stderr(&ok));
    assert!(stdout(&ok).contains("0 mismatch(es)"));

    let vacuous = areamatch(&["fuzz-mrf", "--trials", "0"]);
    assert!(vacuous.status.success());

    let refused = areamatch(&["fuzz-mrf", "--max-nodes", "25"]);
    assert_eq!(refused.status.code(), Some(1));
    assert!(stderr(&refused).contains("20"), "names the limit: {}", stderr(&refused));
}

#[test]
fn invalid_thread_count_is_an_input_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_areamatch"))
        .args(["fuzz-mrf", "--trials", "1"])
        .env("AREAMATCH_THREADS", "zero")
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("AREAMATCH_THREADS"));
}
