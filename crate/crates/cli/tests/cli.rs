use std::path::Path;
use std::process::{Command, Output};

use sdi_cli::grid::Grid;
use sdi_cli::manifest::RunManifest;

fn sdi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdi")).args(args).output().expect("spawn sdi")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr_line(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr).to_string();
    assert_eq!(text.lines().count(), 1, "stderr: {text}");
    text
}

#[test]
fn usage_errors_exit_2() {
    let out = sdi(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).starts_with("error: usage:"));
    assert_eq!(sdi(&["fit"]).status.code(), Some(2));
}

#[test]
fn help_succeeds() {
    let out = sdi(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("compare-density"));
}

#[test]
fn unknown_scene_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdi(&["fit", "kitchen", "--out", path(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_line(&out).starts_with("error: invalid-scene:"));
}

#[test]
fn missing_scene_file_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let out = sdi(&["fit", path(&missing), "--out", path(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn unknown_shape_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdi(&["compare-density", "torus", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn bad_training_config_exits_6() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdi(&["fit", "drawer", "--out", path(dir.path()), "--batch-size", "0"]);
    assert_eq!(out.status.code(), Some(6), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solve_without_models_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdi(&["solve", "drawer", "--models", path(&dir.path().join("none")), "--out", path(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn exported_scene_round_trips_through_fit() {
    let dir = tempfile::tempdir().unwrap();
    let scene_dir = dir.path().join("scene");
    let out = sdi(&["scene", "export", "tables-a", "--out", path(&scene_dir)]);
    assert_eq!(out.status.code(), Some(0));
    for f in ["tables-a.toml", "tables-a.depth", "tables-a.png", "manifest.json"] {
        assert!(scene_dir.join(f).is_file(), "{f}");
    }
    let png = std::fs::read(scene_dir.join("tables-a.png")).unwrap();
    assert_eq!(&png[1..4], b"PNG");

    let fit_dir = dir.path().join("fit");
    let out = sdi(&["fit", path(&scene_dir.join("tables-a.toml")), "--out", path(&fit_dir), "--epochs", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("model\tinput_dim\tparameters\nroi\t3\t"));
    let m = RunManifest::read(&fit_dir.join("manifest.json")).unwrap();
    assert_eq!(m.command, "fit");
    assert_eq!(m.outputs.len(), 2);
    assert!(m.inputs.iter().any(|i| i.path.ends_with("tables-a.depth")));
}

#[test]
fn bench_writes_tables_and_grids() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdi(&[
        "bench",
        "drawer",
        "--out",
        path(dir.path()),
        "--epochs",
        "40",
        "--iterations",
        "3",
        "--restarts",
        "1",
        "--samples",
        "128",
        "--fk-samples",
        "2000",
        "--test-points",
        "50",
        "--ik-points",
        "8",
        "--ik-candidates",
        "40",
        "--random-draws",
        "2",
        "--grid-cells",
        "6",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let coverage = std::fs::read_to_string(dir.path().join("coverage.tsv")).unwrap();
    let methods: Vec<&str> = coverage.lines().skip(1).map(|l| l.split('\t').nth(1).unwrap()).collect();
    assert_eq!(methods, ["random", "ik", "ours"]);
    let grid = Grid::parse(&std::fs::read_to_string(dir.path().join("roi.grid")).unwrap()).unwrap();
    assert_eq!((grid.rows, grid.cols), (6, 6));
    assert!(grid.values.iter().all(|p| (0.0..=1.0).contains(p)));
    let m = RunManifest::read(&dir.path().join("manifest.json")).unwrap();
    assert!(m.timing_outputs.iter().any(|t| t == "runtime.tsv"));
    assert!(m.outputs.iter().all(|o| o.path != "runtime.tsv"));
}

#[test]
fn compare_density_prints_one_row_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdi(&[
        "compare-density",
        "circle",
        "--out",
        path(dir.path()),
        "--train-count",
        "300",
        "--test-count",
        "100",
        "--partition-samples",
        "2000",
        "--epochs",
        "2",
        "--gmm",
        "2,3",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let methods: Vec<&str> = stdout.lines().skip(1).map(|l| l.split('\t').nth(1).unwrap()).collect();
    assert_eq!(methods, ["kde", "gmm-2", "gmm-3", "ebm"]);
}

#[test]
fn fit_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = sdi(&["fit", "drawer", "--out", path(&out_dir), "--epochs", "2", "--seed", "7"]);
        assert_eq!(out.status.code(), Some(0));
        let m = RunManifest::read(&out_dir.join("manifest.json")).unwrap();
        m.output_digests().into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect::<Vec<_>>()
    };
    assert_eq!(run("a"), run("b"));
}
