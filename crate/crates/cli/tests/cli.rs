//! End-to-end tests driving the compiled binary: exit codes, stdout
//! table shape, experiment artifacts and rerun determinism.

use std::path::Path;
use std::process::{Command, Output};

use fbdf_cli::csvio::Table;

fn fbdf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbdf"))
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no exit code (signal?)")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Sorted (name, bytes) pairs of every file under a directory.
fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let name = e.file_name().into_string().unwrap();
            let bytes = std::fs::read(e.path()).unwrap();
            (name, bytes)
        })
        .collect();
    entries.sort_by(|p, q| p.0.cmp(&q.0));
    entries
}

#[test]
fn experiment_rerun_writes_identical_bytes() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for d in [&d1, &d2] {
        let out = fbdf(&[
            "--out",
            d.path().to_str().unwrap(),
            "experiment",
            "cubic_tables",
            "--set",
            "T=50",
        ]);
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    }
    let s1 = dir_snapshot(d1.path());
    let s2 = dir_snapshot(d2.path());
    assert!(!s1.is_empty(), "experiment wrote no files");
    let names: Vec<&String> = s1.iter().map(|(n, _)| n).collect();
    assert_eq!(
        names,
        s2.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "file sets differ between reruns"
    );
    for ((name, b1), (_, b2)) in s1.iter().zip(&s2) {
        assert_eq!(b1, b2, "{name} differs between reruns");
    }
}

#[test]
fn experiment_artifacts_reparse() {
    let dir = tempfile::tempdir().unwrap();
    let out = fbdf(&[
        "--out",
        dir.path().to_str().unwrap(),
        "experiment",
        "volterra_lemma_demo",
        "--set",
        "n=5000",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));

    let manifest_path = dir.path().join("volterra_lemma_demo_manifest.json");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(!files.is_empty());
    for f in files {
        let path = dir.path().join(f.as_str().unwrap());
        assert!(path.exists(), "manifest lists missing file {path:?}");
        if path.extension().is_some_and(|e| e == "csv") {
            let table = Table::read_from(&path).unwrap();
            assert!(!table.rows.is_empty(), "{path:?} parsed to zero rows");
        }
    }
    let est = manifest["summary"]["limit_estimate"].as_f64().unwrap();
    assert!((est - 2.0).abs() < 0.1, "limit estimate {est}");
}

#[test]
fn solve_completes_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let out = fbdf(&[
        "solve", "--problem", "cubic", "--scheme", "gl", "--alpha", "0.5", "--h", "0.5",
        "--T", "10", "--x0", "2", "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let table = Table::read_from(&csv).unwrap();
    assert_eq!(table.header, vec!["t", "x1"]);
    assert_eq!(table.rows.len(), 21);
}

#[test]
fn explicit_overflow_maps_to_exit_four() {
    let out = fbdf(&[
        "solve", "--problem", "lorenz", "--scheme", "fabm", "--alpha", "0.5", "--h", "0.5",
        "--T", "100",
    ]);
    assert_eq!(exit_code(&out), 4, "stderr: {}", stderr(&out));
}

#[test]
fn unknown_problem_is_a_usage_error() {
    let out = fbdf(&[
        "solve", "--problem", "pendulum", "--scheme", "gl", "--alpha", "0.5", "--h", "0.5",
        "--T", "10",
    ]);
    assert_eq!(exit_code(&out), 1);
    let msg = stderr(&out);
    assert!(msg.contains("cubic") && msg.contains("lorenz"), "stderr: {msg}");
}

#[test]
fn unknown_override_key_lists_valid_ones() {
    let dir = tempfile::tempdir().unwrap();
    let out = fbdf(&[
        "--out",
        dir.path().to_str().unwrap(),
        "experiment",
        "cubic_tables",
        "--set",
        "steps=10",
    ]);
    assert_eq!(exit_code(&out), 1);
    let msg = stderr(&out);
    assert!(msg.contains('h') && msg.contains('T'), "stderr: {msg}");
}

#[test]
fn weights_stdout_is_a_parseable_table() {
    let out = fbdf(&["weights", "--scheme", "gl", "--alpha", "0.5", "--n", "8"]);
    assert_eq!(exit_code(&out), 0);
    let table = Table::parse(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(table.header, vec!["k", "omega", "delta"]);
    assert_eq!(table.rows.len(), 9);
    let omega0 = table.column("omega").unwrap()[0];
    assert_eq!(omega0, 1.0);
}

#[test]
fn decay_pair_writes_index_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("decay.csv");
    let out = fbdf(&[
        "decay", "--kind", "p", "--problem", "cubic", "--scheme", "gl", "--alpha", "0.6",
        "--h", "0.5", "--T", "20", "--x0", "2", "--y0", "-1", "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let table = Table::read_from(&csv).unwrap();
    assert_eq!(table.header, vec!["t", "e", "index"]);
    assert_eq!(table.rows.len(), 41);
    let e = table.column("e").unwrap();
    assert!(e[0] > e[40], "gap must shrink: {} -> {}", e[0], e[40]);
}
