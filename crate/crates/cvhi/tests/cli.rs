//! End-to-end checks of the binary: exit codes, result round-trips,
//! tamper detection, and the bench CSV schema.

use std::path::Path;
use std::process::Command;

fn run(dir: &Path, args: &[&str]) -> (String, String, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_cvhi"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary should run");
    (
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
        out.status.code().unwrap_or(-1),
    )
}

#[test]
fn suite_generation_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let (out, err, code) = run(d, &["gen", "--suite", "suite"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("wrote 65 instances"), "unexpected stdout: {out}");
    assert_eq!(std::fs::read_dir(d.join("suite")).unwrap().count(), 65);

    // a solvable instance certifies and its result file verifies
    let (out, err, code) = run(
        d,
        &["solve", "suite/coupled_box_1d.json", "--output", "r.json"],
    );
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("certified"), "unexpected stdout: {out}");
    let r: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(r["status"], "certified");
    let u0 = r["u"][0].as_f64().unwrap();
    let w0 = r["w"][0].as_f64().unwrap();
    assert!((u0 - 1.0).abs() <= 1e-6, "u = {u0}");
    assert!((w0 + 0.5).abs() <= 1e-6, "w = {w0}");

    let (_, err, code) = run(d, &["verify", "suite/coupled_box_1d.json", "r.json"]);
    assert_eq!(code, 0, "verification of an untouched result failed: {err}");

    // a tampered coordinate is caught
    let mut t = r.clone();
    t["u"][0] = serde_json::json!(u0 + 1e-3);
    std::fs::write(
        d.join("tampered.json"),
        serde_json::to_vec_pretty(&t).unwrap(),
    )
    .unwrap();
    let (_, err, code) = run(d, &["verify", "suite/coupled_box_1d.json", "tampered.json"]);
    assert_eq!(code, 3, "tampering must flag, stderr: {err}");

    // malformed and missing inputs
    std::fs::write(d.join("broken.json"), b"{ not json").unwrap();
    assert_eq!(run(d, &["solve", "broken.json"]).2, 1);
    assert_eq!(run(d, &["solve", "no_such_file.json"]).2, 1);

    // honest nonconvergence still writes a best-effort result
    let (_, err, code) = run(
        d,
        &[
            "solve",
            "suite/non_coercive_1d.json",
            "--output",
            "nc.json",
            "--max-outer",
            "60",
        ],
    );
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("nonconverged"), "stderr: {err}");
    let nc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("nc.json")).unwrap()).unwrap();
    assert_eq!(nc["status"], "nonconverged");

    // the hypothesis check flags the pathology and passes the library
    let (out, _, code) = run(d, &["check", "suite/non_pseudomonotone_1d.json"]);
    assert_eq!(code, 3);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["flagged"], true);
    let (out, _, code) = run(d, &["check", "suite/coupled_box_1d.json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["flagged"], false);
}

#[test]
fn bench_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (_, err, code) = run(
        d,
        &[
            "gen", "--seed", "7", "--dims", "1,1", "--pieces", "1", "--kappa", "0.2",
            "--output", "p.json",
        ],
    );
    assert_eq!(code, 0, "{err}");
    let (out, err, code) = run(d, &["bench", "p.json"]);
    assert_eq!(code, 0, "{err}");
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("instance,status,outer_iters,inner_iters_total,final_gap1,final_gap2,wall_time_ms")
    );
    let row = lines.next().expect("one data row");
    let cols: Vec<_> = row.split(',').collect();
    assert_eq!(cols.len(), 7, "row shape changed: {row}");
    assert_eq!(cols[0], "p", "rows are keyed by file stem");
    assert_eq!(cols[1], "certified");
    assert_eq!(cols[6], "0", "wall time must read 0 without --timing");
}
