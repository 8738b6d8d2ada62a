//! End-to-end tests of the command-line interface.

use std::path::Path;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_dynct")
}

fn run_ok(args: &[&str]) -> String {
    let out = Command::new(bin()).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run_err(args: &[&str]) -> String {
    let out = Command::new(bin()).args(args).output().unwrap();
    assert!(!out.status.success(), "command {:?} unexpectedly passed", args);
    String::from_utf8(out.stderr).unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) {
    let mut args = vec![
        "simulate",
        "--out-dir",
        dir.to_str().unwrap(),
        "--n",
        "32",
        "--frames",
        "3",
        "--projections",
        "12",
    ];
    args.extend_from_slice(extra);
    run_ok(&args);
}

#[test]
fn simulate_is_deterministic_and_verifiable() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    simulate(&a, &[]);
    simulate(&b, &[]);
    for name in ["truth.stk", "sinogram.stk"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
    run_ok(&["verify", "--input", a.join("sinogram.stk").to_str().unwrap()]);
    run_ok(&["verify", "--input", a.join("truth.stk").to_str().unwrap()]);
}

#[test]
fn verify_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sim");
    simulate(&dir, &[]);
    let path = dir.join("sinogram.stk");
    let mut bytes = std::fs::read(&path).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0x01;
    std::fs::write(&path, bytes).unwrap();
    let err = run_err(&["verify", "--input", path.to_str().unwrap()]);
    assert!(err.contains("error"), "stderr: {err}");
}

#[test]
fn zero_noise_matches_clean_projection() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    simulate(&a, &["--sigma-rel", "0"]);
    // Different noise seed must not matter when sigma is zero.
    simulate(&b, &["--sigma-rel", "0", "--noise-seed", "999"]);
    assert_eq!(
        std::fs::read(a.join("sinogram.stk")).unwrap(),
        std::fs::read(b.join("sinogram.stk")).unwrap()
    );
}

#[test]
fn sinogram_header_records_angle_count() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sim");
    let mut args = vec![
        "simulate",
        "--out-dir",
        dir.to_str().unwrap(),
        "--n",
        "32",
        "--frames",
        "2",
        "--projections",
        "90",
    ];
    args.push("--sigma-rel");
    args.push("0");
    run_ok(&args);
    let (stack, header) =
        dynct::io::read_sinogram_stack(dir.join("sinogram.stk")).unwrap();
    assert_eq!(stack.angles().len(), 90);
    assert_eq!(header.angles.unwrap().len(), 90);
}

#[test]
fn reconstruct_and_metrics_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sim");
    simulate(&dir, &[]);
    let recon = tmp.path().join("recon.stk");
    run_ok(&[
        "reconstruct",
        "--input",
        dir.join("sinogram.stk").to_str().unwrap(),
        "--method",
        "fbp",
        "--output",
        recon.to_str().unwrap(),
    ]);
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("recon.stk.report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["method"], "fbp");
    assert!(report["solver"].is_null(), "fbp must not carry solver fields");

    // recon == reference gives the trivial metric row.
    let csv_path = tmp.path().join("m.csv");
    run_ok(&[
        "metrics",
        "--recon",
        dir.join("truth.stk").to_str().unwrap(),
        "--reference",
        dir.join("truth.stk").to_str().unwrap(),
        "--output",
        csv_path.to_str().unwrap(),
        "--method-label",
        "identity",
        "--projections",
        "12",
    ]);
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "method,projections,frame,rel_l2,psnr,hpsi");
    let row = lines.next().unwrap();
    assert!(row.starts_with("identity,12,0,0,"), "row: {row}");
    assert!(row.ends_with(",1"), "hpsi must be 1: {row}");

    // CSV parses with a standard reader and keeps deterministic ordering.
    let mut rows = Vec::new();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 6);
        rows.push(fields[2].parse::<usize>().unwrap());
    }
    assert_eq!(rows, (0..rows.len()).collect::<Vec<_>>());

    // Method label defaults from the recon provenance.
    let csv2 = tmp.path().join("m2.csv");
    run_ok(&[
        "metrics",
        "--recon",
        recon.to_str().unwrap(),
        "--reference",
        dir.join("truth.stk").to_str().unwrap(),
        "--output",
        csv2.to_str().unwrap(),
    ]);
    let text2 = std::fs::read_to_string(&csv2).unwrap();
    assert!(text2.lines().nth(1).unwrap().starts_with("fbp,12,0,"));

    // mean_first_last mode emits exactly one row with the literal label.
    let csv3 = tmp.path().join("m3.csv");
    run_ok(&[
        "metrics",
        "--recon",
        recon.to_str().unwrap(),
        "--reference",
        dir.join("truth.stk").to_str().unwrap(),
        "--output",
        csv3.to_str().unwrap(),
        "--mean-first-last",
    ]);
    let text3 = std::fs::read_to_string(&csv3).unwrap();
    assert_eq!(text3.lines().count(), 2);
    assert!(text3.lines().nth(1).unwrap().contains(",mean_first_last,"));
}

#[test]
fn export_writes_stable_pgms() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sim");
    simulate(&dir, &[]);
    let imgs = tmp.path().join("imgs");
    run_ok(&[
        "export",
        "--input",
        dir.join("truth.stk").to_str().unwrap(),
        "--out-dir",
        imgs.to_str().unwrap(),
        "--frames",
        "0,2",
    ]);
    let f0 = imgs.join("frame_0000.pgm");
    let f2 = imgs.join("frame_0002.pgm");
    assert!(f0.exists() && f2.exists());
    let first = std::fs::read(&f0).unwrap();
    assert!(first.starts_with(b"P5\n32 32\n65535\n"));

    // Re-export is bitwise stable.
    let imgs2 = tmp.path().join("imgs2");
    run_ok(&[
        "export",
        "--input",
        dir.join("truth.stk").to_str().unwrap(),
        "--out-dir",
        imgs2.to_str().unwrap(),
        "--frames",
        "0,2",
    ]);
    assert_eq!(first, std::fs::read(imgs2.join("frame_0000.pgm")).unwrap());

    let err = run_err(&[
        "export",
        "--input",
        dir.join("truth.stk").to_str().unwrap(),
        "--out-dir",
        imgs.to_str().unwrap(),
        "--frames",
        "99",
    ]);
    assert!(err.contains("out of range"));
}

#[test]
fn config_file_flags_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("sim.json");
    std::fs::write(
        &cfg_path,
        serde_json::json!({
            "n": 32, "frames": 3, "projections": 12,
            "detectors": null, "detector_spacing": 1.0,
            "spread_points": 5, "seed": 1, "noise_seed": 2,
            "sigma_rel": 0.01, "noise_model": "relative_std",
            "supersample": 2, "bin_factor": 2,
            "background_level": 0.25, "ring_level": 0.5, "agent_peak": 0.5
        })
        .to_string(),
    )
    .unwrap();
    let a = tmp.path().join("a");
    run_ok(&[
        "simulate",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out-dir",
        a.to_str().unwrap(),
    ]);
    // Flag overrides the config file value.
    let b = tmp.path().join("b");
    run_ok(&[
        "simulate",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out-dir",
        b.to_str().unwrap(),
        "--projections",
        "24",
    ]);
    let (sa, _) = dynct::io::read_sinogram_stack(a.join("sinogram.stk")).unwrap();
    let (sb, _) = dynct::io::read_sinogram_stack(b.join("sinogram.stk")).unwrap();
    assert_eq!(sa.angles().len(), 12);
    assert_eq!(sb.angles().len(), 24);
}

#[test]
fn errors_are_machine_readable() {
    let err = run_err(&["verify", "--input", "/nonexistent/file.stk"]);
    let line = err.lines().next().unwrap();
    let parsed: serde_json::Value = serde_json::from_str(line).unwrap();
    assert!(parsed["error"].is_string());
}
