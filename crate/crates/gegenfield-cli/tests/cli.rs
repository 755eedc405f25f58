//! End-to-end tests of the binary: exit codes, file outputs, determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_gegenfield")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gegenfield-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

fn base_config(t: usize, quad_nodes: usize) -> String {
    format!(
        "[model]\nu1 = 0.4\nu2 = 0.3\nd1 = 0.2\nd2 = 0.3\nsigma2_eps = 1.0\n\n\
         [simulation]\nt = {t}\nn_trunc = 40\nseed = 20250807\n\n\
         [contrast]\nquad_nodes = {quad_nodes}\n"
    )
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

#[test]
fn simulate_writes_expected_files() {
    let dir = scratch("simulate");
    let cfg = write_config(&dir, &base_config(10, 64));
    let out_dir = dir.join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "simulate",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("field.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 11 * 11);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("field.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["size_t"], 10);
    assert_eq!(meta["seed"], 20250807u64);
    assert!(meta["config_hash"].is_string());
}

#[test]
fn invalid_d1_is_named_with_range() {
    let dir = scratch("bad-d1");
    let cfg = write_config(
        &dir,
        "[model]\nu1 = 0.4\nu2 = 0.3\nd1 = 0.7\nd2 = 0.3\nsigma2_eps = 1.0\n",
    );
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "simulate",
        "--out-dir",
        dir.join("x").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("d1"), "stderr: {err}");
    assert!(err.contains("(0, 1/2)"), "stderr: {err}");
}

#[test]
fn repeated_simulation_is_byte_identical() {
    let dir = scratch("repeat");
    let cfg = write_config(&dir, &base_config(8, 64));
    for sub in ["a", "b"] {
        let out = run(&[
            "--config",
            cfg.to_str().unwrap(),
            "simulate",
            "--out-dir",
            dir.join(sub).to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
    }
    let a = fs::read(dir.join("a/field.csv")).unwrap();
    let b = fs::read(dir.join("b/field.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn estimate_roundtrip_and_adjusted_path_differs() {
    let dir = scratch("estimate");
    let cfg = write_config(&dir, &base_config(20, 64));
    let out_dir = dir.join("sim");
    assert_eq!(
        code(&run(&[
            "--config",
            cfg.to_str().unwrap(),
            "simulate",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])),
        0
    );
    let field = out_dir.join("field.csv");
    let plain = dir.join("plain.json");
    let adj = dir.join("adjusted.json");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "estimate",
        "--field",
        field.to_str().unwrap(),
        "--out",
        plain.to_str().unwrap(),
    ]);
    assert!(matches!(code(&out), 0 | 2), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "estimate",
        "--field",
        field.to_str().unwrap(),
        "--adjusted",
        "--out",
        adj.to_str().unwrap(),
    ]);
    assert!(matches!(code(&out), 0 | 2), "{}", String::from_utf8_lossy(&out.stderr));
    let p: serde_json::Value = serde_json::from_str(&fs::read_to_string(&plain).unwrap()).unwrap();
    let a: serde_json::Value = serde_json::from_str(&fs::read_to_string(&adj).unwrap()).unwrap();
    assert_eq!(p["adjusted"], false);
    assert_eq!(a["adjusted"], true);
    assert_ne!(p["sigma2_hat"], a["sigma2_hat"]);
}

#[test]
fn truncated_field_file_is_input_error_with_position() {
    let dir = scratch("truncated");
    let cfg = write_config(&dir, &base_config(8, 64));
    let out_dir = dir.join("sim");
    assert_eq!(
        code(&run(&[
            "--config",
            cfg.to_str().unwrap(),
            "simulate",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])),
        0
    );
    // drop the last 3 records
    let full = fs::read_to_string(out_dir.join("field.csv")).unwrap();
    let truncated: Vec<&str> = full.lines().collect();
    let keep = truncated.len() - 3;
    fs::write(out_dir.join("field.csv"), truncated[..keep].join("\n")).unwrap();
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "estimate",
        "--field",
        out_dir.join("field.csv").to_str().unwrap(),
        "--out",
        dir.join("r.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line"), "stderr: {err}");
}

#[test]
fn spectrum_of_zero_field_is_zero() {
    let dir = scratch("spectrum");
    let cfg = write_config(&dir, &base_config(4, 32));
    // hand-crafted zero field + metadata
    let mut csv = String::from("t1,t2,value\n");
    for t1 in 0..5 {
        for t2 in 0..5 {
            csv.push_str(&format!("{t1},{t2},0\n"));
        }
    }
    let field = dir.join("zero.csv");
    fs::write(&field, csv).unwrap();
    fs::write(
        dir.join("zero.meta.json"),
        r#"{"size_t":4,"params":{"u1":0.4,"u2":0.3,"d1":0.2,"d2":0.3,"sigma2_eps":1.0},"n_trunc":40,"seed":0,"library_version":"0.1.0"}"#,
    )
    .unwrap();
    let out_csv = dir.join("spectrum.csv");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "spectrum",
        "--field",
        field.to_str().unwrap(),
        "--out",
        out_csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&out_csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 32 * 32);
    for line in text.lines().skip(1) {
        assert!(line.ends_with(",0"), "nonzero periodogram row: {line}");
    }
}

#[test]
fn asymptotics_emits_positive_definite_cov() {
    let dir = scratch("asymptotics");
    let cfg = write_config(&dir, &base_config(10, 128));
    let out_json = dir.join("asym.json");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "asymptotics",
        "--out",
        out_json.to_str().unwrap(),
    ]);
    // d2 = 0.3 sits outside the normality hypothesis region; a warning (and
    // exit code 2) is expected, with the output still written.
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out_json).unwrap()).unwrap();
    let cov = &doc["cov"];
    let (c11, c12, c22) = (
        cov[0][0].as_f64().unwrap(),
        cov[0][1].as_f64().unwrap(),
        cov[1][1].as_f64().unwrap(),
    );
    assert!(c11 > 0.0 && c11 * c22 - c12 * c12 > 0.0, "cov not PD: {cov}");
    assert!(!doc["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn mc_consistency_smoke_completes_quickly() {
    let dir = scratch("mc");
    let body = format!(
        "{}\n[study]\nt_values = [5]\nreplications = 2\nbase_seed = 7\n",
        base_config(5, 64)
    );
    let cfg = write_config(&dir, &body);
    let out_dir = dir.join("mc");
    let start = Instant::now();
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "mc-consistency",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    let elapsed = start.elapsed();
    assert!(matches!(code(&out), 0 | 2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    assert!(out_dir.join("report.json").exists());
    let csv = fs::read_to_string(out_dir.join("estimates.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2);
}

#[test]
fn study_output_independent_of_thread_cap() {
    let dir = scratch("threads");
    let body = format!(
        "{}\n[study]\nt_values = [6]\nreplications = 3\nbase_seed = 99\n",
        base_config(6, 64)
    );
    let cfg = write_config(&dir, &body);
    let mut reports = Vec::new();
    for threads in ["1", "2"] {
        let out_dir = dir.join(format!("mc{threads}"));
        let out = run(&[
            "--config",
            cfg.to_str().unwrap(),
            "--threads",
            threads,
            "mc-consistency",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert!(matches!(code(&out), 0 | 2), "{}", String::from_utf8_lossy(&out.stderr));
        reports.push(fs::read(out_dir.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn mc_normality_writes_qq_csv() {
    let dir = scratch("mcn");
    let body = format!(
        "{}\n[study]\nt_values = [8]\nreplications = 25\nbase_seed = 5150\n",
        base_config(8, 64)
    );
    let cfg = write_config(&dir, &body);
    let out_dir = dir.join("mcn");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "mc-normality",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(matches!(code(&out), 0 | 2), "{}", String::from_utf8_lossy(&out.stderr));
    let qq = fs::read_to_string(out_dir.join("qq.csv")).unwrap();
    assert!(qq.starts_with("component,sample_quantile,normal_quantile"));
    let est = fs::read_to_string(out_dir.join("estimates.csv")).unwrap();
    assert!(est.starts_with("T,rep,d1_hat,d2_hat,sigma2_hat,converged"));
    assert_eq!(est.lines().count(), 1 + 25);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["t_size"], 8);
}
