use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use slepbeam_cli::output::csv_body;

fn beam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_beam")).args(args).output().expect("spawn beam")
}

fn run_with(config: &str, command: &str, dir: &Path) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    let out = dir.join("out");
    beam(&[command, "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    csv_body(&text).lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

const SMALL_ULA: &str = r#"{ "kind": "ula", "elements": 16, "carrier_hz": 28e9 }"#;

fn mse_config(extra: &str) -> String {
    format!(
        r#"{{
  "scenario": "small",
  "seed": 3,
  "mse_sweep": {{
    "geometry": {SMALL_ULA},
    "source": {{ "carrier_hz": 28e9, "half_bandwidth_hz": 3e9, "azimuth_deg": 20.0 }},
    "families": [{{ "family": "slepian", "k_values": [1, 4, 16] }}, {{ "family": "unimodular", "k_values": [4] }}]
    {extra}
  }}
}}"#
    )
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with(&mse_config(r#", "bogus": 1"#), "mse-sweep", dir.path());
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn semantic_errors_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad_k = mse_config("").replace("[1, 4, 16]", "[17]");
    assert_eq!(code(&run_with(&bad_k, "mse-sweep", dir.path())), 2);
    let aliased = mse_config("").replace("3e9", "3e12");
    assert_eq!(code(&run_with(&aliased, "mse-sweep", dir.path())), 2);
    // Section for a different command.
    assert_eq!(code(&run_with(&mse_config(""), "spectrum", dir.path())), 2);
    assert_eq!(code(&beam(&["nonsense"])), 2);
}

#[test]
fn missing_config_file_is_reported() {
    let o = beam(&["spectrum", "--config", "/nonexistent/config.json"]);
    assert_ne!(code(&o), 0);
    assert!(!o.stderr.is_empty());
}

#[test]
fn infeasible_design_exits_with_its_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
  "scenario": "tight",
  "design_iq": {
    "geometry": { "kind": "ula", "elements": 8, "carrier_hz": 28e9 },
    "source": { "carrier_hz": 28e9, "half_bandwidth_hz": 3e9, "azimuth_deg": 0.0 },
    "k_values": [3],
    "iq": { "alpha": 1e-30, "rounding_trials": 50 }
  }
}"#;
    let o = run_with(cfg, "design-iq", dir.path());
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn full_rank_slepian_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with(&mse_config(""), "mse-sweep", dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_rows(&dir.path().join("out/mse_sweep.csv"));
    let col = rows[0].iter().position(|c| c == "mse_normalized").unwrap();
    let full = rows.iter().find(|r| r[0] == "slepian" && r[1] == "16").unwrap();
    assert!(full[col].parse::<f64>().unwrap() <= 1e-10);
    let header = fs::read_to_string(dir.path().join("out/mse_sweep.csv")).unwrap();
    assert!(header.starts_with("# slepbeam"));
    assert!(header.contains("# config_sha256 "));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = mse_config(r#", "monte_carlo_trials": 200, "noise_var": 1e-3"#);
    let path = dir.path().join("config.json");
    fs::write(&path, &cfg).unwrap();
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let o = beam(&["mse-sweep", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(out.join("mse_sweep.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{
  "scenario": "empty",
  "interference_sweep": {{
    "geometry": {SMALL_ULA},
    "signal": {{ "carrier_hz": 28e9, "half_bandwidth_hz": 3e9, "azimuth_deg": 45.0 }},
    "interferer": {{ "carrier_hz": 28e9, "half_bandwidth_hz": 3e9, "azimuth_deg": 90.0 }},
    "families": [],
    "sweep": {{ "axis": "interferer_azimuth", "start_deg": 0.0, "stop_deg": 10.0, "step_deg": 5.0 }}
  }}
}}"#
    );
    let o = run_with(&cfg, "interference-sweep", dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_rows(&dir.path().join("out/interference_sweep.csv"));
    assert_eq!(rows.len(), 1);
    assert!(rows[0].iter().any(|c| c == "family"));
}

#[test]
fn silent_interferer_gives_a_flat_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{
  "scenario": "silent",
  "interference_sweep": {{
    "geometry": {SMALL_ULA},
    "signal": {{ "carrier_hz": 28e9, "half_bandwidth_hz": 3e9, "azimuth_deg": 45.0 }},
    "interferer": {{ "carrier_hz": 28e9, "half_bandwidth_hz": 3e9, "azimuth_deg": 90.0, "power": 0.0 }},
    "noise_var": 1e-3,
    "families": [{{ "family": "slepian", "k_values": [3] }}],
    "sweep": {{ "axis": "interferer_azimuth", "start_deg": 0.0, "stop_deg": 180.0, "step_deg": 15.0 }}
  }}
}}"#
    );
    let o = run_with(&cfg, "interference-sweep", dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_rows(&dir.path().join("out/interference_sweep.csv"));
    let col = rows[0].iter().position(|c| c == "mse").unwrap();
    let values: Vec<&str> = rows[1..].iter().map(|r| r[col].as_str()).collect();
    assert_eq!(values.len(), 13);
    assert!(values.iter().all(|v| *v == values[0]));
}

#[test]
fn dry_run_reports_schedule_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
  "scenario": "dry",
  "decimate_recover": {
    "geometry": { "kind": "upa", "rows": 32, "cols": 32, "carrier_hz": 28e9 },
    "source": { "carrier_hz": 28e9, "half_bandwidth_hz": 2.75e9, "azimuth_deg": 45.0 },
    "dry_run": true,
    "recovery": { "method": "cgd", "snapshots": 60, "delta": 1e-3, "eps": 1e-6, "max_iterations": 200 }
  }
}"#;
    let o = run_with(cfg, "decimate-recover", dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("T_s = ") && stdout.contains("T_d = ") && stdout.contains("ratio = "), "{stdout}");
    assert!(!dir.path().join("out/decimate_trace.csv").exists());
}

#[test]
fn oversized_requests_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
  "scenario": "huge",
  "interference_sweep": {
    "geometry": { "kind": "ula", "elements": 20000, "carrier_hz": 28e9 },
    "signal": { "carrier_hz": 28e9, "half_bandwidth_hz": 1e8, "azimuth_deg": 45.0 },
    "interferer": { "carrier_hz": 28e9, "half_bandwidth_hz": 1e8, "azimuth_deg": 90.0 },
    "families": [{ "family": "slepian", "k_values": [4] }],
    "sweep": { "axis": "interferer_azimuth", "start_deg": 0.0, "stop_deg": 180.0, "step_deg": 0.5 }
  }
}"#;
    let o = run_with(cfg, "interference-sweep", dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("entries"));
}

#[test]
fn bundled_scenarios_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        slepbeam_cli::config::ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 10);
}
