use std::fs;

use relaysim::config::{parse_config, parse_config_str};
use relaysim::engine::run_sweep;
use relaysim::report::{emit_results, format_number, COLUMNS};
use relaysim::Error;

const RING: &str = r#"{
  "relays": 3,
  "antennas": 2,
  "snr_db": 20,
  "var_sr_db": [1, 0, -1],
  "var_rd_db": [-1, 0, 1],
  "var_rr_db": [[null, 0, -1], [0, null, 0], [-1, 0, null]],
  "schemes": ["optimal", "zf", "mmse", "sinr", "ideal"],
  "sweep": {"axis": "snr", "points": [0, 10, 20, 30, 40]}
}"#;

#[test]
fn ring_gains_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ring.json");
    fs::write(&path, RING).unwrap();
    let spec = parse_config(&path).unwrap();
    assert_eq!(spec.var_sr_db, [1.0, 0.0, -1.0]);
    assert_eq!(spec.var_rd_db, [-1.0, 0.0, 1.0]);
    let off: Vec<f64> = (0..3)
        .flat_map(|j| (0..3).filter(move |&i| i != j).map(move |i| (j, i)))
        .map(|(j, i)| spec.var_rr_db[j][i].unwrap())
        .collect();
    assert_eq!(off, [0.0, -1.0, 0.0, 0.0, -1.0, 0.0]);
    assert!((0..3).all(|k| spec.var_rr_db[k][k].is_none()));
    assert_eq!(spec.sweep.as_ref().unwrap().points.len(), 5);
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(parse_config(&dir.path().join("absent.json")), Err(Error::Io { .. })));
    assert!(matches!(parse_config_str("{not json"), Err(Error::Config(_))));
}

#[test]
fn missing_required_key_is_named() {
    let err = parse_config_str(r#"{"relays": 2, "antennas": 2, "schemes": ["zf"]}"#).unwrap_err();
    assert!(err.to_string().contains("snr_db"), "{err}");
}

fn run_and_emit(text: &str, dir: &std::path::Path) -> (String, String) {
    let spec = parse_config_str(text).unwrap();
    let records = run_sweep(&spec.plan().unwrap(), None).unwrap();
    let out = emit_results(&spec, &records, dir).unwrap();
    (fs::read_to_string(out.results).unwrap(), fs::read_to_string(out.manifest).unwrap())
}

#[test]
fn single_run_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, manifest) = run_and_emit(
        r#"{"relays": 2, "antennas": 2, "snr_db": 20, "schemes": ["zf"], "slots": 200, "pretraining_slots": 100, "repetitions": 1}"#,
        dir.path(),
    );
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], COLUMNS.join(","));
    let m: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert!(lines[1].starts_with(m["run_id"].as_str().unwrap()));
}

#[test]
fn sweep_rows_and_manifest_rerun() {
    let text = r#"{"relays": 2, "antennas": 2, "snr_db": 20, "schemes": ["zf", "hd-brs"], "slots": 150,
                   "pretraining_slots": 100, "repetitions": 3,
                   "sweep": {"axis": "snr", "points": [0, 10, 20, 30, 40]}}"#;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (csv, manifest) = run_and_emit(text, a.path());
    assert_eq!(csv.lines().count(), 31);
    assert!(csv.lines().all(|l| l.split(',').count() == COLUMNS.len()));
    let (csv2, manifest2) = run_and_emit(&manifest, b.path());
    assert_eq!(csv, csv2);
    assert_eq!(manifest, manifest2);
}

#[test]
fn numbers_read_back_to_nine_digits() {
    for x in [1.0 / 3.0, 2.0f64.sqrt() * 1e6, 6.02214076e23, 1.0e-9 / 7.0, 12345.678901234] {
        let text = format_number(x);
        let back: f64 = text.parse().unwrap();
        assert!(((back - x) / x).abs() <= 5e-9, "{x} -> {text}");
        let digits = text.trim_start_matches("0.").chars().filter(char::is_ascii_digit).skip_while(|&c| c == '0').count();
        assert!(digits <= 9 || !text.contains('.'), "{text}");
        assert_eq!(format_number(back), text);
    }
}
