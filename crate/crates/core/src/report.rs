//! Result tables and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentSpec, MANIFEST_FORMAT};
use crate::engine::{mean_stderr, RunRecord};
use crate::error::{Error, Result};
use crate::rng::repetition_seed;

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "run-manifest.json";
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const COLUMNS: [&str; 20] = [
    "run_id",
    "scheme",
    "axis",
    "point",
    "repetition",
    "seed",
    "avg_rate_D",
    "avg_rate_S",
    "avg_delay",
    "delay_applicable",
    "completed_packets",
    "mean_rate_D",
    "mean_rate_S",
    "mean_delay",
    "stderr_rate_D",
    "stderr_rate_S",
    "stderr_delay",
    "alpha_mean",
    "alpha_min",
    "alpha_max",
];

/// Formats a number with 9 significant digits, using the shortest text that
/// reads back to the rounded value. Non-finite values become `inf`, `-inf`
/// and `nan`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("scientific notation parses");
    if rounded == 0.0 {
        "0".into()
    } else {
        rounded.to_string()
    }
}

/// Short content hash of the resolved configuration and code version.
pub fn run_id(spec: &ExperimentSpec) -> String {
    let mut h = Sha256::new();
    h.update(spec.to_json().as_bytes());
    h.update(b"\n");
    h.update(CODE_VERSION.as_bytes());
    let digest = h.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub format: &'static str,
    pub run_id: String,
    pub code_version: &'static str,
    pub seeds: Vec<u64>,
    pub schemes: Vec<&'static str>,
    pub config: &'a ExperimentSpec,
}

impl<'a> Manifest<'a> {
    pub fn new(spec: &'a ExperimentSpec) -> Self {
        Self {
            format: MANIFEST_FORMAT,
            run_id: run_id(spec),
            code_version: CODE_VERSION,
            seeds: (0..spec.repetitions).map(|r| repetition_seed(spec.seed, r)).collect(),
            schemes: spec.schemes.iter().map(|s| s.name()).collect(),
            config: spec,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

fn group_key(r: &RunRecord) -> (String, u64) {
    (r.scheme.name().to_string(), r.point.map_or(0, f64::to_bits))
}

/// Renders the result table. Aggregate columns repeat on every row of the same
/// (scheme, point) group so the table stays rectangular.
pub fn results_csv(run_id: &str, records: &[RunRecord]) -> Result<String> {
    let mut groups: BTreeMap<(String, u64), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(group_key(r)).or_default().push(r);
    }
    let stats = |key: &(String, u64), f: fn(&RunRecord) -> f64| {
        let vals: Vec<f64> = groups[key].iter().map(|r| f(r)).collect();
        mean_stderr(&vals)
    };

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS).map_err(csv_error)?;
    for r in records {
        let key = group_key(r);
        let (mean_d, se_d) = stats(&key, |r| r.metrics.avg_rate_d);
        let (mean_s, se_s) = stats(&key, |r| r.metrics.avg_rate_s);
        let (mean_delay, se_delay) = stats(&key, |r| r.metrics.avg_delay);
        let a_mean = r.alpha.iter().sum::<f64>() / r.alpha.len() as f64;
        let a_min = r.alpha.iter().copied().fold(f64::INFINITY, f64::min);
        let a_max = r.alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let m = &r.metrics;
        let row = [
            run_id.to_string(),
            r.scheme.name().to_string(),
            r.axis.map_or(String::new(), |a| a.name().to_string()),
            r.point.map_or(String::new(), format_number),
            r.repetition.to_string(),
            r.seed.to_string(),
            format_number(m.avg_rate_d),
            format_number(m.avg_rate_s),
            format_number(m.avg_delay),
            m.delay_applicable.to_string(),
            m.completed_packets.to_string(),
            format_number(mean_d),
            format_number(mean_s),
            format_number(mean_delay),
            format_number(se_d),
            format_number(se_s),
            format_number(se_delay),
            format_number(a_mean),
            format_number(a_min),
            format_number(a_max),
        ];
        w.write_record(&row).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io {
        path: RESULTS_FILE.into(),
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io {
        path: RESULTS_FILE.into(),
        message: e.to_string(),
    }
}

/// Paths of the files written by [`emit_results`].
#[derive(Debug, Clone)]
pub struct Emitted {
    pub results: PathBuf,
    pub manifest: PathBuf,
    pub run_id: String,
}

/// Writes `results.csv` and `run-manifest.json` into `dir`, creating it if
/// needed.
pub fn emit_results(spec: &ExperimentSpec, records: &[RunRecord], dir: &Path) -> Result<Emitted> {
    if records.is_empty() {
        return Err(Error::Precondition("no results to write".into()));
    }
    let io = |path: &Path, e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let manifest = Manifest::new(spec);
    let results = dir.join(RESULTS_FILE);
    let manifest_path = dir.join(MANIFEST_FILE);
    fs::write(&results, results_csv(&manifest.run_id, records)?).map_err(|e| io(&results, e))?;
    fs::write(&manifest_path, manifest.to_json()).map_err(|e| io(&manifest_path, e))?;
    Ok(Emitted {
        results,
        manifest: manifest_path,
        run_id: manifest.run_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;
    use crate::engine::{EpisodeMetrics, SweepAxis};
    use crate::selection::Scheme;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(std::f64::consts::PI), "3.14159265");
        assert_eq!(format_number(123456789.4), "123456789");
        assert_eq!(format_number(1234567891.0), "1234567890");
        assert_eq!(format_number(1.23456789e-7), "0.000000123456789");
        assert_eq!(format_number(f64::INFINITY), "inf");
        assert_eq!(format_number(f64::NAN), "nan");
    }

    fn record(scheme: Scheme, point: Option<f64>, rep: u64, rate: f64) -> RunRecord {
        RunRecord {
            scheme,
            axis: point.map(|_| SweepAxis::Snr),
            point,
            repetition: rep,
            seed: 10 + rep,
            alpha: vec![0.25, 0.75],
            metrics: EpisodeMetrics {
                avg_rate_d: rate,
                avg_rate_s: rate,
                avg_delay: 3.0,
                delay_applicable: true,
                completed_packets: 5,
                censored_packets: 0,
                slots: 10,
                final_buffer_total: 0.0,
                trace: None,
            },
        }
    }

    #[test]
    fn table_is_rectangular_with_group_stats() {
        let recs = vec![
            record(Scheme::Zf, Some(10.0), 0, 1.0),
            record(Scheme::Zf, Some(10.0), 1, 3.0),
            record(Scheme::Zf, Some(20.0), 0, 5.0),
            record(Scheme::Zf, Some(20.0), 1, 5.0),
        ];
        let text = results_csv("abc", &recs).unwrap();
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), COLUMNS);
        let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 4);
        for row in &rows {
            assert_eq!(row.len(), COLUMNS.len());
            assert_eq!(&row[0], "abc");
            assert_eq!(&row[2], "snr");
            assert_eq!(&row[17], "0.5");
            assert_eq!(&row[18], "0.25");
        }
        assert_eq!(&rows[0][11], "2");
        assert_eq!(&rows[0][14], "1");
        assert_eq!(&rows[2][11], "5");
        assert_eq!(&rows[2][14], "0");
    }

    #[test]
    fn single_repetition_has_nan_stderr() {
        let text = results_csv("x", &[record(Scheme::HdBrs, None, 0, 1.5)]).unwrap();
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let row = rd.records().next().unwrap().unwrap();
        assert_eq!(&row[2], "");
        assert_eq!(&row[3], "");
        assert_eq!(&row[11], "1.5");
        assert_eq!(&row[14], "nan");
    }

    #[test]
    fn manifest_reparses_to_the_same_spec() {
        let spec = parse_config_str(
            r#"{"relays": 3, "antennas": 2, "snr_db": 20, "schemes": ["zf", "ideal"], "seed": 7,
                "repetitions": 2, "sweep": {"axis": "buffer_size", "points": [5, null]}}"#,
        )
        .unwrap();
        let m = Manifest::new(&spec);
        assert_eq!(m.seeds, vec![7, 8]);
        assert_eq!(m.run_id.len(), 16);
        let back = parse_config_str(&m.to_json()).unwrap();
        assert_eq!(back, spec);
        assert_eq!(run_id(&back), m.run_id);
        let other = parse_config_str(
            r#"{"relays": 3, "antennas": 2, "snr_db": 20, "schemes": ["zf", "ideal"], "seed": 8,
                "repetitions": 2, "sweep": {"axis": "buffer_size", "points": [5, null]}}"#,
        )
        .unwrap();
        assert_ne!(run_id(&other), m.run_id);
    }

    #[test]
    fn emit_rejects_empty_and_unwritable() {
        let spec = parse_config_str(r#"{"relays": 2, "antennas": 2, "snr_db": 20, "schemes": ["zf"]}"#).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_results(&spec, &[], dir.path()), Err(Error::Precondition(_))));
        let file = dir.path().join("plain");
        fs::write(&file, "x").unwrap();
        let r = emit_results(&spec, &[record(Scheme::Zf, None, 0, 1.0)], &file.join("sub"));
        assert!(matches!(r, Err(Error::Io { .. })));
        let ok = emit_results(&spec, &[record(Scheme::Zf, None, 0, 1.0)], dir.path()).unwrap();
        assert!(ok.results.exists() && ok.manifest.exists());
    }
}
