//! Experiment configuration files.
//!
//! A configuration is a single JSON object. Quantities in dB carry a `_db`
//! suffix; everything else is linear or a count. Unknown keys are rejected
//! and every error names the offending key path.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, NetworkConfig};
use crate::engine::{RunOptions, SweepAxis, SweepPlan};
use crate::error::{Error, Result};
use crate::selection::{AlphaMode, Scheme};

/// Format tag written into run manifests. A manifest can be passed back as a
/// configuration; its embedded `config` object is used.
pub const MANIFEST_FORMAT: &str = "relaysim-run-manifest/1";

/// Scalar applied to every relay, or one value per relay.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum PerRelay {
    All(f64),
    Each(Vec<f64>),
}

/// Scalar applied to every ordered relay pair, or a full matrix indexed
/// `[from][to]` with `null` on the diagonal.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum PairGains {
    All(f64),
    Each(Vec<Vec<Option<f64>>>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: SweepAxis,
    points: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    relays: usize,
    antennas: usize,
    snr_db: f64,
    relay_snr_db: Option<f64>,
    var_sr_db: Option<PerRelay>,
    var_rd_db: Option<PerRelay>,
    var_rr_db: Option<PairGains>,
    #[serde(default)]
    buffer_max: Option<f64>,
    seed: Option<u64>,
    schemes: Vec<Scheme>,
    sweep: Option<RawSweep>,
    slots: Option<u64>,
    pretraining_slots: Option<u64>,
    repetitions: Option<u64>,
    alpha_mode: Option<AlphaMode>,
    output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    /// `None` stands for an unbounded buffer and is only valid on the
    /// buffer-size axis.
    pub points: Vec<Option<f64>>,
}

/// A validated experiment with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub relays: usize,
    pub antennas: usize,
    pub snr_db: f64,
    pub relay_snr_db: f64,
    pub var_sr_db: Vec<f64>,
    pub var_rd_db: Vec<f64>,
    /// `[from][to]`; the diagonal is `None`.
    pub var_rr_db: Vec<Vec<Option<f64>>>,
    /// `None` for unbounded buffers.
    pub buffer_max: Option<f64>,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub sweep: Option<SweepSpec>,
    pub slots: u64,
    pub pretraining_slots: u64,
    pub repetitions: u64,
    pub alpha_mode: AlphaMode,
    pub output: Option<String>,
}

impl ExperimentSpec {
    pub const DEFAULT_SLOTS: u64 = 10_000;
    pub const DEFAULT_PRETRAINING_SLOTS: u64 = 5_000;
    pub const DEFAULT_REPETITIONS: u64 = 3;
    pub const DEFAULT_SEED: u64 = 1;

    fn resolve(raw: RawSpec) -> Result<Self> {
        let k = raw.relays;
        if k < 2 {
            return Err(Error::Config(format!("relays: must be at least 2, got {k}")));
        }
        if raw.antennas < 1 {
            return Err(Error::Config("antennas: must be at least 1".into()));
        }
        let per_relay = |key: &str, v: Option<PerRelay>| -> Result<Vec<f64>> {
            let v = match v {
                None => vec![0.0; k],
                Some(PerRelay::All(x)) => vec![x; k],
                Some(PerRelay::Each(xs)) if xs.len() == k => xs,
                Some(PerRelay::Each(xs)) => {
                    return Err(Error::Config(format!("{key}: expected {k} entries, got {}", xs.len())))
                }
            };
            if let Some(p) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::Config(format!("{key}[{p}]: must be finite")));
            }
            Ok(v)
        };
        let var_sr_db = per_relay("var_sr_db", raw.var_sr_db)?;
        let var_rd_db = per_relay("var_rd_db", raw.var_rd_db)?;
        let var_rr_db = match raw.var_rr_db {
            None => pair_matrix(k, 0.0),
            Some(PairGains::All(x)) => pair_matrix(k, x),
            Some(PairGains::Each(rows)) => {
                if rows.len() != k || rows.iter().any(|r| r.len() != k) {
                    return Err(Error::Config(format!("var_rr_db: expected a {k}x{k} matrix")));
                }
                let mut out = rows;
                for (j, row) in out.iter_mut().enumerate() {
                    for (i, v) in row.iter_mut().enumerate() {
                        if i == j {
                            *v = None;
                        } else if !v.is_some_and(f64::is_finite) {
                            return Err(Error::Config(format!("var_rr_db[{j}][{i}]: a finite gain is required")));
                        }
                    }
                }
                out
            }
        };
        if !raw.snr_db.is_finite() || raw.relay_snr_db.is_some_and(|x| !x.is_finite()) {
            return Err(Error::Config("snr_db: must be finite".into()));
        }
        if let Some(b) = raw.buffer_max {
            if !(b > 0.0) {
                return Err(Error::Config(format!("buffer_max: must be positive or null, got {b}")));
            }
        }
        if raw.schemes.is_empty() {
            return Err(Error::Config("schemes: at least one scheme is required".into()));
        }
        let sweep = match raw.sweep {
            None => None,
            Some(s) => {
                if s.points.is_empty() {
                    return Err(Error::Config("sweep.points: must not be empty".into()));
                }
                if s.axis != SweepAxis::BufferSize {
                    if let Some(p) = s.points.iter().position(Option::is_none) {
                        return Err(Error::Config(format!(
                            "sweep.points[{p}]: null is only allowed on the buffer_size axis"
                        )));
                    }
                }
                Some(SweepSpec {
                    axis: s.axis,
                    points: s.points,
                })
            }
        };
        let spec = Self {
            relays: k,
            antennas: raw.antennas,
            snr_db: raw.snr_db,
            relay_snr_db: raw.relay_snr_db.unwrap_or(raw.snr_db),
            var_sr_db,
            var_rd_db,
            var_rr_db,
            buffer_max: raw.buffer_max,
            seed: raw.seed.unwrap_or(Self::DEFAULT_SEED),
            schemes: raw.schemes,
            sweep,
            slots: raw.slots.unwrap_or(Self::DEFAULT_SLOTS),
            pretraining_slots: raw.pretraining_slots.unwrap_or(Self::DEFAULT_PRETRAINING_SLOTS),
            repetitions: raw.repetitions.unwrap_or(Self::DEFAULT_REPETITIONS),
            alpha_mode: raw.alpha_mode.unwrap_or_default(),
            output: raw.output,
        };
        if spec.slots == 0 {
            return Err(Error::Config("slots: must be at least 1".into()));
        }
        if spec.repetitions == 0 {
            return Err(Error::Config("repetitions: must be at least 1".into()));
        }
        spec.plan()?.validate()?;
        Ok(spec)
    }

    /// Channel and buffer parameters in linear units.
    pub fn network(&self) -> NetworkConfig {
        NetworkConfig {
            relays: self.relays,
            antennas: self.antennas,
            rho_s: db_to_linear(self.snr_db),
            rho_r: db_to_linear(self.relay_snr_db),
            var_sr: self.var_sr_db.iter().map(|&x| db_to_linear(x)).collect(),
            var_rd: self.var_rd_db.iter().map(|&x| db_to_linear(x)).collect(),
            var_rr: self
                .var_rr_db
                .iter()
                .map(|row| row.iter().map(|v| v.map_or(0.0, db_to_linear)).collect())
                .collect(),
            b_max: self.buffer_max.unwrap_or(f64::INFINITY),
            seed: self.seed,
        }
    }

    pub fn options(&self) -> RunOptions {
        RunOptions {
            slots: self.slots,
            pretraining_slots: self.pretraining_slots,
            alpha_mode: self.alpha_mode,
            record_trace: false,
        }
    }

    pub fn plan(&self) -> Result<SweepPlan> {
        Ok(SweepPlan {
            base: self.network(),
            schemes: self.schemes.clone(),
            sweep: self
                .sweep
                .as_ref()
                .map(|s| (s.axis, s.points.iter().map(|p| p.unwrap_or(f64::INFINITY)).collect())),
            repetitions: self.repetitions,
            options: self.options(),
        })
    }

    /// Canonical JSON form; parsing it yields an identical spec.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

fn pair_matrix(k: usize, value: f64) -> Vec<Vec<Option<f64>>> {
    (0..k)
        .map(|j| (0..k).map(|i| (i != j).then_some(value)).collect())
        .collect()
}

/// Parses a configuration (or a run manifest) from JSON text.
pub fn parse_config_str(text: &str) -> Result<ExperimentSpec> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed JSON: {e}")))?;
    let value = match value.get("format").and_then(|f| f.as_str()) {
        Some(MANIFEST_FORMAT) => value
            .get("config")
            .cloned()
            .ok_or_else(|| Error::Config("config: missing from manifest".into()))?,
        _ => value,
    };
    let raw: RawSpec = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            Error::Config(inner.to_string())
        } else {
            Error::Config(format!("{path}: {inner}"))
        }
    })?;
    ExperimentSpec::resolve(raw)
}

pub fn parse_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let spec = parse_config_str(r#"{"relays": 2, "antennas": 2, "snr_db": 20, "schemes": ["zf"]}"#).unwrap();
        assert_eq!(spec.slots, 10_000);
        assert_eq!(spec.pretraining_slots, 5_000);
        assert_eq!(spec.repetitions, 3);
        assert_eq!(spec.buffer_max, None);
        assert_eq!(spec.alpha_mode, AlphaMode::Backpressure);
        let net = spec.network();
        assert_eq!(net.b_max, f64::INFINITY);
        assert_eq!(net.var_sr, vec![1.0, 1.0]);
        assert_eq!(net.var_rr[0][1], 1.0);
        assert!((net.rho_s - 100.0).abs() < 1e-9);
    }

    #[test]
    fn asymmetric_gains_parse_exactly() {
        let spec = parse_config_str(
            r#"{"relays": 3, "antennas": 2, "snr_db": 20, "schemes": ["optimal"],
                "var_sr_db": [1, 0, -1], "var_rd_db": [-1, 0, 1],
                "var_rr_db": [[null, 0, -1], [0, null, 0], [-1, 0, null]]}"#,
        )
        .unwrap();
        assert_eq!(spec.var_sr_db, vec![1.0, 0.0, -1.0]);
        assert_eq!(spec.var_rd_db, vec![-1.0, 0.0, 1.0]);
        assert_eq!(spec.var_rr_db[0], vec![None, Some(0.0), Some(-1.0)]);
        assert_eq!(spec.var_rr_db[2][0], Some(-1.0));
        let net = spec.network();
        assert!((net.var_sr[0] - db_to_linear(1.0)).abs() < 1e-15);
        assert!((net.var_rr[2][0] - db_to_linear(-1.0)).abs() < 1e-15);
    }

    #[test]
    fn unknown_scheme_is_named() {
        let err = parse_config_str(r#"{"relays": 2, "antennas": 2, "snr_db": 20, "schemes": ["zzz"]}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("zzz") && msg.contains("schemes"), "{msg}");
    }

    #[test]
    fn errors_carry_key_paths() {
        let err = parse_config_str(
            r#"{"relays": 2, "antennas": 2, "snr_db": 20, "schemes": ["zf"], "sweep": {"axis": "snr", "pionts": [1]}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("sweep"), "{err}");
        let err = parse_config_str(r#"{"relays": 2, "antennas": 2, "snr_db": 20, "schemes": ["zf"], "colour": 1}"#)
            .unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
        let err = parse_config_str(r#"{"relays": 2, "antennas": "two", "snr_db": 20, "schemes": ["zf"]}"#).unwrap_err();
        assert!(err.to_string().contains("antennas"), "{err}");
        let err = parse_config_str(r#"{"relays": 3, "antennas": 2, "snr_db": 20, "schemes": ["zf"], "var_sr_db": [0, 1]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("var_sr_db"), "{err}");
    }

    #[test]
    fn semantic_checks() {
        let bad = [
            r#"{"relays": 1, "antennas": 2, "snr_db": 20, "schemes": ["zf"]}"#,
            r#"{"relays": 2, "antennas": 1, "snr_db": 20, "schemes": ["zf"]}"#,
            r#"{"relays": 2, "antennas": 2, "snr_db": 20, "schemes": []}"#,
            r#"{"relays": 2, "antennas": 2, "snr_db": 20, "schemes": ["zf"], "buffer_max": 0}"#,
            r#"{"relays": 2, "antennas": 2, "snr_db": 20, "schemes": ["zf"], "sweep": {"axis": "snr", "points": []}}"#,
            r#"{"relays": 2, "antennas": 2, "snr_db": 20, "schemes": ["zf"], "sweep": {"axis": "snr", "points": [null]}}"#,
            r#"{"relays": 2, "antennas": 2, "snr_db": 20, "schemes": ["zf"], "sweep": {"axis": "antennas", "points": [1, 2]}}"#,
            r#"{"relays": 2, "antennas": 2, "snr_db": 20, "schemes": ["zf"], "sweep": {"axis": "diagonal", "points": [1]}}"#,
        ];
        for text in bad {
            assert!(matches!(parse_config_str(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn unbounded_buffer_sweep_point() {
        let spec = parse_config_str(
            r#"{"relays": 3, "antennas": 2, "snr_db": 20, "schemes": ["zf"],
                "sweep": {"axis": "buffer_size", "points": [10, 50, null]}}"#,
        )
        .unwrap();
        let plan = spec.plan().unwrap();
        assert_eq!(plan.sweep.unwrap().1, vec![10.0, 50.0, f64::INFINITY]);
    }

    #[test]
    fn canonical_json_round_trips() {
        let spec = parse_config_str(
            r#"{"relays": 3, "antennas": 4, "snr_db": 17.3, "relay_snr_db": 12.1, "schemes": ["ob", "hd-brs"],
                "var_rr_db": 10, "buffer_max": 50, "seed": 18446744073709551615,
                "sweep": {"axis": "iri_variance", "points": [-10, 0.1, 10]},
                "alpha_mode": "subgradient", "output": "out/dir"}"#,
        )
        .unwrap();
        assert_eq!(parse_config_str(&spec.to_json()).unwrap(), spec);
    }
}
