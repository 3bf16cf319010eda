//! Episode orchestration: weight pre-training, the data phase with packet
//! delay accounting, and parameter sweeps.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, draw, NetworkConfig};
use crate::error::{Error, Result};
use crate::link_rates::{apply_slot, BufferState};
use crate::rng::{repetition_seed, substream, Purpose};
use crate::selection::{select, AlphaMode, AlphaState, Decision, PairDecision, Scheme, SlotContext};

/// Pre-training buffer level when the capacity is unbounded.
pub const UNBOUNDED_PRETRAIN_LEVEL: f64 = 25.0;

/// Slots used to estimate the typical per-slot rate before back-pressure training.
pub const WARMUP_SLOTS: u64 = 100;

/// Packets with fewer remaining bits than this count as delivered.
const DRAIN_EPS: f64 = 1e-9;

const PRETRAIN_KEY: u64 = 1 << 40;
const WARMUP_KEY: u64 = 2 << 40;

/// Lengths of the two phases and the weight-adaptation rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub slots: u64,
    pub pretraining_slots: u64,
    pub alpha_mode: AlphaMode,
    pub record_trace: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            slots: 10_000,
            pretraining_slots: 5_000,
            alpha_mode: AlphaMode::Backpressure,
            record_trace: false,
        }
    }
}

/// A source packet queued at a relay.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub arrival_slot: u64,
    pub size: f64,
    pub remaining: f64,
    pub relay: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotTrace {
    pub decision: Decision,
    pub c_s: f64,
    pub c_d: f64,
    pub buffers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    /// Mean bits delivered to the destination per slot.
    pub avg_rate_d: f64,
    /// Mean bits leaving the source per slot.
    pub avg_rate_s: f64,
    /// Mean delay of delivered packets, in slots.
    pub avg_delay: f64,
    /// False for bufferless schemes, whose delay is reported as zero.
    pub delay_applicable: bool,
    pub completed_packets: u64,
    /// Packets still (partly) queued at the end of the episode.
    pub censored_packets: u64,
    pub slots: u64,
    pub final_buffer_total: f64,
    pub trace: Option<Vec<SlotTrace>>,
}

impl EpisodeMetrics {
    /// `(C̄_S − C̄_D)·T` minus the bits left in the buffers; zero up to rounding.
    pub fn conservation_residual(&self) -> f64 {
        let t = self.slots as f64;
        self.avg_rate_s * t - self.avg_rate_d * t - self.final_buffer_total
    }
}

fn pretrain_buffers(config: &NetworkConfig) -> Result<BufferState> {
    let level = if config.b_max.is_finite() {
        config.b_max / 2.0
    } else {
        UNBOUNDED_PRETRAIN_LEVEL
    };
    BufferState::filled(config.relays, config.b_max, level)
}

/// Applies a decision's rates to the buffers.
pub fn advance_buffers(buf: &BufferState, d: &PairDecision) -> Result<BufferState> {
    match d.decision {
        Decision::Pair { i, j } => apply_slot(buf, i, d.c_s, j, d.c_d),
        Decision::Receive { i } => buf.apply_receive(i, d.c_s),
        Decision::Transmit { j } => buf.apply_transmit(j, d.c_d),
        Decision::Direct { .. } => Ok(buf.clone()),
    }
}

/// Mean of `(C_S + C_D)/2` over warm-up slots with neutral weights and the
/// pre-training buffer state.
fn typical_rate(scheme: Scheme, config: &NetworkConfig) -> Result<f64> {
    let buf = pretrain_buffers(config)?;
    let alpha = vec![0.5; config.relays];
    let mut total = 0.0;
    for t in 0..WARMUP_SLOTS {
        let chan = draw(config, &mut substream(config.seed, Purpose::WarmupChannel, t));
        let ctx = SlotContext {
            config,
            chan: &chan,
            buf: &buf,
            alpha: &alpha,
            slot: t,
            stream_key: WARMUP_KEY + t,
        };
        let d = select(scheme, &ctx)?;
        total += 0.5 * (d.c_s + d.c_d);
    }
    Ok(total / WARMUP_SLOTS as f64)
}

/// Learns the per-relay weights from half-full buffers. Schemes that do not
/// use weights get the neutral value 0.5.
///
/// In back-pressure mode the returned weights are the time average over the
/// whole phase.
pub fn run_pretraining(scheme: Scheme, config: &NetworkConfig, mode: AlphaMode, slots: u64) -> Result<AlphaState> {
    config.validate()?;
    let k = config.relays;
    let mut state = AlphaState::uniform(k, 0.5);
    if !scheme.is_weighted() || slots == 0 {
        return Ok(state);
    }
    if mode == AlphaMode::Backpressure {
        let rate = typical_rate(scheme, config)?;
        state = state.with_virtual_source(10.0 * rate, rate);
    }
    let mut buf = pretrain_buffers(config)?;
    for t in 0..slots {
        let chan = draw(config, &mut substream(config.seed, Purpose::PretrainChannel, t));
        let d = select(
            scheme,
            &SlotContext {
                config,
                chan: &chan,
                buf: &buf,
                alpha: state.alpha(),
                slot: t,
                stream_key: PRETRAIN_KEY + t,
            },
        )?;
        buf = advance_buffers(&buf, &d)?;
        match mode {
            AlphaMode::Subgradient => state.update_subgradient(&d, t),
            AlphaMode::Backpressure => state.update_backpressure(&buf, d.c_s, d.c_d, true),
        }
    }
    if mode == AlphaMode::Backpressure {
        state = AlphaState::from_alpha(state.averaged())?;
    }
    Ok(state)
}

/// Data phase from empty buffers with fixed weights.
pub fn run_episode(
    scheme: Scheme,
    config: &NetworkConfig,
    alpha: &[f64],
    slots: u64,
    record_trace: bool,
) -> Result<EpisodeMetrics> {
    config.validate()?;
    if slots == 0 {
        return Err(Error::Config("an episode needs at least one slot".into()));
    }
    let k = config.relays;
    let mut buf = BufferState::empty(k, config.b_max);
    let mut queues: Vec<VecDeque<PacketRecord>> = vec![VecDeque::new(); k];
    let mut trace = record_trace.then(Vec::new);
    let (mut sum_s, mut sum_d) = (0.0, 0.0);
    let (mut delay_sum, mut completed) = (0u64, 0u64);
    for t in 0..slots {
        let chan = draw(config, &mut substream(config.seed, Purpose::DataChannel, t));
        let d = select(
            scheme,
            &SlotContext {
                config,
                chan: &chan,
                buf: &buf,
                alpha,
                slot: t,
                stream_key: t,
            },
        )?;
        buf = advance_buffers(&buf, &d)?;
        if scheme.buffered() {
            if let Some(j) = d.decision.transmitter() {
                let (n, delay) = drain(&mut queues[j], d.c_d, t);
                completed += n;
                delay_sum += delay;
            }
            if let Some(i) = d.decision.receiver() {
                if d.c_s > 0.0 {
                    queues[i].push_back(PacketRecord {
                        arrival_slot: t,
                        size: d.c_s,
                        remaining: d.c_s,
                        relay: i,
                    });
                }
            }
        }
        sum_s += d.c_s;
        sum_d += d.c_d;
        if let Some(tr) = trace.as_mut() {
            tr.push(SlotTrace {
                decision: d.decision,
                c_s: d.c_s,
                c_d: d.c_d,
                buffers: buf.levels().to_vec(),
            });
        }
    }
    let n = slots as f64;
    Ok(EpisodeMetrics {
        avg_rate_d: sum_d / n,
        avg_rate_s: sum_s / n,
        avg_delay: if completed > 0 {
            delay_sum as f64 / completed as f64
        } else {
            0.0
        },
        delay_applicable: scheme.buffered(),
        completed_packets: completed,
        censored_packets: queues.iter().map(|q| q.len() as u64).sum(),
        slots,
        final_buffer_total: buf.total(),
        trace,
    })
}

/// Removes `bits` from the head of the queue. Returns the number of packets
/// completed and the sum of their delays.
fn drain(queue: &mut VecDeque<PacketRecord>, mut bits: f64, slot: u64) -> (u64, u64) {
    let (mut n, mut delay) = (0, 0);
    while bits > 0.0 {
        let Some(front) = queue.front_mut() else { break };
        if front.remaining <= bits + DRAIN_EPS {
            bits -= front.remaining;
            delay += slot - front.arrival_slot;
            n += 1;
            queue.pop_front();
        } else {
            front.remaining -= bits;
            bits = 0.0;
        }
    }
    (n, delay)
}

/// Pre-training followed by a data episode.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeRun {
    pub alpha: Vec<f64>,
    pub metrics: EpisodeMetrics,
}

pub fn run_scheme(scheme: Scheme, config: &NetworkConfig, opts: &RunOptions) -> Result<SchemeRun> {
    if config.antennas < scheme.min_antennas() {
        return Err(Error::Unsupported(format!(
            "`{scheme}` needs at least {} antennas, got {}",
            scheme.min_antennas(),
            config.antennas
        )));
    }
    let alpha = run_pretraining(scheme, config, opts.alpha_mode, opts.pretraining_slots)?
        .alpha()
        .to_vec();
    let metrics = run_episode(scheme, config, &alpha, opts.slots, opts.record_trace)?;
    Ok(SchemeRun { alpha, metrics })
}

/// Parameter varied across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Common transmit SNR in dB.
    Snr,
    Antennas,
    Relays,
    /// Buffer capacity; `∞` for unbounded.
    BufferSize,
    /// Inter-relay average gain in dB.
    IriVariance,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Snr => "snr",
            SweepAxis::Antennas => "antennas",
            SweepAxis::Relays => "relays",
            SweepAxis::BufferSize => "buffer_size",
            SweepAxis::IriVariance => "iri_variance",
        }
    }

    /// Configuration at sweep point `point`.
    pub fn apply(self, base: &NetworkConfig, point: f64) -> Result<NetworkConfig> {
        let mut cfg = base.clone();
        let bad = |what: &str| Error::Config(format!("invalid {} point {point}: {what}", self.name()));
        let count = |min: f64| {
            if point.is_finite() && point.fract() == 0.0 && point >= min {
                Ok(point as usize)
            } else {
                Err(bad(&format!("expected an integer of at least {min}")))
            }
        };
        match self {
            SweepAxis::Snr => {
                if !point.is_finite() {
                    return Err(bad("not finite"));
                }
                cfg.rho_s = db_to_linear(point);
                cfg.rho_r = db_to_linear(point);
            }
            SweepAxis::Antennas => cfg.antennas = count(1.0)?,
            SweepAxis::Relays => {
                let k = count(2.0)?;
                let (sr, rd, rr) = uniform_gains(base).ok_or_else(|| bad("relay sweeps need uniform link gains"))?;
                cfg.relays = k;
                cfg.var_sr = vec![sr; k];
                cfg.var_rd = vec![rd; k];
                cfg.var_rr = vec![vec![rr; k]; k];
            }
            SweepAxis::BufferSize => {
                if !(point > 0.0) {
                    return Err(bad("capacity must be positive"));
                }
                cfg.b_max = point;
            }
            SweepAxis::IriVariance => {
                if !point.is_finite() {
                    return Err(bad("not finite"));
                }
                let g = db_to_linear(point);
                for row in &mut cfg.var_rr {
                    row.iter_mut().for_each(|v| *v = g);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SweepAxis::Snr,
            SweepAxis::Antennas,
            SweepAxis::Relays,
            SweepAxis::BufferSize,
            SweepAxis::IriVariance,
        ]
        .into_iter()
        .find(|a| a.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown sweep axis `{s}`")))
    }
}

fn uniform_gains(cfg: &NetworkConfig) -> Option<(f64, f64, f64)> {
    let sr = cfg.var_sr[0];
    let rd = cfg.var_rd[0];
    let rr = cfg.var_rr[0][1];
    let same = cfg.var_sr.iter().all(|&v| v == sr)
        && cfg.var_rd.iter().all(|&v| v == rd)
        && (0..cfg.relays).all(|j| (0..cfg.relays).all(|i| i == j || cfg.var_rr[j][i] == rr));
    same.then_some((sr, rd, rr))
}

/// A full experiment: schemes × sweep points × repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub base: NetworkConfig,
    pub schemes: Vec<Scheme>,
    /// `None` runs the base configuration once per repetition.
    pub sweep: Option<(SweepAxis, Vec<f64>)>,
    pub repetitions: u64,
    pub options: RunOptions,
}

impl SweepPlan {
    /// Resolved configurations, one per sweep point.
    pub fn point_configs(&self) -> Result<Vec<(Option<f64>, NetworkConfig)>> {
        match &self.sweep {
            None => Ok(vec![(None, self.base.clone())]),
            Some((_, points)) if points.is_empty() => Err(Error::Config("sweep points must not be empty".into())),
            Some((axis, points)) => points.iter().map(|&p| Ok((Some(p), axis.apply(&self.base, p)?))).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.schemes.is_empty() {
            return Err(Error::Config("at least one scheme is required".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.options.slots == 0 {
            return Err(Error::Config("slots must be at least 1".into()));
        }
        for (point, cfg) in self.point_configs()? {
            for s in &self.schemes {
                if cfg.antennas < s.min_antennas() {
                    let at = point.map(|p| format!(" at sweep point {p}")).unwrap_or_default();
                    return Err(Error::Config(format!(
                        "scheme `{s}` needs at least {} antennas{at}, configuration has {}",
                        s.min_antennas(),
                        cfg.antennas
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One (scheme, sweep point, repetition) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scheme: Scheme,
    pub axis: Option<SweepAxis>,
    pub point: Option<f64>,
    pub repetition: u64,
    pub seed: u64,
    pub alpha: Vec<f64>,
    pub metrics: EpisodeMetrics,
}

/// Runs every job of the plan, in parallel across jobs. Records come back
/// ordered by scheme, then point, then repetition, independent of scheduling.
pub fn run_sweep(plan: &SweepPlan, threads: Option<usize>) -> Result<Vec<RunRecord>> {
    plan.validate()?;
    let points = plan.point_configs()?;
    let axis = plan.sweep.as_ref().map(|(a, _)| *a);
    let mut jobs = Vec::new();
    for &scheme in &plan.schemes {
        for (point, cfg) in &points {
            for rep in 0..plan.repetitions {
                jobs.push((scheme, *point, cfg, rep));
            }
        }
    }
    let work = || {
        jobs.par_iter()
            .map(|&(scheme, point, cfg, rep)| {
                let seed = repetition_seed(plan.base.seed, rep);
                let cfg = cfg.clone().with_seed(seed);
                let run = run_scheme(scheme, &cfg, &plan.options)?;
                Ok(RunRecord {
                    scheme,
                    axis,
                    point,
                    repetition: rep,
                    seed,
                    alpha: run.alpha,
                    metrics: run.metrics,
                })
            })
            .collect::<Result<Vec<_>>>()
    };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Mean and standard error of a sample.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
