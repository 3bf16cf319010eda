//! Per-slot relay selection for every scheme, and the two weight-adaptation
//! rules that steer the joint schemes toward balanced buffers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::beamforming::{
    bf_ideal, bf_iri_free, bf_mmse, bf_ob, bf_optimal_weighted, bf_zf, AlternatingOptions, BeamformerResult,
};
use crate::channel::{ChannelRealization, NetworkConfig};
use crate::error::{Error, Result};
use crate::link_rates::{capacity, sinr_receive, BufferState};
use crate::rng::{substream, Purpose};

/// Relay selection schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scheme {
    Optimal,
    Zf,
    Mmse,
    Ob,
    Sinr,
    Ideal,
    HdBrs,
    HdMmrs,
    HdMlrs,
    SfdMmrs,
    SfdMmrsIri,
}

impl Scheme {
    pub const ALL: [Scheme; 11] = [
        Scheme::Optimal,
        Scheme::Zf,
        Scheme::Mmse,
        Scheme::Ob,
        Scheme::Sinr,
        Scheme::Ideal,
        Scheme::HdBrs,
        Scheme::HdMmrs,
        Scheme::HdMlrs,
        Scheme::SfdMmrs,
        Scheme::SfdMmrsIri,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Optimal => "optimal",
            Scheme::Zf => "zf",
            Scheme::Mmse => "mmse",
            Scheme::Ob => "ob",
            Scheme::Sinr => "sinr",
            Scheme::Ideal => "ideal",
            Scheme::HdBrs => "hd-brs",
            Scheme::HdMmrs => "hd-mmrs",
            Scheme::HdMlrs => "hd-mlrs",
            Scheme::SfdMmrs => "sfd-mmrs",
            Scheme::SfdMmrsIri => "sfd-mmrs-iri",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Scheme::Optimal => "joint selection with alternating receive/transmit beamforming",
            Scheme::Zf => "joint selection with MRC receive and zero-forcing transmit",
            Scheme::Mmse => "joint selection with MMSE receive and MRT transmit",
            Scheme::Ob => "joint selection with random orthonormal receive and channel-inverting transmit",
            Scheme::Sinr => "joint selection with MRC/MRT, interference not suppressed",
            Scheme::Ideal => "joint selection with MRC/MRT and no inter-relay interference (upper bound)",
            Scheme::HdBrs => "half-duplex best relay, no buffering",
            Scheme::HdMmrs => "half-duplex max-max, alternating receive and transmit slots",
            Scheme::HdMlrs => "half-duplex max-link",
            Scheme::SfdMmrs => "space full-duplex max-max, interference ignored",
            Scheme::SfdMmrsIri => "space full-duplex max-max, actual interference applied",
        }
    }

    /// Joint pair selection driven by the weighted criterion and per-relay weights.
    pub fn is_weighted(self) -> bool {
        matches!(
            self,
            Scheme::Optimal | Scheme::Zf | Scheme::Mmse | Scheme::Ob | Scheme::Sinr | Scheme::Ideal
        )
    }

    /// False only for the bufferless half-duplex scheme.
    pub fn buffered(self) -> bool {
        self != Scheme::HdBrs
    }

    pub fn min_antennas(self) -> usize {
        match self {
            Scheme::Zf | Scheme::Ob => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}`")))
    }
}

impl TryFrom<String> for Scheme {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scheme> for String {
    fn from(s: Scheme) -> String {
        s.name().to_owned()
    }
}

/// Roles chosen for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// Relay `i` receives from the source while relay `j` forwards to the destination.
    Pair { i: usize, j: usize },
    /// Half-duplex slot in which relay `i` only receives.
    Receive { i: usize },
    /// Half-duplex slot in which relay `j` only transmits.
    Transmit { j: usize },
    /// Bufferless two-hop transmission through `relay` within the slot.
    Direct { relay: usize },
}

impl Decision {
    pub fn receiver(self) -> Option<usize> {
        match self {
            Decision::Pair { i, .. } | Decision::Receive { i } => Some(i),
            Decision::Direct { relay } => Some(relay),
            Decision::Transmit { .. } => None,
        }
    }

    pub fn transmitter(self) -> Option<usize> {
        match self {
            Decision::Pair { j, .. } | Decision::Transmit { j } => Some(j),
            Decision::Direct { relay } => Some(relay),
            Decision::Receive { .. } => None,
        }
    }
}

/// Outcome of a selection: roles, beams (joint schemes) and realized rates.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDecision {
    pub decision: Decision,
    pub bf: Option<BeamformerResult>,
    pub gamma_s: f64,
    pub gamma_d: f64,
    /// Bits delivered from the source this slot.
    pub c_s: f64,
    /// Bits delivered to the destination this slot.
    pub c_d: f64,
    /// Value of the scheme's selection criterion for the winner.
    pub objective: f64,
}

/// Everything a selection rule may look at in one slot.
#[derive(Debug, Clone, Copy)]
pub struct SlotContext<'a> {
    pub config: &'a NetworkConfig,
    pub chan: &'a ChannelRealization,
    pub buf: &'a BufferState,
    pub alpha: &'a [f64],
    /// Slot index within the current phase; drives half-duplex parity.
    pub slot: u64,
    /// Key that makes per-slot randomness distinct across phases.
    pub stream_key: u64,
}

fn capped_receive(rate: f64, buf: &BufferState, i: usize) -> f64 {
    rate.min(buf.headroom(i)).max(0.0)
}

fn capped_transmit(rate: f64, buf: &BufferState, j: usize) -> f64 {
    rate.min(buf.level(j)).max(0.0)
}

/// Beamformers for the ordered pair `(i, j)` under a joint scheme.
pub fn pair_beamformer(scheme: Scheme, ctx: &SlotContext<'_>, i: usize, j: usize) -> Result<BeamformerResult> {
    let cfg = ctx.config;
    let (h_s, h_d) = (&ctx.chan.h_s[i], &ctx.chan.h_d[j]);
    let h = ctx.chan.inter(j, i);
    let (rho_s, rho_r) = (cfg.rho_s, cfg.rho_r);
    match scheme {
        Scheme::Optimal => Ok(bf_optimal_weighted(
            h_s,
            h_d,
            h,
            rho_s,
            rho_r,
            ctx.alpha[i],
            1.0 - ctx.alpha[j],
            &AlternatingOptions::default(),
        )?
        .result),
        Scheme::Zf => bf_zf(h_s, h_d, h, rho_s, rho_r),
        Scheme::Mmse => bf_mmse(h_s, h_d, h, rho_s, rho_r),
        Scheme::Ob => {
            let k = ctx.chan.relays() as u64;
            let index = ctx.stream_key.wrapping_mul(k * k).wrapping_add(i as u64 * k + j as u64);
            let mut rng = substream(cfg.seed, Purpose::OrthoBasis, index);
            bf_ob(h_s, h_d, h, rho_s, rho_r, &mut rng)
        }
        Scheme::Sinr => bf_iri_free(h_s, h_d, h, rho_s, rho_r),
        Scheme::Ideal => bf_ideal(h_s, h_d, rho_s, rho_r),
        other => Err(Error::Precondition(format!("`{other}` does not select relay pairs jointly"))),
    }
}

/// Exhaustive search over all ordered pairs for the largest
/// `α_i·C_S + (1−α_j)·C_D`. Ties go to the smallest `(i, j)`.
pub fn select_pair(scheme: Scheme, ctx: &SlotContext<'_>) -> Result<PairDecision> {
    let k = ctx.chan.relays();
    if ctx.alpha.len() != k {
        return Err(Error::Dimension {
            expected: k,
            actual: ctx.alpha.len(),
        });
    }
    let mut best: Option<PairDecision> = None;
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let bf = pair_beamformer(scheme, ctx, i, j)?;
            let c_s = capped_receive(capacity(bf.gamma_s), ctx.buf, i);
            let c_d = capped_transmit(capacity(bf.gamma_d), ctx.buf, j);
            let objective = ctx.alpha[i] * c_s + (1.0 - ctx.alpha[j]) * c_d;
            if best.as_ref().is_none_or(|b| objective > b.objective) {
                best = Some(PairDecision {
                    decision: Decision::Pair { i, j },
                    gamma_s: bf.gamma_s,
                    gamma_d: bf.gamma_d,
                    bf: Some(bf),
                    c_s,
                    c_d,
                    objective,
                });
            }
        }
    }
    best.ok_or_else(|| Error::Precondition("at least two relays are needed".into()))
}

/// MRC/MRT effective SNRs `(ρ_S‖h_S,k‖², ρ_R‖h_D,k‖²)` for every relay.
fn interference_free_snrs(config: &NetworkConfig, chan: &ChannelRealization) -> Vec<(f64, f64)> {
    chan.h_s
        .iter()
        .zip(&chan.h_d)
        .map(|(s, d)| (config.rho_s * s.norm_sqr(), config.rho_r * d.norm_sqr()))
        .collect()
}

/// First index of the maximum; `skip` is excluded.
fn argmax(values: &[f64], skip: Option<usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &v) in values.iter().enumerate() {
        if Some(k) == skip {
            continue;
        }
        if best.is_none_or(|b| v > values[b]) {
            best = Some(k);
        }
    }
    best
}

/// Bufferless half-duplex: the relay with the best bottleneck half-rate.
pub fn select_hd_brs(config: &NetworkConfig, chan: &ChannelRealization) -> PairDecision {
    let snrs = interference_free_snrs(config, chan);
    let mins: Vec<f64> = snrs
        .iter()
        .map(|&(gs, gd)| (0.5 * capacity(gs)).min(0.5 * capacity(gd)))
        .collect();
    let relay = argmax(&mins, None).expect("at least one relay");
    PairDecision {
        decision: Decision::Direct { relay },
        bf: None,
        gamma_s: snrs[relay].0,
        gamma_d: snrs[relay].1,
        c_s: mins[relay],
        c_d: mins[relay],
        objective: mins[relay],
    }
}

/// Half-duplex max-max: even slots pick the best receiver, odd slots the best
/// transmitter, with buffer-capped half-rates.
pub fn select_hd_mmrs(config: &NetworkConfig, chan: &ChannelRealization, buf: &BufferState, slot: u64) -> PairDecision {
    let snrs = interference_free_snrs(config, chan);
    if slot % 2 == 0 {
        let rates: Vec<f64> = snrs
            .iter()
            .enumerate()
            .map(|(k, &(gs, _))| capped_receive(0.5 * capacity(gs), buf, k))
            .collect();
        let i = argmax(&rates, None).expect("at least one relay");
        PairDecision {
            decision: Decision::Receive { i },
            bf: None,
            gamma_s: snrs[i].0,
            gamma_d: 0.0,
            c_s: rates[i],
            c_d: 0.0,
            objective: rates[i],
        }
    } else {
        let rates: Vec<f64> = snrs
            .iter()
            .enumerate()
            .map(|(k, &(_, gd))| capped_transmit(0.5 * capacity(gd), buf, k))
            .collect();
        let j = argmax(&rates, None).expect("at least one relay");
        PairDecision {
            decision: Decision::Transmit { j },
            bf: None,
            gamma_s: 0.0,
            gamma_d: snrs[j].1,
            c_s: 0.0,
            c_d: rates[j],
            objective: rates[j],
        }
    }
}

/// Half-duplex max-link: the best of the `2K` receive and transmit links.
/// Candidates are ordered relay by relay, receive link first.
pub fn select_hd_mlrs(config: &NetworkConfig, chan: &ChannelRealization, buf: &BufferState) -> PairDecision {
    let snrs = interference_free_snrs(config, chan);
    let mut values = Vec::with_capacity(2 * snrs.len());
    for (k, &(gs, gd)) in snrs.iter().enumerate() {
        values.push(capped_receive(0.5 * capacity(gs), buf, k));
        values.push(capped_transmit(0.5 * capacity(gd), buf, k));
    }
    let best = argmax(&values, None).expect("at least one relay");
    let k = best / 2;
    let rate = values[best];
    if best % 2 == 0 {
        PairDecision {
            decision: Decision::Receive { i: k },
            bf: None,
            gamma_s: snrs[k].0,
            gamma_d: 0.0,
            c_s: rate,
            c_d: 0.0,
            objective: rate,
        }
    } else {
        PairDecision {
            decision: Decision::Transmit { j: k },
            bf: None,
            gamma_s: 0.0,
            gamma_d: snrs[k].1,
            c_s: 0.0,
            c_d: rate,
            objective: rate,
        }
    }
}

/// Space full-duplex max-max with interference-free beams. With `with_iri`
/// the receive rate is recomputed with the interference the chosen
/// transmitter's MRT beam actually causes.
pub fn select_sfd_mmrs(
    config: &NetworkConfig,
    chan: &ChannelRealization,
    buf: &BufferState,
    with_iri: bool,
) -> Result<PairDecision> {
    let k = chan.relays();
    if k < 2 {
        return Err(Error::Precondition("space full-duplex selection needs two relays".into()));
    }
    let snrs = interference_free_snrs(config, chan);
    let c_s: Vec<f64> = snrs
        .iter()
        .enumerate()
        .map(|(r, &(gs, _))| capped_receive(capacity(gs), buf, r))
        .collect();
    let c_d: Vec<f64> = snrs
        .iter()
        .enumerate()
        .map(|(r, &(_, gd))| capped_transmit(capacity(gd), buf, r))
        .collect();
    let i1 = argmax(&c_s, None).expect("relays");
    let i2 = argmax(&c_s, Some(i1)).expect("two relays");
    let j1 = argmax(&c_d, None).expect("relays");
    let j2 = argmax(&c_d, Some(j1)).expect("two relays");
    let (i, j) = if i1 != j1 {
        (i1, j1)
    } else if c_s[i2].min(c_d[j1]) > c_s[i1].min(c_d[j2]) {
        (i2, j1)
    } else {
        (i1, j2)
    };
    let bf = bf_iri_free(&chan.h_s[i], &chan.h_d[j], chan.inter(j, i), config.rho_s, config.rho_r)?;
    let (gamma_s, rate_s) = if with_iri {
        let g = sinr_receive(&chan.h_s[i], chan.inter(j, i), &bf.u, &bf.w, config.rho_s, config.rho_r)?;
        (g, capped_receive(capacity(g), buf, i))
    } else {
        (snrs[i].0, c_s[i])
    };
    Ok(PairDecision {
        decision: Decision::Pair { i, j },
        bf: Some(bf),
        gamma_s,
        gamma_d: snrs[j].1,
        c_s: rate_s,
        c_d: c_d[j],
        objective: c_s[i].min(c_d[j]),
    })
}

/// Dispatches to the scheme's selection rule.
pub fn select(scheme: Scheme, ctx: &SlotContext<'_>) -> Result<PairDecision> {
    match scheme {
        Scheme::HdBrs => Ok(select_hd_brs(ctx.config, ctx.chan)),
        Scheme::HdMmrs => Ok(select_hd_mmrs(ctx.config, ctx.chan, ctx.buf, ctx.slot)),
        Scheme::HdMlrs => Ok(select_hd_mlrs(ctx.config, ctx.chan, ctx.buf)),
        Scheme::SfdMmrs => select_sfd_mmrs(ctx.config, ctx.chan, ctx.buf, false),
        Scheme::SfdMmrsIri => select_sfd_mmrs(ctx.config, ctx.chan, ctx.buf, true),
        joint => select_pair(joint, ctx),
    }
}

/// How the per-relay weights are adapted during pre-training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMode {
    Subgradient,
    #[default]
    Backpressure,
}

impl fmt::Display for AlphaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlphaMode::Subgradient => "subgradient",
            AlphaMode::Backpressure => "backpressure",
        })
    }
}

/// Forgetting factor for the buffer-drift and delivery estimates.
pub const DEFAULT_FORGETTING: f64 = 0.99;

/// `μ(t) = 0.1/√(1 + t/100)`.
pub fn default_step(slot: u64) -> f64 {
    0.1 / (1.0 + slot as f64 / 100.0).sqrt()
}

/// Per-relay weights and the state of their adaptation.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaState {
    alpha: Vec<f64>,
    delta: Vec<f64>,
    lambda: f64,
    virtual_source: f64,
    smoothed_delivery: f64,
    sums: Vec<f64>,
    samples: u64,
}

impl AlphaState {
    pub fn uniform(relays: usize, value: f64) -> Self {
        Self {
            alpha: vec![value.clamp(0.0, 1.0); relays],
            delta: vec![0.0; relays],
            lambda: DEFAULT_FORGETTING,
            virtual_source: 1.0,
            smoothed_delivery: 0.0,
            sums: vec![0.0; relays],
            samples: 0,
        }
    }

    pub fn from_alpha(alpha: Vec<f64>) -> Result<Self> {
        if alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Precondition("weights must lie in [0, 1]".into()));
        }
        let mut s = Self::uniform(alpha.len(), 0.5);
        s.alpha = alpha;
        Ok(s)
    }

    pub fn with_forgetting(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    /// Starts the virtual source queue at `level` with a delivery estimate of `rate`.
    pub fn with_virtual_source(mut self, level: f64, rate: f64) -> Self {
        self.virtual_source = level.max(1.0);
        self.smoothed_delivery = rate;
        self
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn virtual_source(&self) -> f64 {
        self.virtual_source
    }

    /// Exponentially weighted buffer drift followed by a projected step.
    pub fn update_subgradient(&mut self, decision: &PairDecision, slot: u64) {
        let mu = default_step(slot);
        let (i, j) = (decision.decision.receiver(), decision.decision.transmitter());
        for k in 0..self.alpha.len() {
            let mut drift = 0.0;
            if i == Some(k) {
                drift += decision.c_s;
            }
            if j == Some(k) {
                drift -= decision.c_d;
            }
            self.delta[k] = self.lambda * self.delta[k] + (1.0 - self.lambda) * drift;
            self.alpha[k] = (self.alpha[k] - mu * self.delta[k]).clamp(0.0, 1.0);
        }
    }

    /// Advances the virtual source queue by one slot and sets the weights to
    /// `1 − B_k/B_S`. When `accumulate` is set the new weights also enter the
    /// running average returned by [`AlphaState::averaged`].
    pub fn update_backpressure(&mut self, buf: &BufferState, c_s: f64, c_d: f64, accumulate: bool) {
        self.smoothed_delivery = self.lambda * self.smoothed_delivery + (1.0 - self.lambda) * c_d;
        // the virtual queue is no larger than a relay buffer
        self.virtual_source = (self.virtual_source + self.smoothed_delivery - c_s).clamp(1.0, buf.b_max().max(1.0));
        for k in 0..self.alpha.len() {
            self.alpha[k] = (1.0 - buf.level(k) / self.virtual_source).clamp(0.0, 1.0);
        }
        if accumulate {
            for (s, a) in self.sums.iter_mut().zip(&self.alpha) {
                *s += a;
            }
            self.samples += 1;
        }
    }

    /// Time average of the accumulated back-pressure weights, or the current
    /// weights if nothing was accumulated.
    pub fn averaged(&self) -> Vec<f64> {
        if self.samples == 0 {
            return self.alpha.clone();
        }
        self.sums.iter().map(|s| (s / self.samples as f64).clamp(0.0, 1.0)).collect()
    }
}
