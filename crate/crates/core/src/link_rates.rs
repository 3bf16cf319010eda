//! Instantaneous SINR/SNR, buffer-limited rates and buffer updates.

use crate::error::{Error, Result};
use crate::linalg::{herm_inner, matvec, ComplexMatrix, ComplexVector};

const UNIT_NORM_TOL: f64 = 1e-9;
const CLAMP_TOL: f64 = 1e-12;

/// Per-relay buffer occupancy in bits/channel-use.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferState {
    levels: Vec<f64>,
    b_max: f64,
}

impl BufferState {
    pub fn empty(relays: usize, b_max: f64) -> Self {
        Self {
            levels: vec![0.0; relays],
            b_max,
        }
    }

    pub fn filled(relays: usize, b_max: f64, level: f64) -> Result<Self> {
        Self::from_levels(vec![level; relays], b_max)
    }

    pub fn from_levels(levels: Vec<f64>, b_max: f64) -> Result<Self> {
        if !(b_max > 0.0) {
            return Err(Error::Config("buffer capacity must be positive".into()));
        }
        for (k, &b) in levels.iter().enumerate() {
            if !(0.0..=b_max).contains(&b) {
                return Err(Error::Buffer {
                    kind: "out of range",
                    relay: k,
                    detail: format!("level {b} outside [0, {b_max}]"),
                });
            }
        }
        Ok(Self { levels, b_max })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> f64 {
        self.levels[k]
    }

    pub fn b_max(&self) -> f64 {
        self.b_max
    }

    pub fn relays(&self) -> usize {
        self.levels.len()
    }

    pub fn headroom(&self, k: usize) -> f64 {
        self.b_max - self.levels[k]
    }

    pub fn total(&self) -> f64 {
        self.levels.iter().sum()
    }

    fn add(&mut self, k: usize, bits: f64) -> Result<()> {
        if bits > self.headroom(k) + CLAMP_TOL {
            return Err(Error::Buffer {
                kind: "overflow",
                relay: k,
                detail: format!("adding {bits} with headroom {}", self.headroom(k)),
            });
        }
        self.levels[k] = (self.levels[k] + bits).min(self.b_max);
        Ok(())
    }

    fn remove(&mut self, k: usize, bits: f64) -> Result<()> {
        let next = self.levels[k] - bits;
        if next < -CLAMP_TOL {
            return Err(Error::Buffer {
                kind: "underflow",
                relay: k,
                detail: format!("removing {bits} from {}", self.levels[k]),
            });
        }
        self.levels[k] = next.max(0.0);
        Ok(())
    }

    /// Credits `c_s` to relay `i` only (half-duplex receive slot).
    pub fn apply_receive(&self, i: usize, c_s: f64) -> Result<Self> {
        let mut next = self.clone();
        next.add(i, c_s)?;
        Ok(next)
    }

    /// Debits `c_d` from relay `j` only (half-duplex transmit slot).
    pub fn apply_transmit(&self, j: usize, c_d: f64) -> Result<Self> {
        let mut next = self.clone();
        next.remove(j, c_d)?;
        Ok(next)
    }
}

/// SINR at the receiving relay: `ρ_S|uᴴh_S|² / (1 + ρ_R|uᴴHw|²)`.
pub fn sinr_receive(
    h_s: &ComplexVector,
    h: &ComplexMatrix,
    u: &ComplexVector,
    w: &ComplexVector,
    rho_s: f64,
    rho_r: f64,
) -> Result<f64> {
    check_unit("receive beamformer", u)?;
    check_unit("transmit beamformer", w)?;
    let signal = herm_inner(u, h_s)?.norm_sqr();
    let leak = herm_inner(u, &matvec(h, w)?)?.norm_sqr();
    Ok(rho_s * signal / (1.0 + rho_r * leak))
}

/// SNR at the destination: `ρ_R|h_Dᴴw|²`.
pub fn snr_transmit(h_d: &ComplexVector, w: &ComplexVector, rho_r: f64) -> Result<f64> {
    check_unit("transmit beamformer", w)?;
    Ok(rho_r * herm_inner(h_d, w)?.norm_sqr())
}

fn check_unit(what: &str, v: &ComplexVector) -> Result<()> {
    let n = v.norm();
    if (n - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::Precondition(format!("{what} must have unit norm, has {n}")));
    }
    Ok(())
}

/// `log2(1 + γ)`.
pub fn capacity(gamma: f64) -> f64 {
    (1.0 + gamma).log2()
}

/// Source → relay `i` rate, limited by the free space in `i`'s buffer.
pub fn inst_rate_receive(gamma: f64, buf: &BufferState, i: usize) -> f64 {
    capacity(gamma).min(buf.headroom(i)).max(0.0)
}

/// Relay `j` → destination rate, limited by the bits queued at `j`.
pub fn inst_rate_transmit(gamma: f64, buf: &BufferState, j: usize) -> f64 {
    capacity(gamma).min(buf.level(j)).max(0.0)
}

/// Buffer update for one virtual full-duplex slot: relay `i` stores `c_s`,
/// relay `j` forwards `c_d`.
pub fn apply_slot(buf: &BufferState, i: usize, c_s: f64, j: usize, c_d: f64) -> Result<BufferState> {
    if i == j {
        return Err(Error::Precondition(format!("receiving and transmitting relay coincide ({i})")));
    }
    if c_s < 0.0 || c_d < 0.0 {
        return Err(Error::Precondition("rates must be non-negative".into()));
    }
    let mut next = buf.clone();
    next.add(i, c_s)?;
    next.remove(j, c_d)?;
    Ok(next)
}

/// Link SINR/SNR and the buffer-capped rates derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkRates {
    pub gamma_s: f64,
    pub gamma_d: f64,
    pub c_s: f64,
    pub c_d: f64,
}

impl LinkRates {
    pub fn new(gamma_s: f64, gamma_d: f64, buf: &BufferState, i: usize, j: usize) -> Self {
        Self {
            gamma_s,
            gamma_d,
            c_s: inst_rate_receive(gamma_s, buf, i),
            c_d: inst_rate_transmit(gamma_d, buf, j),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::normalize;

    fn buf(levels: &[f64], b_max: f64) -> BufferState {
        BufferState::from_levels(levels.to_vec(), b_max).unwrap()
    }

    #[test]
    fn sinr_examples() {
        let h_s = ComplexVector::from_real(&[2.0, 0.0]);
        let u = ComplexVector::from_real(&[1.0, 0.0]);
        let w = ComplexVector::from_real(&[1.0, 0.0]);
        let ident = ComplexMatrix::identity(2);
        assert!((sinr_receive(&h_s, &ident, &u, &w, 1.0, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(sinr_receive(&h_s, &ident, &u, &w, 0.0, 1.0).unwrap(), 0.0);
        // perfect cancellation: uᴴHw = 0
        let w_perp = ComplexVector::from_real(&[0.0, 1.0]);
        assert!((sinr_receive(&h_s, &ident, &u, &w_perp, 3.0, 50.0).unwrap() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn sinr_rejects_non_unit_beams() {
        let h_s = ComplexVector::from_real(&[2.0, 0.0]);
        let u = ComplexVector::from_real(&[2.0, 0.0]);
        let w = ComplexVector::from_real(&[1.0, 0.0]);
        let r = sinr_receive(&h_s, &ComplexMatrix::identity(2), &u, &w, 1.0, 1.0);
        assert!(matches!(r, Err(Error::Precondition(_))));
        assert!(snr_transmit(&h_s, &u, 1.0).is_err());
    }

    #[test]
    fn snr_examples() {
        let h_d = ComplexVector::from_real(&[0.6, 0.8]);
        let mrt = normalize(&h_d).unwrap();
        assert!((snr_transmit(&h_d, &mrt, 7.0).unwrap() - 7.0).abs() < 1e-12);
        let perp = ComplexVector::from_real(&[0.8, -0.6]);
        assert!(snr_transmit(&h_d, &perp, 7.0).unwrap() < 1e-14);
        let w = ComplexVector::from_real(&[1.0, 0.0]);
        assert!((snr_transmit(&h_d, &w, 10.0).unwrap() - 3.6).abs() < 1e-12);
    }

    #[test]
    fn receive_rate_examples() {
        let b = buf(&[0.0, 9.0], 10.0);
        assert!((inst_rate_receive(3.0, &b, 0) - 2.0).abs() < 1e-15);
        assert_eq!(inst_rate_receive(15.0, &b, 1), 1.0);
        assert_eq!(inst_rate_receive(0.0, &b, 0), 0.0);
        let inf = BufferState::empty(2, f64::INFINITY);
        assert!((inst_rate_receive(1023.0, &inf, 0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn transmit_rate_examples() {
        let b = buf(&[0.0, 100.0, 5.0], f64::INFINITY);
        assert_eq!(inst_rate_transmit(50.0, &b, 0), 0.0);
        assert!((inst_rate_transmit(7.0, &b, 1) - 3.0).abs() < 1e-15);
        assert_eq!(inst_rate_transmit(1023.0, &b, 2), 5.0);
    }

    #[test]
    fn apply_slot_examples() {
        let b = buf(&[0.0, 5.0], f64::INFINITY);
        assert_eq!(apply_slot(&b, 0, 0.0, 1, 0.0).unwrap(), b);
        let after = apply_slot(&b, 0, 2.0, 1, 5.0).unwrap();
        assert_eq!(after.levels(), &[2.0, 0.0]);
        assert!((after.total() - (b.total() + 2.0 - 5.0)).abs() < 1e-15);
    }

    #[test]
    fn apply_slot_errors() {
        let b = buf(&[1.0, 5.0], 6.0);
        assert!(matches!(apply_slot(&b, 0, 1.0, 0, 0.0), Err(Error::Precondition(_))));
        assert!(matches!(apply_slot(&b, 0, 5.5, 1, 0.0), Err(Error::Buffer { kind: "overflow", .. })));
        assert!(matches!(apply_slot(&b, 0, 0.0, 1, 5.1), Err(Error::Buffer { kind: "underflow", .. })));
        // rounding-level underflow is clamped
        let after = apply_slot(&b, 0, 0.0, 1, 5.0 + 5e-13).unwrap();
        assert_eq!(after.level(1), 0.0);
    }

    #[test]
    fn half_duplex_updates() {
        let b = buf(&[1.0, 5.0], 6.0);
        assert_eq!(b.apply_receive(0, 5.0).unwrap().levels(), &[6.0, 5.0]);
        assert_eq!(b.apply_transmit(1, 2.0).unwrap().levels(), &[1.0, 3.0]);
        assert!(b.apply_receive(1, 2.0).is_err());
    }

    #[test]
    fn from_levels_checks_range() {
        assert!(BufferState::from_levels(vec![-1.0], 5.0).is_err());
        assert!(BufferState::from_levels(vec![6.0], 5.0).is_err());
        assert!(BufferState::from_levels(vec![1.0], 0.0).is_err());
    }
}
