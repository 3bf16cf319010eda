//! Network configuration and i.i.d. Rayleigh block-fading channel draws.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian_vector, ComplexMatrix, ComplexVector};

/// `10^(dB/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Static description of the relay network. Gains and SNRs are linear.
///
/// Relay indices are zero-based throughout the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub relays: usize,
    pub antennas: usize,
    /// `P_S / σ²`.
    pub rho_s: f64,
    /// `P_R / σ²`.
    pub rho_r: f64,
    /// Average gain of the source → relay `i` link.
    pub var_sr: Vec<f64>,
    /// Average gain of the relay `j` → destination link.
    pub var_rd: Vec<f64>,
    /// `var_rr[j][i]`: average gain of the relay `j` → relay `i` link. The
    /// diagonal is unused.
    pub var_rr: Vec<Vec<f64>>,
    /// Buffer capacity in bits/channel-use; `f64::INFINITY` for unbounded.
    #[serde(with = "crate::channel::serde_capacity")]
    pub b_max: f64,
    pub seed: u64,
}

impl NetworkConfig {
    /// All links with the same average gain (in dB), equal source and relay SNR.
    pub fn iid(relays: usize, antennas: usize, snr_db: f64, gain_db: f64, iri_db: f64) -> Self {
        let g = db_to_linear(gain_db);
        let r = db_to_linear(iri_db);
        Self {
            relays,
            antennas,
            rho_s: db_to_linear(snr_db),
            rho_r: db_to_linear(snr_db),
            var_sr: vec![g; relays],
            var_rd: vec![g; relays],
            var_rr: vec![vec![r; relays]; relays],
            b_max: f64::INFINITY,
            seed: 1,
        }
    }

    pub fn with_buffer(mut self, b_max: f64) -> Self {
        self.b_max = b_max;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.relays;
        if k < 2 {
            return Err(Error::Config(format!("relay count must be at least 2, got {k}")));
        }
        if self.antennas < 1 {
            return Err(Error::Config("antenna count must be at least 1".into()));
        }
        if !(self.rho_s >= 0.0 && self.rho_s.is_finite()) || !(self.rho_r >= 0.0 && self.rho_r.is_finite()) {
            return Err(Error::Config("transmit SNRs must be finite and non-negative".into()));
        }
        if self.var_sr.len() != k || self.var_rd.len() != k {
            return Err(Error::Config(format!(
                "per-relay gain vectors must have {k} entries (got {} and {})",
                self.var_sr.len(),
                self.var_rd.len()
            )));
        }
        if self.var_rr.len() != k || self.var_rr.iter().any(|row| row.len() != k) {
            return Err(Error::Config(format!("inter-relay gains must form a {k}x{k} matrix")));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !self.var_sr.iter().chain(&self.var_rd).all(|&v| positive(v)) {
            return Err(Error::Config("all link gains must be positive".into()));
        }
        for j in 0..k {
            for i in 0..k {
                if i != j && !positive(self.var_rr[j][i]) {
                    return Err(Error::Config(format!("inter-relay gain {j}->{i} must be positive")));
                }
            }
        }
        if !(self.b_max > 0.0) {
            return Err(Error::Config("buffer capacity must be positive or infinite".into()));
        }
        Ok(())
    }
}

/// One block-fading draw of every channel in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    relays: usize,
    /// Source → relay `i`.
    pub h_s: Vec<ComplexVector>,
    /// Relay `j` → destination, stored as the conjugate channel so the
    /// received gain is `h_dᴴ w`.
    pub h_d: Vec<ComplexVector>,
    inter: Vec<Option<ComplexMatrix>>,
}

impl ChannelRealization {
    /// Assembles a realization from explicit channels. `inter[j][i]` is the
    /// `j → i` matrix; diagonal entries are ignored.
    pub fn from_parts(h_s: Vec<ComplexVector>, h_d: Vec<ComplexVector>, inter: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        let k = h_s.len();
        if h_d.len() != k || inter.len() != k || inter.iter().any(|r| r.len() != k) {
            return Err(Error::Dimension {
                expected: k,
                actual: h_d.len(),
            });
        }
        let mut flat = Vec::with_capacity(k * k);
        for (j, row) in inter.into_iter().enumerate() {
            for (i, m) in row.into_iter().enumerate() {
                flat.push(if i == j { None } else { Some(m) });
            }
        }
        Ok(Self {
            relays: k,
            h_s,
            h_d,
            inter: flat,
        })
    }

    pub fn relays(&self) -> usize {
        self.relays
    }

    /// The `j → i` inter-relay matrix `H_ji`.
    pub fn inter(&self, j: usize, i: usize) -> &ComplexMatrix {
        self.inter[j * self.relays + i]
            .as_ref()
            .expect("no inter-relay channel from a relay to itself")
    }

    pub fn is_finite(&self) -> bool {
        self.h_s.iter().chain(&self.h_d).all(ComplexVector::is_finite)
            && self.inter.iter().flatten().all(ComplexMatrix::is_finite)
    }
}

/// Draws every link independently from `CN(0, var·I)`.
pub fn draw<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> ChannelRealization {
    let k = config.relays;
    let m = config.antennas;
    let h_s = (0..k).map(|i| complex_gaussian_vector(m, config.var_sr[i], rng)).collect();
    let h_d = (0..k).map(|j| complex_gaussian_vector(m, config.var_rd[j], rng)).collect();
    let mut inter = Vec::with_capacity(k * k);
    for j in 0..k {
        for i in 0..k {
            if i == j {
                inter.push(None);
            } else {
                let entries = complex_gaussian_vector(m * m, config.var_rr[j][i], rng);
                let mat = ComplexMatrix::from_rows(m, m, entries.as_slice().to_vec())
                    .expect("m*m entries");
                inter.push(Some(mat));
            }
        }
    }
    ChannelRealization {
        relays: k,
        h_s,
        h_d,
        inter,
    }
}

/// Serializes an infinite buffer capacity as JSON `null`.
pub(crate) mod serde_capacity {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
