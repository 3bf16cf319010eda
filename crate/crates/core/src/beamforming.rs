//! Receive/transmit beamformer design for one candidate relay pair `(i, j)`.
//!
//! Every design returns unit-norm `u` (receive, at relay `i`) and `w`
//! (transmit, at relay `j`) together with the SINR at relay `i` and the SNR at
//! the destination that result from them. Channel arguments are always
//! `h_s = h_{S,i}`, `h_d = h_{j,D}` and `h = H_{j,i}`.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    any_orthogonal_unit, herm_inner, matvec, matvec_herm, normalize, project_orthogonal, random_orthonormal_pair,
    rank1_mmse_direction, ComplexMatrix, ComplexVector, Lu,
};
use crate::link_rates::{capacity, inst_rate_receive, inst_rate_transmit, sinr_receive, snr_transmit, BufferState};

/// Condition number above which the inter-relay matrix is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Relative size below which an effective interference channel counts as zero.
const VANISHING: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerResult {
    pub u: ComplexVector,
    pub w: ComplexVector,
    pub gamma_s: f64,
    pub gamma_d: f64,
    /// Alternating iterations performed (optimal design only).
    pub iterations: usize,
    /// Final mixing parameter between the interference-aligned and the
    /// interference-free transmit directions (optimal design only).
    pub beta: Option<f64>,
}

impl BeamformerResult {
    fn evaluate(
        u: ComplexVector,
        w: ComplexVector,
        h_s: &ComplexVector,
        h_d: &ComplexVector,
        h: &ComplexMatrix,
        rho_s: f64,
        rho_r: f64,
    ) -> Result<Self> {
        let gamma_s = sinr_receive(h_s, h, &u, &w, rho_s, rho_r)?;
        let gamma_d = snr_transmit(h_d, &w, rho_r)?;
        Ok(Self {
            u,
            w,
            gamma_s,
            gamma_d,
            iterations: 0,
            beta: None,
        })
    }

    /// `weight_s·log2(1+γ_S) + weight_d·log2(1+γ_D)`, without buffer limits.
    pub fn rate_objective(&self, weight_s: f64, weight_d: f64) -> f64 {
        weight_s * capacity(self.gamma_s) + weight_d * capacity(self.gamma_d)
    }

    /// Interference leakage `|uᴴHw|`.
    pub fn leakage(&self, h: &ComplexMatrix) -> Result<f64> {
        Ok(herm_inner(&self.u, &matvec(h, &self.w)?)?.norm())
    }
}

fn nonzero(v: &ComplexVector, what: &'static str) -> Result<()> {
    if v.norm_sqr() == 0.0 {
        return Err(Error::Degenerate(what));
    }
    Ok(())
}

/// MRC receive and MRT transmit beams, evaluated with the actual
/// inter-relay interference.
pub fn bf_iri_free(
    h_s: &ComplexVector,
    h_d: &ComplexVector,
    h: &ComplexMatrix,
    rho_s: f64,
    rho_r: f64,
) -> Result<BeamformerResult> {
    nonzero(h_s, "zero source-relay channel")?;
    nonzero(h_d, "zero relay-destination channel")?;
    BeamformerResult::evaluate(normalize(h_s)?, normalize(h_d)?, h_s, h_d, h, rho_s, rho_r)
}

/// MRC/MRT beams for a network without inter-relay interference.
pub fn bf_ideal(h_s: &ComplexVector, h_d: &ComplexVector, rho_s: f64, rho_r: f64) -> Result<BeamformerResult> {
    nonzero(h_s, "zero source-relay channel")?;
    nonzero(h_d, "zero relay-destination channel")?;
    Ok(BeamformerResult {
        u: normalize(h_s)?,
        w: normalize(h_d)?,
        gamma_s: rho_s * h_s.norm_sqr(),
        gamma_d: rho_r * h_d.norm_sqr(),
        iterations: 0,
        beta: None,
    })
}

/// MRC receive beam; transmit beam is `h_d` projected onto the null space of
/// the effective interference channel `g = Hᴴu`.
pub fn bf_zf(
    h_s: &ComplexVector,
    h_d: &ComplexVector,
    h: &ComplexMatrix,
    rho_s: f64,
    rho_r: f64,
) -> Result<BeamformerResult> {
    if h_s.len() < 2 {
        return Err(Error::Unsupported("zero-forcing needs at least two antennas".into()));
    }
    nonzero(h_s, "zero source-relay channel")?;
    nonzero(h_d, "zero relay-destination channel")?;
    let u = normalize(h_s)?;
    let g = matvec_herm(h, &u)?;
    let w = zero_forcing_transmit(h_d, &g)?;
    BeamformerResult::evaluate(u, w, h_s, h_d, h, rho_s, rho_r)
}

fn zero_forcing_transmit(h_d: &ComplexVector, g: &ComplexVector) -> Result<ComplexVector> {
    if g.norm() <= VANISHING * h_d.norm() {
        // no interference to null
        return normalize(h_d);
    }
    let projected = project_orthogonal(h_d, g)?;
    if projected.norm() <= 1e-12 * h_d.norm() {
        return any_orthogonal_unit(g);
    }
    normalize(&projected)
}

/// MRT transmit beam; receive beam is the MMSE solution against the rank-1
/// interference covariance.
pub fn bf_mmse(
    h_s: &ComplexVector,
    h_d: &ComplexVector,
    h: &ComplexMatrix,
    rho_s: f64,
    rho_r: f64,
) -> Result<BeamformerResult> {
    nonzero(h_s, "zero source-relay channel")?;
    nonzero(h_d, "zero relay-destination channel")?;
    let w = normalize(h_d)?;
    let u = mmse_receive(h_s, h, &w, rho_r)?;
    BeamformerResult::evaluate(u, w, h_s, h_d, h, rho_s, rho_r)
}

fn mmse_receive(h_s: &ComplexVector, h: &ComplexMatrix, w: &ComplexVector, rho_r: f64) -> Result<ComplexVector> {
    let hw = matvec(h, w)?;
    normalize(&rank1_mmse_direction(&hw, rho_r, h_s)?)
}

/// Random orthonormal `(u, q)`; the transmit beam is steered through `H⁻¹`
/// so that the interference arrives along `q ⟂ u`.
pub fn bf_ob<R: Rng + ?Sized>(
    h_s: &ComplexVector,
    h_d: &ComplexVector,
    h: &ComplexMatrix,
    rho_s: f64,
    rho_r: f64,
    rng: &mut R,
) -> Result<BeamformerResult> {
    let m = h_s.len();
    if m < 2 {
        return Err(Error::Unsupported("orthonormal-basis cancellation needs at least two antennas".into()));
    }
    if h.rows() != m || h.cols() != m {
        return Err(Error::Dimension {
            expected: m,
            actual: h.rows(),
        });
    }
    let lu = Lu::factor(h).ok();
    let well_conditioned = match &lu {
        Some(lu) => lu.condition_1(h)? <= SINGULAR_CONDITION,
        None => false,
    };
    for _attempt in 0..2 {
        let (u, q) = random_orthonormal_pair(m, rng)?;
        let Some(lu) = lu.as_ref().filter(|_| well_conditioned) else {
            continue;
        };
        let mut x = lu.solve(&q)?;
        // one step of iterative refinement
        let residual = q.axpy(Complex64::new(-1.0, 0.0), &matvec(h, &x)?)?;
        x = x.axpy(Complex64::new(1.0, 0.0), &lu.solve(&residual)?)?;
        let w = normalize(&x)?;
        let result = BeamformerResult::evaluate(u, w, h_s, h_d, h, rho_s, rho_r)?;
        if result.leakage(h)? <= 1e-9 {
            return Ok(result);
        }
    }
    Err(Error::Degenerate("inter-relay channel is numerically singular"))
}

/// The one-dimensional transmit subproblem of the alternating design.
///
/// With `u` fixed, the transmit beam is `β·w∥ + √(1−β²)·w⊥`, where `w∥` is
/// the normalized projection of `h_d` onto `g = Hᴴu` and `w⊥` the normalized
/// projection onto its orthogonal complement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaProblem {
    /// `|uᴴh_s|²`.
    pub a: f64,
    /// `|gᴴw∥|²`.
    pub p: f64,
    /// `h_dᴴw∥`.
    pub d_par: Complex64,
    /// `h_dᴴw⊥`.
    pub d_perp: Complex64,
    pub weight_s: f64,
    pub weight_d: f64,
    pub rho_s: f64,
    pub rho_r: f64,
}

/// Grid and refinement settings for the β search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSearch {
    pub grid_points: usize,
    pub newton_steps: usize,
    pub fd_step: f64,
}

impl Default for BetaSearch {
    fn default() -> Self {
        Self {
            grid_points: 256,
            newton_steps: 10,
            fd_step: 1e-5,
        }
    }
}

impl BetaProblem {
    /// Weights `(alpha, 1 − alpha)`.
    #[allow(clippy::too_many_arguments)]
    pub fn with_alpha(a: f64, p: f64, d_par: Complex64, d_perp: Complex64, alpha: f64, rho_s: f64, rho_r: f64) -> Self {
        Self {
            a,
            p,
            d_par,
            d_perp,
            weight_s: alpha,
            weight_d: 1.0 - alpha,
            rho_s,
            rho_r,
        }
    }

    pub fn gammas(&self, beta: f64) -> (f64, f64) {
        let c = (1.0 - beta * beta).max(0.0).sqrt();
        let gamma_s = self.rho_s * self.a / (self.rho_r * beta * beta * self.p + 1.0);
        let gamma_d = self.rho_r * (self.d_par * beta + self.d_perp * c).norm_sqr();
        (gamma_s, gamma_d)
    }

    pub fn objective(&self, beta: f64) -> f64 {
        let (gs, gd) = self.gammas(beta);
        self.weight_s * capacity(gs) + self.weight_d * capacity(gd)
    }

    /// Grid search followed by damped Newton refinement. Returns `(β, value)`.
    pub fn maximize(&self, search: &BetaSearch) -> (f64, f64) {
        let n = search.grid_points.max(2);
        let mut best = (0.0, self.objective(0.0));
        for k in 1..n {
            let beta = k as f64 / (n - 1) as f64;
            let v = self.objective(beta);
            if v > best.1 {
                best = (beta, v);
            }
        }
        let cell = 1.0 / (n - 1) as f64;
        let (mut beta, mut value) = self.golden_section((best.0 - cell).max(0.0), (best.0 + cell).min(1.0), best);
        let h = search.fd_step;
        for _ in 0..search.newton_steps {
            if beta - h < 0.0 || beta + h > 1.0 {
                break;
            }
            let fp = self.objective(beta + h);
            let fm = self.objective(beta - h);
            let d1 = (fp - fm) / (2.0 * h);
            let d2 = (fp - 2.0 * value + fm) / (h * h);
            if !(d2 < 0.0) {
                break;
            }
            let step = -d1 / d2;
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..30 {
                let cand = beta + t * step;
                if (0.0..=1.0).contains(&cand) {
                    let v = self.objective(cand);
                    if v >= value {
                        moved = (cand - beta).abs() > 0.0;
                        beta = cand;
                        value = v;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !moved || (t * step).abs() < 1e-12 {
                break;
            }
        }
        (beta, value)
    }

    /// Golden-section search on `[lo, hi]`; never returns worse than `start`.
    fn golden_section(&self, mut lo: f64, mut hi: f64, start: (f64, f64)) -> (f64, f64) {
        const INV_PHI: f64 = 0.618_033_988_749_894_8;
        let mut best = start;
        let mut x1 = hi - INV_PHI * (hi - lo);
        let mut x2 = lo + INV_PHI * (hi - lo);
        let mut f1 = self.objective(x1);
        let mut f2 = self.objective(x2);
        while hi - lo > 1e-12 {
            if f1 >= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - INV_PHI * (hi - lo);
                f1 = self.objective(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + INV_PHI * (hi - lo);
                f2 = self.objective(x2);
            }
        }
        for (b, v) in [(x1, f1), (x2, f2)] {
            if v > best.1 {
                best = (b, v);
            }
        }
        best
    }
}

/// The two directions spanning the optimal transmit beam for a given `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitBasis {
    pub w_par: ComplexVector,
    pub w_perp: ComplexVector,
}

impl TransmitBasis {
    /// `None` when `g` vanishes (no interference, MRT is optimal) or the
    /// antenna count leaves no orthogonal complement.
    pub fn new(h_d: &ComplexVector, g: &ComplexVector) -> Result<Option<Self>> {
        if h_d.len() < 2 || g.norm() <= VANISHING * h_d.norm() {
            return Ok(None);
        }
        let gg = g.norm_sqr();
        let par_raw = g.scale(herm_inner(g, h_d)? / gg);
        let w_par = if par_raw.norm() <= 1e-14 * h_d.norm() {
            normalize(g)?
        } else {
            normalize(&par_raw)?
        };
        let perp_raw = h_d.axpy(Complex64::new(-1.0, 0.0), &par_raw)?;
        let w_perp = if perp_raw.norm() <= 1e-12 * h_d.norm() {
            any_orthogonal_unit(g)?
        } else {
            normalize(&perp_raw)?
        };
        Ok(Some(Self { w_par, w_perp }))
    }

    pub fn problem(
        &self,
        a: f64,
        g: &ComplexVector,
        h_d: &ComplexVector,
        weight_s: f64,
        weight_d: f64,
        rho_s: f64,
        rho_r: f64,
    ) -> Result<BetaProblem> {
        Ok(BetaProblem {
            a,
            p: herm_inner(g, &self.w_par)?.norm_sqr(),
            d_par: herm_inner(h_d, &self.w_par)?,
            d_perp: herm_inner(h_d, &self.w_perp)?,
            weight_s,
            weight_d,
            rho_s,
            rho_r,
        })
    }

    pub fn combine(&self, beta: f64) -> Result<ComplexVector> {
        let c = (1.0 - beta * beta).max(0.0).sqrt();
        let w = self.w_perp.scale(Complex64::new(c, 0.0)).axpy(Complex64::new(beta, 0.0), &self.w_par)?;
        normalize(&w)
    }
}

/// Settings for the alternating receive/transmit optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternatingOptions {
    /// Stop once both beams move less than this between iterations.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub search: BetaSearch,
    /// Largest multiple of the last transmit-beam step tried as an
    /// extrapolation on even iterations; below `1` disables it. An
    /// extrapolated point is kept only if it raises the objective.
    pub max_extrapolation: f64,
}

impl Default for AlternatingOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_iterations: 1000,
            search: BetaSearch::default(),
            max_extrapolation: 1024.0,
        }
    }
}

/// Which initial pair an alternating run started from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarmStart {
    ZeroForcing,
    Mmse,
    /// Single antenna: both beams are scalar phases, nothing to iterate.
    Scalar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingOutcome {
    pub result: BeamformerResult,
    /// Weighted rate objective before the first iteration and after each one.
    pub trace: Vec<f64>,
    pub warm_start: WarmStart,
}

impl AlternatingOutcome {
    pub fn objective(&self) -> f64 {
        *self.trace.last().expect("trace is never empty")
    }
}

struct PairProblem<'a> {
    h_s: &'a ComplexVector,
    h_d: &'a ComplexVector,
    h: &'a ComplexMatrix,
    rho_s: f64,
    rho_r: f64,
    weight_s: f64,
    weight_d: f64,
}

impl PairProblem<'_> {
    fn objective(&self, u: &ComplexVector, w: &ComplexVector) -> Result<f64> {
        let signal = herm_inner(u, self.h_s)?.norm_sqr();
        let leak = herm_inner(u, &matvec(self.h, w)?)?.norm_sqr();
        let gamma_s = self.rho_s * signal / (1.0 + self.rho_r * leak);
        let gamma_d = self.rho_r * herm_inner(self.h_d, w)?.norm_sqr();
        Ok(self.weight_s * capacity(gamma_s) + self.weight_d * capacity(gamma_d))
    }

    fn run(
        &self,
        u0: ComplexVector,
        w0: ComplexVector,
        warm_start: WarmStart,
        opts: &AlternatingOptions,
    ) -> Result<AlternatingOutcome> {
        let mut u = u0;
        let mut w = w0;
        let mut beta = None;
        let mut value = self.objective(&u, &w)?;
        let mut trace = vec![value];
        let mut iterations = 0;
        for it in 1..=opts.max_iterations {
            iterations = it;
            // receive step: exact MMSE maximizer of the SINR
            let u_next = mmse_receive(self.h_s, self.h, &w, self.rho_r)?;
            let after_receive = self.objective(&u_next, &w)?;

            // transmit step: best beam in span{w∥, w⊥}
            let g = matvec_herm(self.h, &u_next)?;
            let (candidate, cand_beta) = match TransmitBasis::new(self.h_d, &g)? {
                None => (normalize(self.h_d)?, None),
                Some(basis) => {
                    let a = herm_inner(&u_next, self.h_s)?.norm_sqr();
                    let problem =
                        basis.problem(a, &g, self.h_d, self.weight_s, self.weight_d, self.rho_s, self.rho_r)?;
                    let (b, _) = problem.maximize(&opts.search);
                    (basis.combine(b)?, Some(b))
                }
            };
            let cand_value = self.objective(&u_next, &candidate)?;
            let (mut w_next, mut next_value, next_beta) = if cand_value >= after_receive {
                (candidate, cand_value, cand_beta)
            } else {
                // the β search missed the optimum; keep the previous beam
                (w.clone(), after_receive, beta)
            };
            let mut u_next = u_next;

            let converged = u_next.distance(&u)? < opts.tolerance && w_next.distance(&w)? < opts.tolerance;

            // Every other iteration, follow the last step further while the
            // objective keeps improving. The plain step just taken has damped
            // the fast directions, so the step points along the slow ridge.
            if !converged && it % 2 == 0 && opts.max_extrapolation >= 1.0 {
                let step = w_next.axpy(Complex64::new(-1.0, 0.0), &w)?;
                let mut t = 1.0;
                while t <= opts.max_extrapolation {
                    let Ok(w_try) = normalize(&w_next.axpy(Complex64::new(t, 0.0), &step)?) else {
                        break;
                    };
                    let u_try = mmse_receive(self.h_s, self.h, &w_try, self.rho_r)?;
                    let v_try = self.objective(&u_try, &w_try)?;
                    if v_try <= next_value {
                        break;
                    }
                    u_next = u_try;
                    w_next = w_try;
                    next_value = v_try;
                    t *= 2.0;
                }
            }
            u = u_next;
            w = w_next;
            beta = next_beta;
            value = next_value;
            trace.push(value);
            if converged {
                break;
            }
        }
        let mut result = BeamformerResult::evaluate(u, w, self.h_s, self.h_d, self.h, self.rho_s, self.rho_r)?;
        result.iterations = iterations;
        result.beta = beta;
        Ok(AlternatingOutcome {
            result,
            trace,
            warm_start,
        })
    }
}

/// Alternating optimization of the weighted rate `α·log2(1+γ_S) + (1−α)·log2(1+γ_D)`.
pub fn bf_optimal(
    h_s: &ComplexVector,
    h_d: &ComplexVector,
    h: &ComplexMatrix,
    rho_s: f64,
    rho_r: f64,
    alpha: f64,
) -> Result<BeamformerResult> {
    Ok(bf_optimal_weighted(h_s, h_d, h, rho_s, rho_r, alpha, 1.0 - alpha, &AlternatingOptions::default())?.result)
}

/// Alternating optimization with independent weights on the two links.
///
/// Runs once from the zero-forcing pair and once from the MMSE pair and keeps
/// the run with the higher final objective (ties go to the zero-forcing run).
#[allow(clippy::too_many_arguments)]
pub fn bf_optimal_weighted(
    h_s: &ComplexVector,
    h_d: &ComplexVector,
    h: &ComplexMatrix,
    rho_s: f64,
    rho_r: f64,
    weight_s: f64,
    weight_d: f64,
    opts: &AlternatingOptions,
) -> Result<AlternatingOutcome> {
    nonzero(h_s, "zero source-relay channel")?;
    nonzero(h_d, "zero relay-destination channel")?;
    let problem = PairProblem {
        h_s,
        h_d,
        h,
        rho_s,
        rho_r,
        weight_s,
        weight_d,
    };
    if h_s.len() == 1 {
        let mut result = BeamformerResult::evaluate(normalize(h_s)?, normalize(h_d)?, h_s, h_d, h, rho_s, rho_r)?;
        result.iterations = 1;
        let value = result.rate_objective(weight_s, weight_d);
        return Ok(AlternatingOutcome {
            result,
            trace: vec![value],
            warm_start: WarmStart::Scalar,
        });
    }
    let zf = bf_zf(h_s, h_d, h, rho_s, rho_r)?;
    let from_zf = problem.run(zf.u, zf.w, WarmStart::ZeroForcing, opts)?;
    let mmse = bf_mmse(h_s, h_d, h, rho_s, rho_r)?;
    let from_mmse = problem.run(mmse.u, mmse.w, WarmStart::Mmse, opts)?;
    Ok(if from_mmse.objective() > from_zf.objective() {
        from_mmse
    } else {
        from_zf
    })
}

/// Single alternating run from a caller-supplied initial pair.
#[allow(clippy::too_many_arguments)]
pub fn alternate_from(
    h_s: &ComplexVector,
    h_d: &ComplexVector,
    h: &ComplexMatrix,
    rho_s: f64,
    rho_r: f64,
    weight_s: f64,
    weight_d: f64,
    init: (ComplexVector, ComplexVector),
    opts: &AlternatingOptions,
) -> Result<AlternatingOutcome> {
    let problem = PairProblem {
        h_s,
        h_d,
        h,
        rho_s,
        rho_r,
        weight_s,
        weight_d,
    };
    problem.run(init.0, init.1, WarmStart::ZeroForcing, opts)
}

/// Selection criterion for pair `(i, j)`: `α·C_S + (1−α)·C_D` with
/// buffer-capped rates.
pub fn weighted_objective(result: &BeamformerResult, alpha: f64, buf: &BufferState, i: usize, j: usize) -> f64 {
    weighted_objective_split(result, alpha, 1.0 - alpha, buf, i, j)
}

/// As [`weighted_objective`] with separate receive and transmit weights
/// (`α_i` and `1 − α_j`).
pub fn weighted_objective_split(
    result: &BeamformerResult,
    weight_s: f64,
    weight_d: f64,
    buf: &BufferState,
    i: usize,
    j: usize,
) -> f64 {
    weight_s * inst_rate_receive(result.gamma_s, buf, i) + weight_d * inst_rate_transmit(result.gamma_d, buf, j)
}
