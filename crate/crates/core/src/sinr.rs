//! SINR evaluation for UEs, backhaul links and the bistatic sensing receiver.

use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;
use thiserror::Error;

use crate::channel::{sample_rcs, ChannelRealization, PropagationParams, SensingGeometry};
use crate::linalg::{dot, norm_sqr, CMatrix};
use crate::rng::{stream_rng, Stream};
use crate::scalar::{complex_normal, count, lit, to_db, CVec, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SinrError {
    #[error("receive beamformer of UAV {0} is zero")]
    ZeroBeamformer(usize),
}

/// Transmit precoders and backhaul receive beamformers of one drop.
///
/// Streams of UAV `k` are ordered `[ue 0, ..., ue N_ue-1, sensing]`. The
/// backhaul vectors are empty for tethered deployments.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSolution<T> {
    /// `[uav][ue]`, each of length `M_U`.
    pub ue: Vec<Vec<CVec<T>>>,
    /// `[uav]`, length `M_U`.
    pub sensing: Vec<CVec<T>>,
    /// `[uav]`, length `M_BS`.
    pub backhaul: Vec<CVec<T>>,
    /// `[uav]`, length `M_UB`.
    pub receive: Vec<CVec<T>>,
}

impl<T: Real> PrecoderSolution<T> {
    pub fn zeros(n_tx: usize, n_ue: usize, m_u: usize) -> Self {
        Self {
            ue: vec![vec![vec![Complex::zero(); m_u]; n_ue]; n_tx],
            sensing: vec![vec![Complex::zero(); m_u]; n_tx],
            backhaul: Vec::new(),
            receive: Vec::new(),
        }
    }

    pub fn n_tx(&self) -> usize {
        self.sensing.len()
    }

    pub fn n_ue(&self) -> usize {
        self.ue.first().map_or(0, |r| r.len())
    }

    pub fn has_backhaul(&self) -> bool {
        !self.backhaul.is_empty()
    }

    /// Column `s` of `W_k`.
    pub fn stream(&self, k: usize, s: usize) -> &CVec<T> {
        if s < self.n_ue() {
            &self.ue[k][s]
        } else {
            &self.sensing[k]
        }
    }

    pub fn stream_mut(&mut self, k: usize, s: usize) -> &mut CVec<T> {
        if s < self.n_ue() {
            &mut self.ue[k][s]
        } else {
            &mut self.sensing[k]
        }
    }

    /// Transmit power of UAV `k` over all of its streams.
    pub fn uav_power(&self, k: usize) -> T {
        self.ue[k].iter().map(|w| norm_sqr(w)).sum::<T>() + norm_sqr(&self.sensing[k])
    }

    pub fn access_power(&self) -> T {
        (0..self.n_tx()).map(|k| self.uav_power(k)).sum()
    }

    pub fn backhaul_power(&self) -> T {
        self.backhaul.iter().map(|w| norm_sqr(w)).sum()
    }

    /// Scales every access precoder by `s`.
    pub fn scale_access(&mut self, s: T) {
        let c = Complex::from(s);
        for k in 0..self.n_tx() {
            for j in 0..self.n_ue() {
                self.ue[k][j].iter_mut().for_each(|z| *z *= c);
            }
            self.sensing[k].iter_mut().for_each(|z| *z *= c);
        }
    }

    pub fn is_finite(&self) -> bool {
        let fin = |v: &CVec<T>| v.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        self.ue.iter().flatten().all(fin)
            && self.sensing.iter().all(fin)
            && self.backhaul.iter().all(fin)
            && self.receive.iter().all(fin)
    }
}

/// Data and sensing symbols of one coherent block, `s[n]` for `n = 1..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBlock<T> {
    /// `N - 1` vectors of length `N_ue + 1`; the last entry is the sensing stream.
    pub slots: Vec<CVec<T>>,
}

impl<T: Real> SymbolBlock<T> {
    /// Unit-power complex Gaussian symbols; each UE stream and the sensing
    /// stream come from their own named random stream.
    pub fn generate(seed: u64, n_ue: usize, block_len: usize) -> Self {
        assert!(block_len >= 2, "block length N must be at least 2");
        let mut columns: Vec<CVec<T>> = (0..n_ue)
            .map(|j| {
                let mut rng = stream_rng(seed, Stream::DataSymbols { ue: j });
                (1..block_len).map(|_| complex_normal(&mut rng, T::one())).collect()
            })
            .collect();
        let mut rng = stream_rng(seed, Stream::SensingSymbols);
        columns.push((1..block_len).map(|_| complex_normal(&mut rng, T::one())).collect());
        let slots = (0..block_len - 1)
            .map(|n| columns.iter().map(|c| c[n]).collect())
            .collect();
        Self { slots }
    }

    /// `N`, the block length including the reference slot.
    pub fn block_len(&self) -> usize {
        self.slots.len() + 1
    }

    pub fn n_streams(&self) -> usize {
        self.slots.first().map_or(0, |s| s.len())
    }

    /// `S = sum_n s[n] s[n]^H`.
    pub fn gram(&self) -> CMatrix<T> {
        let d = self.n_streams();
        let mut s = CMatrix::zeros(d, d);
        for slot in &self.slots {
            s.add_outer(slot, slot, Complex::from(T::one()));
        }
        s
    }
}

/// Receiver noise powers in watts and the RCS variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePowers<T> {
    pub ue: T,
    pub backhaul: T,
    pub sensing: T,
    pub rcs_variance: T,
}

impl<T: Real> NoisePowers<T> {
    pub fn from_params(p: &PropagationParams<T>) -> Self {
        Self {
            ue: p.access_noise_w(),
            backhaul: p.backhaul_noise_w(),
            sensing: p.sensing_noise_w(),
            rcs_variance: p.rcs_variance,
        }
    }
}

/// Transmit power constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerBudget<T> {
    /// Per-UAV access budget `P_k` and BS backhaul budget `P_b` (watts).
    PerUav { uav: T, bs: T },
    /// One budget shared by all transmit UAVs (tethered deployment).
    Pooled { total: T },
}

/// Linear SINR thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosTargets<T> {
    pub ue: T,
    pub backhaul: T,
}

impl<T: Real> QosTargets<T> {
    /// UE threshold `gamma` and the matching backhaul threshold for `n_ue` UEs.
    pub fn new(gamma: T, n_ue: usize) -> Self {
        Self {
            ue: gamma,
            backhaul: backhaul_threshold(gamma, n_ue),
        }
    }
}

/// `(gamma + 1)^N_ue - 1`: the per-UAV backhaul SINR that carries the sum
/// rate of `n_ue` UEs at threshold `gamma`.
pub fn backhaul_threshold<T: Real>(gamma: T, n_ue: usize) -> T {
    (gamma + T::one()).powi(n_ue as i32) - T::one()
}

/// Received amplitude `c_j^H w` for UE `j` over the stacked UAV channels.
pub fn ue_gain<T: Real>(ch: &ChannelRealization<T>, sol: &PrecoderSolution<T>, j: usize, s: usize) -> Complex<T> {
    (0..ch.n_tx())
        .map(|k| dot(&ch.access[k][j].vector, sol.stream(k, s)))
        .sum()
}

pub fn ue_sinr<T: Real>(j: usize, ch: &ChannelRealization<T>, sol: &PrecoderSolution<T>, noise: T) -> T {
    let n_streams = sol.n_ue() + 1;
    let mut signal = T::zero();
    let mut interference = noise;
    for s in 0..n_streams {
        let p = ue_gain(ch, sol, j, s).norm_sqr();
        if s == j {
            signal = p;
        } else {
            interference += p;
        }
    }
    signal / interference
}

/// Effective channel seen by the BS precoders at UAV `k`, `H_k^H u_k`.
pub fn backhaul_effective<T: Real>(ch: &ChannelRealization<T>, k: usize, u: &[Complex<T>]) -> CVec<T> {
    ch.backhaul[k].matrix.adjoint_mul_vec(u)
}

pub fn backhaul_sinr<T: Real>(
    k: usize,
    ch: &ChannelRealization<T>,
    sol: &PrecoderSolution<T>,
    noise: T,
) -> Result<T, SinrError> {
    let u = &sol.receive[k];
    let un = norm_sqr(u);
    if un == T::zero() {
        return Err(SinrError::ZeroBeamformer(k));
    }
    let e = backhaul_effective(ch, k, u);
    let mut signal = T::zero();
    let mut interference = noise * un;
    for (l, w) in sol.backhaul.iter().enumerate() {
        let p = dot(&e, w).norm_sqr();
        if l == k {
            signal = p;
        } else {
            interference += p;
        }
    }
    Ok(signal / interference)
}

/// `zeta = lambda^2 sigma_rcs^2 / ((N-1) (4 pi)^3 sigma_r^2 d_rt^2)`.
pub fn sensing_zeta<T: Real>(geom: &SensingGeometry<T>, noise: &NoisePowers<T>, block_len: usize) -> T {
    let four_pi = lit::<T>(4.0) * T::PI();
    geom.wavelength * geom.wavelength * noise.rcs_variance
        / (count::<T>(block_len - 1) * four_pi.powi(3) * noise.sensing * geom.d_rx * geom.d_rx)
}

/// Row vector `t_k^H W_k` over the streams of UAV `k`.
pub fn target_projection<T: Real>(geom: &SensingGeometry<T>, sol: &PrecoderSolution<T>, k: usize) -> CVec<T> {
    (0..=sol.n_ue())
        .map(|s| dot(&geom.tx_target[k], sol.stream(k, s)))
        .collect()
}

/// Sensing SINR, `zeta sum_k sum_n |t_k^H W_k s[n]|^2 / d_kt^2`.
pub fn sensing_sinr<T: Real>(
    geom: &SensingGeometry<T>,
    sol: &PrecoderSolution<T>,
    symbols: &SymbolBlock<T>,
    noise: &NoisePowers<T>,
) -> T {
    let zeta = sensing_zeta(geom, noise, symbols.block_len());
    let mut total = T::zero();
    for k in 0..geom.n_tx() {
        let g = target_projection(geom, sol, k);
        let e: T = symbols
            .slots
            .iter()
            .map(|s| g.iter().zip(s).map(|(a, b)| *a * *b).sum::<Complex<T>>().norm_sqr())
            .sum();
        total += e / (geom.d_tx[k] * geom.d_tx[k]);
    }
    zeta * total
}

/// Monte-Carlo estimate of the sensing SINR from simulated echoes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EchoEstimate<T> {
    pub gamma: T,
    pub signal_power: T,
    pub noise_power: T,
}

/// Simulates the received echo at the sensing UAV for `trials` independent
/// RCS and noise draws.
///
/// Each trial forms the full array snapshot `y[n]`, combines it with the
/// normalized matched filter `a_r^H / M_U`, and estimates the target-return
/// power as the combined output power minus the power of the combined noise.
/// The noise reference is the per-element receiver noise power measured on
/// the raw snapshots.
pub fn simulate_echo<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    geom: &SensingGeometry<T>,
    sol: &PrecoderSolution<T>,
    symbols: &SymbolBlock<T>,
    noise: &NoisePowers<T>,
    trials: usize,
) -> EchoEstimate<T> {
    assert!(trials >= 1);
    let m = geom.rx_steering.len();
    let m_t = count::<T>(m);
    let n_slots = symbols.slots.len();
    // x_k[n] = t_k^H W_k s[n]
    let x: Vec<CVec<T>> = (0..geom.n_tx())
        .map(|k| {
            let g = target_projection(geom, sol, k);
            symbols
                .slots
                .iter()
                .map(|s| g.iter().zip(s).map(|(a, b)| *a * *b).sum())
                .collect()
        })
        .collect();
    let amp: Vec<T> = geom.path_gain.iter().map(|g| g.sqrt()).collect();
    let mut signal_acc = T::zero();
    let mut noise_acc = T::zero();
    let mut snapshot = vec![Complex::<T>::zero(); m];
    for _ in 0..trials {
        let beta: CVec<T> = (0..geom.n_tx())
            .map(|_| sample_rcs(rng, noise.rcs_variance))
            .collect();
        for n in 0..n_slots {
            let echo: Complex<T> = (0..geom.n_tx()).map(|k| beta[k] * amp[k] * x[k][n]).sum();
            let mut raw_noise = T::zero();
            let mut noise_comb = Complex::<T>::zero();
            for (y, a) in snapshot.iter_mut().zip(&geom.rx_steering) {
                let z = complex_normal(rng, noise.sensing);
                raw_noise += z.norm_sqr();
                noise_comb += a.conj() * z;
                *y = *a * echo + z;
            }
            let combined = dot(&geom.rx_steering, &snapshot) / m_t;
            noise_comb = noise_comb / m_t;
            // E|combined|^2 = E|return|^2 + E|combined noise|^2
            signal_acc += combined.norm_sqr() - noise_comb.norm_sqr();
            noise_acc += raw_noise / m_t;
        }
    }
    let denom = count::<T>(trials * n_slots);
    let signal_power = signal_acc / denom;
    let noise_power = noise_acc / denom;
    EchoEstimate {
        gamma: signal_power / noise_power,
        signal_power,
        noise_power,
    }
}

/// Evaluated SINRs with constraint flags.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrReport<T> {
    pub ue: Vec<T>,
    pub backhaul: Vec<T>,
    pub sensing: T,
    pub feasible_ue: bool,
    pub feasible_backhaul: bool,
    pub feasible_power: bool,
    pub power_used: T,
}

impl<T: Real> SinrReport<T> {
    pub fn feasible(&self) -> bool {
        self.feasible_ue && self.feasible_backhaul && self.feasible_power
    }

    pub fn min_ue_db(&self) -> T {
        min_db(&self.ue)
    }

    pub fn min_backhaul_db(&self) -> T {
        min_db(&self.backhaul)
    }
}

/// dB value of the smallest entry; NaN when there is none.
fn min_db<T: Real>(xs: &[T]) -> T {
    let m = xs.iter().fold(T::infinity(), |a, &b| a.min(b));
    if m.is_infinite() {
        T::nan()
    } else {
        to_db(m)
    }
}

/// Relative slack on power budgets.
pub const POWER_TOL: f64 = 1e-6;
/// Absolute slack in dB on SINR thresholds.
pub const SINR_TOL_DB: f64 = 1e-4;

fn meets<T: Real>(value: T, threshold: T) -> bool {
    if threshold <= T::zero() {
        return true;
    }
    value > T::zero() && to_db(value) >= to_db(threshold) - lit(SINR_TOL_DB)
}

fn within<T: Real>(used: T, budget: T) -> bool {
    used <= budget * (T::one() + lit(POWER_TOL))
}

/// Evaluates every SINR and flags each constraint family.
///
/// The backhaul family is checked only when the solution carries backhaul
/// precoders.
pub fn check_feasibility<T: Real>(
    ch: &ChannelRealization<T>,
    sol: &PrecoderSolution<T>,
    symbols: &SymbolBlock<T>,
    noise: &NoisePowers<T>,
    qos: &QosTargets<T>,
    budget: &PowerBudget<T>,
) -> SinrReport<T> {
    let ue: Vec<T> = (0..sol.n_ue()).map(|j| ue_sinr(j, ch, sol, noise.ue)).collect();
    let backhaul: Vec<T> = if sol.has_backhaul() {
        (0..sol.n_tx())
            .map(|k| backhaul_sinr(k, ch, sol, noise.backhaul).unwrap_or(T::zero()))
            .collect()
    } else {
        Vec::new()
    };
    let feasible_ue = ue.iter().all(|&g| meets(g, qos.ue));
    let feasible_backhaul = backhaul.iter().all(|&g| meets(g, qos.backhaul));
    let (feasible_power, power_used) = match *budget {
        PowerBudget::PerUav { uav, bs } => {
            let per = (0..sol.n_tx()).all(|k| within(sol.uav_power(k), uav));
            let bsok = within(sol.backhaul_power(), bs);
            (per && bsok, sol.access_power() + sol.backhaul_power())
        }
        PowerBudget::Pooled { total } => {
            let used = sol.access_power();
            (within(used, total), used)
        }
    };
    SinrReport {
        sensing: sensing_sinr(&ch.sensing, sol, symbols, noise),
        ue,
        backhaul,
        feasible_ue,
        feasible_backhaul,
        feasible_power,
        power_used,
    }
}
