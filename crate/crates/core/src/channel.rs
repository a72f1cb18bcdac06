//! Stochastic channel generation: mmWave backhaul, Rician access links and
//! the bistatic sensing geometry.
//!
//! Column convention: every stored channel `c` is such that the received
//! sample for a transmit vector `x` is `c^H x`. The LoS access component and
//! the target channel are therefore conjugated steering vectors.

use num_complex::Complex;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    angles_between, distance, ground_range, ula_angle, ula_steering, upa_steering, Position3D,
};
use crate::layout::{ArrayConfig, NetworkLayout};
use crate::linalg::CMatrix;
use crate::rng::{stream_rng, Stream};
use crate::scalar::{complex_normal, count, from_db, lit, std_normal, CVec, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("zero link distance")]
    ZeroDistance,
}

/// Log-distance parameters of one mmWave link state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct MmWaveLink<T> {
    pub intercept_db: T,
    pub slope: T,
    pub shadow_std_db: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkState {
    LoS,
    NLoS,
}

/// Physical constants of every link type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound(serialize = "T: Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct PropagationParams<T> {
    pub access_wavelength: T,
    pub path_loss_exponent: T,
    pub eta_los_db: T,
    pub eta_nlos_db: T,
    pub los_rho: T,
    pub los_omega: T,
    pub rician_a1: T,
    pub rician_a2: T,
    pub mmwave_los: MmWaveLink<T>,
    pub mmwave_nlos: MmWaveLink<T>,
    pub backhaul_nlos_paths: usize,
    pub noise_density_dbm_hz: T,
    pub access_bandwidth_hz: T,
    pub backhaul_bandwidth_hz: T,
    pub rcs_variance: T,
}

impl<T: Real> Default for PropagationParams<T> {
    fn default() -> Self {
        Self {
            access_wavelength: lit(0.125),
            path_loss_exponent: lit(2.0),
            eta_los_db: lit(1.0),
            eta_nlos_db: lit(20.0),
            los_rho: lit(9.61),
            los_omega: lit(0.16),
            rician_a1: lit(1.0),
            rician_a2: lit(2.0 / std::f64::consts::PI * 1000f64.ln()),
            mmwave_los: MmWaveLink {
                intercept_db: lit(61.4),
                slope: lit(2.0),
                shadow_std_db: lit(5.8),
            },
            mmwave_nlos: MmWaveLink {
                intercept_db: lit(72.0),
                slope: lit(2.92),
                shadow_std_db: lit(8.7),
            },
            backhaul_nlos_paths: 4,
            noise_density_dbm_hz: lit(-174.0),
            access_bandwidth_hz: lit(10e6),
            backhaul_bandwidth_hz: lit(100e6),
            rcs_variance: lit(1.0),
        }
    }
}

impl<T: Real> PropagationParams<T> {
    pub fn mmwave(&self, state: LinkState) -> &MmWaveLink<T> {
        match state {
            LinkState::LoS => &self.mmwave_los,
            LinkState::NLoS => &self.mmwave_nlos,
        }
    }

    fn noise_w(&self, bandwidth: T) -> T {
        dbm_to_watts(self.noise_density_dbm_hz) * bandwidth
    }

    /// UE receiver noise power (also used at the sensing receiver).
    pub fn access_noise_w(&self) -> T {
        self.noise_w(self.access_bandwidth_hz)
    }

    pub fn sensing_noise_w(&self) -> T {
        self.access_noise_w()
    }

    pub fn backhaul_noise_w(&self) -> T {
        self.noise_w(self.backhaul_bandwidth_hz)
    }
}

/// `10^((p - 30)/10)`.
pub fn dbm_to_watts<T: Real>(p_dbm: T) -> T {
    from_db(p_dbm - lit(30.0))
}

pub fn db_to_linear<T: Real>(x_db: T) -> T {
    from_db(x_db)
}

/// Probability of a LoS air-to-ground link.
pub fn los_probability<T: Real>(uav_z: T, ground_range: T, params: &PropagationParams<T>) -> T {
    let elev_deg = uav_z.atan2(ground_range).to_degrees();
    T::one() / (T::one() + params.los_rho * (-params.los_omega * (elev_deg - params.los_rho)).exp())
}

/// Average air-to-ground attenuation `alpha` (the applied power gain is `1/alpha`).
pub fn a2g_path_loss<T: Real>(
    d: T,
    los_prob: T,
    params: &PropagationParams<T>,
) -> Result<T, ChannelError> {
    if d <= T::zero() {
        return Err(ChannelError::ZeroDistance);
    }
    let fs = (lit::<T>(4.0) * T::PI() * d / params.access_wavelength).powf(params.path_loss_exponent);
    let eta = los_prob * from_db(params.eta_los_db) + (T::one() - los_prob) * from_db(params.eta_nlos_db);
    Ok(fs * eta)
}

/// `A1 exp(A2 elevation)`.
pub fn rician_factor<T: Real>(elevation: T, params: &PropagationParams<T>) -> T {
    params.rician_a1 * (params.rician_a2 * elevation).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccessChannel<T> {
    pub vector: CVec<T>,
    pub path_loss_linear: T,
    pub rician_k: T,
    pub los_prob: T,
}

impl<T: Real> AccessChannel<T> {
    /// Builds the channel from a fixed NLoS draw (`M_U` standard complex
    /// normals). Only the geometry-dependent factors depend on positions.
    pub fn realize(
        uav: &Position3D<T>,
        ue: &Position3D<T>,
        nlos: &[Complex<T>],
        arrays: &ArrayConfig,
        params: &PropagationParams<T>,
    ) -> Result<Self, ChannelError> {
        let d = distance(uav, ue);
        if d == T::zero() {
            return Err(ChannelError::ZeroDistance);
        }
        let angles = angles_between(ue, uav).map_err(|_| ChannelError::ZeroDistance)?;
        let los_prob = los_probability(uav.z - ue.z, ground_range(uav, ue), params);
        let alpha = a2g_path_loss(d, los_prob, params)?;
        let k = rician_factor(angles.elevation.max(T::zero()), params);
        let los = upa_steering(arrays.uav_x, arrays.uav_y, &angles).conj();
        let gain = (T::one() / alpha).sqrt();
        let (w_los, w_nlos) = if k.is_infinite() {
            (T::one(), T::zero())
        } else {
            ((k / (k + T::one())).sqrt(), (T::one() / (k + T::one())).sqrt())
        };
        assert_eq!(nlos.len(), los.len(), "NLoS draw length must equal M_U");
        let vector = los
            .iter()
            .zip(nlos)
            .map(|(l, n)| (*l * w_los + *n * w_nlos) * gain)
            .collect();
        Ok(Self {
            vector,
            path_loss_linear: alpha,
            rician_k: k,
            los_prob,
        })
    }

    /// Small-scale part `sqrt(alpha) h`.
    pub fn normalized(&self) -> CVec<T> {
        let s = self.path_loss_linear.sqrt();
        self.vector.iter().map(|z| *z * s).collect()
    }
}

pub fn sample_access_channel<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    uav: &Position3D<T>,
    ue: &Position3D<T>,
    arrays: &ArrayConfig,
    params: &PropagationParams<T>,
) -> Result<AccessChannel<T>, ChannelError> {
    let nlos: CVec<T> = (0..arrays.access_elements())
        .map(|_| complex_normal(rng, T::one()))
        .collect();
    AccessChannel::realize(uav, ue, &nlos, arrays, params)
}

/// Deterministic part of the mmWave path loss plus `shadow` standard
/// deviations of shadowing.
pub fn mmwave_path_loss_db_with<T: Real>(d: T, link: &MmWaveLink<T>, shadow: T) -> T {
    link.intercept_db + lit::<T>(10.0) * link.slope * d.log10() + link.shadow_std_db * shadow
}

pub fn mmwave_path_loss_db<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    d: T,
    state: LinkState,
    params: &PropagationParams<T>,
) -> T {
    let xi: T = std_normal(rng);
    mmwave_path_loss_db_with(d, params.mmwave(state), xi)
}

/// Position-independent random inputs of one backhaul link.
#[derive(Debug, Clone, PartialEq)]
pub struct BackhaulDraws<T> {
    /// Unit-variance complex gain per path, LoS first.
    pub unit_gains: CVec<T>,
    /// Standard-normal shadowing per path.
    pub shadowing: Vec<T>,
    pub nlos_aoa: Vec<T>,
    pub nlos_aod: Vec<T>,
}

impl<T: Real> BackhaulDraws<T> {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, nlos_paths: usize) -> Self {
        let n = nlos_paths + 1;
        let unit_gains = (0..n).map(|_| complex_normal(rng, T::one())).collect();
        let shadowing = (0..n).map(|_| std_normal(rng)).collect();
        let mut angle = || -> T {
            // uniform on (-pi, pi]
            let u: f64 = rng.random();
            lit(std::f64::consts::PI * (1.0 - 2.0 * u))
        };
        let nlos_aoa = (0..nlos_paths).map(|_| angle()).collect();
        let nlos_aod = (0..nlos_paths).map(|_| angle()).collect();
        Self {
            unit_gains,
            shadowing,
            nlos_aoa,
            nlos_aod,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackhaulChannel<T> {
    /// `M_UB x M_BS`.
    pub matrix: CMatrix<T>,
    /// Complex path gains, LoS first.
    pub gains: CVec<T>,
    /// Arrival angle at the UAV ULA per path.
    pub aoa: Vec<T>,
    /// Departure angle at the BS ULA per path.
    pub aod: Vec<T>,
    pub path_loss_db: Vec<T>,
    pub m_ub: usize,
    pub m_bs: usize,
}

impl<T: Real> BackhaulChannel<T> {
    pub fn realize(
        bs: &Position3D<T>,
        uav: &Position3D<T>,
        draws: &BackhaulDraws<T>,
        arrays: &ArrayConfig,
        params: &PropagationParams<T>,
    ) -> Result<Self, ChannelError> {
        let d = distance(bs, uav);
        if d == T::zero() {
            return Err(ChannelError::ZeroDistance);
        }
        let mut aoa = vec![ula_angle(uav, bs)];
        let mut aod = vec![ula_angle(bs, uav)];
        aoa.extend_from_slice(&draws.nlos_aoa);
        aod.extend_from_slice(&draws.nlos_aod);
        let mut gains = Vec::with_capacity(aoa.len());
        let mut path_loss_db = Vec::with_capacity(aoa.len());
        for (p, (z, xi)) in draws.unit_gains.iter().zip(&draws.shadowing).enumerate() {
            let state = if p == 0 { LinkState::LoS } else { LinkState::NLoS };
            let pl = mmwave_path_loss_db_with(d, params.mmwave(state), *xi);
            path_loss_db.push(pl);
            gains.push(*z * lit::<T>(10.0).powf(-pl / lit(20.0)));
        }
        let mut ch = Self {
            matrix: CMatrix::zeros(arrays.uav_backhaul, arrays.bs),
            gains,
            aoa,
            aod,
            path_loss_db,
            m_ub: arrays.uav_backhaul,
            m_bs: arrays.bs,
        };
        ch.matrix = ch.reconstruct();
        Ok(ch)
    }

    /// Matrix rebuilt from the stored paths.
    ///
    /// `sqrt(M_UB M_BS / L)` times the sum of outer products of unit-norm
    /// array responses, i.e. `1/sqrt(L)` times the unit-modulus steering
    /// vectors, so `E||H||_F^2 = M_UB M_BS sum_p E|g_p|^2 / L`. The path count
    /// is floored at one so a LoS-only link stays finite.
    pub fn reconstruct(&self) -> CMatrix<T> {
        let nlos = self.gains.len().saturating_sub(1).max(1);
        let pre = (T::one() / count::<T>(nlos)).sqrt();
        let mut m = CMatrix::zeros(self.m_ub, self.m_bs);
        for ((g, aoa), aod) in self.gains.iter().zip(&self.aoa).zip(&self.aod) {
            let a_rx = ula_steering(self.m_ub, *aoa);
            let a_tx = ula_steering(self.m_bs, *aod);
            m.add_outer(a_rx.as_slice(), a_tx.as_slice(), *g * pre);
        }
        m
    }
}

pub fn sample_backhaul_channel<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    bs: &Position3D<T>,
    uav: &Position3D<T>,
    arrays: &ArrayConfig,
    params: &PropagationParams<T>,
) -> Result<BackhaulChannel<T>, ChannelError> {
    let draws = BackhaulDraws::sample(rng, params.backhaul_nlos_paths);
    BackhaulChannel::realize(bs, uav, &draws, arrays, params)
}

/// `lambda^2 / ((4 pi)^3 d_tk^2 d_rt^2)`.
pub fn sensing_path_gain<T: Real>(d_tk: T, d_rt: T, wavelength: T) -> Result<T, ChannelError> {
    if d_tk <= T::zero() || d_rt <= T::zero() {
        return Err(ChannelError::ZeroDistance);
    }
    let four_pi = lit::<T>(4.0) * T::PI();
    Ok(wavelength * wavelength / (four_pi.powi(3) * d_tk * d_tk * d_rt * d_rt))
}

/// Swerling-I reflection coefficient.
pub fn sample_rcs<T: Real, R: Rng + ?Sized>(rng: &mut R, variance: T) -> Complex<T> {
    complex_normal(rng, variance)
}

/// Target-related geometry of a bistatic drop.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingGeometry<T> {
    /// Target channel `t_k = a*(angles target -> UAV k)`, so the echo seen
    /// from UAV k's transmit vector `x` is `t_k^H x = a^T x`.
    pub tx_target: Vec<CVec<T>>,
    /// Receive-array steering toward the target.
    pub rx_steering: CVec<T>,
    pub path_gain: Vec<T>,
    pub d_tx: Vec<T>,
    pub d_rx: T,
    pub wavelength: T,
}

impl<T: Real> SensingGeometry<T> {
    pub fn new(
        target: &Position3D<T>,
        tx_uavs: &[Position3D<T>],
        rx_uav: &Position3D<T>,
        arrays: &ArrayConfig,
        wavelength: T,
    ) -> Result<Self, ChannelError> {
        let d_rx = distance(target, rx_uav);
        let rx_angles = angles_between(target, rx_uav).map_err(|_| ChannelError::ZeroDistance)?;
        let rx_steering = upa_steering(arrays.uav_x, arrays.uav_y, &rx_angles).0;
        let mut tx_target = Vec::with_capacity(tx_uavs.len());
        let mut path_gain = Vec::with_capacity(tx_uavs.len());
        let mut d_tx = Vec::with_capacity(tx_uavs.len());
        for uav in tx_uavs {
            let d = distance(target, uav);
            let ang = angles_between(target, uav).map_err(|_| ChannelError::ZeroDistance)?;
            tx_target.push(upa_steering(arrays.uav_x, arrays.uav_y, &ang).conj());
            path_gain.push(sensing_path_gain(d, d_rx, wavelength)?);
            d_tx.push(d);
        }
        Ok(Self {
            tx_target,
            rx_steering,
            path_gain,
            d_tx,
            d_rx,
            wavelength,
        })
    }

    pub fn n_tx(&self) -> usize {
        self.tx_target.len()
    }
}

/// Position-independent randomness of one drop's channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingDraws<T> {
    /// `[uav][ue]` NLoS access draws.
    pub access: Vec<Vec<CVec<T>>>,
    pub backhaul: Vec<BackhaulDraws<T>>,
}

impl<T: Real> FadingDraws<T> {
    /// Draws every link from its own named stream of `seed`.
    pub fn sample(
        seed: u64,
        n_tx: usize,
        n_ue: usize,
        arrays: &ArrayConfig,
        params: &PropagationParams<T>,
    ) -> Self {
        let m = arrays.access_elements();
        let access = (0..n_tx)
            .map(|k| {
                (0..n_ue)
                    .map(|j| {
                        let mut rng = stream_rng(seed, Stream::AccessFading { uav: k, ue: j });
                        (0..m).map(|_| complex_normal(&mut rng, T::one())).collect()
                    })
                    .collect()
            })
            .collect();
        let backhaul = (0..n_tx)
            .map(|k| {
                let mut rng = stream_rng(seed, Stream::BackhaulFading { uav: k });
                BackhaulDraws::sample(&mut rng, params.backhaul_nlos_paths)
            })
            .collect();
        Self { access, backhaul }
    }
}

/// Every channel of one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<T> {
    /// `[uav][ue]`.
    pub access: Vec<Vec<AccessChannel<T>>>,
    pub backhaul: Vec<BackhaulChannel<T>>,
    pub sensing: SensingGeometry<T>,
}

impl<T: Real> ChannelRealization<T> {
    pub fn realize(
        layout: &NetworkLayout<T>,
        draws: &FadingDraws<T>,
        arrays: &ArrayConfig,
        params: &PropagationParams<T>,
    ) -> Result<Self, ChannelError> {
        let access = layout
            .tx_uavs
            .iter()
            .zip(&draws.access)
            .map(|(uav, row)| {
                layout
                    .ues
                    .iter()
                    .zip(row)
                    .map(|(ue, z)| AccessChannel::realize(uav, ue, z, arrays, params))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let backhaul = layout
            .tx_uavs
            .iter()
            .zip(&draws.backhaul)
            .map(|(uav, d)| BackhaulChannel::realize(&layout.bs, uav, d, arrays, params))
            .collect::<Result<Vec<_>, _>>()?;
        let sensing = SensingGeometry::new(
            &layout.target,
            &layout.tx_uavs,
            &layout.rx_uav,
            arrays,
            params.access_wavelength,
        )?;
        Ok(Self {
            access,
            backhaul,
            sensing,
        })
    }

    pub fn n_tx(&self) -> usize {
        self.sensing.n_tx()
    }

    pub fn n_ue(&self) -> usize {
        self.access.first().map_or(0, |r| r.len())
    }

    /// Access channel of UE `j` stacked over all transmit UAVs.
    pub fn stacked_access(&self, j: usize) -> CVec<T> {
        self.access.iter().flat_map(|row| row[j].vector.iter().copied()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm_sqr;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn params() -> PropagationParams<f64> {
        PropagationParams::default()
    }

    fn arrays(mx: usize, my: usize) -> ArrayConfig {
        ArrayConfig {
            uav_x: mx,
            uav_y: my,
            uav_backhaul: 8,
            bs: 6,
        }
    }

    fn p(x: f64, y: f64, z: f64) -> Position3D<f64> {
        Position3D::new(x, y, z)
    }

    #[test]
    fn los_probability_examples() {
        let pr = params();
        let overhead = los_probability(100.0, 0.0, &pr);
        let expect = 1.0 / (1.0 + 9.61 * (-0.16f64 * (90.0 - 9.61)).exp());
        assert!((overhead - expect).abs() < 1e-15);
        assert!((overhead - 0.99997).abs() < 1e-5);
        assert!((los_probability(125.0, 125.0, &pr) - 0.9677).abs() < 1e-4);
        let floor = 1.0 / (1.0 + 9.61 * (0.16f64 * 9.61).exp());
        assert!((los_probability(1.0, 1e12, &pr) - floor).abs() < 1e-9);
        let mut last = 0.0;
        for r in (0..50).rev() {
            let v = los_probability(100.0, r as f64 * 40.0, &pr);
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn a2g_path_loss_examples() {
        let mut pr = params();
        let fs = (4.0 * PI * 50.0 / 0.125f64).powi(2);
        assert!((a2g_path_loss(50.0, 1.0, &{
            let mut q = pr.clone();
            q.eta_los_db = 0.0;
            q
        })
        .unwrap()
            - fs)
            .abs()
            < 1e-6 * fs);
        let a1 = a2g_path_loss(30.0, 0.7, &pr).unwrap();
        let a2 = a2g_path_loss(60.0, 0.7, &pr).unwrap();
        assert!((a2 / a1 - 4.0).abs() < 1e-12);
        pr.eta_los_db = 0.0;
        pr.eta_nlos_db = 10.0 * 20f64.log10();
        let a = a2g_path_loss(176.78, 0.95, &pr).unwrap();
        assert!((a - 6.154e8).abs() < 1e-3 * 6.154e8);
        assert_eq!(a2g_path_loss(0.0, 0.5, &pr), Err(ChannelError::ZeroDistance));
    }

    #[test]
    fn rician_factor_examples() {
        let pr = params();
        assert_eq!(rician_factor(0.0, &pr), 1.0);
        assert!((rician_factor(FRAC_PI_2, &pr) - 1000.0).abs() < 1e-9);
        assert!(rician_factor(0.2, &pr) < rician_factor(0.3, &pr));
    }

    #[test]
    fn infinite_k_gives_los_steering() {
        let mut pr = params();
        pr.rician_a1 = f64::INFINITY;
        let uav = p(10.0, 20.0, 100.0);
        let ue = p(50.0, -30.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ch = sample_access_channel(&mut rng, &uav, &ue, &arrays(3, 3), &pr).unwrap();
        let ang = angles_between(&ue, &uav).unwrap();
        let los = upa_steering(3, 3, &ang).conj();
        for (h, l) in ch.normalized().iter().zip(&los) {
            assert!((*h - *l).norm() < 1e-12);
        }
    }

    #[test]
    fn rayleigh_mean_power() {
        let mut pr = params();
        pr.rician_a1 = 0.0;
        let uav = p(0.0, 0.0, 100.0);
        let ue = p(30.0, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let ch = sample_access_channel(&mut rng, &uav, &ue, &arrays(2, 2), &pr).unwrap();
            assert_eq!(ch.rician_k, 0.0);
            acc += norm_sqr(&ch.normalized()) / 4.0;
        }
        assert!((acc / n as f64 - 1.0).abs() < 0.03);
    }

    #[test]
    fn rician_mean_power_any_k() {
        let pr = params();
        let uav = p(0.0, 0.0, 60.0);
        let ue = p(80.0, 0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 10_000;
        let acc: f64 = (0..n)
            .map(|_| {
                let ch = sample_access_channel(&mut rng, &uav, &ue, &arrays(2, 3), &pr).unwrap();
                norm_sqr(&ch.normalized()) / 6.0
            })
            .sum();
        assert!((acc / n as f64 - 1.0).abs() < 0.03);
    }

    #[test]
    fn access_sampling_is_deterministic() {
        let pr = params();
        let a = sample_access_channel(&mut ChaCha8Rng::seed_from_u64(9), &p(1.0, 2.0, 80.0), &p(0.0, 0.0, 0.0), &arrays(4, 4), &pr)
            .unwrap();
        let b = sample_access_channel(&mut ChaCha8Rng::seed_from_u64(9), &p(1.0, 2.0, 80.0), &p(0.0, 0.0, 0.0), &arrays(4, 4), &pr)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mmwave_path_loss_examples() {
        let pr = params();
        assert_eq!(mmwave_path_loss_db_with(1.0, &pr.mmwave_los, 0.0), 61.4);
        assert!((mmwave_path_loss_db_with(100.0, &pr.mmwave_los, 0.0) - 101.4).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 10_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| mmwave_path_loss_db(&mut rng, 100.0, LinkState::NLoS, &pr))
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var.sqrt() / 8.7 - 1.0).abs() < 0.05);
    }

    #[test]
    fn backhaul_los_only_is_rank_one() {
        let mut pr = params();
        pr.backhaul_nlos_paths = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch = sample_backhaul_channel(&mut rng, &p(0.0, 0.0, 25.0), &p(100.0, 50.0, 120.0), &arrays(2, 2), &pr).unwrap();
        assert_eq!(ch.gains.len(), 1);
        // every 2x2 minor vanishes
        let m = &ch.matrix;
        for i in 1..m.rows() {
            for j in 1..m.cols() {
                let minor = m[(0, 0)] * m[(i, j)] - m[(0, j)] * m[(i, 0)];
                assert!(minor.norm() < 1e-12 * m.frobenius_norm_sqr());
            }
        }
    }

    #[test]
    fn backhaul_matrix_matches_paths() {
        let pr = params();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ch = sample_backhaul_channel(&mut rng, &p(0.0, 0.0, 25.0), &p(200.0, 50.0, 120.0), &arrays(2, 2), &pr).unwrap();
        let r = ch.reconstruct();
        let diff: f64 = r
            .as_slice()
            .iter()
            .zip(ch.matrix.as_slice())
            .map(|(a, b)| (*a - *b).norm_sqr())
            .sum();
        assert!(diff.sqrt() <= 1e-9 * ch.matrix.frobenius_norm_sqr().sqrt());
        assert!((r.frobenius_norm_sqr() / ch.matrix.frobenius_norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn backhaul_mean_energy() {
        // With shadowing disabled the per-path variances are deterministic, so
        // E||H||_F^2 = M_UB M_BS / L * sum_p 10^(-alpha_p/10).
        let mut pr = params();
        pr.mmwave_los.shadow_std_db = 0.0;
        pr.mmwave_nlos.shadow_std_db = 0.0;
        let bs = p(0.0, 0.0, 25.0);
        let uav = p(150.0, 80.0, 100.0);
        let d = distance(&bs, &uav);
        let arr = arrays(2, 2);
        let var_los = 10f64.powf(-mmwave_path_loss_db_with(d, &pr.mmwave_los, 0.0) / 10.0);
        let var_nlos = 10f64.powf(-mmwave_path_loss_db_with(d, &pr.mmwave_nlos, 0.0) / 10.0);
        let l = pr.backhaul_nlos_paths as f64;
        let expect = 48.0 / l * (var_los + l * var_nlos);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1000;
        let acc: f64 = (0..n)
            .map(|_| sample_backhaul_channel(&mut rng, &bs, &uav, &arr, &pr).unwrap().matrix.frobenius_norm_sqr())
            .sum();
        assert!((acc / n as f64 / expect - 1.0).abs() < 0.10);
    }

    #[test]
    fn sensing_gain_examples() {
        let g: f64 = sensing_path_gain(100.0, 100.0, 0.125).unwrap();
        assert!((g - 7.874e-14).abs() < 1e-3 * 7.874e-14);
        let h: f64 = sensing_path_gain(100.0, 100.0, 0.0625).unwrap();
        assert!((g / h - 4.0).abs() < 1e-12);
        assert_eq!(sensing_path_gain(30.0, 70.0, 0.1).unwrap(), sensing_path_gain(70.0, 30.0, 0.1).unwrap());
        assert_eq!(sensing_path_gain(0.0, 70.0, 0.1), Err(ChannelError::ZeroDistance));
    }

    #[test]
    fn rcs_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let mut pw = 0.0;
        let mut mean = Complex::new(0.0, 0.0);
        for _ in 0..n {
            let b: Complex<f64> = sample_rcs(&mut rng, 1.0);
            pw += b.norm_sqr();
            mean += b;
        }
        assert!((pw / n as f64 - 1.0).abs() < 0.02);
        assert!((mean / n as f64).norm() < 3.0 / (n as f64).sqrt());
        assert_eq!(params().rcs_variance, 1.0);
    }

    #[test]
    fn linear_gains_at_most_one_beyond_one_meter() {
        let pr = params();
        for d in [1.0, 2.0, 10.0, 500.0] {
            for pl in [0.0, 0.5, 1.0] {
                let g = 1.0 / a2g_path_loss(d, pl, &pr).unwrap();
                assert!(g > 0.0 && g <= 1.0);
            }
            for link in [&pr.mmwave_los, &pr.mmwave_nlos] {
                let g = 10f64.powf(-mmwave_path_loss_db_with(d, link, 0.0) / 10.0);
                assert!(g > 0.0 && g <= 1.0);
            }
        }
    }

    #[test]
    fn power_conversions() {
        assert!((dbm_to_watts(30.0f64) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(40.0f64) - 10.0).abs() < 1e-12);
        assert_eq!(db_to_linear(0.0f64), 1.0);
    }
}
