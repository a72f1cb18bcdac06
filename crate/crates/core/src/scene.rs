//! One drop: layout, fading draws, channels, symbols and constraints.

use rand::RngExt;

use crate::cccp::PrecoderProblem;
use crate::channel::{dbm_to_watts, ChannelError, ChannelRealization, FadingDraws, PropagationParams};
use crate::geometry::Position3D;
use crate::layout::{ArrayConfig, FlightBox, NetworkLayout};
use crate::rng::{stream_rng, Stream};
use crate::scalar::{from_db, lit, Real};
use crate::sinr::{NoisePowers, PowerBudget, QosTargets, SymbolBlock};

#[derive(Debug, Clone, PartialEq)]
pub struct Scene<T> {
    pub layout: NetworkLayout<T>,
    pub arrays: ArrayConfig,
    pub params: PropagationParams<T>,
    pub draws: FadingDraws<T>,
    pub channels: ChannelRealization<T>,
    pub symbols: SymbolBlock<T>,
    pub noise: NoisePowers<T>,
    pub qos: QosTargets<T>,
    pub budget: PowerBudget<T>,
}

impl<T: Real> Scene<T> {
    /// Draws fading and symbols for `seed` and realizes the channels.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        layout: NetworkLayout<T>,
        arrays: ArrayConfig,
        params: PropagationParams<T>,
        seed: u64,
        block_len: usize,
        gamma: T,
        budget: PowerBudget<T>,
    ) -> Result<Self, ChannelError> {
        let draws = FadingDraws::sample(seed, layout.n_tx(), layout.n_ue(), &arrays, &params);
        let channels = ChannelRealization::realize(&layout, &draws, &arrays, &params)?;
        let symbols = SymbolBlock::generate(seed, layout.n_ue(), block_len);
        Ok(Self {
            noise: NoisePowers::from_params(&params),
            qos: QosTargets::new(gamma, layout.n_ue()),
            layout,
            arrays,
            params,
            draws,
            channels,
            symbols,
            budget,
        })
    }

    /// Same drop with the transmit UAVs moved; fading draws and symbols are kept.
    pub fn moved(&self, tx_uavs: Vec<Position3D<T>>) -> Result<Self, ChannelError> {
        let layout = self.layout.with_tx_uavs(tx_uavs);
        let channels = ChannelRealization::realize(&layout, &self.draws, &self.arrays, &self.params)?;
        Ok(Self {
            layout,
            channels,
            ..self.clone()
        })
    }

    pub fn problem(&self) -> PrecoderProblem<'_, T> {
        PrecoderProblem {
            channels: &self.channels,
            symbols: &self.symbols,
            noise: self.noise,
            qos: self.qos,
            budget: self.budget,
        }
    }

    pub fn with_budget(&self, budget: PowerBudget<T>) -> Self {
        Self {
            budget,
            ..self.clone()
        }
    }

    pub fn with_gamma(&self, gamma: T) -> Self {
        Self {
            qos: QosTargets::new(gamma, self.layout.n_ue()),
            ..self.clone()
        }
    }
}

/// Random small instances for oracle tests.
pub mod fixtures {
    use super::*;

    /// Shape of a random instance.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct InstanceShape {
        pub n_tx: usize,
        pub n_ue: usize,
        pub arrays: ArrayConfig,
        pub block_len: usize,
        pub gamma_db: f64,
        pub uav_dbm: f64,
        pub bs_dbm: f64,
    }

    impl InstanceShape {
        /// Desk scale: 3 UAVs, 4x4 access arrays, 16-element backhaul
        /// arrays, 4 UEs, 16 symbols, 0 dB threshold, 30 dBm budgets.
        pub fn desk() -> Self {
            Self {
                n_tx: 3,
                n_ue: 4,
                arrays: ArrayConfig {
                    uav_x: 4,
                    uav_y: 4,
                    uav_backhaul: 16,
                    bs: 16,
                },
                block_len: 16,
                gamma_db: 0.0,
                uav_dbm: 30.0,
                bs_dbm: 30.0,
            }
        }
    }

    /// Transmit UAVs uniform in a 500 m square between 60 m and 180 m
    /// height, UEs uniform on the ground, target and receiver at their
    /// default placements.
    pub fn random_scene(seed: u64, shape: &InstanceShape) -> Scene<f64> {
        let mut rng = stream_rng(seed, Stream::UePlacement);
        let mut pos = |z_lo: f64, z_hi: f64| {
            Position3D::new(
                500.0 * rng.random::<f64>(),
                500.0 * rng.random::<f64>(),
                z_lo + (z_hi - z_lo) * rng.random::<f64>(),
            )
        };
        let tx_uavs = (0..shape.n_tx).map(|_| pos(60.0, 180.0)).collect();
        let ues = (0..shape.n_ue).map(|_| pos(0.0, 0.0)).collect();
        let layout = NetworkLayout {
            bs: Position3D::new(0.0, 0.0, 25.0),
            tx_uavs,
            rx_uav: Position3D::new(125.0, 250.0, 125.0),
            ues,
            target: Position3D::new(250.0, 375.0, 0.0),
            flight_box: FlightBox {
                lower: Position3D::new(0.0, 0.0, 20.0),
                upper: Position3D::new(500.0, 500.0, 200.0),
                min_separation: 5.0,
            },
        };
        let budget = PowerBudget::PerUav {
            uav: dbm_to_watts(shape.uav_dbm),
            bs: dbm_to_watts(shape.bs_dbm),
        };
        Scene::new(
            layout,
            shape.arrays,
            PropagationParams::default(),
            seed,
            shape.block_len,
            from_db(shape.gamma_db),
            budget,
        )
        .expect("random positions are distinct")
    }

    /// Pooled budget equal to the sum of the per-UAV and BS budgets.
    pub fn pooled_budget<T: Real>(budget: &PowerBudget<T>, n_tx: usize) -> PowerBudget<T> {
        match *budget {
            PowerBudget::PerUav { uav, bs } => PowerBudget::Pooled {
                total: bs + uav * lit(n_tx as f64),
            },
            pooled => pooled,
        }
    }
}
