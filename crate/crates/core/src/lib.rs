//! Cell-free UAV network simulator for joint sensing and communication.
//!
//! Transmit UAVs serve ground UEs and illuminate a target whose echo is
//! collected by a separate receive UAV. Three deployments are compared:
//! tethered UAVs with a wired backhaul and pooled power, fixed UAVs with a
//! wireless mmWave backhaul, and mobile UAVs whose positions are optimized
//! by a particle swarm in alternation with the precoder design.
//!
//! Numeric modules are generic over [`scalar::Real`]; the aliases below fix
//! the scalar to `f64`, which the scenario layer uses throughout.

pub mod cccp;
pub mod channel;
pub mod conic;
pub mod geometry;
pub mod layout;
pub mod linalg;
pub mod oracle;
pub mod precoders;
pub mod pso;
pub mod rng;
pub mod scalar;
pub mod scenario;
pub mod scene;
pub mod selftest;
pub mod sinr;

pub use cccp::{CccpConfig, CccpError, ConstraintId};
pub use channel::{ChannelError, LinkState};
pub use conic::ConicError;
pub use geometry::GeometryError;
pub use layout::ArrayConfig;
pub use precoders::PrecoderError;
pub use pso::SwarmConfig;
pub use scalar::Real;
pub use scenario::{load_config, run, run_sweep, Mode, RunOutcome, ScenarioConfig, SweepResult};
pub use sinr::SinrError;

pub type Position = geometry::Position3D<f64>;
pub type AngleSet = geometry::AngleSet<f64>;
pub type SteeringVector = geometry::SteeringVector<f64>;
pub type CMatrix = linalg::CMatrix<f64>;
pub type CVec = scalar::CVec<f64>;
pub type PropagationParams = channel::PropagationParams<f64>;
pub type MmWaveLink = channel::MmWaveLink<f64>;
pub type ChannelRealization = channel::ChannelRealization<f64>;
pub type FadingDraws = channel::FadingDraws<f64>;
pub type SensingGeometry = channel::SensingGeometry<f64>;
pub type FlightBox = layout::FlightBox<f64>;
pub type NetworkLayout = layout::NetworkLayout<f64>;
pub type PrecoderSolution = sinr::PrecoderSolution<f64>;
pub type SymbolBlock = sinr::SymbolBlock<f64>;
pub type NoisePowers = sinr::NoisePowers<f64>;
pub type PowerBudget = sinr::PowerBudget<f64>;
pub type QosTargets = sinr::QosTargets<f64>;
pub type SinrReport = sinr::SinrReport<f64>;
pub type ZfBeams = precoders::ZfBeams<f64>;
pub type ConicProgram = conic::ConicProgram<f64>;
pub type ConicSolution = conic::ConicSolution<f64>;
pub type CccpState = cccp::CccpState<f64>;
pub type Scene = scene::Scene<f64>;
