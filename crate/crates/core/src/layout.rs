//! Network layout and antenna-array dimensions.

use serde::{Deserialize, Serialize};

use crate::geometry::{distance, Position3D};
use crate::scalar::Real;

/// Element counts of the three array types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    /// Downward-facing access UPA, `uav_x * uav_y` elements.
    pub uav_x: usize,
    pub uav_y: usize,
    /// Horizontal backhaul ULA on each UAV.
    pub uav_backhaul: usize,
    /// BS ULA.
    pub bs: usize,
}

impl Default for ArrayConfig {
    /// 16x16 access arrays and 256-element backhaul arrays.
    fn default() -> Self {
        Self {
            uav_x: 16,
            uav_y: 16,
            uav_backhaul: 256,
            bs: 256,
        }
    }
}

impl ArrayConfig {
    pub fn access_elements(&self) -> usize {
        self.uav_x * self.uav_y
    }
}

/// Admissible flight box and minimum pairwise separation of transmit UAVs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlightBox<T> {
    pub lower: Position3D<T>,
    pub upper: Position3D<T>,
    pub min_separation: T,
}

impl<T: Real> FlightBox<T> {
    pub fn contains(&self, p: &Position3D<T>) -> bool {
        p.x >= self.lower.x
            && p.x <= self.upper.x
            && p.y >= self.lower.y
            && p.y <= self.upper.y
            && p.z >= self.lower.z
            && p.z <= self.upper.z
    }

    /// Smallest pairwise distance among `uavs` (infinite for fewer than two).
    pub fn min_pairwise(uavs: &[Position3D<T>]) -> T {
        let mut best = T::infinity();
        for (i, a) in uavs.iter().enumerate() {
            for b in &uavs[i + 1..] {
                best = best.min(distance(a, b));
            }
        }
        best
    }

    pub fn admits(&self, uavs: &[Position3D<T>]) -> bool {
        uavs.iter().all(|p| self.contains(p)) && Self::min_pairwise(uavs) >= self.min_separation
    }
}

/// Positions of every node in one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout<T> {
    pub bs: Position3D<T>,
    pub tx_uavs: Vec<Position3D<T>>,
    pub rx_uav: Position3D<T>,
    pub ues: Vec<Position3D<T>>,
    pub target: Position3D<T>,
    pub flight_box: FlightBox<T>,
}

impl<T: Real> NetworkLayout<T> {
    pub fn n_tx(&self) -> usize {
        self.tx_uavs.len()
    }

    pub fn n_ue(&self) -> usize {
        self.ues.len()
    }

    /// Same layout with the transmit UAVs moved.
    pub fn with_tx_uavs(&self, tx_uavs: Vec<Position3D<T>>) -> Self {
        Self {
            tx_uavs,
            ..self.clone()
        }
    }
}
