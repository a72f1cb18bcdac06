//! Particle swarm search over transmit-UAV positions.

use num_complex::Complex;
use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelError;
use crate::geometry::{distance, Position3D};
use crate::layout::FlightBox;
use crate::linalg::dot;
use crate::precoders::{dominant_left_singular, heuristic_power_allocation, zf_backhaul_direction, ZfBeams};
use crate::rng::{stream_rng, DropRng, Stream};
use crate::scene::Scene;
use crate::sinr::{backhaul_effective, sensing_sinr, ue_sinr, PowerBudget};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwarmConfig {
    pub swarm_size: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Per-coordinate speed limit as a fraction of the box extent.
    pub vmax_fraction: f64,
    pub max_iterations: usize,
    /// Stop after this many iterations without a new global best.
    pub stall_window: usize,
    pub penalty_weight: f64,
    /// Penalize UE SINR shortfalls of the ZF evaluation.
    pub qos_penalty: bool,
    /// Also penalize backhaul SINR shortfalls of a ZF backhaul evaluation.
    pub backhaul_penalty: bool,
    /// Share of each UAV budget on the sensing beam during evaluation.
    pub sensing_fraction: f64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            swarm_size: 30,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            vmax_fraction: 0.2,
            max_iterations: 50,
            stall_window: 10,
            penalty_weight: 1e3,
            qos_penalty: true,
            backhaul_penalty: true,
            sensing_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_utility: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmTraceRecord {
    pub iteration: usize,
    pub best_utility: f64,
    pub best_position: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmResult {
    pub best_position: Vec<f64>,
    pub best_utility: f64,
    pub trace: Vec<SwarmTraceRecord>,
    pub iterations: usize,
}

/// Component-wise clamp.
pub fn project_to_box(x: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(lower.iter().zip(upper))
        .map(|(v, (lo, hi))| v.max(*lo).min(*hi))
        .collect()
}

/// Maximizes `utility` over the box `[lower, upper]`.
///
/// `seeds` become the first particles (after projection); the rest start
/// uniformly in the box, all with zero velocity. Only points accepted by
/// `admissible` can become the global best, so the returned point is
/// admissible whenever any evaluated point was. Particle evaluations of one
/// iteration run in parallel.
pub fn optimize_swarm<F, A>(
    utility: F,
    admissible: A,
    lower: &[f64],
    upper: &[f64],
    seeds: &[Vec<f64>],
    cfg: &SwarmConfig,
    rng: &mut DropRng,
) -> SwarmResult
where
    F: Fn(&[f64]) -> f64 + Sync,
    A: Fn(&[f64]) -> bool + Sync,
{
    assert_eq!(lower.len(), upper.len());
    let dim = lower.len();
    let size = cfg.swarm_size.max(1);
    let vmax: Vec<f64> = lower
        .iter()
        .zip(upper)
        .map(|(lo, hi)| cfg.vmax_fraction * (hi - lo))
        .collect();
    let mut positions: Vec<Vec<f64>> = seeds
        .iter()
        .take(size)
        .map(|s| project_to_box(s, lower, upper))
        .collect();
    while positions.len() < size {
        positions.push(
            lower
                .iter()
                .zip(upper)
                .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                .collect(),
        );
    }
    let evaluate = |xs: &[Vec<f64>]| -> Vec<(f64, bool)> {
        xs.par_iter().map(|x| (utility(x), admissible(x))).collect()
    };
    let scores = evaluate(&positions);
    let mut particles: Vec<Particle> = positions
        .into_iter()
        .zip(&scores)
        .map(|(p, &(u, _))| Particle {
            velocity: vec![0.0; dim],
            best_position: p.clone(),
            position: p,
            best_utility: u,
        })
        .collect();
    let mut tracker = BestTracker {
        admissible: None,
        any: (particles[0].position.clone(), scores[0].0),
    };
    tracker.absorb(&particles, &scores);
    let mut trace: Vec<SwarmTraceRecord> = tracker.record(0).into_iter().collect();
    let mut stall = 0;
    let mut iterations = 0;
    for it in 1..=cfg.max_iterations {
        let guide = tracker.guide().to_vec();
        for p in particles.iter_mut() {
            for d in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let v = cfg.inertia * p.velocity[d]
                    + cfg.cognitive * r1 * (p.best_position[d] - p.position[d])
                    + cfg.social * r2 * (guide[d] - p.position[d]);
                p.velocity[d] = v.max(-vmax[d]).min(vmax[d]);
                p.position[d] += p.velocity[d];
            }
            p.position = project_to_box(&p.position, lower, upper);
        }
        let xs: Vec<Vec<f64>> = particles.iter().map(|p| p.position.clone()).collect();
        let sc = evaluate(&xs);
        for (p, &(u, _)) in particles.iter_mut().zip(&sc) {
            if u > p.best_utility {
                p.best_utility = u;
                p.best_position = p.position.clone();
            }
        }
        let improved = tracker.absorb(&particles, &sc);
        iterations = it;
        trace.extend(tracker.record(it));
        stall = if improved { 0 } else { stall + 1 };
        if stall >= cfg.stall_window {
            break;
        }
    }
    let (best_position, best_utility) = tracker.admissible.unwrap_or(tracker.any);
    SwarmResult {
        best_position,
        best_utility,
        trace,
        iterations,
    }
}

/// Best admissible point so far, plus the best point of any kind as a
/// fallback guide.
struct BestTracker {
    admissible: Option<(Vec<f64>, f64)>,
    any: (Vec<f64>, f64),
}

impl BestTracker {
    fn absorb(&mut self, ps: &[Particle], scores: &[(f64, bool)]) -> bool {
        let mut improved = false;
        for (p, &(u, ok)) in ps.iter().zip(scores) {
            if u > self.any.1 {
                self.any = (p.position.clone(), u);
            }
            if ok && self.admissible.as_ref().is_none_or(|b| u > b.1) {
                self.admissible = Some((p.position.clone(), u));
                improved = true;
            }
        }
        improved
    }

    fn guide(&self) -> &[f64] {
        self.admissible.as_ref().map_or(&self.any.0, |b| &b.0)
    }

    fn record(&self, iteration: usize) -> Option<SwarmTraceRecord> {
        self.admissible.as_ref().map(|(p, u)| SwarmTraceRecord {
            iteration,
            best_utility: *u,
            best_position: p.clone(),
        })
    }
}

/// Flattens positions into `[x0, y0, z0, x1, ...]`.
pub fn flatten(positions: &[Position3D<f64>]) -> Vec<f64> {
    positions.iter().flat_map(|p| p.to_array()).collect()
}

pub fn unflatten(x: &[f64]) -> Vec<Position3D<f64>> {
    x.chunks_exact(3).map(Position3D::from_slice).collect()
}

fn box_bounds(b: &FlightBox<f64>, n_tx: usize) -> (Vec<f64>, Vec<f64>) {
    let lo = b.lower.to_array();
    let hi = b.upper.to_array();
    (lo.repeat(n_tx), hi.repeat(n_tx))
}

/// Sum of `max(0, d_min - d)` over UAV pairs.
pub fn separation_shortfall(positions: &[Position3D<f64>], d_min: f64) -> f64 {
    let mut total = 0.0;
    for (i, a) in positions.iter().enumerate() {
        for b in &positions[i + 1..] {
            total += (d_min - distance(a, b)).max(0.0);
        }
    }
    total
}

fn shortfall_db(value: f64, threshold: f64) -> f64 {
    if threshold <= 0.0 {
        return 0.0;
    }
    let v = if value > 0.0 { 10.0 * value.log10() } else { -300.0 };
    (10.0 * threshold.log10() - v).max(0.0)
}

/// Sensing SINR of the ZF precoders with the heuristic power split at the
/// given positions, minus penalties for UAV separation and (optionally) UE
/// and backhaul SINR shortfalls in dB. Fading draws are those of `scene`.
pub fn position_utility(scene: &Scene<f64>, positions: &[Position3D<f64>], cfg: &SwarmConfig) -> f64 {
    let w = cfg.penalty_weight;
    let sep = w * separation_shortfall(positions, scene.layout.flight_box.min_separation);
    let moved = match scene.moved(positions.to_vec()) {
        Ok(s) => s,
        Err(ChannelError::ZeroDistance) => return f64::NEG_INFINITY,
    };
    let ch = &moved.channels;
    let beams = match ZfBeams::compute(ch) {
        Ok(b) => b,
        Err(_) => return f64::NEG_INFINITY,
    };
    let problem = moved.problem();
    let budgets = problem.per_uav_budgets();
    let sol = heuristic_power_allocation(&beams, &budgets, cfg.sensing_fraction);
    let gamma_t = sensing_sinr(&ch.sensing, &sol, &moved.symbols, &moved.noise);
    let mut penalty = sep;
    if cfg.qos_penalty {
        for j in 0..ch.n_ue() {
            penalty += w * shortfall_db(ue_sinr(j, ch, &sol, moved.noise.ue), moved.qos.ue);
        }
    }
    if cfg.backhaul_penalty {
        if let PowerBudget::PerUav { bs, .. } = moved.budget {
            penalty += w * backhaul_shortfall(&moved, bs);
        }
    }
    gamma_t - penalty
}

/// Backhaul SINR shortfall in dB, summed over UAVs, of ZF backhaul
/// precoders at equal shares of `p_b` with dominant-singular-vector receivers.
fn backhaul_shortfall(scene: &Scene<f64>, p_b: f64) -> f64 {
    let ch = &scene.channels;
    let u: Vec<_> = ch.backhaul.iter().map(|b| dominant_left_singular(&b.matrix)).collect();
    let eff: Vec<_> = (0..ch.n_tx()).map(|k| backhaul_effective(ch, k, &u[k])).collect();
    let amp = Complex::from((p_b / ch.n_tx() as f64).sqrt());
    let w: Vec<Vec<Complex<f64>>> = (0..ch.n_tx())
        .map(|k| match zf_backhaul_direction(k, &eff) {
            Ok(d) => d.vector.iter().map(|z| z * amp).collect(),
            Err(_) => vec![Complex::new(0.0, 0.0); eff[k].len()],
        })
        .collect();
    (0..ch.n_tx())
        .map(|k| {
            let sig = dot(&eff[k], &w[k]).norm_sqr();
            let int: f64 = (0..ch.n_tx())
                .filter(|&l| l != k)
                .map(|l| dot(&eff[k], &w[l]).norm_sqr())
                .sum();
            shortfall_db(sig / (int + scene.noise.backhaul), scene.qos.backhaul)
        })
        .sum()
}

/// Result of a position search.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionSearch {
    pub positions: Vec<Position3D<f64>>,
    pub utility: f64,
    pub trace: Vec<SwarmTraceRecord>,
    pub iterations: usize,
}

/// Swarm search over the transmit-UAV positions of `scene`, seeded with the
/// current positions. Returned positions lie in the flight box and respect
/// the minimum separation exactly.
pub fn optimize_positions(scene: &Scene<f64>, cfg: &SwarmConfig, seed: u64, round: usize) -> PositionSearch {
    let n_tx = scene.layout.n_tx();
    let fb = scene.layout.flight_box;
    let (lower, upper) = box_bounds(&fb, n_tx);
    let start = flatten(&scene.layout.tx_uavs);
    let mut rng = stream_rng(seed, Stream::Swarm { round });
    let result = optimize_swarm(
        |x| position_utility(scene, &unflatten(x), cfg),
        |x| fb.admits(&unflatten(x)),
        &lower,
        &upper,
        &[start.clone()],
        cfg,
        &mut rng,
    );
    let positions = unflatten(&result.best_position);
    let positions = if fb.admits(&positions) {
        positions
    } else {
        unflatten(&project_to_box(&start, &lower, &upper))
    };
    PositionSearch {
        positions,
        utility: result.best_utility,
        trace: result.trace,
        iterations: result.iterations,
    }
}
