//! Single-drop pipelines of the three deployment modes.

use std::time::Instant;

use crate::cccp::{
    design_backhaul, initial_backhaul_receivers, initialize_feasible, optimize_access_from,
    optimize_precoders_tethered, zf_backhaul_fallback, CccpConfig, CccpState, TraceRecord,
};
use crate::geometry::Position3D;
use crate::pso::{optimize_positions, SwarmTraceRecord};
use crate::scene::Scene;
use crate::sinr::{PowerBudget, PrecoderSolution, SinrReport};

use super::config::{Mode, ScenarioConfig};

/// Precoders designed for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    /// `None` when no access precoder meets the UE thresholds.
    pub solution: Option<PrecoderSolution<f64>>,
    pub report: Option<SinrReport<f64>>,
    /// Sensing SINR of `solution` (zero without one).
    pub gamma_t: f64,
    pub state: Option<CccpState<f64>>,
    /// Why a constraint could not be met, if one could not.
    pub failure: Option<String>,
}

impl Design {
    pub fn feasible(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.feasible())
    }

    pub fn iterations(&self) -> usize {
        self.state.as_ref().map_or(0, |s| s.iterations)
    }

    fn failed(reason: String) -> Self {
        Self {
            solution: None,
            report: None,
            gamma_t: 0.0,
            state: None,
            failure: Some(reason),
        }
    }
}

/// Precoder design of `scene`: the pooled CCCP for a pooled budget, else
/// the access CCCP plus the backhaul design. An infeasible backhaul keeps
/// the access design and falls back to ZF backhaul precoders, so the report
/// flags the violated backhaul links.
pub fn design_precoders(scene: &Scene<f64>, cfg: &CccpConfig) -> Design {
    let problem = scene.problem();
    let (solution, state, failure) = match scene.budget {
        PowerBudget::Pooled { .. } => match optimize_precoders_tethered(&problem, cfg) {
            Ok((sol, st)) => (sol, st, None),
            Err(e) => return Design::failed(e.to_string()),
        },
        PowerBudget::PerUav { bs, .. } => {
            let init = match initialize_feasible(&problem) {
                Ok(w) => w,
                Err(e) => return Design::failed(e.to_string()),
            };
            let mut state = match optimize_access_from(&problem, &init, cfg) {
                Ok(s) => s,
                Err(e) => return Design::failed(e.to_string()),
            };
            let (backhaul, failure) = match design_backhaul(&problem, cfg) {
                Ok(b) => (b, None),
                Err(e) => {
                    let u = initial_backhaul_receivers(&scene.channels, cfg);
                    (zf_backhaul_fallback(&problem, &u, bs), Some(e.to_string()))
                }
            };
            state.iterate.backhaul = backhaul.precoders;
            state.iterate.receive = backhaul.receivers;
            state.outer_rounds = backhaul.rounds;
            (state.iterate.clone(), state, failure)
        }
    };
    let report = problem.report(&solution);
    Design {
        gamma_t: report.sensing,
        report: Some(report),
        solution: Some(solution),
        state: Some(state),
        failure,
    }
}

/// Everything one `(mode, seed)` run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub mode: Mode,
    pub seed: u64,
    pub positions: Vec<Position3D<f64>>,
    pub design: Design,
    /// Sensing SINR after each accepted outer round; entry 0 is the pinned
    /// placement.
    pub round_gamma: Vec<f64>,
    pub swarm_traces: Vec<Vec<SwarmTraceRecord>>,
    /// Position/precoder rounds run after round 0.
    pub outer_rounds: usize,
    /// CCCP iterations summed over every design of the run.
    pub cccp_iters: usize,
    /// Swarm iterations summed over every round.
    pub pso_iters: usize,
    pub wall_ms: f64,
}

impl RunOutcome {
    pub fn gamma_t(&self) -> f64 {
        self.design.gamma_t
    }

    pub fn feasible(&self) -> bool {
        self.design.feasible()
    }

    pub fn cccp_trace(&self) -> &[TraceRecord<f64>] {
        self.design.state.as_ref().map_or(&[], |s| &s.trace)
    }
}

/// Runs `mode` on the drop of `seed`.
pub fn run(cfg: &ScenarioConfig, mode: Mode, seed: u64) -> RunOutcome {
    let start = Instant::now();
    let mut out = match mode {
        Mode::Mobile => run_mobile_inner(cfg, seed),
        Mode::Fixed | Mode::Tethered => run_pinned(cfg, mode, seed),
    };
    out.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    out
}

pub fn run_fixed(cfg: &ScenarioConfig, seed: u64) -> RunOutcome {
    run(cfg, Mode::Fixed, seed)
}

pub fn run_tethered(cfg: &ScenarioConfig, seed: u64) -> RunOutcome {
    run(cfg, Mode::Tethered, seed)
}

pub fn run_mobile(cfg: &ScenarioConfig, seed: u64) -> RunOutcome {
    run(cfg, Mode::Mobile, seed)
}

fn empty_outcome(cfg: &ScenarioConfig, mode: Mode, seed: u64, design: Design) -> RunOutcome {
    RunOutcome {
        mode,
        seed,
        positions: cfg.pinned_positions(),
        round_gamma: vec![design.gamma_t],
        cccp_iters: design.iterations(),
        design,
        swarm_traces: Vec::new(),
        outer_rounds: 0,
        pso_iters: 0,
        wall_ms: 0.0,
    }
}

fn run_pinned(cfg: &ScenarioConfig, mode: Mode, seed: u64) -> RunOutcome {
    let design = match cfg.scene(mode, seed) {
        Ok(scene) => design_precoders(&scene, &cfg.cccp),
        Err(e) => Design::failed(e.to_string()),
    };
    empty_outcome(cfg, mode, seed, design)
}

/// `a` is at least as good as `b`: no feasibility lost and no sensing SINR lost.
fn no_worse(a: &Design, b: &Design) -> bool {
    (a.feasible() || !b.feasible()) && a.gamma_t >= b.gamma_t
}

fn run_mobile_inner(cfg: &ScenarioConfig, seed: u64) -> RunOutcome {
    let mut scene = match cfg.scene(Mode::Mobile, seed) {
        Ok(s) => s,
        Err(e) => return empty_outcome(cfg, Mode::Mobile, seed, Design::failed(e.to_string())),
    };
    let mut design = design_precoders(&scene, &cfg.cccp);
    let mut out = empty_outcome(cfg, Mode::Mobile, seed, design.clone());
    if !cfg.bcd.optimize_positions {
        return out;
    }
    for round in 1..=cfg.bcd.max_rounds {
        let search = optimize_positions(&scene, &cfg.swarm, seed, round);
        out.pso_iters += search.iterations;
        out.swarm_traces.push(search.trace);
        out.outer_rounds = round;
        let Ok(moved) = scene.moved(search.positions) else {
            break;
        };
        let candidate = design_precoders(&moved, &cfg.cccp);
        out.cccp_iters += candidate.iterations();
        if !no_worse(&candidate, &design) {
            break;
        }
        let gain = (candidate.gamma_t - design.gamma_t) / design.gamma_t.max(f64::MIN_POSITIVE);
        scene = moved;
        design = candidate;
        out.round_gamma.push(design.gamma_t);
        if gain < cfg.bcd.tol {
            break;
        }
    }
    out.positions = scene.layout.tx_uavs.clone();
    out.design = design;
    out
}
