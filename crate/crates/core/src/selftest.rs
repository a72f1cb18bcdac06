//! Quick oracle suites behind the `selftest` command.
//!
//! Each suite compares a production routine with an independent evaluation
//! on a few random instances and reports one line.

use std::time::Instant;

use num_complex::Complex;
use rand::RngExt;

use crate::cccp::{initialize_feasible, linearize_in, AccessModel};
use crate::conic::solve_conic;
use crate::linalg::{cholesky_solve, dot, norm, CMatrix};
use crate::oracle::{projected_gradient_oracle, random_program, OracleConfig};
use crate::precoders::{dominant_left_singular, mmse_receiver, zf_target_direction, zf_ue_direction};
use crate::pso::{optimize_swarm, SwarmConfig};
use crate::rng::{stream_rng, Stream};
use crate::scalar::complex_normal;
use crate::scene::fixtures::{random_scene, InstanceShape};
use crate::sinr::{backhaul_sinr, sensing_sinr, simulate_echo, PrecoderSolution};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed_ms: f64,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<22} {} ({:.0} ms)", self.name, self.detail, self.elapsed_ms)
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> (bool, String)) -> CheckResult {
    let start = Instant::now();
    let (pass, detail) = f();
    CheckResult {
        name,
        pass,
        detail,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

/// Runs every suite.
pub fn run_selftest() -> Vec<CheckResult> {
    vec![
        timed("echo-vs-closed-form", echo_suite),
        timed("gradient-vs-fd", gradient_suite),
        timed("zf-nullspace", zf_suite),
        timed("mmse-vs-quotient", mmse_suite),
        timed("conic-vs-projection", conic_suite),
        timed("swarm-sphere", swarm_suite),
    ]
}

fn echo_suite() -> (bool, String) {
    let shape = InstanceShape::desk();
    let mut worst = 0.0f64;
    for seed in 0..2 {
        let scene = random_scene(seed, &shape);
        let Ok(sol) = initialize_feasible(&scene.problem()) else {
            return (false, format!("seed {seed}: no feasible start"));
        };
        let closed = sensing_sinr(&scene.channels.sensing, &sol, &scene.symbols, &scene.noise);
        let mut rng = stream_rng(seed, Stream::Echo);
        let est = simulate_echo(&mut rng, &scene.channels.sensing, &sol, &scene.symbols, &scene.noise, 20_000);
        worst = worst.max((est.gamma - closed).abs() / closed);
    }
    (worst <= 0.05, format!("max rel err {worst:.2e} (tol 5e-2)"))
}

fn gradient_suite() -> (bool, String) {
    let shape = InstanceShape::desk();
    let mut worst = 0.0f64;
    for seed in 0..3 {
        let scene = random_scene(seed, &shape);
        let problem = scene.problem();
        let model = AccessModel::full(&scene.channels);
        let mut rng = stream_rng(seed, Stream::Echo);
        let x0: Vec<f64> = (0..model.layout.n_vars()).map(|_| rng.random::<f64>() - 0.5).collect();
        let lin = linearize_in(&model, &problem, &x0);
        let f = |x: &[f64]| problem.gamma_t(&model.from_vars(x));
        let gmax = lin.gradient.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        let h = 1e-4;
        for i in 0..x0.len() {
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (f(&xp) - f(&xm)) / (2.0 * h);
            worst = worst.max((fd - lin.gradient[i]).abs() / lin.gradient[i].abs().max(1e-3 * gmax));
        }
    }
    (worst <= 1e-5, format!("max rel err {worst:.2e} (tol 1e-5)"))
}

fn zf_suite() -> (bool, String) {
    let shape = InstanceShape::desk();
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let ch = random_scene(seed, &shape).channels;
        for k in 0..ch.n_tx() {
            for j in 0..ch.n_ue() {
                let v = zf_ue_direction(k, j, &ch).expect("generic channels").vector;
                for i in (0..ch.n_ue()).filter(|&i| i != j) {
                    let c = &ch.access[k][i].vector;
                    worst = worst.max(dot(c, &v).norm() / norm(c));
                }
            }
            let v = zf_target_direction(k, &ch).expect("generic channels").vector;
            for c in &ch.access[k] {
                worst = worst.max(dot(&c.vector, &v).norm() / norm(&c.vector));
            }
        }
    }
    (worst <= 1e-8, format!("max residual {worst:.2e} (tol 1e-8)"))
}

/// The largest SINR over receivers `u` is `v^H R^-1 v` for signal `v = H w_k`
/// and interference-plus-noise covariance `R`.
fn mmse_suite() -> (bool, String) {
    let shape = InstanceShape::desk();
    let mut worst = 0.0f64;
    for seed in 0..3 {
        let scene = random_scene(seed, &shape);
        let ch = &scene.channels;
        let mut rng = stream_rng(seed, Stream::Echo);
        let m_bs = ch.backhaul[0].m_bs;
        let w: Vec<Vec<Complex<f64>>> = (0..ch.n_tx())
            .map(|_| (0..m_bs).map(|_| complex_normal(&mut rng, 0.1)).collect())
            .collect();
        let sigma2 = scene.noise.backhaul;
        let mut sol = PrecoderSolution::zeros(ch.n_tx(), 0, 1);
        sol.backhaul = w.clone();
        sol.receive = ch.backhaul.iter().map(|b| dominant_left_singular(&b.matrix)).collect();
        for k in 0..ch.n_tx() {
            let h = &ch.backhaul[k].matrix;
            sol.receive[k] = mmse_receiver(k, h, &w, sigma2).expect("positive definite");
            let achieved = backhaul_sinr(k, ch, &sol, sigma2).expect("nonzero receiver");
            let mut r = CMatrix::identity(h.rows());
            for i in 0..h.rows() {
                r[(i, i)] = Complex::from(sigma2);
            }
            for wl in w.iter().enumerate().filter(|(l, _)| *l != k).map(|(_, wl)| wl) {
                let v = h.mul_vec(wl);
                r.add_outer(&v, &v, Complex::from(1.0));
            }
            let v = h.mul_vec(&w[k]);
            let y = cholesky_solve(&r, &v).expect("positive definite");
            let best = dot(&v, &y).re;
            worst = worst.max((achieved - best).abs() / best);
        }
    }
    (worst <= 1e-8, format!("max rel gap {worst:.2e} (tol 1e-8)"))
}

fn conic_suite() -> (bool, String) {
    let mut worst = 0.0f64;
    for seed in 0..3 {
        let mut rng = stream_rng(seed, Stream::Echo);
        let p = random_program(&mut rng, 3, 2);
        let Ok(a) = solve_conic(&p) else {
            return (false, format!("seed {seed}: solver failed"));
        };
        let b = projected_gradient_oracle(&p, &OracleConfig::default());
        worst = worst.max((a.objective - b.objective).abs() / a.objective.abs().max(1e-12));
    }
    (worst <= 1e-4, format!("max rel gap {worst:.2e} (tol 1e-4)"))
}

fn swarm_suite() -> (bool, String) {
    let cfg = SwarmConfig::default();
    let centre = [120.0, 340.0, 90.0];
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let mut rng = stream_rng(seed, Stream::Swarm { round: 0 });
        let r = optimize_swarm(
            |x| -x.iter().zip(&centre).map(|(a, c)| (a - c).powi(2)).sum::<f64>(),
            |_| true,
            &[0.0, 0.0, 20.0],
            &[500.0, 500.0, 200.0],
            &[],
            &cfg,
            &mut rng,
        );
        let err = r.best_position.iter().zip(&centre).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(err);
    }
    (worst <= 1.0, format!("max distance {worst:.2e} m (tol 1 m)"))
}

