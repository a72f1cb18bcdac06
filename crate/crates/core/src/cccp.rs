//! Sensing-SINR maximization by the constrained concave-convex procedure.
//!
//! The sensing SINR is a convex quadratic in the access precoders, so each
//! iteration maximizes its tangent plane at the previous iterate over the
//! convex feasible set (UE SINR cones and power budgets). The tangent is a
//! global minorant, which makes the true objective non-decreasing.
//!
//! The backhaul precoders and receive beamformers do not enter the sensing
//! SINR, so the mobile problem splits into the access CCCP and a
//! minimum-power backhaul design alternated with MMSE receiver updates.

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelRealization;
use crate::conic::{solve_conic, AffineExpr, ConicError, ConicProgram, SocBlock};
use crate::linalg::{dot, norm, norm_sqr, orthonormal_basis};
use crate::precoders::{
    dominant_left_singular, heuristic_power_allocation, mmse_receiver, zf_backhaul_direction,
    ZfBeams,
};
use crate::rng::{stream_rng, Stream};
use crate::scalar::{complex_normal, lit, to_db, CVec, Real};
use crate::sinr::{
    backhaul_effective, backhaul_sinr, check_feasibility, sensing_sinr, sensing_zeta, ue_gain, ue_sinr,
    NoisePowers, PowerBudget, PrecoderSolution, QosTargets, SinrReport, SymbolBlock,
};

/// A constraint of the precoder design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintId {
    Ue(usize),
    Backhaul(usize),
    UavPower(usize),
    BsPower,
    PooledPower,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CccpError {
    #[error("no feasible precoder exists (violated: {violated:?}, margin {margin_db:.3} dB)")]
    Infeasible {
        violated: Vec<ConstraintId>,
        /// Best achievable minimum SINR minus its threshold, in dB.
        margin_db: f64,
    },
    #[error(transparent)]
    Solver(#[from] ConicError),
}

/// Everything the precoder design needs for one drop.
#[derive(Debug, Clone, Copy)]
pub struct PrecoderProblem<'a, T> {
    pub channels: &'a ChannelRealization<T>,
    pub symbols: &'a SymbolBlock<T>,
    pub noise: NoisePowers<T>,
    pub qos: QosTargets<T>,
    pub budget: PowerBudget<T>,
}

impl<T: Real> PrecoderProblem<'_, T> {
    pub fn gamma_t(&self, sol: &PrecoderSolution<T>) -> T {
        sensing_sinr(&self.channels.sensing, sol, self.symbols, &self.noise)
    }

    pub fn report(&self, sol: &PrecoderSolution<T>) -> SinrReport<T> {
        check_feasibility(self.channels, sol, self.symbols, &self.noise, &self.qos, &self.budget)
    }

    /// Access budget of each UAV; a pooled budget is split equally.
    pub fn per_uav_budgets(&self) -> Vec<T> {
        let n = self.channels.n_tx();
        match self.budget {
            PowerBudget::PerUav { uav, .. } => vec![uav; n],
            PowerBudget::Pooled { total } => vec![total / lit(n as f64); n],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CccpConfig {
    /// Inner stop: relative surrogate improvement below this.
    pub inner_tol: f64,
    pub max_inner: usize,
    /// Backhaul rounds stop when the relative change of the BS power falls below this.
    pub outer_tol: f64,
    pub max_outer: usize,
    /// Draw the initial receive beamformers at random instead of using the
    /// dominant left singular vectors.
    pub random_receive_init: bool,
    pub receive_seed: u64,
}

impl Default for CccpConfig {
    fn default() -> Self {
        Self {
            inner_tol: 1e-4,
            max_inner: 50,
            outer_tol: 1e-3,
            max_outer: 10,
            random_receive_init: false,
            receive_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord<T> {
    pub iteration: usize,
    /// Tangent-plane value at the new iterate (equals `gamma_t` for iteration 0).
    pub surrogate: T,
    pub gamma_t: T,
    pub max_residual: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CccpState<T> {
    pub iterate: PrecoderSolution<T>,
    pub trace: Vec<TraceRecord<T>>,
    pub iterations: usize,
    pub converged: bool,
    /// Backhaul receive-beamformer rounds (0 for tethered).
    pub outer_rounds: usize,
}

/// Real-variable layout of the access precoders.
///
/// UAV `k` owns `n_streams` columns of dimension `dims[k]`, each stored as
/// interleaved (re, im) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessLayout {
    pub n_streams: usize,
    pub dims: Vec<usize>,
    offsets: Vec<usize>,
    n_vars: usize,
}

impl AccessLayout {
    pub fn new(n_streams: usize, dims: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(dims.len());
        let mut acc = 0;
        for &d in &dims {
            offsets.push(acc);
            acc += 2 * n_streams * d;
        }
        Self {
            n_streams,
            dims,
            offsets,
            n_vars: acc,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_tx(&self) -> usize {
        self.dims.len()
    }

    /// Index of the real part of element `m` of stream `s` at UAV `k`.
    pub fn index(&self, k: usize, s: usize, m: usize) -> usize {
        self.offsets[k] + 2 * (s * self.dims[k] + m)
    }

    /// All variable indices of UAV `k`.
    pub fn uav_range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k] + 2 * self.n_streams * self.dims[k]
    }
}

/// Access channels expressed in per-UAV coordinates.
///
/// With a basis `Q_k` the physical precoder is `W_k = Q_k Y_k`; the channels
/// become `Q_k^H c`. Without a basis the coordinates are the antennas.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessModel<T> {
    /// `[uav][ue]`.
    pub ue: Vec<Vec<CVec<T>>>,
    /// `[uav]`.
    pub target: Vec<CVec<T>>,
    basis: Option<Vec<Vec<CVec<T>>>>,
    m_u: usize,
    pub layout: AccessLayout,
}

impl<T: Real> AccessModel<T> {
    /// Antenna coordinates.
    pub fn full(ch: &ChannelRealization<T>) -> Self {
        let ue: Vec<Vec<CVec<T>>> = ch
            .access
            .iter()
            .map(|row| row.iter().map(|c| c.vector.clone()).collect())
            .collect();
        let target = ch.sensing.tx_target.clone();
        let m_u = target.first().map_or(0, |t| t.len());
        let layout = AccessLayout::new(ch.n_ue() + 1, vec![m_u; ch.n_tx()]);
        Self {
            ue,
            target,
            basis: None,
            m_u,
            layout,
        }
    }

    /// Coordinates in the span of each UAV's UE and target channels. Any
    /// precoder component outside that span only consumes power.
    pub fn reduced(ch: &ChannelRealization<T>) -> Self {
        let mut ue = Vec::with_capacity(ch.n_tx());
        let mut target = Vec::with_capacity(ch.n_tx());
        let mut bases = Vec::with_capacity(ch.n_tx());
        let mut dims = Vec::with_capacity(ch.n_tx());
        for k in 0..ch.n_tx() {
            let mut refs: Vec<&[Complex<T>]> =
                ch.access[k].iter().map(|c| c.vector.as_slice()).collect();
            refs.push(&ch.sensing.tx_target[k]);
            let q = orthonormal_basis(&refs, lit(1e-12));
            let proj = |v: &[Complex<T>]| -> CVec<T> { q.iter().map(|b| dot(b, v)).collect() };
            ue.push(ch.access[k].iter().map(|c| proj(&c.vector)).collect());
            target.push(proj(&ch.sensing.tx_target[k]));
            dims.push(q.len());
            bases.push(q);
        }
        let m_u = ch.sensing.tx_target.first().map_or(0, |t| t.len());
        Self {
            ue,
            target,
            basis: Some(bases),
            m_u,
            layout: AccessLayout::new(ch.n_ue() + 1, dims),
        }
    }

    pub fn n_ue(&self) -> usize {
        self.layout.n_streams - 1
    }

    /// Lifts the access part of `sol` into real coordinates (projecting onto
    /// the basis when there is one).
    pub fn to_vars(&self, sol: &PrecoderSolution<T>) -> Vec<T> {
        let lay = &self.layout;
        let mut x = vec![T::zero(); lay.n_vars()];
        for k in 0..lay.n_tx() {
            for s in 0..lay.n_streams {
                let w = sol.stream(k, s);
                let coords: CVec<T> = match &self.basis {
                    Some(b) => b[k].iter().map(|q| dot(q, w)).collect(),
                    None => w.clone(),
                };
                for (m, z) in coords.iter().enumerate() {
                    let i = lay.index(k, s, m);
                    x[i] = z.re;
                    x[i + 1] = z.im;
                }
            }
        }
        x
    }

    /// Inverse of [`Self::to_vars`]; backhaul fields are left empty.
    pub fn from_vars(&self, x: &[T]) -> PrecoderSolution<T> {
        let lay = &self.layout;
        let mut sol = PrecoderSolution::zeros(lay.n_tx(), self.n_ue(), self.m_u);
        for k in 0..lay.n_tx() {
            for s in 0..lay.n_streams {
                let coords: CVec<T> = (0..lay.dims[k])
                    .map(|m| {
                        let i = lay.index(k, s, m);
                        Complex::new(x[i], x[i + 1])
                    })
                    .collect();
                let w = match &self.basis {
                    Some(b) => {
                        let mut w = vec![Complex::zero(); self.m_u];
                        for (q, y) in b[k].iter().zip(&coords) {
                            for (wi, qi) in w.iter_mut().zip(q) {
                                *wi += *qi * *y;
                            }
                        }
                        w
                    }
                    None => coords,
                };
                *sol.stream_mut(k, s) = w;
            }
        }
        sol
    }

    /// `(Re, Im)` of `c^H y_{k,s}` as affine expressions.
    fn functional(&self, k: usize, s: usize, c: &[Complex<T>]) -> (AffineExpr<T>, AffineExpr<T>) {
        let mut re = AffineExpr::constant(T::zero());
        let mut im = AffineExpr::constant(T::zero());
        for (m, cm) in c.iter().enumerate() {
            let i = self.layout.index(k, s, m);
            re.add_term(i, cm.re);
            re.add_term(i + 1, cm.im);
            im.add_term(i + 1, cm.re);
            im.add_term(i, -cm.im);
        }
        (re, im)
    }

    /// `(Re, Im)` of UE `j`'s received amplitude from stream `s` over all UAVs.
    fn ue_amplitude(&self, j: usize, s: usize) -> (AffineExpr<T>, AffineExpr<T>) {
        let mut re = AffineExpr::constant(T::zero());
        let mut im = AffineExpr::constant(T::zero());
        for k in 0..self.layout.n_tx() {
            let (r, i) = self.functional(k, s, &self.ue[k][j]);
            re.terms.extend(r.terms);
            im.terms.extend(i.terms);
        }
        (re, im)
    }
}

/// Standard SINR cone for a desired amplitude `a_0` and interfering
/// amplitudes `a_i`: `||[a_i / sigma; 1]|| <= Re(a_0) / (sigma sqrt(gamma))`
/// together with `Im(a_0) = 0`. Equivalent to `|a_0|^2 / (sum |a_i|^2 +
/// sigma^2) >= gamma` once the common phase is fixed.
fn sinr_cone<T: Real>(
    desired: (AffineExpr<T>, AffineExpr<T>),
    interferers: Vec<(AffineExpr<T>, AffineExpr<T>)>,
    sigma: T,
    gamma: T,
) -> (SocBlock<T>, AffineExpr<T>) {
    let inv = T::one() / sigma;
    let mut tail = Vec::with_capacity(2 * interferers.len() + 1);
    for (re, im) in interferers {
        tail.push(re.scaled(inv));
        tail.push(im.scaled(inv));
    }
    tail.push(AffineExpr::constant(T::one()));
    let head = desired.0.scaled(inv / gamma.sqrt());
    (SocBlock { head, tail }, desired.1)
}

/// UE `j`'s SINR constraint in the coordinates of `model`. The cone tail
/// lists every stream except `j`, so the cone is equivalent to `gamma_j >=
/// gamma` (the form with all streams in the tail and `sqrt(1 + 1/gamma)` on
/// the head is algebraically the same set).
pub fn ue_soc_constraint<T: Real>(
    model: &AccessModel<T>,
    j: usize,
    gamma: T,
    sigma: T,
) -> (SocBlock<T>, AffineExpr<T>) {
    let interferers = (0..model.layout.n_streams)
        .filter(|&s| s != j)
        .map(|s| model.ue_amplitude(j, s))
        .collect();
    sinr_cone(model.ue_amplitude(j, j), interferers, sigma, gamma)
}

/// UE `j`'s cone with the desired amplitude `a_0` measured along the unit
/// phase `phase`: `Re(conj(phase) a_0)` takes the place of `Re(a_0)` and no
/// equality is imposed. Since `Re(conj(phase) a_0) <= |a_0|` the cone lies
/// inside the SINR constraint and touches it where `a_0` has that phase, so
/// each CCCP step can move the stream phases.
pub fn ue_soc_constraint_along<T: Real>(
    model: &AccessModel<T>,
    j: usize,
    gamma: T,
    sigma: T,
    phase: Complex<T>,
) -> SocBlock<T> {
    let interferers = (0..model.layout.n_streams)
        .filter(|&s| s != j)
        .map(|s| model.ue_amplitude(j, s))
        .collect();
    let (re, im) = model.ue_amplitude(j, j);
    let mut along = re.scaled(phase.re);
    let im = im.scaled(phase.im);
    along.terms.extend(im.terms);
    along.constant = along.constant + im.constant;
    let (cone, _) = sinr_cone((along, AffineExpr::constant(T::zero())), interferers, sigma, gamma);
    cone
}

/// UE `j`'s SINR cone over antenna coordinates of `ch`.
pub fn build_ue_soc_constraint<T: Real>(
    j: usize,
    ch: &ChannelRealization<T>,
    gamma: T,
    sigma: T,
) -> (SocBlock<T>, AffineExpr<T>) {
    ue_soc_constraint(&AccessModel::full(ch), j, gamma, sigma)
}

/// Real layout of the backhaul precoders: `n_tx` vectors of length `m_bs`.
fn backhaul_index(m_bs: usize, l: usize, m: usize) -> usize {
    2 * (l * m_bs + m)
}

fn backhaul_functional<T: Real>(
    m_bs: usize,
    l: usize,
    e: &[Complex<T>],
) -> (AffineExpr<T>, AffineExpr<T>) {
    let mut re = AffineExpr::constant(T::zero());
    let mut im = AffineExpr::constant(T::zero());
    for (m, c) in e.iter().enumerate() {
        let i = backhaul_index(m_bs, l, m);
        re.add_term(i, c.re);
        re.add_term(i + 1, c.im);
        im.add_term(i + 1, c.re);
        im.add_term(i, -c.im);
    }
    (re, im)
}

/// Backhaul SINR cone of UAV `k` for the effective channel `H_k^H u_k`, with
/// noise amplitude `sigma ||u_k||`. Variables are the stacked backhaul
/// precoders in (re, im) pairs.
pub fn build_backhaul_soc_constraint<T: Real>(
    k: usize,
    ch: &ChannelRealization<T>,
    u: &[Complex<T>],
    gamma_b: T,
    sigma: T,
) -> (SocBlock<T>, AffineExpr<T>) {
    let m_bs = ch.backhaul[k].m_bs;
    let e = backhaul_effective(ch, k, u);
    let interferers = (0..ch.n_tx())
        .filter(|&l| l != k)
        .map(|l| backhaul_functional(m_bs, l, &e))
        .collect();
    sinr_cone(backhaul_functional(m_bs, k, &e), interferers, sigma * norm(u), gamma_b)
}

/// Tangent plane of the sensing SINR over the lifted variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedObjective<T> {
    pub gradient: Vec<T>,
    pub constant: T,
}

impl<T: Real> LinearizedObjective<T> {
    pub fn eval(&self, x: &[T]) -> T {
        self.gradient.iter().zip(x).map(|(g, v)| *g * *v).sum::<T>() + self.constant
    }
}

/// Per-UAV weights `zeta / d_kt^2`.
fn sensing_weights<T: Real>(problem: &PrecoderProblem<'_, T>) -> Vec<T> {
    let geom = &problem.channels.sensing;
    let zeta = sensing_zeta(geom, &problem.noise, problem.symbols.block_len());
    geom.d_tx.iter().map(|d| zeta / (*d * *d)).collect()
}

/// Tangent plane of the sensing SINR at `x0` in the coordinates of `model`.
///
/// With `g_k = t_k^H W_k` and `S = sum_n s[n] s[n]^H`, the objective is
/// `sum_k c_k g_k S g_k^H` and its tangent is
/// `sum_k c_k (2 Re(g0_k S g_k^H) - g0_k S g0_k^H)`.
pub fn linearize_in<T: Real>(
    model: &AccessModel<T>,
    problem: &PrecoderProblem<'_, T>,
    x0: &[T],
) -> LinearizedObjective<T> {
    let lay = &model.layout;
    let weights = sensing_weights(problem);
    let s_mat = problem.symbols.gram();
    let mut gradient = vec![T::zero(); lay.n_vars()];
    let mut constant = T::zero();
    for k in 0..lay.n_tx() {
        let t = &model.target[k];
        let g0: CVec<T> = (0..lay.n_streams)
            .map(|s| {
                (0..lay.dims[k])
                    .map(|m| {
                        let i = lay.index(k, s, m);
                        t[m].conj() * Complex::new(x0[i], x0[i + 1])
                    })
                    .sum()
            })
            .collect();
        // r = g0 S
        let r: CVec<T> = (0..lay.n_streams)
            .map(|c| (0..lay.n_streams).map(|a| g0[a] * s_mat[(a, c)]).sum())
            .collect();
        let quad: T = r.iter().zip(&g0).map(|(a, b)| (*a * b.conj()).re).sum();
        constant -= weights[k] * quad;
        let two_c = lit::<T>(2.0) * weights[k];
        for s in 0..lay.n_streams {
            for m in 0..lay.dims[k] {
                let z = r[s] * t[m];
                let i = lay.index(k, s, m);
                gradient[i] = two_c * z.re;
                gradient[i + 1] = two_c * z.im;
            }
        }
    }
    LinearizedObjective { gradient, constant }
}

/// Tangent plane of the sensing SINR at `w_prev` over antenna coordinates.
pub fn linearize_objective<T: Real>(
    problem: &PrecoderProblem<'_, T>,
    w_prev: &PrecoderSolution<T>,
) -> (AccessModel<T>, LinearizedObjective<T>) {
    let model = AccessModel::full(problem.channels);
    let x0 = model.to_vars(w_prev);
    let lin = linearize_in(&model, problem, &x0);
    (model, lin)
}

/// Feasible set of the access precoders. Without `phases` the UE cones fix
/// each desired amplitude to be real; with them each is measured along the
/// given phase.
fn access_constraints<T: Real>(
    model: &AccessModel<T>,
    problem: &PrecoderProblem<'_, T>,
    phases: Option<&[Complex<T>]>,
    program: &mut ConicProgram<T>,
) {
    let sigma = problem.noise.ue.sqrt();
    if problem.qos.ue > T::zero() {
        for j in 0..model.n_ue() {
            match phases {
                Some(p) => program.cones.push(ue_soc_constraint_along(model, j, problem.qos.ue, sigma, p[j])),
                None => {
                    let (cone, eq) = ue_soc_constraint(model, j, problem.qos.ue, sigma);
                    program.cones.push(cone);
                    program.equalities.push(eq);
                }
            }
        }
    }
    let lay = &model.layout;
    match problem.budget {
        PowerBudget::PerUav { uav, .. } => {
            for k in 0..lay.n_tx() {
                program.cones.push(SocBlock {
                    head: AffineExpr::constant(uav.sqrt()),
                    tail: lay.uav_range(k).map(AffineExpr::var).collect(),
                });
            }
        }
        PowerBudget::Pooled { total } => {
            program.cones.push(SocBlock {
                head: AffineExpr::constant(total.sqrt()),
                tail: (0..lay.n_vars()).map(AffineExpr::var).collect(),
            });
        }
    }
}

/// Power-only view of the SINR constraints: largest violation in dB.
fn ue_margin_db<T: Real>(problem: &PrecoderProblem<'_, T>, sol: &PrecoderSolution<T>) -> (T, Vec<ConstraintId>) {
    let mut worst = T::infinity();
    let mut violated = Vec::new();
    for j in 0..sol.n_ue() {
        let g = ue_sinr(j, problem.channels, sol, problem.noise.ue);
        let m = to_db(g) - to_db(problem.qos.ue);
        if m < -lit::<T>(crate::sinr::SINR_TOL_DB) {
            violated.push(ConstraintId::Ue(j));
        }
        worst = worst.min(m);
    }
    (worst, violated)
}

fn ue_feasible<T: Real>(problem: &PrecoderProblem<'_, T>, sol: &PrecoderSolution<T>) -> bool {
    let thr = problem.qos.ue;
    if thr <= T::zero() {
        return true;
    }
    // a hair above the threshold so the later checks pass with margin
    let need = to_db(thr) + lit(1e-6);
    (0..sol.n_ue()).all(|j| {
        let g = ue_sinr(j, problem.channels, sol, problem.noise.ue);
        g > T::zero() && to_db(g) >= need
    })
}

/// Adds a ZF target beam to the sensing stream of each UAV so that it uses
/// its whole budget. UE SINRs are unchanged because the beam nulls every UE.
fn fill_with_target_beam<T: Real>(
    sol: &mut PrecoderSolution<T>,
    beams_target: &[CVec<T>],
    budgets: &[T],
) {
    for (k, v) in beams_target.iter().enumerate() {
        let used = sol.uav_power(k);
        let spare = budgets[k] - used;
        if spare <= T::zero() {
            continue;
        }
        let w = &sol.sensing[k];
        let b = dot(v, w).re;
        let a = -b + (b * b + spare).sqrt();
        let ac = Complex::from(a);
        for (wi, vi) in sol.sensing[k].iter_mut().zip(v) {
            *wi += *vi * ac;
        }
    }
}

/// Feasible access precoders that meet every UE threshold and budget.
///
/// Fast path: ZF directions with the UE share of each budget and a bisection
/// on the sensing fraction. Otherwise a minimum-power program over the UE
/// cones; its unused power is then put on ZF target beams.
pub fn initialize_feasible<T: Real>(
    problem: &PrecoderProblem<'_, T>,
) -> Result<PrecoderSolution<T>, CccpError> {
    let budgets = problem.per_uav_budgets();
    let beams = ZfBeams::compute(problem.channels).ok();
    if let Some(beams) = &beams {
        let at = |f: T| heuristic_power_allocation(beams, &budgets, f);
        if ue_feasible(problem, &at(T::zero())) {
            let mut lo = T::zero();
            let mut hi = T::one();
            if ue_feasible(problem, &at(lit(1.0 - 1e-9))) {
                lo = lit(1.0 - 1e-9);
            } else {
                for _ in 0..50 {
                    let mid = (lo + hi) / lit(2.0);
                    if ue_feasible(problem, &at(mid)) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
            return Ok(at(lo));
        }
    }
    let model = AccessModel::reduced(problem.channels);
    let n = model.layout.n_vars();
    let mut program = ConicProgram::new(n + 1);
    access_constraints(&model, problem, None, &mut program);
    // minimize t with ||x|| <= t
    program.objective[n] = -T::one();
    program.cones.push(SocBlock {
        head: AffineExpr::var(n),
        tail: (0..n).map(AffineExpr::var).collect(),
    });
    match solve_conic(&program) {
        Ok(s) => {
            let mut sol = model.from_vars(&s.x[..n]);
            if let Some(beams) = &beams {
                fill_with_target_beam(&mut sol, &beams.target, &budgets);
            }
            // guard against solver round-off on the budget
            shrink_to_budget(problem, &mut sol);
            Ok(sol)
        }
        Err(ConicError::Infeasible) => {
            let probe = beams
                .as_ref()
                .map(|b| heuristic_power_allocation(b, &budgets, T::zero()))
                .unwrap_or_else(|| {
                    PrecoderSolution::zeros(problem.channels.n_tx(), problem.channels.n_ue(), model.m_u)
                });
            let (margin, mut violated) = ue_margin_db(problem, &probe);
            if violated.is_empty() {
                violated = (0..problem.channels.n_ue()).map(ConstraintId::Ue).collect();
            }
            Err(CccpError::Infeasible {
                violated,
                margin_db: margin.to_f64().unwrap_or(f64::NEG_INFINITY),
            })
        }
        Err(e) => Err(e.into()),
    }
}

/// Scales UAV precoders down when round-off put them above budget.
fn shrink_to_budget<T: Real>(problem: &PrecoderProblem<'_, T>, sol: &mut PrecoderSolution<T>) {
    match problem.budget {
        PowerBudget::PerUav { uav, .. } => {
            for k in 0..sol.n_tx() {
                let p = sol.uav_power(k);
                if p > uav {
                    let s = Complex::from((uav / p).sqrt());
                    for j in 0..sol.n_ue() {
                        sol.ue[k][j].iter_mut().for_each(|z| *z *= s);
                    }
                    sol.sensing[k].iter_mut().for_each(|z| *z *= s);
                }
            }
        }
        PowerBudget::Pooled { total } => {
            let p = sol.access_power();
            if p > total {
                sol.scale_access((total / p).sqrt());
            }
        }
    }
}

/// CCCP over the access precoders starting from a feasible `init`.
pub fn optimize_access_from<T: Real>(
    problem: &PrecoderProblem<'_, T>,
    init: &PrecoderSolution<T>,
    cfg: &CccpConfig,
) -> Result<CccpState<T>, CccpError> {
    let model = AccessModel::reduced(problem.channels);
    let mut x = model.to_vars(init);
    let mut current = model.from_vars(&x);
    let mut gamma = problem.gamma_t(&current);
    let program_at = |sol: &PrecoderSolution<T>| {
        let phases: Vec<Complex<T>> = (0..problem.channels.n_ue())
            .map(|j| {
                let a = ue_gain(problem.channels, sol, j, j);
                if a.norm() > T::zero() {
                    a / a.norm()
                } else {
                    Complex::from(T::one())
                }
            })
            .collect();
        let mut program = ConicProgram::new(model.layout.n_vars());
        access_constraints(&model, problem, Some(&phases), &mut program);
        program
    };
    let mut program = program_at(&current);
    let mut trace = vec![TraceRecord {
        iteration: 0,
        surrogate: gamma,
        gamma_t: gamma,
        max_residual: program.max_violation(&x).max(T::zero()),
    }];
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=cfg.max_inner {
        let lin = linearize_in(&model, problem, &x);
        let scale = lin
            .gradient
            .iter()
            .fold(T::zero(), |a, g| a.max(g.abs()));
        if scale == T::zero() {
            // every stream is orthogonal to the target channels
            converged = true;
            break;
        }
        program.objective = lin.gradient.iter().map(|g| *g / scale).collect();
        let sol = solve_conic(&program)?;
        iterations = it;
        let candidate = model.from_vars(&sol.x);
        let surrogate = lin.eval(&sol.x);
        let new_gamma = problem.gamma_t(&candidate);
        if !(new_gamma >= gamma) {
            converged = true;
            break;
        }
        let improvement = (surrogate - gamma) / gamma.max(T::min_positive_value());
        x = sol.x;
        current = candidate;
        gamma = new_gamma;
        trace.push(TraceRecord {
            iteration: it,
            surrogate,
            gamma_t: gamma,
            max_residual: program.max_violation(&x).max(T::zero()),
        });
        program = program_at(&current);
        if improvement < lit(cfg.inner_tol) {
            converged = true;
            break;
        }
    }
    shrink_to_budget(problem, &mut current);
    Ok(CccpState {
        iterate: current,
        trace,
        iterations,
        converged,
        outer_rounds: 0,
    })
}

/// Tethered design: pooled power, no backhaul variables.
pub fn optimize_precoders_tethered<T: Real>(
    problem: &PrecoderProblem<'_, T>,
    cfg: &CccpConfig,
) -> Result<(PrecoderSolution<T>, CccpState<T>), CccpError> {
    let init = initialize_feasible(problem)?;
    let state = optimize_access_from(problem, &init, cfg)?;
    Ok((state.iterate.clone(), state))
}

/// Result of the backhaul design.
#[derive(Debug, Clone, PartialEq)]
pub struct BackhaulDesign<T> {
    pub precoders: Vec<CVec<T>>,
    pub receivers: Vec<CVec<T>>,
    pub rounds: usize,
}

fn initial_receivers<T: Real>(ch: &ChannelRealization<T>, cfg: &CccpConfig) -> Vec<CVec<T>> {
    (0..ch.n_tx())
        .map(|k| {
            if cfg.random_receive_init {
                let mut rng = stream_rng(cfg.receive_seed, Stream::ReceiveInit { uav: k });
                (0..ch.backhaul[k].m_ub)
                    .map(|_| complex_normal(&mut rng, T::one()))
                    .collect()
            } else {
                dominant_left_singular(&ch.backhaul[k].matrix)
            }
        })
        .collect()
}

/// Minimum-power backhaul precoders meeting every backhaul threshold for
/// fixed receivers `u`, within the BS budget.
fn backhaul_min_power<T: Real>(
    problem: &PrecoderProblem<'_, T>,
    u: &[CVec<T>],
    p_b: T,
) -> Result<Vec<CVec<T>>, ConicError> {
    let ch = problem.channels;
    let n_tx = ch.n_tx();
    let m_bs = ch.backhaul.first().map_or(0, |b| b.m_bs);
    let n = 2 * n_tx * m_bs;
    let mut program = ConicProgram::new(n + 1);
    let sigma = problem.noise.backhaul.sqrt();
    // Without a positive threshold the design degenerates to zero power; ask
    // for a positive SINR anyway so the link carries a signal.
    let gamma_b = problem.qos.backhaul.max(lit(1e-6));
    for k in 0..n_tx {
        let (cone, eq) = build_backhaul_soc_constraint(k, ch, &u[k], gamma_b, sigma);
        program.cones.push(cone);
        program.equalities.push(eq);
    }
    program.objective[n] = -T::one();
    program.cones.push(SocBlock {
        head: AffineExpr::var(n),
        tail: (0..n).map(AffineExpr::var).collect(),
    });
    let mut cap = AffineExpr::var(n).scaled(-T::one());
    cap.constant = p_b.sqrt();
    program.nonnegative.push(cap);
    let sol = solve_conic(&program)?;
    let mut w: Vec<CVec<T>> = (0..n_tx)
        .map(|l| {
            (0..m_bs)
                .map(|m| {
                    let i = backhaul_index(m_bs, l, m);
                    Complex::new(sol.x[i], sol.x[i + 1])
                })
                .collect()
        })
        .collect();
    let used: T = w.iter().map(|v| norm_sqr(v)).sum();
    if used > p_b {
        let s = Complex::from((p_b / used).sqrt());
        w.iter_mut().flatten().for_each(|z| *z *= s);
    }
    Ok(w)
}

/// Backhaul precoders and receive beamformers: minimum-power SOCP for fixed
/// receivers alternated with MMSE receiver updates.
pub fn design_backhaul<T: Real>(
    problem: &PrecoderProblem<'_, T>,
    cfg: &CccpConfig,
) -> Result<BackhaulDesign<T>, CccpError> {
    let ch = problem.channels;
    let p_b = match problem.budget {
        PowerBudget::PerUav { bs, .. } => bs,
        PowerBudget::Pooled { .. } => panic!("backhaul design needs a per-UAV budget"),
    };
    let sigma2 = problem.noise.backhaul;
    let mut u = initial_receivers(ch, cfg);
    let mut w = match backhaul_min_power(problem, &u, p_b) {
        Ok(w) => w,
        Err(ConicError::Infeasible) => {
            // One restart from ZF precoders and their MMSE receivers.
            let fallback = zf_backhaul_fallback(problem, &u, p_b);
            u = fallback.receivers;
            backhaul_min_power(problem, &u, p_b).map_err(|e| match e {
                ConicError::Infeasible => backhaul_infeasible(problem, &fallback.precoders, &u),
                other => other.into(),
            })?
        }
        Err(e) => return Err(e.into()),
    };
    let mut power: T = w.iter().map(|v| norm_sqr(v)).sum();
    let mut rounds = 1;
    while rounds < cfg.max_outer {
        let next_u: Vec<CVec<T>> = match (0..ch.n_tx())
            .map(|k| mmse_receiver(k, &ch.backhaul[k].matrix, &w, sigma2))
            .collect::<Result<Vec<_>, _>>()
        {
            Ok(v) => v,
            Err(_) => break,
        };
        let next_w = match backhaul_min_power(problem, &next_u, p_b) {
            Ok(v) => v,
            Err(_) => break,
        };
        rounds += 1;
        let next_power: T = next_w.iter().map(|v| norm_sqr(v)).sum();
        let change = (power - next_power).abs() / power.max(T::min_positive_value());
        u = next_u;
        w = next_w;
        power = next_power;
        if change < lit(cfg.outer_tol) {
            break;
        }
    }
    Ok(BackhaulDesign {
        precoders: w,
        receivers: u,
        rounds,
    })
}

/// ZF backhaul precoders at equal shares of `p_b` against the effective
/// channels of receivers `u`, with MMSE receivers recomputed for them.
pub fn zf_backhaul_fallback<T: Real>(
    problem: &PrecoderProblem<'_, T>,
    u: &[CVec<T>],
    p_b: T,
) -> BackhaulDesign<T> {
    let ch = problem.channels;
    let n = ch.n_tx();
    let eff: Vec<CVec<T>> = (0..n).map(|k| backhaul_effective(ch, k, &u[k])).collect();
    let share = (p_b / lit(n as f64)).sqrt();
    let zf: Vec<CVec<T>> = (0..n)
        .map(|k| {
            let d = zf_backhaul_direction(k, &eff)
                .map(|d| d.vector)
                .unwrap_or_else(|_| {
                    let s = Complex::from(T::one() / norm(&eff[k]).max(T::min_positive_value()));
                    eff[k].iter().map(|z| *z * s).collect()
                });
            d.iter().map(|z| *z * share).collect()
        })
        .collect();
    let receivers = (0..n)
        .map(|k| {
            mmse_receiver(k, &ch.backhaul[k].matrix, &zf, problem.noise.backhaul)
                .unwrap_or_else(|_| u[k].clone())
        })
        .collect();
    BackhaulDesign {
        precoders: zf,
        receivers,
        rounds: 1,
    }
}

/// Initial receive beamformers: dominant left singular vectors, or random
/// draws when configured.
pub fn initial_backhaul_receivers<T: Real>(ch: &ChannelRealization<T>, cfg: &CccpConfig) -> Vec<CVec<T>> {
    initial_receivers(ch, cfg)
}

fn backhaul_infeasible<T: Real>(
    problem: &PrecoderProblem<'_, T>,
    w: &[CVec<T>],
    u: &[CVec<T>],
) -> CccpError {
    let ch = problem.channels;
    let mut sol = PrecoderSolution::zeros(ch.n_tx(), 0, 0);
    sol.backhaul = w.to_vec();
    sol.receive = u.to_vec();
    let mut margin = f64::INFINITY;
    let mut violated = Vec::new();
    for k in 0..ch.n_tx() {
        let g = backhaul_sinr(k, ch, &sol, problem.noise.backhaul).unwrap_or(T::zero());
        let m = (to_db(g) - to_db(problem.qos.backhaul)).to_f64().unwrap_or(f64::NEG_INFINITY);
        if m < 0.0 {
            violated.push(ConstraintId::Backhaul(k));
        }
        margin = margin.min(m);
    }
    if violated.is_empty() {
        violated = (0..ch.n_tx()).map(ConstraintId::Backhaul).collect();
    }
    CccpError::Infeasible {
        violated,
        margin_db: margin,
    }
}

/// Mobile/fixed design: access CCCP under per-UAV budgets plus the backhaul
/// design. `init` warm-starts the access part.
pub fn optimize_precoders_mobile_from<T: Real>(
    problem: &PrecoderProblem<'_, T>,
    init: Option<&PrecoderSolution<T>>,
    cfg: &CccpConfig,
) -> Result<(PrecoderSolution<T>, CccpState<T>), CccpError> {
    let backhaul = design_backhaul(problem, cfg)?;
    let start = match init {
        Some(w) => w.clone(),
        None => initialize_feasible(problem)?,
    };
    let mut state = optimize_access_from(problem, &start, cfg)?;
    state.iterate.backhaul = backhaul.precoders;
    state.iterate.receive = backhaul.receivers;
    state.outer_rounds = backhaul.rounds;
    Ok((state.iterate.clone(), state))
}

pub fn optimize_precoders_mobile<T: Real>(
    problem: &PrecoderProblem<'_, T>,
    cfg: &CccpConfig,
) -> Result<(PrecoderSolution<T>, CccpState<T>), CccpError> {
    optimize_precoders_mobile_from(problem, None, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::dbm_to_watts;
    use crate::linalg::CMatrix;
    use crate::precoders::{heuristic_power_allocation, ZfBeams};
    use crate::scalar::from_db;
    use crate::scene::fixtures::{pooled_budget, random_scene, InstanceShape};
    use crate::scene::Scene;
    use nalgebra::DMatrix;
    use rand::RngExt;

    type C = Complex<f64>;

    fn desk(seed: u64) -> Scene<f64> {
        random_scene(seed, &InstanceShape::desk())
    }

    fn random_solution(scene: &Scene<f64>, seed: u64, var: f64) -> PrecoderSolution<f64> {
        let mut rng = stream_rng(seed, Stream::Echo);
        let ch = &scene.channels;
        let m_u = scene.arrays.access_elements();
        let mut sol = PrecoderSolution::zeros(ch.n_tx(), ch.n_ue(), m_u);
        for k in 0..ch.n_tx() {
            for s in 0..=ch.n_ue() {
                *sol.stream_mut(k, s) = (0..m_u).map(|_| complex_normal(&mut rng, var)).collect();
            }
        }
        sol
    }

    fn cone_slack(cone: &SocBlock<f64>, x: &[f64]) -> (f64, f64) {
        let tail = cone.tail.iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
        (cone.head.eval(x), tail)
    }

    #[test]
    fn equality_tight_ue_cone_meets_threshold_exactly() {
        let scene = desk(1);
        let ch = &scene.channels;
        let gamma = from_db(3.0);
        let sigma = scene.noise.ue.sqrt();
        let mut sol = random_solution(&scene, 1, 1e-3);
        let model = AccessModel::full(ch);
        for j in 0..ch.n_ue() {
            // rotate stream j so its received amplitude is real and positive
            let a = crate::sinr::ue_gain(ch, &sol, j, j);
            let rot = a.conj() / a.norm();
            for k in 0..ch.n_tx() {
                sol.ue[k][j].iter_mut().for_each(|z| *z *= rot);
            }
            let (cone, eq) = build_ue_soc_constraint(j, ch, gamma, sigma);
            let x = model.to_vars(&sol);
            assert!(eq.eval(&x).abs() < 1e-12 * cone.head.eval(&x).abs().max(1e-300));
            // the head is linear in stream j and the tail does not depend on it
            let (head, tail) = cone_slack(&cone, &x);
            let c = tail / head;
            for k in 0..ch.n_tx() {
                sol.ue[k][j].iter_mut().for_each(|z| *z *= c);
            }
            let x = model.to_vars(&sol);
            let (head, tail) = cone_slack(&cone, &x);
            assert!((head - tail).abs() <= 1e-12 * tail);
            let g = ue_sinr(j, ch, &sol, scene.noise.ue);
            assert!((g - gamma).abs() <= 1e-6 * gamma, "{g} vs {gamma}");
        }
    }

    #[test]
    fn vanishing_threshold_makes_ue_cone_vacuous() {
        let scene = desk(2);
        let ch = &scene.channels;
        let mut sol = random_solution(&scene, 2, 1e-3);
        let a = crate::sinr::ue_gain(ch, &sol, 0, 0);
        let rot = a.conj() / a.norm();
        for k in 0..ch.n_tx() {
            sol.ue[k][0].iter_mut().for_each(|z| *z *= rot);
        }
        let x = AccessModel::full(ch).to_vars(&sol);
        let (cone, _) = build_ue_soc_constraint(0, ch, 1e-300, scene.noise.ue.sqrt());
        let (head, tail) = cone_slack(&cone, &x);
        assert!(head > tail);
    }

    #[test]
    fn equality_tight_backhaul_cone_meets_threshold_exactly() {
        let scene = desk(3);
        let ch = &scene.channels;
        let mut rng = stream_rng(3, Stream::Echo);
        let m_bs = ch.backhaul[0].m_bs;
        let gamma_b = backhaul_threshold_for(from_db(0.0), 1);
        assert_eq!(gamma_b, 1.0);
        let gamma_b = from_db(10.0);
        let sigma = scene.noise.backhaul.sqrt();
        let mut w: Vec<CVec<f64>> = (0..3)
            .map(|_| (0..m_bs).map(|_| complex_normal(&mut rng, 1e-2)).collect())
            .collect();
        let u = initial_backhaul_receivers(ch, &CccpConfig::default());
        let flat = |w: &[CVec<f64>]| -> Vec<f64> { w.iter().flatten().flat_map(|z| [z.re, z.im]).collect() };
        for k in 0..3 {
            let e = backhaul_effective(ch, k, &u[k]);
            let a = dot(&e, &w[k]);
            let rot = a.conj() / a.norm();
            w[k].iter_mut().for_each(|z| *z *= rot);
            let (cone, eq) = build_backhaul_soc_constraint(k, ch, &u[k], gamma_b, sigma);
            assert!(eq.eval(&flat(&w)).abs() <= 1e-12 * cone.head.eval(&flat(&w)));
            let (head, tail) = cone_slack(&cone, &flat(&w));
            let c = tail / head;
            w[k].iter_mut().for_each(|z| *z *= c);
            let mut sol = PrecoderSolution::zeros(3, 0, 0);
            sol.backhaul = w.clone();
            sol.receive = u.clone();
            let g = backhaul_sinr(k, ch, &sol, scene.noise.backhaul).unwrap();
            assert!((g - gamma_b).abs() <= 1e-6 * gamma_b, "{g}");
            // the cone does not change when u_k is rescaled
            let scaled: CVec<f64> = u[k].iter().map(|z| z * 4.0).collect();
            let (cone2, _) = build_backhaul_soc_constraint(k, ch, &scaled, gamma_b, sigma);
            let (h1, t1) = cone_slack(&cone, &flat(&w));
            let (h2, t2) = cone_slack(&cone2, &flat(&w));
            assert!(((h2 - t2) / 4.0 - (h1 - t1)).abs() <= 1e-9 * h1.abs());
        }
    }

    fn backhaul_threshold_for(gamma: f64, n_ue: usize) -> f64 {
        crate::sinr::backhaul_threshold(gamma, n_ue)
    }

    #[test]
    fn lifting_round_trips_bit_exactly() {
        let scene = desk(4);
        let sol = random_solution(&scene, 4, 1.0);
        let model = AccessModel::full(&scene.channels);
        let x = model.to_vars(&sol);
        assert_eq!(model.from_vars(&x), sol);
        assert_eq!(model.to_vars(&model.from_vars(&x)), x);
        assert_eq!(x.len(), 2 * 3 * 5 * 16);
    }

    #[test]
    fn reduced_coordinates_preserve_every_sinr() {
        let scene = desk(5);
        let sol = random_solution(&scene, 5, 1e-2);
        let model = AccessModel::reduced(&scene.channels);
        let back = model.from_vars(&model.to_vars(&sol));
        let problem = scene.problem();
        let a = problem.report(&sol);
        let b = problem.report(&back);
        for (x, y) in a.ue.iter().zip(&b.ue) {
            assert!((x - y).abs() <= 1e-9 * x);
        }
        assert!((a.sensing - b.sensing).abs() <= 1e-9 * a.sensing);
        assert!(back.access_power() <= sol.access_power());
    }

    #[test]
    fn tangent_touches_and_stays_below() {
        for seed in 0..5 {
            let scene = desk(seed);
            let problem = scene.problem();
            let w0 = random_solution(&scene, seed, 1e-2);
            let (model, lin) = linearize_objective(&problem, &w0);
            let x0 = model.to_vars(&w0);
            let g0 = problem.gamma_t(&w0);
            assert!((lin.eval(&x0) - g0).abs() <= 1e-9 * g0);
            let mut rng = stream_rng(seed + 100, Stream::Echo);
            for _ in 0..100 {
                let scale = 10f64.powf(rng.random::<f64>() * 4.0 - 3.0);
                let x: Vec<f64> = x0.iter().map(|v| v + scale * 0.1 * (rng.random::<f64>() - 0.5)).collect();
                let w = model.from_vars(&x);
                assert!(lin.eval(&x) <= problem.gamma_t(&w) * (1.0 + 1e-12) + 1e-15);
            }
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let scene = desk(6);
        let problem = scene.problem();
        let w0 = random_solution(&scene, 6, 1e-2);
        let (model, lin) = linearize_objective(&problem, &w0);
        let x0 = model.to_vars(&w0);
        let gmax = lin.gradient.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        let h = 1e-5;
        for i in 0..x0.len() {
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (problem.gamma_t(&model.from_vars(&xp)) - problem.gamma_t(&model.from_vars(&xm))) / (2.0 * h);
            let err = (fd - lin.gradient[i]).abs() / lin.gradient[i].abs().max(1e-3 * gmax);
            assert!(err <= 1e-5, "coord {i}: fd {fd} grad {}", lin.gradient[i]);
        }
    }

    #[test]
    fn optimized_access_is_feasible_monotone_and_beats_zf() {
        let cfg = CccpConfig::default();
        for seed in 0..3 {
            let scene = desk(seed);
            let problem = scene.problem();
            let init = initialize_feasible(&problem).unwrap();
            assert!(problem.report(&init).feasible_ue && problem.report(&init).feasible_power);
            let state = optimize_access_from(&problem, &init, &cfg).unwrap();
            for pair in state.trace.windows(2) {
                assert!(pair[1].gamma_t >= pair[0].gamma_t - 1e-8 * pair[0].gamma_t.abs());
            }
            let r = problem.report(&state.iterate);
            assert!(r.feasible_ue && r.feasible_power, "{r:?}");
            let beams = ZfBeams::compute(&scene.channels).unwrap();
            let zf = heuristic_power_allocation(&beams, &problem.per_uav_budgets(), 0.5);
            let zf_gamma = if problem.report(&zf).feasible_ue { problem.gamma_t(&zf) } else { 0.0 };
            assert!(r.sensing >= zf_gamma.max(problem.gamma_t(&init)));
        }
    }

    #[test]
    fn pooled_budget_dominates_per_uav_budget() {
        let cfg = CccpConfig::default();
        for seed in 0..3 {
            let scene = desk(seed);
            let per_uav = scene.problem();
            let init = initialize_feasible(&per_uav).unwrap();
            let mobile = optimize_access_from(&per_uav, &init, &cfg).unwrap();
            let pooled_scene = scene.with_budget(pooled_budget(&scene.budget, 3));
            let (sol, _) = optimize_precoders_tethered(&pooled_scene.problem(), &cfg).unwrap();
            let tethered = pooled_scene.problem().gamma_t(&sol);
            assert!(tethered >= mobile.trace.last().unwrap().gamma_t, "seed {seed}: {tethered}");
        }
    }

    #[test]
    fn unreachable_threshold_is_reported() {
        let shape = InstanceShape {
            gamma_db: 60.0,
            uav_dbm: -30.0,
            ..InstanceShape::desk()
        };
        let scene = random_scene(7, &shape);
        match initialize_feasible(&scene.problem()) {
            Err(CccpError::Infeasible { violated, margin_db }) => {
                assert!(!violated.is_empty());
                assert!(margin_db < 0.0);
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn fast_path_returns_scaled_zf_beams() {
        let scene = desk(8);
        let problem = scene.problem();
        let beams = ZfBeams::compute(&scene.channels).unwrap();
        let equal = heuristic_power_allocation(&beams, &problem.per_uav_budgets(), 0.5);
        assert!(problem.report(&equal).feasible_ue);
        let init = initialize_feasible(&problem).unwrap();
        for k in 0..3 {
            for j in 0..4 {
                let v = &init.ue[k][j];
                let overlap = dot(&beams.ue[k][j], v).norm() / norm(v);
                assert!((overlap - 1.0).abs() < 1e-12);
            }
        }
    }

    /// Largest eigenvalue and eigenvector of the symbol Gram matrix.
    fn top_eigen(s: &CMatrix<f64>) -> (f64, Vec<C>) {
        let m = DMatrix::from_fn(s.rows(), s.cols(), |i, j| s[(i, j)]);
        let eig = m.symmetric_eigen();
        let (i, &lam) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        (lam, eig.eigenvectors.column(i).iter().copied().collect())
    }

    #[test]
    fn single_uav_with_vanishing_threshold_reaches_top_eigenvalue() {
        let shape = InstanceShape {
            n_tx: 1,
            gamma_db: -60.0,
            ..InstanceShape::desk()
        };
        for seed in 0..3 {
            let scene = random_scene(seed, &shape);
            let problem = scene.problem();
            let p = dbm_to_watts(shape.uav_dbm);
            let geom = &scene.channels.sensing;
            let (lam, e) = top_eigen(&scene.symbols.gram());
            let zeta = sensing_zeta(geom, &scene.noise, scene.symbols.block_len());
            let m_u = scene.arrays.access_elements() as f64;
            let closed = zeta / geom.d_tx[0].powi(2) * m_u * p * lam;
            // matched beam: W = t / |t| sqrt(P) e^H
            let t = &geom.tx_target[0];
            let tn = norm(t);
            let mut beam = PrecoderSolution::zeros(1, 4, t.len());
            for s in 0..5 {
                let c = e[s].conj() * p.sqrt() / tn;
                *beam.stream_mut(0, s) = t.iter().map(|z| z * c).collect();
            }
            let evaluated = problem.gamma_t(&beam);
            assert!((evaluated - closed).abs() <= 1e-9 * closed);
            let (sol, _) = optimize_precoders_tethered(&problem, &CccpConfig::default()).unwrap();
            let got = problem.gamma_t(&sol);
            assert!((got - closed).abs() <= 0.01 * closed, "seed {seed}: {got} vs {closed}");
        }
    }

    #[test]
    fn sensing_only_network_matches_matched_beam_value() {
        let shape = InstanceShape { n_ue: 0, ..InstanceShape::desk() };
        let scene = random_scene(9, &shape);
        let geom = &scene.channels.sensing;
        let zeta = sensing_zeta(geom, &scene.noise, scene.symbols.block_len());
        let s_tt: f64 = scene.symbols.slots.iter().map(|s| s[0].norm_sqr()).sum();
        let m_u = scene.arrays.access_elements() as f64;
        let p = dbm_to_watts(shape.uav_dbm);
        let per_uav: f64 = geom.d_tx.iter().map(|d| zeta / (d * d) * m_u * p * s_tt).sum();
        let (sol, _) = optimize_precoders_mobile(&scene.problem(), &CccpConfig::default()).unwrap();
        let got = scene.problem().gamma_t(&sol);
        assert!((got - per_uav).abs() <= 0.01 * per_uav, "{got} vs {per_uav}");
        // pooled: all power on the best-placed UAV
        let total = 3.0 * p;
        let pooled = scene.with_budget(PowerBudget::Pooled { total });
        let best = geom.d_tx.iter().map(|d| zeta / (d * d) * m_u * total * s_tt).fold(0.0, f64::max);
        let (sol, _) = optimize_precoders_tethered(&pooled.problem(), &CccpConfig::default()).unwrap();
        let got = pooled.problem().gamma_t(&sol);
        assert!((got - best).abs() <= 0.01 * best, "{got} vs {best}");
    }

    #[test]
    fn backhaul_design_meets_thresholds_when_reachable() {
        let shape = InstanceShape { gamma_db: -10.0, bs_dbm: 40.0, ..InstanceShape::desk() };
        let mut met = 0;
        for seed in 0..5 {
            let scene = random_scene(seed, &shape);
            let problem = scene.problem();
            if let Ok((sol, state)) = optimize_precoders_mobile(&problem, &CccpConfig::default()) {
                let r = problem.report(&sol);
                assert!(r.feasible(), "seed {seed}: {r:?}");
                assert!(state.outer_rounds >= 1);
                met += 1;
            }
        }
        assert!(met >= 1);
    }
}
