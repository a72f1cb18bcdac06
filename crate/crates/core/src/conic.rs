//! Linear-objective second-order cone programs over real variables.
//!
//! Programs are assembled from sparse affine expressions and handed to the
//! clarabel interior-point solver.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, SecondOrderConeT, SolverStatus,
    SupportedConeT, ZeroConeT,
};
use thiserror::Error;

use crate::scalar::{lit, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("conic program is primal infeasible")]
    Infeasible,
    #[error("conic program is unbounded")]
    Unbounded,
    #[error("conic solver failed: {0}")]
    Numerical(String),
}

/// `sum_i a_i x_i + c` with sparse coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineExpr<T> {
    pub terms: Vec<(usize, T)>,
    pub constant: T,
}

impl<T: Real> AffineExpr<T> {
    pub fn constant(c: T) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(i: usize) -> Self {
        Self {
            terms: vec![(i, T::one())],
            constant: T::zero(),
        }
    }

    pub fn add_term(&mut self, i: usize, a: T) {
        if a != T::zero() {
            self.terms.push((i, a));
        }
    }

    pub fn scaled(mut self, s: T) -> Self {
        self.terms.iter_mut().for_each(|(_, a)| *a = *a * s);
        self.constant = self.constant * s;
        self
    }

    pub fn eval(&self, x: &[T]) -> T {
        self.terms.iter().map(|&(i, a)| a * x[i]).sum::<T>() + self.constant
    }
}

/// `||tail||_2 <= head`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocBlock<T> {
    pub head: AffineExpr<T>,
    pub tail: Vec<AffineExpr<T>>,
}

/// Maximize `objective^T x` subject to equalities `e(x) = 0`, inequalities
/// `e(x) >= 0` and second-order cones.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram<T> {
    pub n_vars: usize,
    pub objective: Vec<T>,
    pub equalities: Vec<AffineExpr<T>>,
    pub nonnegative: Vec<AffineExpr<T>>,
    pub cones: Vec<SocBlock<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    pub iterations: u32,
    /// Solver reported reduced accuracy.
    pub reduced_accuracy: bool,
}

impl<T: Real> ConicProgram<T> {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            objective: vec![T::zero(); n_vars],
            equalities: Vec::new(),
            nonnegative: Vec::new(),
            cones: Vec::new(),
        }
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).map(|(c, v)| *c * *v).sum()
    }

    /// Largest violation of any constraint at `x` (zero when feasible).
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for e in &self.equalities {
            worst = worst.max(e.eval(x).abs());
        }
        for e in &self.nonnegative {
            worst = worst.max(-e.eval(x));
        }
        for c in &self.cones {
            let t = c.tail.iter().map(|e| e.eval(x).powi(2)).sum::<T>().sqrt();
            worst = worst.max(t - c.head.eval(x));
        }
        worst
    }
}

/// Interior-point solve of `program`.
pub fn solve_conic<T: Real>(program: &ConicProgram<T>) -> Result<ConicSolution<T>, ConicError> {
    for c in &program.cones {
        assert!(!c.tail.is_empty(), "cone blocks need dimension at least 2");
    }
    let n = program.n_vars;
    let mut rows: Vec<usize> = Vec::new();
    let mut cols: Vec<usize> = Vec::new();
    let mut vals: Vec<T> = Vec::new();
    let mut b: Vec<T> = Vec::new();
    let mut cones: Vec<SupportedConeT<T>> = Vec::new();
    // Row for `s = e(x)`: -a^T x + s = c.
    let mut push = |e: &AffineExpr<T>, b: &mut Vec<T>| {
        let r = b.len();
        for &(i, a) in &e.terms {
            rows.push(r);
            cols.push(i);
            vals.push(-a);
        }
        b.push(e.constant);
    };
    if !program.equalities.is_empty() {
        for e in &program.equalities {
            push(e, &mut b);
        }
        cones.push(ZeroConeT(program.equalities.len()));
    }
    if !program.nonnegative.is_empty() {
        for e in &program.nonnegative {
            push(e, &mut b);
        }
        cones.push(NonnegativeConeT(program.nonnegative.len()));
    }
    for c in &program.cones {
        push(&c.head, &mut b);
        for e in &c.tail {
            push(e, &mut b);
        }
        cones.push(SecondOrderConeT(c.tail.len() + 1));
    }
    let m = b.len();
    let a = CscMatrix::new_from_triplets(m, n, rows, cols, vals);
    let p = CscMatrix::zeros((n, n));
    let q: Vec<T> = program.objective.iter().map(|c| -*c).collect();
    let mut settings = DefaultSettings::<T>::default();
    settings.verbose = false;
    settings.max_iter = 200;
    settings.tol_gap_abs = lit(1e-9);
    settings.tol_gap_rel = lit(1e-9);
    settings.tol_feas = lit(1e-9);
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
        .map_err(|e| ConicError::Numerical(e.to_string()))?;
    solver.solve();
    let sol = &solver.solution;
    match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Ok(ConicSolution {
            objective: program.objective_value(&sol.x),
            x: sol.x.clone(),
            iterations: sol.iterations,
            reduced_accuracy: sol.status == SolverStatus::AlmostSolved,
        }),
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            Err(ConicError::Infeasible)
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            Err(ConicError::Unbounded)
        }
        other => Err(ConicError::Numerical(format!("{other:?}"))),
    }
}
