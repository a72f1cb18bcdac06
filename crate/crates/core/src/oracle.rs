//! Projection-based reference solver for small conic programs.
//!
//! Each affine expression inside a cone gets its own lifted coordinate, so
//! the feasible set becomes an affine subspace intersected with a product of
//! standard cones. Both have closed-form projections; their intersection is
//! projected onto with Dykstra's algorithm, and the linear objective is
//! maximized by projected-gradient ascent. Slow, but shares nothing with the
//! interior-point path.

use rand::RngExt;

use crate::conic::{AffineExpr, ConicProgram, SocBlock};
use crate::rng::DropRng;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    /// Gradient step as a multiple of (feasible-set radius / objective norm).
    pub step_scale: f64,
    pub max_outer: usize,
    pub max_dykstra: usize,
    /// Relative stopping tolerance of both loops.
    pub tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            step_scale: 10.0,
            max_outer: 2000,
            max_dykstra: 20000,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Largest constraint violation of `x` in the original program.
    pub violation: f64,
    pub outer_iterations: usize,
}

enum ConeSlot {
    Nonneg(usize),
    Soc { head: usize, tail: std::ops::Range<usize> },
}

/// Lifted feasible set `{z : E z = f} ∩ K`.
struct Lifted {
    dim: usize,
    n: usize,
    e: Vec<Vec<f64>>,
    f: Vec<f64>,
    /// `E^T (E E^T)^-1`, `dim x rows`.
    m: Vec<Vec<f64>>,
    cones: Vec<ConeSlot>,
}

fn dense(e: &AffineExpr<f64>, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for &(i, a) in &e.terms {
        v[i] += a;
    }
    v
}

/// Cholesky factor `L` of a symmetric positive definite matrix.
fn cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                assert!(d > 0.0, "equality rows are linearly dependent");
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    x
}

impl Lifted {
    fn new(p: &ConicProgram<f64>) -> Self {
        let n = p.n_vars;
        let mut rows: Vec<(Vec<f64>, usize, f64)> = Vec::new(); // (x-coeffs, lifted index, rhs)
        let mut cones = Vec::new();
        let mut next = n;
        // lifted t = a^T x + c  <=>  t - a^T x = c
        let mut lift = |e: &AffineExpr<f64>, rows: &mut Vec<(Vec<f64>, usize, f64)>| {
            let idx = next;
            next += 1;
            rows.push((dense(e, n).iter().map(|a| -a).collect(), idx, e.constant));
            idx
        };
        for e in &p.nonnegative {
            let i = lift(e, &mut rows);
            cones.push(ConeSlot::Nonneg(i));
        }
        for SocBlock { head, tail } in &p.cones {
            let h = lift(head, &mut rows);
            let start = h + 1;
            for t in tail {
                lift(t, &mut rows);
            }
            cones.push(ConeSlot::Soc {
                head: h,
                tail: start..start + tail.len(),
            });
        }
        let dim = next;
        let mut e = Vec::new();
        let mut f = Vec::new();
        for (coef, idx, rhs) in rows {
            let mut row = coef;
            row.resize(dim, 0.0);
            row[idx] = 1.0;
            e.push(row);
            f.push(rhs);
        }
        for eq in &p.equalities {
            let mut row = dense(eq, n);
            row.resize(dim, 0.0);
            e.push(row);
            f.push(-eq.constant);
        }
        let r = e.len();
        let gram: Vec<Vec<f64>> = (0..r)
            .map(|i| (0..r).map(|j| e[i].iter().zip(&e[j]).map(|(a, b)| a * b).sum()).collect())
            .collect();
        let l = cholesky(&gram);
        // column j of E^T G^-1 is E^T (G^-1 e_j)
        let mut m = vec![vec![0.0; r]; dim];
        for j in 0..r {
            let mut unit = vec![0.0; r];
            unit[j] = 1.0;
            let g = cholesky_solve(&l, &unit);
            for (d, row) in m.iter_mut().enumerate() {
                row[j] = (0..r).map(|i| e[i][d] * g[i]).sum();
            }
        }
        Self { dim, n, e, f, m, cones }
    }

    fn project_affine(&self, z: &[f64]) -> Vec<f64> {
        let res: Vec<f64> = self
            .e
            .iter()
            .zip(&self.f)
            .map(|(row, fi)| row.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() - fi)
            .collect();
        z.iter()
            .zip(&self.m)
            .map(|(zi, mi)| zi - mi.iter().zip(&res).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    fn project_cones(&self, z: &[f64]) -> Vec<f64> {
        let mut out = z.to_vec();
        for c in &self.cones {
            match c {
                ConeSlot::Nonneg(i) => out[*i] = out[*i].max(0.0),
                ConeSlot::Soc { head, tail } => {
                    let t = out[*head];
                    let ny = out[tail.clone()].iter().map(|v| v * v).sum::<f64>().sqrt();
                    if ny <= t {
                        continue;
                    }
                    if ny <= -t {
                        out[*head] = 0.0;
                        out[tail.clone()].iter_mut().for_each(|v| *v = 0.0);
                        continue;
                    }
                    let a = 0.5 * (t + ny);
                    out[*head] = a;
                    let s = a / ny;
                    out[tail.clone()].iter_mut().for_each(|v| *v *= s);
                }
            }
        }
        out
    }

    /// Dykstra projection of `v` onto the lifted feasible set.
    fn project(&self, v: &[f64], cfg: &OracleConfig) -> Vec<f64> {
        let scale = 1.0 + v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let mut x = v.to_vec();
        let mut p = vec![0.0; self.dim];
        let mut q = vec![0.0; self.dim];
        for _ in 0..cfg.max_dykstra {
            let xp: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
            let y = self.project_affine(&xp);
            p = xp.iter().zip(&y).map(|(a, b)| a - b).collect();
            let yq: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
            let next = self.project_cones(&yq);
            q = yq.iter().zip(&next).map(|(a, b)| a - b).collect();
            let gap = next.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let moved = next.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            x = next;
            if gap <= cfg.tol * scale && moved <= cfg.tol * scale {
                break;
            }
        }
        x
    }
}

/// Maximizes the program objective by projected-gradient ascent.
pub fn projected_gradient_oracle(p: &ConicProgram<f64>, cfg: &OracleConfig) -> OracleSolution {
    let lifted = Lifted::new(p);
    let mut z = lifted.project(&vec![0.0; lifted.dim], cfg);
    let radius = 1.0 + z.iter().map(|a| a * a).sum::<f64>().sqrt();
    let fnorm = p.objective.iter().map(|a| a * a).sum::<f64>().sqrt();
    let eta = if fnorm > 0.0 { cfg.step_scale * radius / fnorm } else { 0.0 };
    let mut outer = 0;
    for it in 1..=cfg.max_outer {
        outer = it;
        let mut v = z.clone();
        for (vi, c) in v.iter_mut().zip(&p.objective) {
            *vi += eta * c;
        }
        let next = lifted.project(&v, cfg);
        let moved = next.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        z = next;
        if moved <= 1e-10 * radius {
            break;
        }
    }
    let x = z[..lifted.n].to_vec();
    OracleSolution {
        objective: p.objective_value(&x),
        violation: p.max_violation(&x),
        x,
        outer_iterations: outer,
    }
}

/// Random bounded feasible program over `n_complex` complex variables
/// (stored as re/im pairs): a norm ball, `n_cones` random cones and one
/// equality, all strictly satisfied by a random anchor point.
pub fn random_program(rng: &mut DropRng, n_complex: usize, n_cones: usize) -> ConicProgram<f64> {
    let n = 2 * n_complex;
    let mut normal = || -> f64 {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        (-2.0 * (1.0 - u).ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    };
    let anchor: Vec<f64> = (0..n).map(|_| 0.3 * normal()).collect();
    let mut p = ConicProgram::new(n);
    p.objective = (0..n).map(|_| normal()).collect();
    let radius = 1.0 + anchor.iter().map(|a| a * a).sum::<f64>().sqrt();
    p.cones.push(SocBlock {
        head: AffineExpr::constant(radius),
        tail: (0..n).map(AffineExpr::var).collect(),
    });
    let mut random_expr = |constant: f64| {
        let mut e = AffineExpr::constant(constant);
        for i in 0..n {
            e.add_term(i, normal());
        }
        e
    };
    for _ in 0..n_cones {
        let tail: Vec<AffineExpr<f64>> = (0..3).map(|_| random_expr(0.0)).collect();
        let mut head = random_expr(0.0);
        let need = tail.iter().map(|e| e.eval(&anchor).powi(2)).sum::<f64>().sqrt();
        // strictly feasible at the anchor with a unit margin
        head.constant = need - head.eval(&anchor) + 1.0;
        p.cones.push(SocBlock { head, tail });
    }
    let mut eq = random_expr(0.0);
    eq.constant = -eq.eval(&anchor);
    p.equalities.push(eq);
    p
}
