//! Closed-form precoders: per-UAV zero forcing, the MMSE backhaul receiver
//! and the equal-split power allocation used for fast utility evaluation.

use num_complex::Complex;
use thiserror::Error;

use crate::channel::ChannelRealization;
use crate::linalg::{
    cholesky_solve, dot, hermitian_eigen, norm, orthonormal_basis, project_out, canonical_phase,
    CMatrix,
};
use crate::scalar::{lit, CVec, Real};
use crate::sinr::PrecoderSolution;

/// Relative threshold below which a direction is treated as linearly dependent.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrecoderError {
    #[error("desired channel lies in the span of the nulled channels")]
    DegenerateDirection,
    #[error("interference-plus-noise covariance is not positive definite")]
    SingularCovariance,
}

/// Unit-norm precoding direction and the indices of the channels it nulls.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfDirection<T> {
    pub vector: CVec<T>,
    pub nulled_set: Vec<usize>,
}

/// Projects `desired` onto the orthogonal complement of `interferers`.
///
/// The output is normalized and rotated so its first significant entry is
/// real and positive.
pub fn zf_direction<T: Real>(
    desired: &[Complex<T>],
    interferers: &[&[Complex<T>]],
    nulled_set: Vec<usize>,
) -> Result<ZfDirection<T>, PrecoderError> {
    let basis = orthonormal_basis(interferers, lit(RANK_TOL));
    let mut v = project_out(desired, &basis);
    let nv = norm(&v);
    let nd = norm(desired);
    if nd == T::zero() || nv <= lit::<T>(RANK_TOL).sqrt() * nd {
        return Err(PrecoderError::DegenerateDirection);
    }
    let inv = Complex::from(T::one() / nv);
    v.iter_mut().for_each(|z| *z *= inv);
    canonical_phase(&mut v);
    Ok(ZfDirection { vector: v, nulled_set })
}

/// ZF direction from UAV `k` to UE `j`, nulling every other UE at that UAV.
pub fn zf_ue_direction<T: Real>(
    k: usize,
    j: usize,
    ch: &ChannelRealization<T>,
) -> Result<ZfDirection<T>, PrecoderError> {
    let row = &ch.access[k];
    let others: Vec<usize> = (0..row.len()).filter(|&i| i != j).collect();
    let refs: Vec<&[Complex<T>]> = others.iter().map(|&i| row[i].vector.as_slice()).collect();
    zf_direction(&row[j].vector, &refs, others)
}

/// ZF direction from UAV `k` toward the target, nulling every UE.
pub fn zf_target_direction<T: Real>(
    k: usize,
    ch: &ChannelRealization<T>,
) -> Result<ZfDirection<T>, PrecoderError> {
    let row = &ch.access[k];
    let refs: Vec<&[Complex<T>]> = row.iter().map(|c| c.vector.as_slice()).collect();
    zf_direction(&ch.sensing.tx_target[k], &refs, (0..row.len()).collect())
}

/// ZF backhaul direction for UAV `k` against the other UAVs' effective
/// channels `H_i^H u_i`.
pub fn zf_backhaul_direction<T: Real>(
    k: usize,
    effective: &[CVec<T>],
) -> Result<ZfDirection<T>, PrecoderError> {
    let others: Vec<usize> = (0..effective.len()).filter(|&i| i != k).collect();
    let refs: Vec<&[Complex<T>]> = others.iter().map(|&i| effective[i].as_slice()).collect();
    zf_direction(&effective[k], &refs, others)
}

/// MMSE receive beamformer of UAV `k`,
/// `(H (sum_{l != k} w_l w_l^H) H^H + sigma^2 I)^-1 H w_k`, scaled to unit norm.
pub fn mmse_receiver<T: Real>(
    k: usize,
    h: &CMatrix<T>,
    backhaul: &[CVec<T>],
    noise: T,
) -> Result<CVec<T>, PrecoderError> {
    let m = h.rows();
    let mut cov = CMatrix::identity(m);
    for i in 0..m {
        cov[(i, i)] = Complex::from(noise);
    }
    for (l, w) in backhaul.iter().enumerate() {
        if l != k {
            let v = h.mul_vec(w);
            cov.add_outer(&v, &v, Complex::from(T::one()));
        }
    }
    let rhs = h.mul_vec(&backhaul[k]);
    let mut u = cholesky_solve(&cov, &rhs).ok_or(PrecoderError::SingularCovariance)?;
    let nu = norm(&u);
    if nu > T::zero() {
        let inv = Complex::from(T::one() / nu);
        u.iter_mut().for_each(|z| *z *= inv);
        canonical_phase(&mut u);
    }
    Ok(u)
}

/// Dominant left singular vector of `h` (unit norm, canonical phase).
///
/// Works in an orthonormal basis of the column space, which is tiny for the
/// few-path backhaul channels.
pub fn dominant_left_singular<T: Real>(h: &CMatrix<T>) -> CVec<T> {
    let cols: Vec<CVec<T>> = (0..h.cols()).map(|j| h.column(j)).collect();
    let refs: Vec<&[Complex<T>]> = cols.iter().map(|c| c.as_slice()).collect();
    let q = orthonormal_basis(&refs, lit(1e-12));
    if q.is_empty() {
        let mut e = vec![Complex::from(T::zero()); h.rows()];
        if let Some(first) = e.first_mut() {
            *first = Complex::from(T::one());
        }
        return e;
    }
    // B = Q^H H, r x cols; the dominant eigenvector of B B^H maps back through Q.
    let r = q.len();
    let mut b = CMatrix::zeros(r, h.cols());
    for (i, qi) in q.iter().enumerate() {
        for (j, c) in cols.iter().enumerate() {
            b[(i, j)] = dot(qi, c);
        }
    }
    let (_, vecs) = hermitian_eigen(&b.gram_rows());
    let y = vecs.column(0);
    let mut u = vec![Complex::from(T::zero()); h.rows()];
    for (qi, yi) in q.iter().zip(&y) {
        for (ui, qv) in u.iter_mut().zip(qi) {
            *ui += *qv * *yi;
        }
    }
    let nu = norm(&u);
    let inv = Complex::from(T::one() / nu);
    u.iter_mut().for_each(|z| *z *= inv);
    canonical_phase(&mut u);
    u
}

/// ZF directions of every UAV toward every UE and the target.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfBeams<T> {
    /// `[uav][ue]`.
    pub ue: Vec<Vec<CVec<T>>>,
    /// `[uav]`.
    pub target: Vec<CVec<T>>,
}

impl<T: Real> ZfBeams<T> {
    pub fn compute(ch: &ChannelRealization<T>) -> Result<Self, PrecoderError> {
        let n_ue = ch.n_ue();
        let mut ue = Vec::with_capacity(ch.n_tx());
        let mut target = Vec::with_capacity(ch.n_tx());
        for k in 0..ch.n_tx() {
            let row = (0..n_ue)
                .map(|j| {
                    let mut v = zf_ue_direction(k, j, ch)?.vector;
                    // co-phase so every UAV's contribution adds coherently at UE j
                    let g = dot(&ch.access[k][j].vector, &v);
                    if g.norm() > T::zero() {
                        let rot = g.conj() / g.norm();
                        v.iter_mut().for_each(|z| *z *= rot);
                    }
                    Ok(v)
                })
                .collect::<Result<Vec<_>, PrecoderError>>()?;
            ue.push(row);
            target.push(zf_target_direction(k, ch)?.vector);
        }
        Ok(Self { ue, target })
    }

    pub fn n_tx(&self) -> usize {
        self.target.len()
    }
}

/// Splits each UAV budget between the sensing beam (`sensing_fraction`) and
/// the UE beams (equal shares of the remainder). Without UEs the sensing beam
/// takes the whole budget.
pub fn heuristic_power_allocation<T: Real>(
    beams: &ZfBeams<T>,
    budgets: &[T],
    sensing_fraction: T,
) -> PrecoderSolution<T> {
    assert_eq!(budgets.len(), beams.n_tx());
    let n_ue = beams.ue.first().map_or(0, |r| r.len());
    let m_u = beams.target.first().map_or(0, |v| v.len());
    let mut sol = PrecoderSolution::zeros(beams.n_tx(), n_ue, m_u);
    for (k, &p) in budgets.iter().enumerate() {
        let (p_t, p_ue) = if n_ue == 0 {
            (p, T::zero())
        } else {
            (sensing_fraction * p, (T::one() - sensing_fraction) * p / lit(n_ue as f64))
        };
        let at = Complex::from(p_t.sqrt());
        sol.sensing[k] = beams.target[k].iter().map(|z| *z * at).collect();
        let au = Complex::from(p_ue.sqrt());
        for j in 0..n_ue {
            sol.ue[k][j] = beams.ue[k][j].iter().map(|z| *z * au).collect();
        }
    }
    sol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::ArrayConfig;
    use crate::rng::{stream_rng, Stream};
    use crate::scalar::complex_normal;
    use crate::scene::fixtures::{random_scene, InstanceShape};
    use crate::sinr::backhaul_sinr;
    use nalgebra::{DMatrix, DVector};

    type C = Complex<f64>;

    fn random_vec(rng: &mut crate::rng::DropRng, n: usize) -> CVec<f64> {
        (0..n).map(|_| complex_normal(rng, 1.0)).collect()
    }

    fn assert_unit(v: &[C]) {
        assert!((norm(v) - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn lone_ue_gets_matched_filter() {
        let shape = InstanceShape { n_ue: 1, ..InstanceShape::desk() };
        let ch = random_scene(1, &shape).channels;
        let d = zf_ue_direction(0, 0, &ch).unwrap();
        assert!(d.nulled_set.is_empty());
        let h = &ch.access[0][0].vector;
        let overlap = dot(h, &d.vector).norm() / norm(h);
        assert!((overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_channels_pass_through() {
        let n = 4;
        let e = |i: usize| -> CVec<f64> { (0..n).map(|m| C::new(if m == i { 2.0 } else { 0.0 }, 0.0)).collect() };
        let (a, b) = (e(0), e(2));
        let d = zf_direction(&a, &[&b], vec![1]).unwrap();
        assert_eq!(d.vector, vec![C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0)]);
    }

    #[test]
    fn target_without_ues_is_normalized_steering() {
        let shape = InstanceShape { n_ue: 0, ..InstanceShape::desk() };
        let ch = random_scene(2, &shape).channels;
        let d = zf_target_direction(1, &ch).unwrap();
        let t = &ch.sensing.tx_target[1];
        assert!((dot(t, &d.vector).norm() / norm(t) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn target_in_ue_span_is_degenerate() {
        let mut rng = stream_rng(3, Stream::Echo);
        let a = random_vec(&mut rng, 4);
        let b = random_vec(&mut rng, 4);
        let t: CVec<f64> = a.iter().zip(&b).map(|(x, y)| x * 0.5 - y * C::new(0.0, 2.0)).collect();
        assert_eq!(zf_direction(&t, &[&a, &b], vec![0, 1]), Err(PrecoderError::DegenerateDirection));
    }

    #[test]
    fn zf_nullspace_on_random_instances() {
        for seed in 0..50 {
            let ch = random_scene(seed, &InstanceShape::desk()).channels;
            for k in 0..ch.n_tx() {
                for j in 0..ch.n_ue() {
                    let d = zf_ue_direction(k, j, &ch).unwrap();
                    assert_unit(&d.vector);
                    for &i in &d.nulled_set {
                        let c = &ch.access[k][i].vector;
                        assert!(dot(c, &d.vector).norm() <= 1e-8 * norm(c));
                    }
                }
                let d = zf_target_direction(k, &ch).unwrap();
                assert_unit(&d.vector);
                for c in &ch.access[k] {
                    assert!(dot(&c.vector, &d.vector).norm() <= 1e-8 * norm(&c.vector));
                }
            }
        }
    }

    #[test]
    fn backhaul_zf_nulls_and_is_idempotent() {
        let mut rng = stream_rng(4, Stream::Echo);
        for _ in 0..50 {
            let eff: Vec<CVec<f64>> = (0..3).map(|_| random_vec(&mut rng, 16)).collect();
            for k in 0..3 {
                let d = zf_backhaul_direction(k, &eff).unwrap();
                assert_unit(&d.vector);
                for &i in &d.nulled_set {
                    assert!(dot(&eff[i], &d.vector).norm() <= 1e-8 * norm(&eff[i]));
                }
                let others: Vec<&[C]> = d.nulled_set.iter().map(|&i| eff[i].as_slice()).collect();
                let again = zf_direction(&d.vector, &others, d.nulled_set.clone()).unwrap();
                let diff: f64 = again.vector.iter().zip(&d.vector).map(|(a, b)| (a - b).norm_sqr()).sum();
                assert!(diff.sqrt() <= 1e-10);
            }
        }
        let lone = vec![random_vec(&mut rng, 8)];
        let d = zf_backhaul_direction(0, &lone).unwrap();
        assert!((dot(&lone[0], &d.vector).norm() / norm(&lone[0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zf_direction_ignores_channel_scale() {
        let ch = random_scene(5, &InstanceShape::desk()).channels;
        let row: Vec<CVec<f64>> = ch.access[0].iter().map(|c| c.vector.clone()).collect();
        let scaled: Vec<CVec<f64>> = row.iter().map(|v| v.iter().map(|z| z * 7.5).collect()).collect();
        let refs = |r: &[CVec<f64>]| -> Vec<CVec<f64>> { r[1..].to_vec() };
        let a_int = refs(&row);
        let b_int = refs(&scaled);
        let a = zf_direction(&row[0], &a_int.iter().map(|v| v.as_slice()).collect::<Vec<_>>(), vec![]).unwrap();
        let b = zf_direction(&scaled[0], &b_int.iter().map(|v| v.as_slice()).collect::<Vec<_>>(), vec![]).unwrap();
        assert!((dot(&a.vector, &b.vector).norm() - 1.0).abs() <= 1e-9);
    }

    fn to_na(m: &CMatrix<f64>) -> DMatrix<C> {
        DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
    }

    /// Largest generalized Rayleigh quotient `max_u |u^H v|^2 / u^H R u`,
    /// from the eigenvalues of `L^-1 v v^H L^-H` with `R = L L^H`.
    fn grq_max(v: &[C], r: &CMatrix<f64>) -> f64 {
        let r = to_na(r);
        let l = r.cholesky().expect("positive definite").l();
        let vv = DVector::from_column_slice(v);
        let y = l.solve_lower_triangular(&vv).unwrap();
        let m = &y * y.adjoint();
        m.symmetric_eigenvalues().iter().fold(0.0f64, |a, b| a.max(*b))
    }

    #[test]
    fn mmse_attains_rayleigh_quotient_maximum() {
        for seed in 0..10 {
            let scene = random_scene(seed, &InstanceShape::desk());
            let ch = &scene.channels;
            let mut rng = stream_rng(seed, Stream::Echo);
            let m_bs = ch.backhaul[0].m_bs;
            let m_ub = ch.backhaul[0].m_ub;
            let w: Vec<CVec<f64>> = (0..3).map(|_| random_vec(&mut rng, m_bs).iter().map(|z| z * 0.1).collect()).collect();
            let sigma2 = scene.noise.backhaul;
            let mut sol = crate::sinr::PrecoderSolution::zeros(3, 0, 1);
            sol.backhaul = w.clone();
            sol.receive = vec![vec![C::new(1.0, 0.0); m_ub]; 3];
            for k in 0..3 {
                let h = &ch.backhaul[k].matrix;
                sol.receive[k] = mmse_receiver(k, h, &w, sigma2).unwrap();
                let best = backhaul_sinr(k, ch, &sol, sigma2).unwrap();
                let mut r = CMatrix::identity(m_ub);
                for i in 0..m_ub {
                    r[(i, i)] = C::new(sigma2, 0.0);
                }
                for (l, wl) in w.iter().enumerate() {
                    if l != k {
                        let v = h.mul_vec(wl);
                        r.add_outer(&v, &v, C::new(1.0, 0.0));
                    }
                }
                let oracle = grq_max(&h.mul_vec(&w[k]), &r);
                assert!((best - oracle).abs() <= 1e-8 * oracle, "{best} vs {oracle}");
                let keep = sol.receive[k].clone();
                for _ in 0..100 {
                    sol.receive[k] = random_vec(&mut rng, m_ub);
                    assert!(backhaul_sinr(k, ch, &sol, sigma2).unwrap() <= best * (1.0 + 1e-12));
                }
                sol.receive[k] = keep;
            }
        }
    }

    #[test]
    fn mmse_without_interference_is_matched_filter() {
        let shape = InstanceShape { n_tx: 1, ..InstanceShape::desk() };
        let ch = random_scene(6, &shape).channels;
        let mut rng = stream_rng(6, Stream::Echo);
        let h = &ch.backhaul[0].matrix;
        let w = vec![random_vec(&mut rng, h.cols())];
        let u = mmse_receiver(0, h, &w, 1e-9).unwrap();
        let hw = h.mul_vec(&w[0]);
        assert!((dot(&u, &hw).norm() / norm(&hw) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heuristic_budget_identity_and_shares() {
        let scene = random_scene(7, &InstanceShape::desk());
        let beams = ZfBeams::compute(&scene.channels).unwrap();
        // 30 dBm per UAV, 4 UEs, half on sensing: 0.5 W / 4 per UE beam
        let sol = heuristic_power_allocation(&beams, &[1.0, 1.0, 1.0], 0.5);
        for k in 0..3 {
            assert!((sol.uav_power(k) - 1.0).abs() < 1e-12);
            for j in 0..4 {
                assert!((crate::linalg::norm_sqr(&sol.ue[k][j]) - 0.125).abs() < 1e-12);
            }
        }
        let shape = InstanceShape { n_ue: 1, ..InstanceShape::desk() };
        let scene = random_scene(7, &shape);
        let beams = ZfBeams::compute(&scene.channels).unwrap();
        let sol = heuristic_power_allocation(&beams, &[2.0, 2.0, 2.0], 0.0);
        assert!((crate::linalg::norm_sqr(&sol.ue[0][0]) - 2.0).abs() < 1e-12);
        assert_eq!(crate::linalg::norm_sqr(&sol.sensing[0]), 0.0);
    }

    #[test]
    fn dominant_singular_vector_of_tiny_backhaul() {
        let shape = InstanceShape {
            arrays: ArrayConfig { uav_x: 2, uav_y: 2, uav_backhaul: 4, bs: 4 },
            ..InstanceShape::desk()
        };
        let ch = random_scene(8, &shape).channels;
        let h = &ch.backhaul[0].matrix;
        let u = dominant_left_singular(h);
        let gram = to_na(&h.gram_rows());
        let top = gram.symmetric_eigenvalues().iter().fold(0.0f64, |a, b| a.max(*b));
        let got = crate::linalg::norm_sqr(&h.adjoint_mul_vec(&u));
        assert!((got - top).abs() <= 1e-9 * top);
    }
}
