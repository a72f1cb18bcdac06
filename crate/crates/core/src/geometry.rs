//! Node positions, pointing angles and array steering vectors.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{count, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("angles requested between coincident points")]
    CoincidentPoints,
}

/// Cartesian position in meters. `z` is the height above ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position3D<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Position3D<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_slice(s: &[T]) -> Self {
        Self::new(s[0], s[1], s[2])
    }
}

/// Pointing direction as seen from one node toward another.
///
/// Azimuth lies in (-pi, pi]. Elevation is measured from the horizon; it is
/// in [0, pi/2] whenever the far node is not below the near one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleSet<T> {
    pub azimuth: T,
    pub elevation: T,
}

impl<T: Real> AngleSet<T> {
    /// Unit direction vector `(cos e cos a, cos e sin a, sin e)`.
    pub fn unit_direction(&self) -> [T; 3] {
        let (se, ce) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        [ce * ca, ce * sa, se]
    }
}

/// Array response with unit-magnitude entries (no `1/sqrt(M)` normalization).
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector<T>(pub Vec<Complex<T>>);

impl<T: Real> SteeringVector<T> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.0
    }

    /// Element-wise conjugate, the effective transmit channel `a*`.
    pub fn conj(&self) -> Vec<Complex<T>> {
        self.0.iter().map(|z| z.conj()).collect()
    }
}

pub fn distance<T: Real>(p: &Position3D<T>, q: &Position3D<T>) -> T {
    let dx = q.x - p.x;
    let dy = q.y - p.y;
    let dz = q.z - p.z;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Horizontal distance between the ground projections of two nodes.
pub fn ground_range<T: Real>(uav: &Position3D<T>, ue: &Position3D<T>) -> T {
    let dx = uav.x - ue.x;
    let dy = uav.y - ue.y;
    (dx * dx + dy * dy).sqrt()
}

/// Azimuth and elevation of `to` seen from `from`.
///
/// Straight up (or down) the azimuth is defined as 0.
pub fn angles_between<T: Real>(
    from: &Position3D<T>,
    to: &Position3D<T>,
) -> Result<AngleSet<T>, GeometryError> {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let dz = to.z - from.z;
    let ground = (dx * dx + dy * dy).sqrt();
    if ground == T::zero() && dz == T::zero() {
        return Err(GeometryError::CoincidentPoints);
    }
    let mut azimuth = if ground == T::zero() {
        T::zero()
    } else {
        dy.atan2(dx)
    };
    if azimuth <= -T::PI() {
        azimuth = T::PI();
    }
    Ok(AngleSet {
        azimuth,
        elevation: dz.atan2(ground),
    })
}

/// Half-wavelength ULA response, `exp(i pi m sin(angle))` for `m = 0..M-1`.
pub fn ula_steering<T: Real>(m_elems: usize, angle: T) -> SteeringVector<T> {
    let step = T::PI() * angle.sin();
    SteeringVector(
        (0..m_elems)
            .map(|m| Complex::from_polar(T::one(), step * count(m)))
            .collect(),
    )
}

/// Half-wavelength `mx x my` UPA response, x index fastest.
///
/// Entry `(p, q)` sits at `p + mx q` and equals `exp(i pi (p u + q v))` with
/// direction cosines `u = cos(e) cos(a)`, `v = cos(e) sin(a)`. The array faces
/// down, so a node straight below yields the all-ones vector.
pub fn upa_steering<T: Real>(mx: usize, my: usize, a: &AngleSet<T>) -> SteeringVector<T> {
    let ce = a.elevation.cos();
    let u = ce * a.azimuth.cos();
    let v = ce * a.azimuth.sin();
    let mut out = Vec::with_capacity(mx * my);
    for q in 0..my {
        for p in 0..mx {
            let phase = T::PI() * (count::<T>(p) * u + count::<T>(q) * v);
            out.push(Complex::from_polar(T::one(), phase));
        }
    }
    SteeringVector(out)
}

/// Sine of the angle off broadside for a ULA laid along the x axis, pointing
/// from `from` toward `to`.
pub fn ula_angle<T: Real>(from: &Position3D<T>, to: &Position3D<T>) -> T {
    let d = distance(from, to);
    if d == T::zero() {
        return T::zero();
    }
    let s = ((to.x - from.x) / d).max(-T::one()).min(T::one());
    s.asin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn p(x: f64, y: f64, z: f64) -> Position3D<f64> {
        Position3D::new(x, y, z)
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(&p(0.0, 0.0, 0.0), &p(0.0, 0.0, 0.0)), 0.0);
        assert_eq!(distance(&p(0.0, 0.0, 0.0), &p(3.0, 4.0, 0.0)), 5.0);
        let d = distance(&p(250.0, 375.0, 0.0), &p(250.0, 250.0, 125.0));
        assert!((d - 176.7767).abs() < 1e-4);
    }

    #[test]
    fn ground_range_examples() {
        assert_eq!(ground_range(&p(0.0, 0.0, 100.0), &p(0.0, 0.0, 0.0)), 0.0);
        assert_eq!(ground_range(&p(3.0, 4.0, 100.0), &p(0.0, 0.0, 0.0)), 5.0);
        assert_eq!(ground_range(&p(250.0, 250.0, 125.0), &p(250.0, 375.0, 0.0)), 125.0);
    }

    #[test]
    fn angle_examples() {
        let a = angles_between(&p(0.0, 0.0, 0.0), &p(1.0, 0.0, 0.0)).unwrap();
        assert_eq!((a.azimuth, a.elevation), (0.0, 0.0));
        let a = angles_between(&p(0.0, 0.0, 0.0), &p(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(a.azimuth, 0.0);
        assert!((a.elevation - FRAC_PI_2).abs() < 1e-15);
        let a = angles_between(&p(250.0, 375.0, 0.0), &p(250.0, 250.0, 125.0)).unwrap();
        assert!((a.azimuth + FRAC_PI_2).abs() < 1e-12);
        assert!((a.elevation - FRAC_PI_4).abs() < 1e-12);
        assert_eq!(
            angles_between(&p(1.0, 2.0, 3.0), &p(1.0, 2.0, 3.0)),
            Err(GeometryError::CoincidentPoints)
        );
    }

    #[test]
    fn azimuth_never_minus_pi() {
        let a = angles_between(&p(0.0, 0.0, 0.0), &p(-1.0, -0.0, 0.0)).unwrap();
        assert_eq!(a.azimuth, PI);
    }

    #[test]
    fn ula_examples() {
        let v = ula_steering::<f64>(4, 0.0);
        assert!(v.0.iter().all(|z| (*z - Complex::new(1.0, 0.0)).norm() < 1e-15));
        let v = ula_steering::<f64>(2, FRAC_PI_2);
        assert!((v.0[1] - Complex::new(-1.0, 0.0)).norm() < 1e-15);
        let v = ula_steering::<f64>(8, PI / 6.0);
        for (m, z) in v.0.iter().enumerate() {
            let expect = Complex::from_polar(1.0, PI * m as f64 * 0.5);
            assert!((*z - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn upa_examples() {
        let nadir = AngleSet { azimuth: 0.3, elevation: FRAC_PI_2 };
        let v = upa_steering::<f64>(3, 5, &nadir);
        assert_eq!(v.len(), 15);
        assert!(v.0.iter().all(|z| (*z - Complex::new(1.0, 0.0)).norm() < 1e-12));

        let horizon = AngleSet { azimuth: 0.0, elevation: 0.0 };
        let v = upa_steering::<f64>(2, 2, &horizon);
        let m1 = Complex::from_polar(1.0, PI);
        let expect = [Complex::new(1.0, 0.0), m1, Complex::new(1.0, 0.0), m1];
        for (z, e) in v.0.iter().zip(expect) {
            assert!((*z - e).norm() < 1e-12);
        }

        let v = upa_steering::<f64>(1, 1, &AngleSet { azimuth: 1.0, elevation: 0.2 });
        assert_eq!(v.0, vec![Complex::new(1.0, 0.0)]);
    }

    #[test]
    fn works_in_single_precision() {
        let v = upa_steering::<f32>(4, 4, &AngleSet { azimuth: 0.7, elevation: 0.4 });
        assert!(v.0.iter().all(|z| (z.norm() - 1.0).abs() < 1e-6));
        assert_eq!(distance(&Position3D::<f32>::new(0.0, 0.0, 0.0), &Position3D::new(3.0, 4.0, 0.0)), 5.0);
    }

    fn coord() -> impl Strategy<Value = f64> {
        -500.0..500.0f64
    }

    proptest! {
        #[test]
        fn steering_entries_unit_and_norm(mx in 1usize..9, my in 1usize..9, az in -3.1..3.1f64, el in 0.0..1.57f64) {
            let v = upa_steering(mx, my, &AngleSet { azimuth: az, elevation: el });
            for z in &v.0 {
                prop_assert!((z.norm() - 1.0).abs() < 1e-12);
            }
            let n2: f64 = v.0.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((n2 - (mx * my) as f64).abs() <= 1e-9 * (mx * my) as f64);
        }

        #[test]
        fn distance_metric(ax in coord(), ay in coord(), az in 0.0..200.0f64,
                           bx in coord(), by in coord(), bz in 0.0..200.0f64,
                           cx in coord(), cy in coord(), cz in 0.0..200.0f64) {
            let (a, b, c) = (p(ax, ay, az), p(bx, by, bz), p(cx, cy, cz));
            prop_assert_eq!(distance(&a, &b), distance(&b, &a));
            prop_assert!(distance(&a, &c) <= distance(&a, &b) + distance(&b, &c) + 1e-9);
        }

        #[test]
        fn angles_recover_direction(ax in coord(), ay in coord(), az in 0.0..200.0f64,
                                    bx in coord(), by in coord(), bz in 0.0..200.0f64) {
            let (a, b) = (p(ax, ay, az), p(bx, by, bz));
            prop_assume!(distance(&a, &b) > 1e-3);
            let ang = angles_between(&a, &b).unwrap();
            prop_assert!(ang.azimuth > -PI && ang.azimuth <= PI);
            let u = ang.unit_direction();
            let d = distance(&a, &b);
            let expect = [(bx - ax) / d, (by - ay) / d, (bz - az) / d];
            for i in 0..3 {
                prop_assert!((u[i] - expect[i]).abs() < 1e-9);
            }
        }
    }
}
