//! Scalar abstraction shared by every numeric module.

use std::iter::Sum;

use clarabel::algebra::FloatT;
use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Real floating-point scalar: `f32` or `f64`.
///
/// Anything the conic solver accepts, plus `Sum` so iterator folds read
/// naturally.
pub trait Real: FloatT + Sum {}

impl<T> Real for T where T: FloatT + Sum {}

/// Complex scalar over a [`Real`].
pub type Cplx<T> = Complex<T>;

/// Owned complex vector.
pub type CVec<T> = Vec<Complex<T>>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts a count into `T`.
#[inline]
pub fn count<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

/// Standard normal draw converted into `T`.
///
/// Draws are always taken in `f64` so the random stream is independent of
/// the scalar type.
#[inline]
pub fn std_normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    let x: f64 = StandardNormal.sample(rng);
    lit(x)
}

/// Circularly-symmetric complex Gaussian draw with the given variance.
#[inline]
pub fn complex_normal<T: Real, R: Rng + ?Sized>(rng: &mut R, variance: T) -> Complex<T> {
    let scale = (variance / lit(2.0)).sqrt();
    let re: T = std_normal(rng);
    let im: T = std_normal(rng);
    Complex::new(re * scale, im * scale)
}

/// `10 log10(x)`.
#[inline]
pub fn to_db<T: Real>(x: T) -> T {
    lit::<T>(10.0) * x.log10()
}

/// `10^(x/10)`.
#[inline]
pub fn from_db<T: Real>(x: T) -> T {
    lit::<T>(10.0).powf(x / lit(10.0))
}
