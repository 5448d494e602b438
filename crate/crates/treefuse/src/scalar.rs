//! Scalar abstraction: the numerical core is generic over the floating-point
//! type; `f32` and `f64` are supported.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Open01, StandardUniform};

/// Floating-point scalar usable throughout the crate.
///
/// Besides the usual `num_traits` arithmetic, a few sampling primitives are
/// attached here so that generic code does not need to carry `rand_distr`
/// trait bounds everywhere.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + std::iter::Sum
    + Display
    + Debug
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Draw from the standard normal distribution.
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw from Uniform[0, 1).
    fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw from Uniform(0, 1), both endpoints excluded.
    fn uniform_open01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw from Gamma(shape, scale) (scale = 1/rate).
    fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: Self, scale: Self) -> Self;
}

impl Scalar for f64 {
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Normal::new(0.0, 1.0).unwrap().sample(rng)
    }

    fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardUniform.sample(rng)
    }

    fn uniform_open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Open01.sample(rng)
    }

    fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: Self, scale: Self) -> Self {
        Gamma::new(shape, scale).expect("gamma parameters").sample(rng)
    }
}

impl Scalar for f32 {
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Normal::new(0.0f32, 1.0).unwrap().sample(rng)
    }

    fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardUniform.sample(rng)
    }

    fn uniform_open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Open01.sample(rng)
    }

    fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: Self, scale: Self) -> Self {
        Gamma::new(shape, scale).expect("gamma parameters").sample(rng)
    }
}

/// Shorthand for lifting an `f64` constant into the generic scalar type.
#[inline]
pub(crate) fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

/// Draw a half-Cauchy C⁺(0, scale) variate via the tangent transform.
pub fn half_cauchy<T: Scalar, R: Rng + ?Sized>(rng: &mut R, scale: T) -> T {
    let u: T = T::uniform_open01(rng);
    scale * (u * lit::<T>(std::f64::consts::FRAC_PI_2)).tan()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn half_cauchy_is_positive_and_heavy_tailed() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws: Vec<f64> = (0..20_000).map(|_| half_cauchy(&mut rng, 1.0)).collect();
        assert!(draws.iter().all(|&x| x > 0.0));
        // Median of C+(0,1) is 1.
        let mut sorted = draws.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = sorted[draws.len() / 2];
        assert!((med - 1.0).abs() < 0.05, "median {med}");
    }

    #[test]
    fn generic_code_works_in_f32() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: f32 = half_cauchy(&mut rng, 2.0f32);
        assert!(x > 0.0);
    }
}
