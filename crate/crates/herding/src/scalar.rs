//! Scalar abstraction: the whole engine is generic over `f32`/`f64`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point scalar usable by the engine.
///
/// Combines `nalgebra`'s field operations (needed by the SVD-based
/// pseudoinverse) with the `num-traits` conversions used for configuration
/// constants and step counting.
pub trait Real:
    nalgebra::RealField + Copy + Default + num_traits::FromPrimitive + num_traits::ToPrimitive
{
    fn finite(self) -> bool;

    /// Draw a standard-normal sample from `rng`.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Draw a uniform sample in `[0, 1)` from `rng`.
    fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Conversion for numeric constants.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable")
    }
}

impl Real for f32 {
    fn finite(self) -> bool {
        f32::is_finite(self)
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen::<f32>()
    }
}

impl Real for f64 {
    fn finite(self) -> bool {
        f64::is_finite(self)
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen::<f64>()
    }
}
