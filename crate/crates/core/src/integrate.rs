//! Fixed-step Heun (explicit trapezoidal) integration on manifolds.
//!
//! A state only needs to know how to move along a tangent direction
//! ([`HeunState::retract`]) and how to average two tangents. For vector
//! spaces that is `y + h·d`; for rotations it is `exp(h·ω^×) R`.

use crate::dynamics::{Pose, Twist};

/// A state that can be advanced along a tangent vector.
pub trait HeunState: Sized {
    type Tangent;

    fn retract(&self, d: &Self::Tangent, h: f64) -> Self;

    fn average(a: &Self::Tangent, b: &Self::Tangent) -> Self::Tangent;
}

/// One Heun step: predictor `ỹ = y ⊕ h k₁`, corrector `y ⊕ h (k₁ + k₂)/2`
/// with `k₂` evaluated at `(t + h, ỹ)`.
pub fn heun_step<S, F, E>(y: &S, t: f64, h: f64, mut f: F) -> Result<S, E>
where
    S: HeunState,
    F: FnMut(f64, &S) -> Result<S::Tangent, E>,
{
    let k1 = f(t, y)?;
    let predicted = y.retract(&k1, h);
    let k2 = f(t + h, &predicted)?;
    Ok(y.retract(&S::average(&k1, &k2), h))
}

impl HeunState for f64 {
    type Tangent = f64;

    fn retract(&self, d: &f64, h: f64) -> f64 {
        self + h * d
    }

    fn average(a: &f64, b: &f64) -> f64 {
        0.5 * (a + b)
    }
}

impl<const D: usize> HeunState for nalgebra::SVector<f64, D> {
    type Tangent = nalgebra::SVector<f64, D>;

    fn retract(&self, d: &Self::Tangent, h: f64) -> Self {
        self + d * h
    }

    fn average(a: &Self::Tangent, b: &Self::Tangent) -> Self::Tangent {
        (a + b) * 0.5
    }
}

/// Poses advance with `x ← x + h v` and `R ← exp(h ω^×) R`.
impl HeunState for Pose {
    type Tangent = Twist;

    fn retract(&self, d: &Twist, h: f64) -> Pose {
        Pose::new(self.x + d.v * h, self.r.left_exp(&(d.w * h)))
    }

    fn average(a: &Twist, b: &Twist) -> Twist {
        Twist::new((a.v + b.v) * 0.5, (a.w + b.w) * 0.5)
    }
}
