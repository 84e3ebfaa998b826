//! Links, feature laws, scenarios, sampling and lower-bound hypotheses.

mod hypotheses;
mod law;
mod link;
mod sample;
mod scenario;

pub use hypotheses::{
    build_assouad_cube, build_pointwise_hypotheses, check_membership, default_cube_c, default_slow_c,
    HypothesisCube, HypothesisPair, Membership, PairRegime, PiecewiseLinear, DEFAULT_FAST_C,
};
pub use law::{FeatureLaw, LawFn};
pub(crate) use link::factorial;
pub use link::{Link, MAX_DERIVATIVE_ORDER};
pub use sample::{sample_dataset, sample_dataset_with, Sample};
pub use scenario::{Regression, Scenario};

/// A real function of one variable that may jump at finitely many points.
pub trait Curve: Sync {
    fn value(&self, x: f64) -> f64;

    /// Limit from the left; equals `value` for continuous curves.
    fn left_limit(&self, x: f64) -> f64 {
        self.value(x)
    }

    /// Points where the curve jumps or has a kink, in increasing order.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Adapter turning a closure into a continuous [`Curve`].
pub struct FnCurve<F>(pub F);

impl<F: Fn(f64) -> f64 + Sync> Curve for FnCurve<F> {
    fn value(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

impl<C: Curve + ?Sized> Curve for &C {
    fn value(&self, x: f64) -> f64 {
        (**self).value(x)
    }
    fn left_limit(&self, x: f64) -> f64 {
        (**self).left_limit(x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        (**self).breakpoints()
    }
}
