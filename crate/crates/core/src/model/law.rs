//! Feature distributions on a compact interval `[-T, T]`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Which of the four feature-law functions to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawFn {
    Density,
    Cdf,
    Quantile,
    DensityDerivative,
}

/// Law of the feature `X`, supported on `[-T, T]`.
///
/// `Polynomial` has density `(1 + a·u + b·(u² − 1/3)) / (2T)` with `u = x/T`;
/// the quadratic term integrates to zero so the density has unit mass for
/// every `(a, b)` that keeps it positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureLaw {
    Uniform { half_width: f64 },
    Polynomial { half_width: f64, tilt: f64, curvature: f64 },
}

impl Default for FeatureLaw {
    fn default() -> Self {
        FeatureLaw::Uniform { half_width: 1.0 }
    }
}

impl FeatureLaw {
    pub fn uniform(half_width: f64) -> Self {
        FeatureLaw::Uniform { half_width }
    }

    pub fn half_width(&self) -> f64 {
        match *self {
            FeatureLaw::Uniform { half_width } | FeatureLaw::Polynomial { half_width, .. } => half_width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.half_width();
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid("feature law half_width must be positive and finite"));
        }
        if let FeatureLaw::Polynomial { tilt, curvature, .. } = *self {
            if !tilt.is_finite() || !curvature.is_finite() {
                return Err(invalid("polynomial law parameters must be finite"));
            }
            if self.min_density() <= 0.0 {
                return Err(invalid("polynomial law density must stay positive on [-T, T]"));
            }
        }
        Ok(())
    }

    fn poly_shape(tilt: f64, curvature: f64, u: f64) -> f64 {
        1.0 + tilt * u + curvature * (u * u - 1.0 / 3.0)
    }

    /// Candidate extremal points of the density in `u` coordinates.
    fn critical_us(&self) -> Vec<f64> {
        let mut us = vec![-1.0, 1.0];
        if let FeatureLaw::Polynomial { tilt, curvature, .. } = *self {
            if curvature != 0.0 {
                let v = -tilt / (2.0 * curvature);
                if (-1.0..=1.0).contains(&v) {
                    us.push(v);
                }
            }
        }
        us
    }

    fn min_density(&self) -> f64 {
        let t = self.half_width();
        self.critical_us().into_iter().map(|u| self.density(u * t)).fold(f64::INFINITY, f64::min)
    }

    /// `sup p_X` over the support.
    pub fn sup_density(&self) -> f64 {
        let t = self.half_width();
        self.critical_us().into_iter().map(|u| self.density(u * t)).fold(0.0, f64::max)
    }

    /// Density; zero outside `[-T, T]`.
    pub fn density(&self, x: f64) -> f64 {
        let t = self.half_width();
        if x < -t || x > t {
            return 0.0;
        }
        match *self {
            FeatureLaw::Uniform { .. } => 0.5 / t,
            FeatureLaw::Polynomial { tilt, curvature, .. } => {
                Self::poly_shape(tilt, curvature, x / t) / (2.0 * t)
            }
        }
    }

    pub fn density_derivative(&self, x: f64) -> f64 {
        let t = self.half_width();
        if x < -t || x > t {
            return 0.0;
        }
        match *self {
            FeatureLaw::Uniform { .. } => 0.0,
            FeatureLaw::Polynomial { tilt, curvature, .. } => {
                (tilt + 2.0 * curvature * x / t) / (2.0 * t * t)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let t = self.half_width();
        if x <= -t {
            return 0.0;
        }
        if x >= t {
            return 1.0;
        }
        let u = x / t;
        let v = match *self {
            FeatureLaw::Uniform { .. } => 0.5 * (u + 1.0),
            FeatureLaw::Polynomial { tilt, curvature, .. } => {
                0.5 * ((u + 1.0) + 0.5 * tilt * (u * u - 1.0) + curvature * (u * u * u - u) / 3.0)
            }
        };
        v.clamp(0.0, 1.0)
    }

    /// `F_X^{-1}(s)`; `s` must lie in `[0, 1]`.
    pub fn quantile(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(invalid(format!("quantile argument {s} outside [0, 1]")));
        }
        Ok(self.quantile_unchecked(s))
    }

    pub(crate) fn quantile_unchecked(&self, s: f64) -> f64 {
        let t = self.half_width();
        match *self {
            FeatureLaw::Uniform { .. } => t * (2.0 * s - 1.0),
            FeatureLaw::Polynomial { .. } => {
                if s <= 0.0 {
                    return -t;
                }
                if s >= 1.0 {
                    return t;
                }
                // safeguarded Newton on a monotone cdf
                let (mut lo, mut hi) = (-t, t);
                let mut x = t * (2.0 * s - 1.0);
                for _ in 0..100 {
                    let f = self.cdf(x) - s;
                    if f == 0.0 {
                        return x;
                    }
                    if f < 0.0 {
                        lo = x;
                    } else {
                        hi = x;
                    }
                    let step = f / self.density(x);
                    let mut next = x - step;
                    if !(next > lo && next < hi) {
                        next = 0.5 * (lo + hi);
                    }
                    if (next - x).abs() <= 1e-15 * t {
                        return next;
                    }
                    x = next;
                }
                x
            }
        }
    }

    pub fn eval(&self, which: LawFn, u: f64) -> Result<f64> {
        Ok(match which {
            LawFn::Density => self.density(u),
            LawFn::Cdf => self.cdf(u),
            LawFn::Quantile => self.quantile(u)?,
            LawFn::DensityDerivative => self.density_derivative(u),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadratureCfg};

    fn laws() -> Vec<FeatureLaw> {
        vec![
            FeatureLaw::uniform(1.0),
            FeatureLaw::uniform(2.5),
            FeatureLaw::Polynomial { half_width: 1.0, tilt: 0.4, curvature: 0.3 },
            FeatureLaw::Polynomial { half_width: 2.0, tilt: -0.5, curvature: -0.6 },
        ]
    }

    #[test]
    fn uniform_examples() {
        let law = FeatureLaw::uniform(1.0);
        assert_eq!(law.eval(LawFn::Density, 0.0).unwrap(), 0.5);
        assert_eq!(law.eval(LawFn::Quantile, 0.75).unwrap(), 0.5);
        assert_eq!(law.eval(LawFn::Cdf, -1.0).unwrap(), 0.0);
    }

    #[test]
    fn quantile_outside_unit_interval_is_an_error() {
        let law = FeatureLaw::uniform(1.0);
        assert!(law.quantile(1.5).is_err());
        assert!(law.quantile(-0.1).is_err());
    }

    #[test]
    fn densities_integrate_to_one() {
        let cfg = QuadratureCfg { abs_tol: 1e-13, max_depth: 50 };
        for law in laws() {
            law.validate().unwrap();
            let t = law.half_width();
            let mass = integrate(|x| law.density(x), -t, t, &cfg).unwrap();
            assert!((mass - 1.0).abs() < 1e-10, "{law:?}: {mass}");
        }
    }

    #[test]
    fn cdf_and_quantile_are_inverse() {
        for law in laws() {
            let t = law.half_width();
            assert_eq!(law.cdf(-t), 0.0);
            assert_eq!(law.cdf(t), 1.0);
            for i in 0..=200 {
                let s = i as f64 / 200.0;
                let back = law.cdf(law.quantile(s).unwrap());
                assert!((back - s).abs() < 1e-10, "{law:?} at {s}: {back}");
            }
        }
    }

    #[test]
    fn density_is_cdf_derivative() {
        let h = 1e-6;
        for law in laws() {
            let t = law.half_width();
            for i in 1..40 {
                let x = -t + 2.0 * t * i as f64 / 40.0;
                let fd = (law.cdf(x + h) - law.cdf(x - h)) / (2.0 * h);
                assert!((fd - law.density(x)).abs() < 1e-6);
                let fd2 = (law.density(x + h) - law.density(x - h)) / (2.0 * h);
                assert!((fd2 - law.density_derivative(x)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn nonpositive_density_is_rejected() {
        let law = FeatureLaw::Polynomial { half_width: 1.0, tilt: 1.5, curvature: 0.0 };
        assert!(law.validate().is_err());
        assert!(FeatureLaw::uniform(0.0).validate().is_err());
    }

    #[test]
    fn sup_density_finds_the_peak() {
        let law = FeatureLaw::Polynomial { half_width: 1.0, tilt: 0.0, curvature: -0.6 };
        // peak at u = 0: (1 + 0.2)/2
        assert!((law.sup_density() - 0.6).abs() < 1e-15);
        assert_eq!(FeatureLaw::uniform(2.0).sup_density(), 0.25);
    }
}
