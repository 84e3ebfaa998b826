use serde::{Deserialize, Serialize};

use super::{Curve, FeatureLaw, Link};
use crate::error::{invalid, Result};

/// Weak-feature-impact model: `P(Y = 1 | X) = Φ0(δ_n X)` with
/// `δ_n = c·n^{−γ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub link: Link,
    pub law: FeatureLaw,
    pub impact_scale: f64,
    pub impact_exponent: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            link: Link::Logistic,
            law: FeatureLaw::uniform(1.0),
            impact_scale: 1.0,
            impact_exponent: 0.0,
        }
    }
}

impl Scenario {
    pub fn new(link: Link, law: FeatureLaw, impact_scale: f64, impact_exponent: f64) -> Result<Self> {
        let scn = Self { link, law, impact_scale, impact_exponent };
        scn.validate()?;
        Ok(scn)
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        self.law.validate()?;
        if !(self.impact_scale > 0.0 && self.impact_scale.is_finite()) {
            return Err(invalid("impact_scale must be positive and finite"));
        }
        if !(self.impact_exponent >= 0.0 && self.impact_exponent.is_finite()) {
            return Err(invalid("impact_exponent must be nonnegative and finite"));
        }
        Ok(())
    }

    pub fn with_exponent(mut self, gamma: f64) -> Self {
        self.impact_exponent = gamma;
        self
    }

    pub fn beta(&self) -> u32 {
        self.link.beta()
    }

    pub fn half_width(&self) -> f64 {
        self.law.half_width()
    }

    /// Level of feature impact `δ_n`.
    pub fn delta(&self, n: u64) -> f64 {
        self.impact_scale * (n as f64).powf(-self.impact_exponent)
    }

    /// `Φ_n(x) = Φ0(δ_n x)`.
    pub fn phi_n(&self, n: u64, x: f64) -> f64 {
        self.link.value(self.delta(n) * x)
    }

    /// `n·δ_n^{2β}`, the quantity separating the regimes.
    pub fn regime_index(&self, n: u64) -> f64 {
        n as f64 * self.delta(n).powi(2 * self.beta() as i32)
    }

    /// `Φ_n` as a curve for the metrics module.
    pub fn regression(&self, n: u64) -> Regression {
        Regression { link: self.link, delta: self.delta(n) }
    }
}

/// `x ↦ Φ0(δ·x)` for a fixed `δ`.
#[derive(Debug, Clone, Copy)]
pub struct Regression {
    pub link: Link,
    pub delta: f64,
}

impl Curve for Regression {
    fn value(&self, x: f64) -> f64 {
        self.link.value(self.delta * x)
    }
}
