//! Base link functions and their exact derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Highest derivative order with an analytic implementation.
pub const MAX_DERIVATIVE_ORDER: usize = 8;

/// The base link `Φ0`, a nondecreasing map from the reals into `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Link {
    /// `Λ(u) = 1 / (1 + e^{-u})`.
    #[default]
    Logistic,
    /// Standard normal distribution function.
    Probit,
    /// `clamp(intercept + slope·u, 0, 1)`.
    AffineClamped { intercept: f64, slope: f64 },
    /// `Λ(u^β)` for odd `β`; the first nonvanishing derivative at 0 has order `β`.
    BetaFlat { beta: u32 },
    /// Constant probability, used to produce deterministic labels in tests.
    Constant { p: f64 },
}

impl Link {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Link::Logistic | Link::Probit => Ok(()),
            Link::AffineClamped { intercept, slope } => {
                if !intercept.is_finite() || !slope.is_finite() || slope < 0.0 {
                    Err(invalid("affine link needs finite intercept and nonnegative slope"))
                } else {
                    Ok(())
                }
            }
            Link::BetaFlat { beta } => {
                if beta == 0 || beta % 2 == 0 || beta as usize > MAX_DERIVATIVE_ORDER {
                    Err(invalid(format!(
                        "beta-flat link needs odd beta in 1..={MAX_DERIVATIVE_ORDER}, got {beta}"
                    )))
                } else {
                    Ok(())
                }
            }
            Link::Constant { p } => {
                if (0.0..=1.0).contains(&p) {
                    Ok(())
                } else {
                    Err(invalid("constant link needs p in [0, 1]"))
                }
            }
        }
    }

    /// Order of the first nonvanishing derivative at 0.
    pub fn beta(&self) -> u32 {
        match *self {
            Link::BetaFlat { beta } => beta,
            _ => 1,
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        match *self {
            Link::Logistic => logistic(u),
            Link::Probit => 0.5 * libm::erfc(-u / std::f64::consts::SQRT_2),
            Link::AffineClamped { intercept, slope } => (intercept + slope * u).clamp(0.0, 1.0),
            Link::BetaFlat { beta } => logistic(u.powi(beta as i32)),
            Link::Constant { p } => p,
        }
    }

    /// Derivative of order `order` at `u`.
    pub fn derivative(&self, u: f64, order: usize) -> Result<f64> {
        if order == 0 || order > MAX_DERIVATIVE_ORDER {
            return Err(Error::UnsupportedOrder { order, max: MAX_DERIVATIVE_ORDER });
        }
        let coeffs = self.taylor(u, order);
        Ok(coeffs[order] * factorial(order))
    }

    /// `σ_{Φ0} = sqrt(Φ0(0)(1 − Φ0(0)))`.
    pub fn sigma(&self) -> f64 {
        let p = self.value(0.0);
        (p * (1.0 - p)).sqrt()
    }

    /// Taylor coefficients `f^{(k)}(u)/k!` for `k = 0..=order`.
    fn taylor(&self, u: f64, order: usize) -> Vec<f64> {
        match *self {
            Link::Logistic => logistic_taylor(u, order),
            Link::Probit => probit_taylor(u, order),
            Link::AffineClamped { intercept, slope } => {
                let mut c = vec![0.0; order + 1];
                let v = intercept + slope * u;
                c[0] = v.clamp(0.0, 1.0);
                // one-sided (right) derivative at the clamp points
                let inside = if slope > 0.0 {
                    (0.0..1.0).contains(&v)
                } else {
                    false
                };
                if inside && order >= 1 {
                    c[1] = slope;
                }
                c
            }
            Link::BetaFlat { beta } => {
                let beta = beta as usize;
                // inner polynomial (u + h)^β expanded in h
                let mut inner = vec![0.0; order + 1];
                for (k, slot) in inner.iter_mut().enumerate().take(beta.min(order) + 1) {
                    *slot = binomial(beta, k) * u.powi((beta - k) as i32);
                }
                let outer = logistic_taylor(inner[0], order);
                compose(&outer, &inner, order)
            }
            Link::Constant { p } => {
                let mut c = vec![0.0; order + 1];
                c[0] = p;
                c
            }
        }
    }
}

fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Taylor series of the logistic from the ODE `Λ' = Λ(1 − Λ)`. The series of
/// `1 − Λ` starts from `Λ(−u)` to keep precision in the upper tail.
fn logistic_taylor(u: f64, order: usize) -> Vec<f64> {
    let mut c = vec![0.0; order + 1];
    let mut d = vec![0.0; order + 1];
    c[0] = logistic(u);
    d[0] = logistic(-u);
    for k in 0..order {
        let conv: f64 = (0..=k).map(|j| c[j] * d[k - j]).sum();
        c[k + 1] = conv / (k + 1) as f64;
        d[k + 1] = -c[k + 1];
    }
    c
}

fn probit_taylor(u: f64, order: usize) -> Vec<f64> {
    let mut c = vec![0.0; order + 1];
    c[0] = 0.5 * libm::erfc(-u / std::f64::consts::SQRT_2);
    let pdf = (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    // Φ^{(k)}(u) = (−1)^{k−1} He_{k−1}(u) φ(u)
    let (mut he_prev, mut he) = (0.0, 1.0);
    for k in 1..=order {
        let sign = if (k - 1) % 2 == 0 { 1.0 } else { -1.0 };
        c[k] = sign * he * pdf / factorial(k);
        let next = u * he - (k - 1) as f64 * he_prev;
        he_prev = he;
        he = next;
    }
    c
}

/// Truncated composition `outer(inner(h))` where `outer` is expanded around
/// `inner[0]`.
fn compose(outer: &[f64], inner: &[f64], order: usize) -> Vec<f64> {
    let mut out = vec![0.0; order + 1];
    out[0] = outer[0];
    // powers of (inner − inner[0])
    let mut shift = inner.to_vec();
    shift[0] = 0.0;
    let mut power = vec![0.0; order + 1];
    power[0] = 1.0;
    for b in outer.iter().skip(1) {
        let mut next = vec![0.0; order + 1];
        for (i, &p) in power.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (j, &s) in shift.iter().enumerate().skip(1) {
                if i + j > order {
                    break;
                }
                next[i + j] += p * s;
            }
        }
        power = next;
        for (o, p) in out.iter_mut().zip(&power) {
            *o += b * p;
        }
    }
    out
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_difference(link: &Link, u: f64, order: usize) -> f64 {
        // derivative of order `order` from the analytic derivative of order − 1
        let h = 1e-5;
        if order == 1 {
            (link.value(u + h) - link.value(u - h)) / (2.0 * h)
        } else {
            (link.derivative(u + h, order - 1).unwrap() - link.derivative(u - h, order - 1).unwrap())
                / (2.0 * h)
        }
    }

    #[test]
    fn logistic_values() {
        assert_eq!(Link::Logistic.value(0.0), 0.5);
        assert!((Link::Logistic.value(50.0) - 1.0).abs() <= 1e-15);
        assert!((Link::Logistic.derivative(0.0, 1).unwrap() - 0.25).abs() < 1e-15);
        assert!((Link::Logistic.value(0.5) - 0.622_459_331_201_854_6).abs() < 1e-15);
    }

    #[test]
    fn beta_flat_derivatives_at_zero() {
        let link = Link::BetaFlat { beta: 3 };
        assert_eq!(link.value(0.0), 0.5);
        assert_eq!(link.derivative(0.0, 1).unwrap(), 0.0);
        assert_eq!(link.derivative(0.0, 2).unwrap(), 0.0);
        assert!((link.derivative(0.0, 3).unwrap() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn beta_flat_third_derivative_matches_chain_rule_away_from_zero() {
        // d³/du³ Λ(u³) = 6Λ'(u³) + 54u³Λ''(u³) + 27u⁶Λ'''(u³)
        let u: f64 = 0.7;
        let g = u.powi(3);
        let l = logistic(g);
        let l1 = l * (1.0 - l);
        let l2 = l1 * (1.0 - 2.0 * l);
        let l3 = l1 * (1.0 - 6.0 * l + 6.0 * l * l);
        let expected = 6.0 * l1 + 54.0 * u.powi(3) * l2 + 27.0 * u.powi(6) * l3;
        let got = Link::BetaFlat { beta: 3 }.derivative(u, 3).unwrap();
        assert!((got - expected).abs() < 1e-13, "{got} vs {expected}");
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let links = [Link::Logistic, Link::Probit, Link::BetaFlat { beta: 3 }, Link::BetaFlat { beta: 5 }];
        for link in links {
            for order in 1..=4 {
                for &u in &[-1.0, -0.4, 0.0, 0.3, 1.0] {
                    let exact = link.derivative(u, order).unwrap();
                    let fd = central_difference(&link, u, order);
                    let scale = exact.abs().max(1e-3);
                    assert!(
                        (exact - fd).abs() / scale < 1e-6,
                        "{link:?} order {order} at {u}: {exact} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn unsupported_orders_are_rejected() {
        assert!(matches!(
            Link::Logistic.derivative(0.0, 0),
            Err(Error::UnsupportedOrder { order: 0, .. })
        ));
        assert!(Link::Logistic.derivative(0.0, MAX_DERIVATIVE_ORDER + 1).is_err());
    }

    #[test]
    fn even_beta_is_rejected() {
        assert!(Link::BetaFlat { beta: 2 }.validate().is_err());
        assert!(Link::BetaFlat { beta: 3 }.validate().is_ok());
        assert!(Link::AffineClamped { intercept: 0.5, slope: -1.0 }.validate().is_err());
    }

    #[test]
    fn links_are_monotone_and_bounded() {
        let links = [
            Link::Logistic,
            Link::Probit,
            Link::BetaFlat { beta: 3 },
            Link::AffineClamped { intercept: 0.5, slope: 0.3 },
        ];
        for link in links {
            let mut prev = -1.0;
            for i in -400..=400 {
                let v = link.value(i as f64 * 0.05);
                assert!((0.0..=1.0).contains(&v));
                assert!(v >= prev);
                prev = v;
            }
            let p0 = link.value(0.0);
            assert!(p0 > 0.0 && p0 < 1.0);
        }
    }

    #[test]
    fn sigma_of_logistic() {
        assert_eq!(Link::Logistic.sigma(), 0.5);
    }
}
