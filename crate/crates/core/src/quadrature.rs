//! Adaptive Simpson quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance and recursion limit for adaptive Simpson integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureCfg {
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadratureCfg {
    fn default() -> Self {
        Self { abs_tol: 1e-10, max_depth: 50 }
    }
}

impl QuadratureCfg {
    pub fn new(abs_tol: f64, max_depth: u32) -> Result<Self> {
        let cfg = Self { abs_tol, max_depth };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(invalid("quadrature abs_tol must be positive"));
        }
        if self.max_depth < 10 {
            return Err(invalid("quadrature max_depth must be at least 10"));
        }
        Ok(())
    }
}

struct Simpson<'a, F> {
    f: &'a F,
    max_depth: u32,
    // smallest local tolerance; keeps integrable singularities such as
    // square-root kinks within reach of the depth limit
    floor: f64,
}

impl<F: Fn(f64) -> f64> Simpson<'_, F> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &self,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = (self.f)(lm);
        let frm = (self.f)(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth >= self.max_depth || !(m > a && m < b) {
            return Err(Error::QuadratureNonConvergence { a, b, tol, depth });
        }
        let half = (0.5 * tol).max(self.floor);
        Ok(self.recurse(a, m, fa, flm, fm, left, half, depth + 1)?
            + self.recurse(m, b, fm, frm, fb, right, half, depth + 1)?)
    }
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureCfg) -> Result<f64> {
    integrate_with_tol(&f, a, b, cfg.abs_tol, cfg.max_depth)
}

fn integrate_with_tol<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if b < a {
        return integrate_with_tol(f, b, a, tol, max_depth).map(|v| -v);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    Simpson { f, max_depth, floor: tol * 2f64.powi(-20) }.recurse(a, b, fa, fm, fb, whole, tol, 0)
}

/// Integrate over `[a, b]` split at the interior `breaks`, which need not be
/// sorted. On each piece `f(x, lo, hi)` is evaluated with the piece bounds so
/// callers can use one-sided limits at the piece ends. The tolerance is
/// shared between pieces in proportion to their length.
pub fn integrate_pieces<F>(f: F, a: f64, b: f64, breaks: &[f64], cfg: &QuadratureCfg) -> Result<f64>
where
    F: Fn(f64, f64, f64) -> f64,
{
    if !(b > a) {
        return Ok(0.0);
    }
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    let mut lo = a;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        let tol = cfg.abs_tol * (hi - lo) / (b - a);
        let piece = |x: f64| f(x, lo, hi);
        total += integrate_with_tol(&piece, lo, hi, tol.max(f64::MIN_POSITIVE), cfg.max_depth)?;
        lo = hi;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_transcendentals() {
        let cfg = QuadratureCfg::default();
        assert!((integrate(|x| x * x, 0.0, 3.0, &cfg).unwrap() - 9.0).abs() < 1e-12);
        let v = integrate(f64::sin, 0.0, std::f64::consts::PI, &cfg).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
        assert!((integrate(|x| x, 2.0, 0.0, &cfg).unwrap() + 2.0).abs() < 1e-14);
    }

    #[test]
    fn square_root_kink_converges() {
        let cfg = QuadratureCfg::default();
        let v = integrate(|x: f64| x.abs().sqrt(), -1.0, 1.0, &cfg).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn pieces_use_one_sided_values() {
        // step function 0 on [0,1), 1 on [1,2]: evaluate piecewise at the midpoint
        let step = |x: f64| if x < 1.0 { 0.0 } else { 1.0 };
        let cfg = QuadratureCfg::default();
        let v = integrate_pieces(|_, lo, hi| step(0.5 * (lo + hi)), 0.0, 2.0, &[1.0], &cfg).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shallow_depth_reports_non_convergence() {
        let cfg = QuadratureCfg { abs_tol: 1e-14, max_depth: 10 };
        let err = integrate(|x: f64| (50.0 * x).sin().abs().sqrt(), 0.0, 10.0, &cfg).unwrap_err();
        assert!(err.is_numerical());
    }

    #[test]
    fn config_validation() {
        assert!(QuadratureCfg::new(0.0, 20).is_err());
        assert!(QuadratureCfg::new(1e-8, 5).is_err());
        assert!(QuadratureCfg::new(1e-8, 10).is_ok());
    }
}
