//! Hellinger distance, `L1` errors, sup norms and the two-sample KS statistic.

use crate::error::{invalid, Result};
use crate::estimator::StepEstimate;
use crate::model::{Curve, FeatureLaw, Sample};
use crate::quadrature::{integrate_pieces, QuadratureCfg};

/// Evaluate a curve on the closed piece `[lo, hi]`, using the left limit at
/// the right end.
fn on_piece(f: &impl Curve, x: f64, hi: f64) -> f64 {
    if x >= hi {
        f.left_limit(hi)
    } else {
        f.value(x)
    }
}

fn merged_breaks(f: &impl Curve, g: &impl Curve) -> Vec<f64> {
    let mut b = f.breakpoints();
    b.extend(g.breakpoints());
    b
}

/// Hellinger distance between the Bernoulli regression models `f` and `g`
/// under the feature law.
pub fn hellinger(f: &impl Curve, g: &impl Curve, law: &FeatureLaw, q: &QuadratureCfg) -> Result<f64> {
    q.validate()?;
    let t = law.half_width();
    let integrand = |x: f64, _lo: f64, hi: f64| {
        let a = on_piece(f, x, hi).clamp(0.0, 1.0);
        let b = on_piece(g, x, hi).clamp(0.0, 1.0);
        let d0 = (1.0 - a).sqrt() - (1.0 - b).sqrt();
        let d1 = a.sqrt() - b.sqrt();
        0.5 * (d0 * d0 + d1 * d1) * law.density(x.clamp(-t, t))
    };
    let sq = integrate_pieces(integrand, -t, t, &merged_breaks(f, g), q)?;
    Ok(sq.max(0.0).sqrt())
}

/// `∫_lo^hi |f − g| dt` for arbitrary curves, split at their breakpoints.
pub fn l1_distance_lebesgue(f: &impl Curve, g: &impl Curve, lo: f64, hi: f64, q: &QuadratureCfg) -> Result<f64> {
    q.validate()?;
    integrate_pieces(
        |x, _lo, h| (on_piece(f, x, h) - on_piece(g, x, h)).abs(),
        lo,
        hi,
        &merged_breaks(f, g),
        q,
    )
}

/// Integration measure for [`l1_error`].
#[derive(Debug, Clone, Copy)]
pub enum L1Measure<'a> {
    /// Lebesgue measure on `[lo, hi]`.
    Lebesgue { lo: f64, hi: f64 },
    /// The feature distribution `P_X`.
    FeatureLaw(&'a FeatureLaw),
    /// The empirical distribution `P_n` of a sample.
    Empirical(&'a Sample),
}

/// Bisection tolerance for level crossings.
const CROSSING_TOL: f64 = 1e-12;

/// Point in `[a, b]` where the nondecreasing `h` changes sign.
fn crossing(h: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    while b - a > CROSSING_TOL * (1.0 + a.abs().max(b.abs())) {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if h(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `∫|step − target| dμ` for a nondecreasing continuous target.
///
/// On each constancy interval of the step function the sign of
/// `target − level` changes at most once; the crossing is located by
/// bisection and each signed sub-piece is integrated separately.
pub fn l1_error(step: &StepEstimate, target: &impl Curve, measure: L1Measure<'_>, q: &QuadratureCfg) -> Result<f64> {
    q.validate()?;
    let (lo, hi, weight): (f64, f64, Box<dyn Fn(f64) -> f64 + '_>) = match measure {
        L1Measure::Empirical(s) => {
            let total: f64 = s
                .xs()
                .iter()
                .zip(s.weights())
                .map(|(&x, &w)| w as f64 * (step.value(x) - target.value(x)).abs())
                .sum();
            return Ok(total / s.n() as f64);
        }
        L1Measure::Lebesgue { lo, hi } => (lo, hi, Box::new(|_| 1.0)),
        L1Measure::FeatureLaw(law) => {
            let t = law.half_width();
            (-t, t, Box::new(move |x: f64| law.density(x.clamp(-t, t))))
        }
    };
    if !(hi > lo) {
        return Err(invalid(format!("empty integration interval [{lo}, {hi}]")));
    }
    let target_breaks = target.breakpoints();
    let mut cuts: Vec<f64> = step.jump_xs.iter().copied().filter(|&x| x > lo && x < hi).collect();
    cuts.push(hi);
    let mut total = 0.0;
    let mut a = lo;
    for b in cuts {
        let level = step.value(a);
        let h = |x: f64| target.value(x) - level;
        let signed = |x: f64, _lo: f64, top: f64| (on_piece(target, x, top) - level) * weight(x);
        let share = |u: f64, v: f64| QuadratureCfg { abs_tol: q.abs_tol * (v - u) / (hi - lo), ..*q };
        if h(a) >= 0.0 {
            total += integrate_pieces(signed, a, b, &target_breaks, &share(a, b))?;
        } else if target.left_limit(b) - level <= 0.0 {
            total -= integrate_pieces(signed, a, b, &target_breaks, &share(a, b))?;
        } else {
            let c = crossing(h, a, b);
            total -= integrate_pieces(signed, a, c, &target_breaks, &share(a, c))?;
            total += integrate_pieces(signed, c, b, &target_breaks, &share(c, b))?;
        }
        a = b;
    }
    Ok(total)
}

/// `sup_{x ∈ [lo, hi]} |step(x) − target(x)|` for a nondecreasing continuous
/// target, attained at the interval ends or on either side of a jump.
pub fn sup_norm_on(step: &StepEstimate, target: &impl Curve, lo: f64, hi: f64) -> f64 {
    let gap = |s: f64, x: f64| (s - target.value(x)).abs();
    let mut best = gap(step.value(lo), lo).max(gap(step.value(hi), hi)).max(gap(step.left_limit(hi), hi));
    for &j in step.jump_xs.iter().filter(|&&j| j > lo && j <= hi) {
        best = best.max(gap(step.left_limit(j), j)).max(gap(step.value(j), j));
    }
    best
}

/// Two-sample Kolmogorov–Smirnov statistic `sup_x |F_a(x) − F_b(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("KS statistic needs two nonempty samples"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(invalid("KS statistic undefined for NaN draws"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::npmle_fit;
    use crate::model::FnCurve;

    fn constant_step(v: f64, at: f64) -> StepEstimate {
        StepEstimate { jump_xs: vec![at], values: vec![v], n: 1 }
    }

    #[test]
    fn hellinger_examples() {
        let law = FeatureLaw::uniform(1.0);
        let q = QuadratureCfg::default();
        let f = FnCurve(|x: f64| 0.5 + 0.2 * x);
        assert_eq!(hellinger(&f, &f, &law, &q).unwrap(), 0.0);
        let d = hellinger(&FnCurve(|_| 0.0), &FnCurve(|_| 1.0), &law, &q).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l1_examples() {
        let q = QuadratureCfg::default();
        let leb = L1Measure::Lebesgue { lo: -1.0, hi: 1.0 };
        let zero = constant_step(0.0, -1.0);
        let half = constant_step(0.5, -1.0);
        assert_eq!(l1_error(&half, &FnCurve(|_| 0.5), leb, &q).unwrap(), 0.0);
        assert!((l1_error(&zero, &FnCurve(|_| 0.5), leb, &q).unwrap() - 1.0).abs() < 1e-12);
        let ramp = FnCurve(|t: f64| (t + 1.0) / 4.0);
        assert!((l1_error(&zero, &ramp, leb, &q).unwrap() - 0.5).abs() < 1e-12);
        // crossing inside a level: ∫|t/4 + 1/4 − 1/4| = 2·(1/8)
        let quarter = constant_step(0.25, -1.0);
        assert!((l1_error(&quarter, &ramp, leb, &q).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn l1_under_feature_law_and_empirical_measure() {
        let q = QuadratureCfg::default();
        let law = FeatureLaw::uniform(2.0);
        let zero = constant_step(0.0, -2.0);
        let v = l1_error(&zero, &FnCurve(|_| 0.5), L1Measure::FeatureLaw(&law), &q).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        let s = Sample::from_xy(&[0.0, 1.0, 2.0], &[false, true, true]).unwrap();
        let fit = npmle_fit(&s);
        let v = l1_error(&fit, &FnCurve(|_| 0.5), L1Measure::Empirical(&s), &q).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sup_norm_examples() {
        let half = constant_step(0.5, -1.0);
        assert_eq!(sup_norm_on(&half, &FnCurve(|_| 0.5), -0.5, 0.5), 0.0);
        let zero = constant_step(0.0, -1.0);
        assert_eq!(sup_norm_on(&zero, &FnCurve(|_| 0.3), -0.5, 0.5), 0.3);
        // jump at 0 from 0.2 to 0.8 against t/2 + 0.5 on [−1, 1]
        let step = StepEstimate { jump_xs: vec![-1.0, 0.0], values: vec![0.2, 0.8], n: 2 };
        let target = FnCurve(|t: f64| 0.5 * t + 0.5);
        let candidates = [(0.2f64 - 0.0).abs(), (0.2f64 - 0.5).abs(), (0.8f64 - 0.5).abs(), (0.8f64 - 1.0).abs()];
        let want = candidates.iter().copied().fold(0.0, f64::max);
        assert!((sup_norm_on(&step, &target, -1.0, 1.0) - want).abs() < 1e-15);
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.5, 2.5]).unwrap(), 0.5);
        assert!(ks_two_sample(&[], &[1.0]).is_err());
    }

    #[test]
    fn ks_handles_ties_across_samples() {
        assert_eq!(ks_two_sample(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap(), 1.0 / 3.0);
    }
}
