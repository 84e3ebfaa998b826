//! Two-point and hypercube hypothesis families behind the minimax lower
//! bounds, with a checker for the restricted class `𝓕_δ`.

use serde::Serialize;

use super::{Curve, FeatureLaw};
use crate::error::{invalid, Error, Result};

/// Continuous piecewise-affine function, constant outside its knot range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseLinear {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(invalid("piecewise-linear function needs at least two matching knots"));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("knots must be strictly increasing"));
        }
        Ok(Self { knots, values })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> impl Iterator<Item = f64> + '_ {
        self.knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(k, v)| (v[1] - v[0]) / (k[1] - k[0]))
    }
}

impl Curve for PiecewiseLinear {
    fn value(&self, x: f64) -> f64 {
        let k = &self.knots;
        if x <= k[0] {
            return self.values[0];
        }
        if x >= k[k.len() - 1] {
            return self.values[k.len() - 1];
        }
        let j = k.partition_point(|&v| v <= x);
        let (x0, x1) = (k[j - 1], k[j]);
        let (y0, y1) = (self.values[j - 1], self.values[j]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.knots.clone()
    }
}

/// Outcome of a `𝓕_δ` membership check.
#[derive(Debug, Clone, Serialize)]
pub struct Membership {
    pub lipschitz: f64,
    pub min_modulus_ratio: f64,
    pub min_value: f64,
    pub max_value: f64,
    pub monotone: bool,
    pub member: bool,
}

/// Check membership in `𝓕_δ` on a dense grid of `[-T, T]`: values in
/// `[0, 1]`, nondecreasing, Lipschitz constant at most `δ`, and
/// `ω_ν/ν ≥ δ/2` for dyadic spacings `ν = 2T·2^{-k}`.
pub fn check_membership(f: &impl Curve, delta: f64, half_width: f64) -> Membership {
    const LEVELS: u32 = 12;
    let cells = 1usize << LEVELS;
    let t = half_width;
    let step = 2.0 * t / cells as f64;
    let vals: Vec<f64> = (0..=cells).map(|i| f.value(-t + i as f64 * step)).collect();
    let lipschitz = vals.windows(2).map(|w| (w[1] - w[0]) / step).fold(f64::NEG_INFINITY, f64::max);
    let monotone = vals.windows(2).all(|w| w[1] >= w[0]);
    let mut min_ratio = f64::INFINITY;
    for k in 0..=(LEVELS - 2) {
        let stride = cells >> k;
        let nu = stride as f64 * step;
        let omega = (0..=cells - stride).map(|i| vals[i + stride] - vals[i]).fold(f64::NEG_INFINITY, f64::max);
        min_ratio = min_ratio.min(omega / nu);
    }
    let min_value = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let max_value = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = 1e-9 * delta.max(1e-300);
    let member = monotone
        && min_value >= 0.0
        && max_value <= 1.0
        && lipschitz <= delta + slack
        && min_ratio >= 0.5 * delta - slack;
    Membership { lipschitz, min_modulus_ratio: min_ratio, min_value, max_value, monotone, member }
}

/// Regime of a two-point construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairRegime {
    /// `δ < n^{-1/2}`: parallel affine functions.
    Fast,
    /// `δ ≥ n^{-1/2}`: slopes `δ/2` and `δ` swapped around `x0`.
    Slow,
}

/// Two hypotheses `Φ_{0,n} ≥ Φ_{1,n}` separated at `x0`.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisPair {
    pub regime: PairRegime,
    pub delta: f64,
    pub n: u64,
    pub c: f64,
    pub x0: f64,
    pub upper: PiecewiseLinear,
    pub lower: PiecewiseLinear,
}

impl HypothesisPair {
    /// `2C·max{n^{-1/2}, (n/δ)^{-1/3}}`.
    pub fn target_separation(&self) -> f64 {
        let n = self.n as f64;
        match self.regime {
            PairRegime::Fast => 2.0 * self.c / n.sqrt(),
            PairRegime::Slow => 2.0 * self.c * (n / self.delta).powf(-1.0 / 3.0),
        }
    }

    /// The Hellinger budget `α` the construction guarantees for `n·d²`.
    pub fn alpha(&self, law: &FeatureLaw) -> f64 {
        match self.regime {
            PairRegime::Fast => 4.0 * self.c * self.c,
            PairRegime::Slow => 64.0 * self.c.powi(3) * law.sup_density(),
        }
    }
}

/// Default constant of the fast two-point construction.
pub const DEFAULT_FAST_C: f64 = 0.4;

/// Half the upper limit on `C` in the slow two-point construction.
pub fn default_slow_c(law: &FeatureLaw) -> f64 {
    0.5 * slow_c_limit(law)
}

fn slow_c_limit(law: &FeatureLaw) -> f64 {
    let t = law.half_width();
    ((4.0 * t).cbrt() / 8.0).min((32.0 * law.sup_density()).powf(-1.0 / 3.0))
}

/// Half the upper limit on `C` in the hypercube construction.
pub fn default_cube_c(law: &FeatureLaw) -> f64 {
    0.5 * cube_c_limit(law)
}

fn cube_c_limit(law: &FeatureLaw) -> f64 {
    (1.0 / (32.0 * law.sup_density())).cbrt()
}

fn breach(msg: String) -> Error {
    Error::Constraint(msg)
}

/// Two-point hypotheses for the pointwise lower bound at `x0`.
pub fn build_pointwise_hypotheses(
    delta: f64,
    n: u64,
    c: f64,
    law: &FeatureLaw,
    x0: f64,
) -> Result<HypothesisPair> {
    law.validate()?;
    let t = law.half_width();
    let nf = n as f64;
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    if !(0.0..=1.0 / (4.0 * t)).contains(&delta) {
        return Err(breach(format!("delta = {delta} outside [0, 1/(4T)] = [0, {}]", 1.0 / (4.0 * t))));
    }
    if !(x0 > -t && x0 < t) {
        return Err(breach(format!("x0 = {x0} is not interior to [-T, T]")));
    }
    if delta < nf.powf(-0.5) {
        if !(c > 0.0 && c < std::f64::consts::FRAC_1_SQRT_2) {
            return Err(breach(format!("fast pair needs 0 < C < 1/sqrt(2), got C = {c}")));
        }
        let need = 16.0 * (c + t).powi(2);
        if nf < need {
            return Err(breach(format!("fast pair needs n >= 16(C+T)^2 = {need}")));
        }
        let eta = 0.5 - delta * t - c / nf.sqrt();
        let gap = 2.0 * c / nf.sqrt();
        let knots = vec![-t, t];
        let lower = PiecewiseLinear::new(knots.clone(), vec![eta, eta + 2.0 * delta * t])?;
        let upper = PiecewiseLinear::new(knots, vec![eta + gap, eta + gap + 2.0 * delta * t])?;
        return Ok(HypothesisPair { regime: PairRegime::Fast, delta, n, c, x0, upper, lower });
    }
    let limit = slow_c_limit(law);
    if !(c > 0.0 && c < limit) {
        return Err(breach(format!(
            "slow pair needs 0 < C < min{{(4T)^(1/3)/8, (32 sup p_X)^(-1/3)}} = {limit}, got C = {c}"
        )));
    }
    let need = 16f64.powi(3) * c.powi(3);
    if nf < need {
        return Err(breach(format!("slow pair needs n >= 16^3 C^3 = {need}")));
    }
    let w = 4.0 * c * (nf * delta * delta).powf(-1.0 / 3.0);
    if x0 - w <= -t || x0 + w >= t {
        return Err(breach(format!(
            "kink window x0 ± 4C(n delta^2)^(-1/3) = [{}, {}] must lie inside [-T, T]",
            x0 - w,
            x0 + w
        )));
    }
    let eta = 0.5 - 0.5 * delta * (x0 + t);
    let end = eta + 0.5 * delta * (2.0 * t + w);
    let upper = PiecewiseLinear::new(
        vec![-t, x0 - w, x0, t],
        vec![eta, eta + 0.5 * delta * (x0 - w + t), eta + 0.5 * delta * (x0 + t + w), end],
    )?;
    let lower = PiecewiseLinear::new(
        vec![-t, x0, x0 + w, t],
        vec![eta, eta + 0.5 * delta * (x0 + t), eta + 0.5 * delta * (x0 + t) + delta * w, end],
    )?;
    Ok(HypothesisPair { regime: PairRegime::Slow, delta, n, c, x0, upper, lower })
}

/// Assouad hypercube of `2^m` hypotheses on `[-T, T]`.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisCube {
    pub delta: f64,
    pub n: u64,
    pub c: f64,
    pub half_width: f64,
    pub cells: usize,
    pub step: f64,
}

impl HypothesisCube {
    /// Left end `x_k = -T + 2k·h_n` of cell `k`.
    pub fn cell_start(&self, k: usize) -> f64 {
        -self.half_width + 2.0 * k as f64 * self.step
    }

    /// Hypothesis for the bit vector `bits`; bit `k` set selects the slope
    /// pattern `(δ/2, δ)` on cell `k`, unset selects `(δ, δ/2)`.
    pub fn evaluate(&self, bits: &[bool]) -> Result<PiecewiseLinear> {
        if bits.len() != self.cells {
            return Err(invalid(format!("expected {} bits, got {}", self.cells, bits.len())));
        }
        let h = self.step;
        let d = self.delta;
        let mut knots = Vec::with_capacity(2 * self.cells + 1);
        let mut values = Vec::with_capacity(2 * self.cells + 1);
        let mut level = 0.25;
        for (k, &bit) in bits.iter().enumerate() {
            let start = self.cell_start(k);
            knots.push(start);
            values.push(level);
            let first = if bit { 0.5 * d * h } else { d * h };
            knots.push(start + h);
            values.push(level + first);
            level += 1.5 * d * h;
        }
        knots.push(self.half_width);
        values.push(level);
        PiecewiseLinear::new(knots, values)
    }

    /// `∫|φ_k − ψ_k|` over one cell: `h_n·|φ_k − ψ_k|(x_k + h_n)`.
    pub fn cell_l1_gap(&self) -> f64 {
        self.step * 0.5 * self.delta * self.step
    }

    /// Lower bound `h_n·2TC(n/δ)^{-1/3}` on the cell gap.
    pub fn cell_l1_gap_bound(&self) -> f64 {
        self.step * 2.0 * self.half_width * self.c * (self.n as f64 / self.delta).powf(-1.0 / 3.0)
    }

    /// Budget `α = 64C³ sup p_X` for one-flip neighbours.
    pub fn alpha(&self, law: &FeatureLaw) -> f64 {
        64.0 * self.c.powi(3) * law.sup_density()
    }
}

/// Hypercube for the `L1` lower bound with `m = ⌊(nδ²)^{1/3}/(4C)⌋` cells.
pub fn build_assouad_cube(delta: f64, n: u64, c: f64, law: &FeatureLaw) -> Result<HypothesisCube> {
    law.validate()?;
    let t = law.half_width();
    let nf = n as f64;
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    if !(delta >= nf.powf(-0.5) && delta <= 1.0 / (4.0 * t)) {
        return Err(breach(format!(
            "cube needs delta in [n^(-1/2), 1/(4T)] = [{}, {}], got {delta}",
            nf.powf(-0.5),
            1.0 / (4.0 * t)
        )));
    }
    let limit = cube_c_limit(law);
    if !(c > 0.0 && c <= limit) {
        return Err(breach(format!("cube needs 0 < C <= (1/(32 sup p_X))^(1/3) = {limit}, got {c}")));
    }
    if nf < 16.0 * t * t {
        return Err(breach(format!("cube needs n >= 16 T^2 = {}", 16.0 * t * t)));
    }
    let m = ((nf * delta * delta).cbrt() / (4.0 * c)).floor();
    if m < 1.0 {
        return Err(breach("degenerate cube: m = floor((n delta^2)^(1/3)/(4C)) = 0".into()));
    }
    let cells = m as usize;
    Ok(HypothesisCube { delta, n, c, half_width: t, cells, step: t / m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{hellinger, l1_distance_lebesgue};
    use crate::quadrature::QuadratureCfg;

    fn tight() -> QuadratureCfg {
        QuadratureCfg { abs_tol: 1e-12, max_depth: 50 }
    }

    #[test]
    fn fast_pair_example() {
        let law = FeatureLaw::uniform(1.0);
        let pair = build_pointwise_hypotheses(0.001, 400, 0.4, &law, 0.0).unwrap();
        assert_eq!(pair.regime, PairRegime::Fast);
        assert!((pair.lower.value(-1.0) - 0.479).abs() < 1e-12);
        let sep = pair.upper.value(0.0) - pair.lower.value(0.0);
        assert!((sep - 0.04).abs() < 1e-12);
        assert!((sep - pair.target_separation()).abs() < 1e-15);
        assert!(check_membership(&pair.upper, 0.001, 1.0).member);
        assert!(check_membership(&pair.lower, 0.001, 1.0).member);
    }

    #[test]
    fn zero_delta_gives_parallel_constants() {
        let law = FeatureLaw::uniform(1.0);
        let pair = build_pointwise_hypotheses(0.0, 400, 0.4, &law, 0.3).unwrap();
        for x in [-1.0, -0.2, 0.5, 1.0] {
            assert!((pair.upper.value(x) - pair.lower.value(x) - 0.04).abs() < 1e-15);
            assert_eq!(pair.lower.value(x), pair.lower.value(-1.0));
        }
    }

    #[test]
    fn slow_pair_separation_and_membership() {
        let law = FeatureLaw::uniform(1.0);
        let c = default_slow_c(&law);
        for (n, delta, x0) in [(10_000u64, 0.1, 0.0), (100_000, 0.2, 0.3), (5_000, 0.05, -0.4)] {
            let pair = build_pointwise_hypotheses(delta, n, c, &law, x0).unwrap();
            assert_eq!(pair.regime, PairRegime::Slow);
            let sep = pair.upper.value(x0) - pair.lower.value(x0);
            let want = 2.0 * c * (n as f64 / delta).powf(-1.0 / 3.0);
            assert!((sep - want).abs() < 1e-14, "{sep} vs {want}");
            for f in [&pair.upper, &pair.lower] {
                let m = check_membership(f, delta, 1.0);
                assert!(m.member, "{m:?}");
            }
            // upper dominates lower
            for i in 0..=100 {
                let x = -1.0 + i as f64 / 50.0;
                assert!(pair.upper.value(x) >= pair.lower.value(x) - 1e-15);
            }
        }
    }

    #[test]
    fn constraint_violations_name_the_inequality() {
        let law = FeatureLaw::uniform(1.0);
        let err = build_pointwise_hypotheses(0.5, 400, 0.4, &law, 0.0).unwrap_err();
        assert!(err.to_string().contains("1/(4T)"));
        let err = build_pointwise_hypotheses(0.001, 400, 0.9, &law, 0.0).unwrap_err();
        assert!(err.to_string().contains("1/sqrt(2)"));
        let err = build_pointwise_hypotheses(0.1, 10_000, 0.5, &law, 0.0).unwrap_err();
        assert!(err.to_string().contains("(32 sup p_X)"));
        let err = build_pointwise_hypotheses(0.001, 400, 0.4, &law, 1.0).unwrap_err();
        assert!(err.to_string().contains("interior"));
    }

    #[test]
    fn cube_cell_count_example() {
        let law = FeatureLaw::uniform(1.0);
        let cube = build_assouad_cube(0.1, 1_000_000, 0.25, &law).unwrap();
        assert_eq!(cube.cells, 21);
    }

    #[test]
    fn degenerate_cube_is_rejected() {
        let law = FeatureLaw::uniform(1.0);
        // n δ² = 16 → (16)^{1/3}/(4·0.39) ≈ 1.6 → fine; n δ² = 1 → 0.64 → m = 0
        let err = build_assouad_cube(0.01, 10_000, 0.39, &law).unwrap_err();
        assert!(err.to_string().contains("degenerate"));
    }

    #[test]
    fn cube_hypotheses_are_members_and_bounded() {
        let law = FeatureLaw::uniform(1.0);
        let cube = build_assouad_cube(0.2, 200_000, default_cube_c(&law), &law).unwrap();
        let bits: Vec<bool> = (0..cube.cells).map(|k| k % 3 == 0).collect();
        let f = cube.evaluate(&bits).unwrap();
        let m = check_membership(&f, 0.2, 1.0);
        assert!(m.member, "{m:?}");
        assert!(m.min_value >= 0.25 - 1e-15 && m.max_value <= 0.75);
    }

    #[test]
    fn one_bit_flip_changes_one_cell_only() {
        let law = FeatureLaw::uniform(1.0);
        let cube = build_assouad_cube(0.2, 200_000, default_cube_c(&law), &law).unwrap();
        let bits = vec![false; cube.cells];
        let k = cube.cells / 2;
        let mut flipped = bits.clone();
        flipped[k] = true;
        let f = cube.evaluate(&bits).unwrap();
        let g = cube.evaluate(&flipped).unwrap();
        let (lo, hi) = (cube.cell_start(k), cube.cell_start(k + 1));
        for i in 0..=2000 {
            let x = -1.0 + i as f64 / 1000.0;
            if x <= lo || x >= hi {
                assert!((f.value(x) - g.value(x)).abs() < 1e-15, "x = {x}");
            }
        }
        let l1 = l1_distance_lebesgue(&f, &g, -1.0, 1.0, &tight()).unwrap();
        assert!((l1 - cube.cell_l1_gap()).abs() < 1e-12);
        assert!(cube.cell_l1_gap() >= cube.cell_l1_gap_bound());
        assert_eq!(l1_distance_lebesgue(&f, &f, -1.0, 1.0, &tight()).unwrap(), 0.0);
        // Hellinger budget for one flip
        let nd2 = cube.n as f64 * hellinger(&f, &g, &law, &tight()).unwrap().powi(2);
        assert!(nd2 <= cube.alpha(&law));
    }
}
