//! Monotone NPMLE through the greatest convex minorant of the cusum diagram,
//! a pool-adjacent-violators oracle, and the inverse process.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{Curve, Sample};

/// Cumulative-sum diagram with the origin adjoined.
///
/// Abscissae are cumulative weight fractions, ordinates cumulative counts of
/// ones divided by `n`. The integer numerators are kept for exact hulls.
#[derive(Debug, Clone, PartialEq)]
pub struct CusumDiagram {
    pub ts: Vec<f64>,
    pub vs: Vec<f64>,
    cum_weights: Vec<u64>,
    cum_ones: Vec<u64>,
}

impl CusumDiagram {
    pub fn new(s: &Sample) -> Self {
        let n = s.n() as f64;
        let k = s.blocks();
        let mut cum_weights = Vec::with_capacity(k + 1);
        let mut cum_ones = Vec::with_capacity(k + 1);
        cum_weights.push(0);
        cum_ones.push(0);
        let (mut w, mut o) = (0u64, 0u64);
        for (&wi, &oi) in s.weights().iter().zip(s.ones()) {
            w += wi;
            o += oi;
            cum_weights.push(w);
            cum_ones.push(o);
        }
        let ts = cum_weights.iter().map(|&w| w as f64 / n).collect();
        let vs = cum_ones.iter().map(|&o| o as f64 / n).collect();
        Self { ts, vs, cum_weights, cum_ones }
    }

    pub fn cum_weights(&self) -> &[u64] {
        &self.cum_weights
    }

    pub fn cum_ones(&self) -> &[u64] {
        &self.cum_ones
    }

    /// Number of blocks `K`; the diagram has `K + 1` points.
    pub fn blocks(&self) -> usize {
        self.ts.len() - 1
    }
}

pub fn cusum_diagram(s: &Sample) -> CusumDiagram {
    CusumDiagram::new(s)
}

/// Lower convex hull of a point set, as vertex indices into the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexMinorant {
    pub hull_ts: Vec<f64>,
    pub hull_vs: Vec<f64>,
    pub slopes: Vec<f64>,
    vertices: Vec<usize>,
}

impl ConvexMinorant {
    /// Hull of arbitrary points with strictly increasing abscissae.
    pub fn from_points(ts: &[f64], vs: &[f64]) -> Result<Self> {
        if ts.len() < 2 || ts.len() != vs.len() {
            return Err(invalid("need at least two points with matching coordinates"));
        }
        if ts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("abscissae must be strictly increasing"));
        }
        let vertices = lower_hull(ts, vs);
        Ok(Self::assemble(ts, vs, vertices, |i, j| (vs[j] - vs[i]) / (ts[j] - ts[i])))
    }

    /// Hull of a cusum diagram using exact integer orientation tests, so
    /// slopes equal pooled means `Σ ones / Σ weights` bit for bit.
    pub fn from_diagram(d: &CusumDiagram) -> Self {
        let (w, o) = (&d.cum_weights, &d.cum_ones);
        let mut hull: Vec<usize> = Vec::with_capacity(w.len());
        for c in 0..w.len() {
            while hull.len() >= 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                // drop b unless slope(a, b) < slope(b, c)
                let lhs = (o[b] - o[a]) as u128 * (w[c] - w[b]) as u128;
                let rhs = (o[c] - o[b]) as u128 * (w[b] - w[a]) as u128;
                if lhs >= rhs {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(c);
        }
        Self::assemble(&d.ts, &d.vs, hull, |i, j| (o[j] - o[i]) as f64 / (w[j] - w[i]) as f64)
    }

    fn assemble(ts: &[f64], vs: &[f64], vertices: Vec<usize>, slope: impl Fn(usize, usize) -> f64) -> Self {
        Self {
            hull_ts: vertices.iter().map(|&i| ts[i]).collect(),
            hull_vs: vertices.iter().map(|&i| vs[i]).collect(),
            slopes: vertices.windows(2).map(|p| slope(p[0], p[1])).collect(),
            vertices,
        }
    }

    /// Indices of the hull vertices among the input points.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// Hull value at `t`, by linear interpolation between vertices.
    pub fn value(&self, t: f64) -> f64 {
        let j = self.hull_ts.partition_point(|&v| v < t).clamp(1, self.hull_ts.len() - 1);
        self.hull_vs[j - 1] + self.slopes[j - 1] * (t - self.hull_ts[j - 1])
    }

    /// Left derivative at `t`: the slope of the segment whose interval
    /// `(previous vertex, vertex]` contains `t`.
    pub fn left_derivative(&self, t: f64) -> Result<f64> {
        let (lo, hi) = (self.hull_ts[0], self.hull_ts[self.hull_ts.len() - 1]);
        if !(t > lo && t <= hi) {
            return Err(invalid(format!("left derivative needs t in ({lo}, {hi}], got {t}")));
        }
        let j = self.hull_ts.partition_point(|&v| v < t);
        Ok(self.slopes[j - 1])
    }
}

pub fn greatest_convex_minorant(d: &CusumDiagram) -> ConvexMinorant {
    ConvexMinorant::from_diagram(d)
}

/// Monotone-chain lower hull with float orientation tests; collinear points
/// are dropped so slopes increase strictly.
pub(crate) fn lower_hull(ts: &[f64], vs: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(ts.len());
    for c in 0..ts.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (ts[b] - ts[a]) * (vs[c] - vs[a]) - (vs[b] - vs[a]) * (ts[c] - ts[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(c);
    }
    hull
}

/// Right-continuous nondecreasing step function: zero left of the first
/// sample point, then constant between jumps and beyond the last one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEstimate {
    pub jump_xs: Vec<f64>,
    pub values: Vec<f64>,
    pub n: u64,
}

impl StepEstimate {
    /// Compress per-block fitted values into jumps. The first sample point
    /// always starts a level.
    fn from_blocks(xs: &[f64], fitted: &[f64], n: u64) -> Self {
        let mut jump_xs = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for (&x, &v) in xs.iter().zip(fitted) {
            if values.last() != Some(&v) {
                jump_xs.push(x);
                values.push(v);
            }
        }
        Self { jump_xs, values, n }
    }

    /// Fitted values at every distinct sample point.
    pub fn at_points(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.value(x)).collect()
    }

    pub fn max_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

impl Curve for StepEstimate {
    fn value(&self, x: f64) -> f64 {
        match self.jump_xs.partition_point(|&v| v <= x) {
            0 => 0.0,
            j => self.values[j - 1],
        }
    }

    fn left_limit(&self, x: f64) -> f64 {
        match self.jump_xs.partition_point(|&v| v < x) {
            0 => 0.0,
            j => self.values[j - 1],
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.jump_xs.clone()
    }
}

/// NPMLE: the left derivative of the greatest convex minorant evaluated at
/// the cumulative fraction of each block.
pub fn npmle_fit(s: &Sample) -> StepEstimate {
    let d = CusumDiagram::new(s);
    let gcm = ConvexMinorant::from_diagram(&d);
    let mut fitted = Vec::with_capacity(s.blocks());
    let mut seg = 0;
    for i in 1..=d.blocks() {
        while gcm.vertices[seg + 1] < i {
            seg += 1;
        }
        fitted.push(gcm.slopes[seg]);
    }
    StepEstimate::from_blocks(s.xs(), &fitted, s.n())
}

/// Weighted pool-adjacent-violators fit, independent of the hull code.
pub fn pava_fit(s: &Sample) -> StepEstimate {
    // (ones, weight, blocks pooled)
    let mut pools: Vec<(u64, u64, usize)> = Vec::with_capacity(s.blocks());
    for (&o, &w) in s.ones().iter().zip(s.weights()) {
        let mut cur = (o, w, 1);
        while let Some(&(po, pw, pk)) = pools.last() {
            if po as u128 * cur.1 as u128 > cur.0 as u128 * pw as u128 {
                pools.pop();
                cur = (po + cur.0, pw + cur.1, pk + cur.2);
            } else {
                break;
            }
        }
        pools.push(cur);
    }
    let fitted: Vec<f64> = pools
        .iter()
        .flat_map(|&(o, w, k)| std::iter::repeat_n(o as f64 / w as f64, k))
        .collect();
    StepEstimate::from_blocks(s.xs(), &fitted, s.n())
}

/// Value of the inverse process at one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversePoint {
    /// `Ũ_n(a)`, a diagram abscissa.
    pub grid_t: f64,
    /// `F_n^{-1}(Ũ_n(a))`; `-∞` when `Ũ_n(a) = 0`.
    pub x_value: f64,
    /// Index of the minimizing diagram vertex.
    pub vertex: usize,
}

/// Largest diagram vertex minimizing `Υ_n(t) − a·t`.
pub fn inverse_process(s: &Sample, a: f64) -> Result<InversePoint> {
    inverse_on_diagram(&CusumDiagram::new(s), s, a)
}

pub(crate) fn inverse_on_diagram(d: &CusumDiagram, s: &Sample, a: f64) -> Result<InversePoint> {
    if !(0.0..=1.0).contains(&a) {
        return Err(invalid(format!("level a = {a} outside [0, 1]")));
    }
    // the largest minimizer of Υ_n(t) − a·t is the right end of the last
    // hull segment with slope ≤ a; the slopes are the fitted levels, so the
    // comparison is made against exactly the values the fit reports
    let hull = ConvexMinorant::from_diagram(d);
    let best = hull.vertices[hull.slopes.partition_point(|&v| v <= a)];
    let x_value = if best == 0 { f64::NEG_INFINITY } else { s.xs()[best - 1] };
    Ok(InversePoint { grid_t: d.ts[best], x_value, vertex: best })
}

/// Both sides of the strict switch relation `Φ̂_n(x) > a ⇔ Ũ_n(a) < F_n(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SwitchRecord {
    pub lhs: bool,
    pub rhs: bool,
}

impl SwitchRecord {
    pub fn holds(&self) -> bool {
        self.lhs == self.rhs
    }
}

pub fn switch_check(s: &Sample, x: f64, a: f64) -> Result<SwitchRecord> {
    let fit = npmle_fit(s);
    let d = CusumDiagram::new(s);
    switch_check_with(&fit, &d, s, x, a)
}

/// [`switch_check`] reusing a fit and diagram of the same sample.
pub fn switch_check_with(fit: &StepEstimate, d: &CusumDiagram, s: &Sample, x: f64, a: f64) -> Result<SwitchRecord> {
    let u = inverse_on_diagram(d, s, a)?;
    let k = s.xs().partition_point(|&v| v <= x);
    Ok(SwitchRecord { lhs: fit.value(x) > a, rhs: d.cum_weights[u.vertex] < d.cum_weights[k] })
}

/// Bernoulli log-likelihood of `f` on the sample, with `0·log 0 = 0`.
pub fn log_likelihood(f: &impl Curve, s: &Sample) -> f64 {
    let mut total = 0.0;
    for ((&x, &o), &w) in s.xs().iter().zip(s.ones()).zip(s.weights()) {
        let p = f.value(x);
        let zeros = w - o;
        if o > 0 {
            total += o as f64 * p.ln();
        }
        if zeros > 0 {
            total += zeros as f64 * (1.0 - p).ln();
        }
    }
    total
}
