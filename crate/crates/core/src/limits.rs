//! Simulation of the limit laws: Chernoff-type argmins, slopes of convex
//! minorants of drifted Brownian paths, and the constants entering the `L1`
//! limit.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimator::lower_hull;
use crate::model::{factorial, FeatureLaw, Link, Scenario};
use crate::quadrature::{integrate, QuadratureCfg};
use crate::rng::{experiment, stream, StreamRng};

/// Most grid doublings attempted when an argmin lands near the grid edge.
pub const MAX_DOUBLINGS: u32 = 3;

/// Fraction of the half width beyond which an argmin counts as escaping.
const INNER_FRACTION: f64 = 0.9;

/// Simulation grid: `[-S, S]` when two-sided, `[0, S]` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathGrid {
    pub half_width: f64,
    pub step: f64,
    pub two_sided: bool,
}

impl PathGrid {
    pub fn new(half_width: f64, step: f64, two_sided: bool) -> Result<Self> {
        let g = Self { half_width, step, two_sided };
        g.validate()?;
        Ok(g)
    }

    /// `S = 4`, `h = 0.002`, two-sided.
    pub fn chernoff_default() -> Self {
        Self { half_width: 4.0, step: 0.002, two_sided: true }
    }

    /// `[0, 1]` with `h = 2·10⁻⁴`.
    pub fn unit_default() -> Self {
        Self { half_width: 1.0, step: 2e-4, two_sided: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.step > 0.0 && self.half_width.is_finite()) {
            return Err(invalid("grid half width and step must be positive"));
        }
        let ratio = self.half_width / self.step;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(invalid(format!("S/h = {ratio} is not an integer")));
        }
        if self.step > 0.01 * self.half_width {
            return Err(invalid("grid step must be at most 1% of the half width"));
        }
        Ok(())
    }

    /// Number of steps from 0 to `S`.
    pub fn cells(&self) -> usize {
        (self.half_width / self.step).round() as usize
    }
}

/// Two-sided Brownian path on `h·ℤ` that can be lengthened in place.
///
/// Extension continues both sides with fresh increments from the same
/// generator, so the values already drawn are kept.
#[derive(Debug, Clone)]
pub struct TwoSidedPath {
    step: f64,
    scale: f64,
    right: Vec<f64>,
    left: Vec<f64>,
}

impl TwoSidedPath {
    pub fn simulate<R: Rng + ?Sized>(step: f64, cells: usize, rng: &mut R) -> Self {
        let mut p = Self { step, scale: 1.0, right: vec![0.0], left: vec![0.0] };
        p.extend(cells, rng);
        p
    }

    /// The path `Z ≡ 0`, for deterministic checks.
    pub fn zero(step: f64, cells: usize) -> Self {
        Self { step, scale: 0.0, right: vec![0.0; cells + 1], left: vec![0.0; cells + 1] }
    }

    /// Grow both sides to `cells` steps.
    pub fn extend<R: Rng + ?Sized>(&mut self, cells: usize, rng: &mut R) {
        let sd = self.scale * self.step.sqrt();
        for side in [&mut self.right, &mut self.left] {
            while side.len() <= cells {
                let z: f64 = rng.sample(StandardNormal);
                let last = *side.last().unwrap();
                side.push(last + sd * z);
            }
        }
    }

    pub fn cells(&self) -> usize {
        self.right.len() - 1
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn half_width(&self) -> f64 {
        self.cells() as f64 * self.step
    }

    /// `Z(k·h)` for `|k| ≤ cells`.
    pub fn at(&self, k: isize) -> f64 {
        if k >= 0 {
            self.right[k as usize]
        } else {
            self.left[(-k) as usize]
        }
    }

    /// Values from `-S` to `S` in grid order.
    pub fn values(&self) -> Vec<f64> {
        self.left.iter().rev().chain(&self.right[1..]).copied().collect()
    }

    /// Abscissae from `-S` to `S`.
    pub fn abscissae(&self) -> Vec<f64> {
        let m = self.cells() as isize;
        (-m..=m).map(|k| k as f64 * self.step).collect()
    }
}

/// Standard Brownian motion on `[0, S]`, pinned at 0, as `S/h + 1` values.
pub fn one_sided_path<R: Rng + ?Sized>(step: f64, cells: usize, rng: &mut R) -> Vec<f64> {
    let sd = step.sqrt();
    let mut w = Vec::with_capacity(cells + 1);
    w.push(0.0);
    let mut acc = 0.0;
    for _ in 0..cells {
        let z: f64 = rng.sample(StandardNormal);
        acc += sd * z;
        w.push(acc);
    }
    w
}

/// Brownian path on the grid: `[-S, S]` values for two-sided grids, built
/// from two independent one-sided paths, otherwise `[0, S]`.
pub fn brownian_path(grid: &PathGrid, seed: u64) -> Result<Vec<f64>> {
    grid.validate()?;
    let mut rng = stream(seed, experiment::BROWNIAN, 0);
    Ok(brownian_path_with(grid, &mut rng))
}

pub fn brownian_path_with<R: Rng + ?Sized>(grid: &PathGrid, rng: &mut R) -> Vec<f64> {
    if grid.two_sided {
        TwoSidedPath::simulate(grid.step, grid.cells(), rng).values()
    } else {
        one_sided_path(grid.step, grid.cells(), rng)
    }
}

/// Grid argmin of `a·Z(s) + b·s² − c·s`, ties to the largest `s`. `None`
/// when it falls in the outer tenth of the grid.
pub fn drifted_argmin(path: &TwoSidedPath, a: f64, b: f64, c: f64) -> Option<f64> {
    let m = path.cells() as isize;
    let h = path.step();
    let mut best = (f64::INFINITY, 0isize);
    for k in -m..=m {
        let s = k as f64 * h;
        let v = a * path.at(k) + b * s * s - c * s;
        if v <= best.0 {
            best = (v, k);
        }
    }
    let s = best.1 as f64 * h;
    (s.abs() <= INNER_FRACTION * path.half_width()).then_some(s)
}

/// Repeat `attempt` on a path doubled in length until it succeeds.
fn with_doubling<T>(
    grid: &PathGrid,
    rng: &mut StreamRng,
    mut attempt: impl FnMut(&TwoSidedPath) -> Option<T>,
) -> Result<T> {
    let mut path = TwoSidedPath::simulate(grid.step, grid.cells(), rng);
    for doublings in 0..=MAX_DOUBLINGS {
        if let Some(v) = attempt(&path) {
            return Ok(v);
        }
        if doublings == MAX_DOUBLINGS {
            return Err(Error::GridEscape { doublings, half_width: path.half_width() });
        }
        let cells = 2 * path.cells();
        path.extend(cells, rng);
    }
    unreachable!()
}

/// One draw of `argmin_s {a·Z(s) + b·s² − c·s}`.
pub fn argmin_sample_with(grid: &PathGrid, a: f64, b: f64, c: f64, rng: &mut StreamRng) -> Result<f64> {
    if !(b > 0.0) {
        return Err(invalid("quadratic coefficient b must be positive"));
    }
    with_doubling(grid, rng, |p| drifted_argmin(p, a, b, c))
}

/// One Chernoff draw `argmin_s {Z(s) + s²}`.
pub fn chernoff_sample(grid: &PathGrid, seed: u64) -> Result<f64> {
    check_two_sided(grid)?;
    argmin_sample_with(grid, 1.0, 1.0, 0.0, &mut stream(seed, experiment::CHERNOFF, 0))
}

fn check_two_sided(grid: &PathGrid) -> Result<()> {
    grid.validate()?;
    if !grid.two_sided {
        return Err(invalid("this sampler needs a two-sided grid"));
    }
    Ok(())
}

fn check_unit(grid: &PathGrid) -> Result<()> {
    grid.validate()?;
    if grid.two_sided || grid.half_width != 1.0 {
        return Err(invalid("this sampler needs a one-sided grid on [0, 1]"));
    }
    Ok(())
}

/// Left derivative at `t0` of the greatest convex minorant of the points,
/// with the hull vertices bracketing `t0`.
pub fn gcm_left_slope(ts: &[f64], ys: &[f64], t0: f64) -> (f64, f64, f64) {
    let hull = lower_hull(ts, ys);
    let j = hull.partition_point(|&i| ts[i] < t0).clamp(1, hull.len() - 1);
    let (i0, i1) = (hull[j - 1], hull[j]);
    ((ys[i1] - ys[i0]) / (ts[i1] - ts[i0]), ts[i0], ts[i1])
}

/// Slope at 0 of the GCM of `σ·Z(s) + K·s^{p}`; `None` when a bracketing
/// vertex lies in the outer tenth of the grid.
pub fn drifted_gcm_slope_at_zero(path: &TwoSidedPath, sigma: f64, coef: f64, power: i32) -> Option<f64> {
    let ts = path.abscissae();
    let ys: Vec<f64> = path.values().iter().zip(&ts).map(|(z, s)| sigma * z + coef * s.powi(power)).collect();
    let (slope, lo, hi) = gcm_left_slope(&ts, &ys, 0.0);
    let edge = INNER_FRACTION * path.half_width();
    (lo >= -edge && hi <= edge).then_some(slope)
}

/// `κ = (4σ²Φ0'(0)/p_X(x0))^{1/3}`, the scale of the slow pointwise limit
/// for `β = 1`.
pub fn scaled_chernoff_constant(link: &Link, law: &FeatureLaw, x0: f64) -> Result<f64> {
    let d1 = link.derivative(0.0, 1)?;
    if link.beta() != 1 || !(d1 > 0.0) {
        return Err(invalid(
            "Φ0'(0) vanishes; the pointwise limit is not a scaled Chernoff law, use the slow_fbeta sampler",
        ));
    }
    let p = density_at(law, x0)?;
    let s = link.sigma();
    Ok((4.0 * s * s * d1 / p).cbrt())
}

fn density_at(law: &FeatureLaw, x0: f64) -> Result<f64> {
    let t = law.half_width();
    if !(x0 > -t && x0 < t) {
        return Err(invalid(format!("x0 must be interior to [-{t}, {t}], got {x0}")));
    }
    Ok(law.density(x0))
}

/// Drift of `f_β`: `K·s^{β+1}` with `K = Φ0^{(β)}(0) / (p_X(x0)^β (β+1)!)`.
pub fn slow_drift_coefficient(link: &Link, law: &FeatureLaw, x0: f64) -> Result<f64> {
    let beta = link.beta() as usize;
    let d = link.derivative(0.0, beta)?;
    if !(d > 0.0) {
        return Err(invalid(format!("Φ0 has no positive derivative of order {beta} at 0")));
    }
    let p = density_at(law, x0)?;
    Ok(d / (p.powi(beta as i32) * factorial(beta + 1)))
}

/// One draw of `f_β^{*,ℓ}(0)`.
pub fn slow_limit_sample(link: &Link, law: &FeatureLaw, x0: f64, grid: &PathGrid, seed: u64) -> Result<f64> {
    check_two_sided(grid)?;
    let params = SlowParams { sigma: link.sigma(), coef: slow_drift_coefficient(link, law, x0)?, beta: link.beta() };
    params.draw(grid, &mut stream(seed, experiment::SLOW_LIMIT, 0))
}

/// Constants of `f_β(s) = σZ(s) + K·s^{β+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlowParams {
    pub sigma: f64,
    pub coef: f64,
    pub beta: u32,
}

impl SlowParams {
    pub fn draw(&self, grid: &PathGrid, rng: &mut StreamRng) -> Result<f64> {
        let power = self.beta as i32 + 1;
        with_doubling(grid, rng, |p| drifted_gcm_slope_at_zero(p, self.sigma, self.coef, power))
    }
}

/// `√c·Φ0^{(β)}(0)·E[(X − x0)^β 1{X ≤ F_X^{-1}(s)}]`.
pub fn boundary_drift(
    beta: u32,
    c: f64,
    link: &Link,
    law: &FeatureLaw,
    x0: f64,
    s: f64,
    q: &QuadratureCfg,
) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(invalid("boundary constant c must be nonnegative"));
    }
    let upper = law.quantile(s)?;
    let d = link.derivative(0.0, beta as usize)?;
    let t = law.half_width();
    let m = integrate(|x| (x - x0).powi(beta as i32) * law.density(x), -t, upper, q)?;
    Ok(c.sqrt() * d * m)
}

/// Parameters of the `[0, 1]` limit `σW(s) + drift(s)` read at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryParams {
    pub sigma: f64,
    pub t0: f64,
    /// Drift on the grid points `k·h`, `k = 0..=S/h`.
    pub drift: Vec<f64>,
}

impl BoundaryParams {
    /// Tabulate the drift of `g_{β,c}` on the grid. The mass between
    /// consecutive grid quantiles is integrated separately and accumulated.
    pub fn new(c: f64, link: &Link, law: &FeatureLaw, x0: f64, grid: &PathGrid, q: &QuadratureCfg) -> Result<Self> {
        check_unit(grid)?;
        if !(c >= 0.0) {
            return Err(invalid("boundary constant c must be nonnegative"));
        }
        let t0 = law.cdf(x0);
        if !(t0 > 0.0 && t0 < 1.0) {
            return Err(invalid(format!("x0 must be interior to the support, got F_X(x0) = {t0}")));
        }
        let beta = link.beta();
        let m = grid.cells();
        let mut drift = vec![0.0; m + 1];
        if c > 0.0 {
            let scale = c.sqrt() * link.derivative(0.0, beta as usize)?;
            let piece_q = QuadratureCfg { abs_tol: q.abs_tol / m as f64, ..*q };
            let f = |x: f64| (x - x0).powi(beta as i32) * law.density(x);
            let mut prev = law.quantile(0.0)?;
            let mut acc = 0.0;
            for (k, d) in drift.iter_mut().enumerate().skip(1) {
                let next = law.quantile((k as f64 * grid.step).min(1.0))?;
                acc += integrate(f, prev, next, &piece_q)?;
                *d = scale * acc;
                prev = next;
            }
        }
        Ok(Self { sigma: link.sigma(), t0, drift })
    }

    /// Drift-free parameters: the fast-regime slope law `σ·W^{*,ℓ}(t0)`.
    pub fn fast(link: &Link, law: &FeatureLaw, x0: f64, grid: &PathGrid) -> Result<Self> {
        Self::new(0.0, link, law, x0, grid, &QuadratureCfg::default())
    }

    pub fn draw<R: Rng + ?Sized>(&self, grid: &PathGrid, rng: &mut R) -> f64 {
        let w = one_sided_path(grid.step, grid.cells(), rng);
        self.slope_on(&w, grid.step)
    }

    /// Slope read-off for a given Brownian path on the grid.
    pub fn slope_on(&self, w: &[f64], step: f64) -> f64 {
        let ts: Vec<f64> = (0..w.len()).map(|k| k as f64 * step).collect();
        let ys: Vec<f64> = w.iter().zip(&self.drift).map(|(w, d)| self.sigma * w + d).collect();
        gcm_left_slope(&ts, &ys, self.t0).0
    }
}

/// One draw of `g_{β,c}^{*,ℓ}(F_X(x0))`.
pub fn boundary_limit_sample(
    c: f64,
    link: &Link,
    law: &FeatureLaw,
    x0: f64,
    grid: &PathGrid,
    seed: u64,
) -> Result<f64> {
    let params = BoundaryParams::new(c, link, law, x0, grid, &QuadratureCfg::default())?;
    Ok(params.draw(grid, &mut stream(seed, experiment::BOUNDARY_LIMIT, 0)))
}

/// `σ·(W(1) − 2·min_{u ≤ 1} W(u))` for a path pinned at 0.
pub fn l1_fast_statistic(sigma: f64, w: &[f64]) -> f64 {
    let min = w.iter().copied().fold(0.0, f64::min);
    sigma * (w[w.len() - 1] - 2.0 * min)
}

/// One draw of `max_s A(s)`, the fast-regime `L1` limit.
pub fn l1_fast_limit_sample(link: &Link, grid: &PathGrid, seed: u64) -> Result<f64> {
    check_unit(grid)?;
    let w = one_sided_path(grid.step, grid.cells(), &mut stream(seed, experiment::L1_FAST_LIMIT, 0));
    Ok(l1_fast_statistic(link.sigma(), &w))
}

/// Empirical covariance of `W(1) − 2W(u)` on a set of points, against
/// `1 − 2|u − v|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationCovariance {
    pub points: Vec<f64>,
    pub empirical: Vec<Vec<f64>>,
    pub se: Vec<Vec<f64>>,
    pub max_abs_error: f64,
    /// Largest `|empirical − exact| / se` over the entries.
    pub max_z: f64,
}

pub fn l1_fast_representation_covariance(
    points: &[f64],
    grid: &PathGrid,
    m: usize,
    seed: u64,
) -> Result<RepresentationCovariance> {
    check_unit(grid)?;
    if m < 2 || points.is_empty() || points.iter().any(|u| !(0.0..=1.0).contains(u)) {
        return Err(invalid("need two or more paths and points in [0, 1]"));
    }
    let cells = grid.cells();
    let idx: Vec<usize> = points.iter().map(|u| ((u / grid.step).round() as usize).min(cells)).collect();
    let rows: Vec<Vec<f64>> = (0..m as u64)
        .into_par_iter()
        .map(|r| {
            let w = one_sided_path(grid.step, cells, &mut stream(seed, experiment::L1_FAST_LIMIT, r));
            idx.iter().map(|&i| w[cells] - 2.0 * w[i]).collect()
        })
        .collect();
    let k = points.len();
    let mut empirical = vec![vec![0.0; k]; k];
    let mut se = vec![vec![0.0; k]; k];
    let (mut max_abs_error, mut max_z) = (0.0f64, 0.0f64);
    for i in 0..k {
        for j in 0..k {
            let prods: Vec<f64> = rows.iter().map(|y| y[i] * y[j]).collect();
            let e = mean_se(&prods);
            let err = (e.estimate - (1.0 - 2.0 * (points[i] - points[j]).abs())).abs();
            empirical[i][j] = e.estimate;
            se[i][j] = e.se;
            max_abs_error = max_abs_error.max(err);
            if e.se > 0.0 {
                max_z = max_z.max(err / e.se);
            }
        }
    }
    Ok(RepresentationCovariance { points: points.to_vec(), empirical, se, max_abs_error, max_z })
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub se: f64,
}

/// Mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> Estimate {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    Estimate { estimate: mean, se: (var / m).sqrt() }
}

/// Draw `m` values in parallel, replicate `r` from stream `(seed, exp, r)`.
/// The output order is the replicate order whatever the thread count.
pub fn parallel_draws<F>(m: usize, seed: u64, exp: u64, draw: F) -> Result<Vec<f64>>
where
    F: Fn(&mut StreamRng) -> Result<f64> + Sync,
{
    (0..m as u64).into_par_iter().map(|r| draw(&mut stream(seed, exp, r))).collect()
}

/// `E|X(0)|` for the Chernoff variable, from `m` draws.
pub fn chernoff_abs_mean(grid: &PathGrid, m: usize, seed: u64) -> Result<Estimate> {
    check_two_sided(grid)?;
    if m < 2 {
        return Err(invalid("need at least two draws"));
    }
    let draws = parallel_draws(m, seed, experiment::CHERNOFF, |rng| {
        argmin_sample_with(grid, 1.0, 1.0, 0.0, rng).map(f64::abs)
    })?;
    Ok(mean_se(&draws))
}

/// `𝒞 = ∫₀^{a_max} Cov(|X(0)|, |X(a) − a|) da` with the covariance curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovIntegral {
    pub estimate: f64,
    pub se: f64,
    pub a_values: Vec<f64>,
    pub covariances: Vec<f64>,
    /// Standard errors of the pointwise covariances.
    pub covariance_se: Vec<f64>,
    /// Largest `|cov| / se` over the last quarter of the `a` grid.
    pub tail_max_z: f64,
    /// The covariances near `a_max` are within 3 se of zero, so the
    /// truncation drops nothing measurable.
    pub tail_negligible: bool,
}

/// Bootstrap resamples for the standard error of `𝒞`.
const BOOTSTRAP_ROUNDS: usize = 200;

/// `X(a) − a` for all `a` on the list, from one path: the argmins of
/// `Z(s) + s² − 2as` are the hull vertices of `Z(s) + s²` where the slopes
/// cross `2a`.
pub fn recentred_argmins(path: &TwoSidedPath, a_values: &[f64]) -> Option<Vec<f64>> {
    let ts = path.abscissae();
    let ys: Vec<f64> = path.values().iter().zip(&ts).map(|(z, s)| z + s * s).collect();
    let hull = lower_hull(&ts, &ys);
    let slopes: Vec<f64> = hull.windows(2).map(|w| (ys[w[1]] - ys[w[0]]) / (ts[w[1]] - ts[w[0]])).collect();
    let edge = INNER_FRACTION * path.half_width();
    a_values
        .iter()
        .map(|&a| {
            let j = slopes.partition_point(|&s| s <= 2.0 * a);
            let x = ts[hull[j]];
            (x.abs() <= edge).then_some(x - a)
        })
        .collect()
}

pub fn chernoff_cov_integral(grid: &PathGrid, a_max: f64, a_step: f64, m: usize, seed: u64) -> Result<CovIntegral> {
    check_two_sided(grid)?;
    if !(a_max >= 3.0) || !(a_step > 0.0 && a_step <= 0.25) {
        return Err(invalid("need a_max >= 3 and 0 < a_step <= 0.25"));
    }
    if m < 2 {
        return Err(invalid("need at least two paths"));
    }
    let k = (a_max / a_step).round() as usize;
    if ((k as f64) * a_step - a_max).abs() > 1e-9 * a_max {
        return Err(invalid("a_max must be a multiple of a_step"));
    }
    let a_values: Vec<f64> = (0..=k).map(|i| i as f64 * a_step).collect();
    // the argmins drift to a_max, so widen the window by that much
    let cells = grid.cells() + (a_max / grid.step).ceil() as usize;
    let wide = PathGrid { half_width: cells as f64 * grid.step, ..*grid };
    let rows: Vec<Vec<f64>> = (0..m as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, experiment::COV_INTEGRAL, r);
            with_doubling(&wide, &mut rng, |p| recentred_argmins(p, &a_values))
                .map(|v| v.into_iter().map(f64::abs).collect())
        })
        .collect::<Result<_>>()?;

    let covs = |idx: &mut dyn Iterator<Item = usize>| -> Vec<f64> {
        let chosen: Vec<usize> = idx.collect();
        let mf = chosen.len() as f64;
        let mean0 = chosen.iter().map(|&i| rows[i][0]).sum::<f64>() / mf;
        (0..=k)
            .map(|j| {
                let mean = chosen.iter().map(|&i| rows[i][j]).sum::<f64>() / mf;
                chosen.iter().map(|&i| (rows[i][0] - mean0) * (rows[i][j] - mean)).sum::<f64>() / (mf - 1.0)
            })
            .collect()
    };
    let trapezoid = |c: &[f64]| a_step * (c.iter().sum::<f64>() - 0.5 * (c[0] + c[k]));

    let covariances = covs(&mut (0..m));
    let estimate = trapezoid(&covariances);
    let mean0 = rows.iter().map(|r| r[0]).sum::<f64>() / m as f64;
    let covariance_se: Vec<f64> = (0..=k)
        .map(|j| {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / m as f64;
            let prods: Vec<f64> = rows.iter().map(|r| (r[0] - mean0) * (r[j] - mean)).collect();
            mean_se(&prods).se
        })
        .collect();
    let mut boot_rng = stream(seed, experiment::BOOTSTRAP, 0);
    let boots: Vec<f64> = (0..BOOTSTRAP_ROUNDS)
        .map(|_| {
            let picks: Vec<usize> = (0..m).map(|_| boot_rng.random_range(0..m)).collect();
            trapezoid(&covs(&mut picks.into_iter()))
        })
        .collect();
    let se = mean_se(&boots).se * (BOOTSTRAP_ROUNDS as f64).sqrt();
    let tail_max_z = covariances[3 * k / 4..]
        .iter()
        .zip(&covariance_se[3 * k / 4..])
        .map(|(c, s): (&f64, &f64)| if *s > 0.0 { c.abs() / s } else { 0.0 })
        .fold(0.0, f64::max);
    Ok(CovIntegral {
        estimate,
        se,
        a_values,
        covariances,
        covariance_se,
        tail_max_z,
        tail_negligible: tail_max_z <= 3.0,
    })
}

/// `μ_n = E|X(0)|·∫(4Φ_n(1 − Φ_n)Φ0'(δ_n t)/p_X(t))^{1/3} dt`.
pub fn mu_n(scn: &Scenario, n: u64, abs_mean: f64, q: &QuadratureCfg) -> Result<f64> {
    if !(scn.link.derivative(0.0, 1)? > 0.0) {
        return Err(invalid("μ_n needs Φ0'(0) > 0"));
    }
    let delta = scn.delta(n);
    let t = scn.half_width();
    let link = scn.link;
    let law = scn.law;
    let integral = integrate(
        |x| {
            let p = link.value(delta * x);
            let d1 = link.derivative(delta * x, 1).unwrap_or(0.0);
            (4.0 * p * (1.0 - p) * d1 / law.density(x.clamp(-t, t))).cbrt()
        },
        -t,
        t,
        q,
    )?;
    Ok(abs_mean * integral)
}

/// `σ² = 8𝒞∫Φ0(0)(1 − Φ0(0))/p_X(t) dt`.
pub fn sigma_sq(link: &Link, law: &FeatureLaw, cov_integral: f64, q: &QuadratureCfg) -> Result<f64> {
    let s2 = link.sigma().powi(2);
    let t = law.half_width();
    let integral = integrate(|x| s2 / law.density(x.clamp(-t, t)), -t, t, q)?;
    Ok(8.0 * cov_integral * integral)
}

/// Which limit law a batch was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitLaw {
    /// `κ·argmin{Z(s) + s²}`.
    ScaledChernoff,
    /// `f_β^{*,ℓ}(0)`.
    SlowFbeta,
    /// `g_{β,c}^{*,ℓ}(F_X(x0))`.
    BoundaryGbc,
    /// `σ·W^{*,ℓ}(F_X(x0))`.
    FastWSlope,
    /// `σ·(W(1) − 2 min W)`.
    #[serde(rename = "l1_fast_maxA")]
    L1FastMaxA,
}

impl LimitLaw {
    pub fn needs_two_sided_grid(self) -> bool {
        matches!(self, LimitLaw::ScaledChernoff | LimitLaw::SlowFbeta)
    }

    fn experiment(self) -> u64 {
        match self {
            LimitLaw::ScaledChernoff => experiment::CHERNOFF,
            LimitLaw::SlowFbeta => experiment::SLOW_LIMIT,
            LimitLaw::BoundaryGbc | LimitLaw::FastWSlope => experiment::BOUNDARY_LIMIT,
            LimitLaw::L1FastMaxA => experiment::L1_FAST_LIMIT,
        }
    }

    pub fn default_grid(self) -> PathGrid {
        if self.needs_two_sided_grid() {
            PathGrid::chernoff_default()
        } else {
            PathGrid::unit_default()
        }
    }
}

/// Everything needed to draw from one limit law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitSetup {
    pub law_tag: LimitLaw,
    pub link: Link,
    pub law: FeatureLaw,
    pub x0: f64,
    /// Boundary constant `c`, used by `boundary_gbc` only.
    #[serde(default)]
    pub c: f64,
    pub grid: PathGrid,
}

/// Draws from one limit law with the grid and constants that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitBatch {
    pub law_tag: LimitLaw,
    pub grid: PathGrid,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
    /// Replicates `0..draws.len()` of the law's stream were used.
    pub draws: Vec<f64>,
}

enum Prepared {
    Argmin { scale: f64 },
    Slow(SlowParams),
    Boundary(BoundaryParams),
    L1 { sigma: f64 },
}

/// Draw `m` values from the configured limit law.
pub fn simulate_limit(setup: &LimitSetup, m: usize, seed: u64) -> Result<LimitBatch> {
    let grid = setup.grid;
    let tag = setup.law_tag;
    if tag.needs_two_sided_grid() {
        check_two_sided(&grid)?;
    } else {
        check_unit(&grid)?;
    }
    setup.link.validate()?;
    setup.law.validate()?;
    let mut params = BTreeMap::new();
    params.insert("sigma".to_string(), setup.link.sigma());
    let prepared = match tag {
        LimitLaw::ScaledChernoff => {
            let kappa = scaled_chernoff_constant(&setup.link, &setup.law, setup.x0)?;
            params.insert("kappa".into(), kappa);
            params.insert("x0".into(), setup.x0);
            Prepared::Argmin { scale: kappa }
        }
        LimitLaw::SlowFbeta => {
            let coef = slow_drift_coefficient(&setup.link, &setup.law, setup.x0)?;
            params.insert("beta".into(), setup.link.beta() as f64);
            params.insert("drift_coefficient".into(), coef);
            params.insert("x0".into(), setup.x0);
            Prepared::Slow(SlowParams { sigma: setup.link.sigma(), coef, beta: setup.link.beta() })
        }
        LimitLaw::BoundaryGbc | LimitLaw::FastWSlope => {
            let c = if tag == LimitLaw::FastWSlope { 0.0 } else { setup.c };
            let b = BoundaryParams::new(c, &setup.link, &setup.law, setup.x0, &grid, &QuadratureCfg::default())?;
            params.insert("beta".into(), setup.link.beta() as f64);
            params.insert("c".into(), c);
            params.insert("x0".into(), setup.x0);
            params.insert("t0".into(), b.t0);
            Prepared::Boundary(b)
        }
        LimitLaw::L1FastMaxA => Prepared::L1 { sigma: setup.link.sigma() },
    };
    let draws = parallel_draws(m, seed, tag.experiment(), |rng| match &prepared {
        Prepared::Argmin { scale } => argmin_sample_with(&grid, 1.0, 1.0, 0.0, rng).map(|x| scale * x),
        Prepared::Slow(p) => p.draw(&grid, rng),
        Prepared::Boundary(b) => Ok(b.draw(&grid, rng)),
        Prepared::L1 { sigma } => Ok(l1_fast_statistic(*sigma, &one_sided_path(grid.step, grid.cells(), rng))),
    })?;
    Ok(LimitBatch { law_tag: tag, grid, params, seed, draws })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ks_two_sample;

    #[test]
    fn grid_validation() {
        assert!(PathGrid::new(4.0, 0.002, true).is_ok());
        assert!(PathGrid::new(4.0, 0.003, true).is_err());
        assert!(PathGrid::new(1.0, 0.02, false).is_err());
        assert!(PathGrid::new(-1.0, 0.001, false).is_err());
        assert_eq!(PathGrid::unit_default().cells(), 5000);
    }

    #[test]
    fn brownian_path_is_pinned_at_zero() {
        let g = PathGrid::new(1.0, 0.01, true).unwrap();
        let p = brownian_path(&g, 3).unwrap();
        assert_eq!(p.len(), 201);
        assert_eq!(p[100], 0.0);
        let g = PathGrid::new(1.0, 0.01, false).unwrap();
        assert_eq!(brownian_path(&g, 3).unwrap()[0], 0.0);
    }

    #[test]
    fn extension_keeps_existing_values() {
        let mut rng = stream(1, 99, 0);
        let mut p = TwoSidedPath::simulate(0.01, 100, &mut rng);
        let before = p.values();
        p.extend(200, &mut rng);
        assert_eq!(p.cells(), 200);
        assert_eq!(&p.values()[100..301], &before[..]);
    }

    #[test]
    fn zero_path_argmin_is_parabola_vertex() {
        let p = TwoSidedPath::zero(0.002, 2000);
        assert_eq!(drifted_argmin(&p, 1.0, 1.0, 0.0), Some(0.0));
        assert_eq!(drifted_argmin(&p, 1.0, 1.0, 2.0), Some(1.0));
        assert_eq!(drifted_argmin(&p, 1.0, 1.0, 8.0), None);
    }

    #[test]
    fn persistent_escape_is_an_error() {
        let g = PathGrid::new(1.0, 0.01, true).unwrap();
        let mut rng = stream(0, 0, 0);
        // vertex at s = 100 is beyond three doublings of S = 1
        let err = argmin_sample_with(&g, 1.0, 1.0, 200.0, &mut rng).unwrap_err();
        assert!(matches!(err, Error::GridEscape { doublings: 3, .. }));
    }

    #[test]
    fn kappa_examples() {
        let law = FeatureLaw::uniform(1.0);
        let k = scaled_chernoff_constant(&Link::Logistic, &law, 0.0).unwrap();
        assert!((k - 0.5f64.cbrt()).abs() < 1e-15);
        let narrow = FeatureLaw::uniform(0.5);
        let k2 = scaled_chernoff_constant(&Link::Logistic, &narrow, 0.0).unwrap();
        assert!((k2 / k - 2f64.powf(-1.0 / 3.0)).abs() < 1e-15);
        assert!(scaled_chernoff_constant(&Link::BetaFlat { beta: 3 }, &law, 0.0).is_err());
    }

    #[test]
    fn zero_noise_slow_limit_is_zero() {
        let p = TwoSidedPath::zero(0.002, 2000);
        // the grid chord ending at 0 has slope −K·h
        let v = drifted_gcm_slope_at_zero(&p, 0.0, 0.125, 2).unwrap();
        assert!(v <= 0.0 && v.abs() <= 0.125 * 0.002 + 1e-15);
        assert!(drifted_gcm_slope_at_zero(&p, 0.0, 0.1, 4).unwrap().abs() < 1e-8);
    }

    #[test]
    fn affine_shift_moves_the_slope() {
        let g = PathGrid::new(4.0, 0.01, true).unwrap();
        let mut rng = stream(5, 0, 0);
        let p = TwoSidedPath::simulate(g.step, g.cells(), &mut rng);
        let ts = p.abscissae();
        let base: Vec<f64> = p.values().iter().zip(&ts).map(|(z, s)| z + s * s).collect();
        let tilted: Vec<f64> = base.iter().zip(&ts).map(|(y, s)| y + 0.7 * s - 0.3).collect();
        let a = gcm_left_slope(&ts, &base, 0.0).0;
        let b = gcm_left_slope(&ts, &tilted, 0.0).0;
        assert!((b - a - 0.7).abs() < 1e-9);
    }

    #[test]
    fn boundary_drift_examples() {
        let law = FeatureLaw::uniform(1.0);
        let q = QuadratureCfg::default();
        let l = Link::Logistic;
        assert_eq!(boundary_drift(1, 2.0, &l, &law, 0.0, 0.0, &q).unwrap(), 0.0);
        assert!(boundary_drift(1, 2.0, &l, &law, 0.0, 1.0, &q).unwrap().abs() < 1e-14);
        let v = boundary_drift(1, 2.0, &l, &law, 0.0, 0.5, &q).unwrap();
        assert!((v + 2f64.sqrt() * 0.25 / 4.0).abs() < 1e-13);
    }

    #[test]
    fn tabulated_drift_matches_pointwise_drift() {
        let law = FeatureLaw::Polynomial { half_width: 1.0, tilt: 0.4, curvature: 0.3 };
        let q = QuadratureCfg::default();
        let g = PathGrid::new(1.0, 0.001, false).unwrap();
        let b = BoundaryParams::new(3.0, &Link::Logistic, &law, 0.2, &g, &q).unwrap();
        for k in [0, 137, 500, 999, 1000] {
            let s = k as f64 * 0.001;
            let direct = boundary_drift(1, 3.0, &Link::Logistic, &law, 0.2, s, &q).unwrap();
            assert!((b.drift[k] - direct).abs() < 1e-9, "k = {k}");
        }
    }

    #[test]
    fn boundary_needs_interior_point() {
        let law = FeatureLaw::uniform(1.0);
        let g = PathGrid::unit_default();
        let err = BoundaryParams::new(1.0, &Link::Logistic, &law, 1.0, &g, &QuadratureCfg::default()).unwrap_err();
        assert!(err.to_string().contains("x0 must be interior"));
    }

    #[test]
    fn zero_path_boundary_slope_is_drift_slope() {
        let law = FeatureLaw::uniform(1.0);
        let g = PathGrid::new(1.0, 0.001, false).unwrap();
        let b = BoundaryParams::new(4.0, &Link::Logistic, &law, 0.0, &g, &QuadratureCfg::default()).unwrap();
        // drift 2·(1/4)·(s² − s) is convex with left derivative at 1/2 ≈ 0
        let slope = b.slope_on(&vec![0.0; 1001], 0.001);
        assert!(slope.abs() < 1e-3, "{slope}");
    }

    #[test]
    fn l1_fast_statistic_properties() {
        assert_eq!(l1_fast_statistic(0.5, &[0.0; 10]), 0.0);
        let mut rng = stream(2, 0, 0);
        for _ in 0..100 {
            let w = one_sided_path(0.01, 100, &mut rng);
            let v = l1_fast_statistic(1.0, &w);
            assert!(v >= w[100].abs() - 1e-15);
        }
    }

    #[test]
    fn recentred_argmins_match_direct_argmins() {
        let mut rng = stream(8, 0, 0);
        let p = TwoSidedPath::simulate(0.01, 800, &mut rng);
        let a = [0.0, 0.5, 1.25, 2.0];
        let fast = recentred_argmins(&p, &a).unwrap();
        for (x, &ai) in fast.iter().zip(&a) {
            let direct = drifted_argmin(&p, 1.0, 1.0, 2.0 * ai).unwrap();
            assert!((x + ai - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn mu_n_small_delta_limit() {
        let scn = Scenario::default().with_exponent(40.0);
        let v = mu_n(&scn, 1000, 1.0, &QuadratureCfg::default()).unwrap();
        assert!((v - 2.0 * 0.5f64.cbrt()).abs() < 1e-9);
    }

    #[test]
    fn sigma_sq_is_linear_in_the_constant() {
        let law = FeatureLaw::uniform(1.0);
        let q = QuadratureCfg::default();
        let s = sigma_sq(&Link::Logistic, &law, 0.1, &q).unwrap();
        assert!((s - 0.8).abs() < 1e-12);
        assert!((sigma_sq(&Link::Logistic, &law, 0.05, &q).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn batches_are_deterministic() {
        let setup = LimitSetup {
            law_tag: LimitLaw::ScaledChernoff,
            link: Link::Logistic,
            law: FeatureLaw::uniform(1.0),
            x0: 0.0,
            c: 0.0,
            grid: PathGrid::new(4.0, 0.01, true).unwrap(),
        };
        let a = simulate_limit(&setup, 50, 9).unwrap();
        let b = simulate_limit(&setup, 50, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.draws.iter().all(|d| d.is_finite()));
    }

    #[test]
    fn chernoff_draws_are_roughly_symmetric() {
        let g = PathGrid::new(4.0, 0.01, true).unwrap();
        let draws = parallel_draws(4000, 1, experiment::CHERNOFF, |r| argmin_sample_with(&g, 1.0, 1.0, 0.0, r)).unwrap();
        let e = mean_se(&draws);
        assert!(e.estimate.abs() < 4.0 * e.se);
        let neg: Vec<f64> = draws.iter().map(|x| -x).collect();
        assert!(ks_two_sample(&draws, &neg).unwrap() < 0.05);
    }
    #[test]
    fn cov_integral_curve_and_tail() {
        let g = PathGrid::new(4.0, 0.01, true).unwrap();
        let c = chernoff_cov_integral(&g, 4.0, 0.25, 3000, 5).unwrap();
        assert_eq!(c.a_values.len(), 17);
        assert_eq!(c.covariances.len(), 17);
        // Var|X(0)| of the Chernoff law is about 0.1
        assert!(c.covariances[0] > 0.05 && c.covariances[0] < 0.15);
        assert!(c.tail_negligible, "tail z = {}", c.tail_max_z);
        assert!(c.se > 0.0 && c.estimate.abs() < 0.2);
        assert!(chernoff_cov_integral(&g, 2.0, 0.25, 10, 5).is_err());
        assert!(chernoff_cov_integral(&g, 4.0, 0.3, 10, 5).is_err());
    }

    #[test]
    fn representation_covariance_matches() {
        let g = PathGrid::new(1.0, 0.01, false).unwrap();
        let pts = [0.0, 0.25, 0.5, 0.75, 1.0];
        let c = l1_fast_representation_covariance(&pts, &g, 20_000, 3).unwrap();
        assert!(c.max_z <= 4.0, "max z = {}", c.max_z);
        assert!((c.empirical[0][4] + 1.0).abs() < 0.05);
        assert!(l1_fast_representation_covariance(&[1.5], &g, 10, 3).is_err());
    }
}
