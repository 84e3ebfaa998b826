//! Monte Carlo studies: rate elbows, limit-law comparisons, lower-bound
//! audits, consistency and inverse-process probes.
//!
//! Replicates run on the ambient rayon pool. Each replicate draws from its
//! own stream and results are collected in replicate order, so any thread
//! count gives the same output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimator::{inverse_on_diagram, npmle_fit, CusumDiagram};
use crate::limits::{
    chernoff_abs_mean, chernoff_cov_integral, mu_n, sigma_sq, simulate_limit, Estimate, LimitBatch, LimitLaw,
    LimitSetup, PathGrid,
};
use crate::metrics::{hellinger, ks_two_sample, l1_error, sup_norm_on, L1Measure};
use crate::model::{
    build_assouad_cube, build_pointwise_hypotheses, check_membership, default_cube_c, default_slow_c, Curve,
    FeatureLaw, PiecewiseLinear, Sample, Scenario, DEFAULT_FAST_C,
};
use crate::model::sample_dataset_with;
use crate::quadrature::QuadratureCfg;
use crate::rng::{derive_seed, experiment, stream};

/// Least-squares fit of `log error` on `log n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub se: f64,
    pub intercept: f64,
}

pub fn fit_loglog_slope(ns: &[f64], errors: &[f64]) -> Result<SlopeFit> {
    if ns.len() != errors.len() || ns.len() < 3 {
        return Err(invalid("slope fit needs at least three (n, error) pairs"));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0)) {
        return Err(invalid(format!("errors must be positive for a log-log fit, got {e}")));
    }
    if ns.iter().any(|n| !(*n > 0.0)) {
        return Err(invalid("sample sizes must be positive"));
    }
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("sample sizes must not all coincide"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let se = (rss / (k - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, se, intercept })
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Expected log-log slope of the pointwise and `L1` errors:
/// `−min{1/2, β(1 + γ)/(2β + 1)}`.
pub fn target_slope(gamma: f64, beta: u32) -> f64 {
    let b = beta as f64;
    -(b * (1.0 + gamma) / (2.0 * b + 1.0)).min(0.5)
}

/// Regime of `nδ_n^{2β}` for `δ_n = c·n^{−γ}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Slow,
    Boundary,
    Fast,
}

impl Regime {
    pub fn of(gamma: f64, beta: u32) -> Self {
        let edge = 1.0 / (2.0 * beta as f64);
        if (gamma - edge).abs() <= 1e-12 {
            Regime::Boundary
        } else if gamma < edge {
            Regime::Slow
        } else {
            Regime::Fast
        }
    }
}

fn check_interior(law: &FeatureLaw, x0: f64) -> Result<()> {
    let t = law.half_width();
    if !(x0 > -t && x0 < t) {
        return Err(invalid(format!("x0 = {x0} must be interior to [-{t}, {t}]")));
    }
    Ok(())
}

fn check_ladder(n_list: &[u64]) -> Result<()> {
    if n_list.is_empty() || n_list[0] == 0 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("n_list must be nonempty, positive and strictly increasing"));
    }
    Ok(())
}

/// Seed for the replicates of one `(study part, n)` cell.
fn cell_seed(seed: u64, part: u64, n: u64) -> u64 {
    derive_seed(seed, (part << 40) ^ n)
}

/// Configuration of the rate and consistency studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub scenario: Scenario,
    pub gammas: Vec<f64>,
    pub n_list: Vec<u64>,
    pub replicates: usize,
    pub x0: f64,
    pub seed: u64,
    #[serde(default)]
    pub quadrature: QuadratureCfg,
    #[serde(default = "default_slope_tolerance")]
    pub slope_tolerance: f64,
}

fn default_slope_tolerance() -> f64 {
    0.07
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            gammas: vec![0.0, 0.25, 0.8],
            n_list: (9..=15).map(|k| 1u64 << k).collect(),
            replicates: 400,
            x0: 0.0,
            seed: 20_240_601,
            quadrature: QuadratureCfg::default(),
            slope_tolerance: default_slope_tolerance(),
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.quadrature.validate()?;
        check_ladder(&self.n_list)?;
        check_interior(&self.scenario.law, self.x0)?;
        if self.replicates < 50 {
            return Err(invalid("replicates must be at least 50"));
        }
        if self.gammas.is_empty() || self.gammas.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(invalid("gammas must be nonempty and nonnegative"));
        }
        if !(self.slope_tolerance > 0.0) {
            return Err(invalid("slope_tolerance must be positive"));
        }
        Ok(())
    }

    /// All `(gamma index, n, replicate)` cells in output order.
    fn cells(&self) -> Vec<(usize, u64, u64)> {
        let mut out = Vec::new();
        for gi in 0..self.gammas.len() {
            for &n in &self.n_list {
                for r in 0..self.replicates as u64 {
                    out.push((gi, n, r));
                }
            }
        }
        out
    }

    fn draw(&self, gi: usize, n: u64, r: u64, part: u64) -> Result<(Scenario, Sample)> {
        let scn = self.scenario.with_exponent(self.gammas[gi]);
        let mut rng = stream(cell_seed(self.seed, part + gi as u64, n), experiment::DATA, r);
        let s = sample_dataset_with(&scn, n, &mut rng)?;
        Ok((scn, s))
    }
}

/// One replicate of the rate study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub gamma: f64,
    pub n: u64,
    pub replicate: u64,
    pub err_pointwise: f64,
    pub err_l1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    Pointwise,
    L1,
}

/// Fitted slope of the per-`n` medians for one `γ` and one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub gamma: f64,
    pub metric: ErrorMetric,
    pub medians: Vec<f64>,
    pub fit: SlopeFit,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub records: Vec<RateRecord>,
    pub fits: Vec<SlopeRow>,
    pub passed: bool,
}

/// Part ids keep the data streams of the studies apart.
const PART_RATE: u64 = 0;
const PART_CONSISTENCY: u64 = 1 << 8;
const PART_TAIL: u64 = 2 << 8;
const PART_COMPARE: u64 = 3 << 8;
const PART_CENTERING: u64 = 4 << 8;
const LIMIT_TAG: u64 = 0x4c_49_4d_49_54;

/// Pointwise and `L1` errors for every replicate, with slope fits for the
/// requested metrics.
pub fn run_rate_study(cfg: &StudyConfig, metrics: &[ErrorMetric]) -> Result<StudyResult> {
    cfg.validate()?;
    let t = cfg.scenario.half_width();
    let records: Vec<RateRecord> = cfg
        .cells()
        .into_par_iter()
        .map(|(gi, n, r)| {
            let (scn, s) = cfg.draw(gi, n, r, PART_RATE)?;
            let fit = npmle_fit(&s);
            let truth = scn.regression(n);
            let err_pointwise = (fit.value(cfg.x0) - truth.value(cfg.x0)).abs();
            let err_l1 = l1_error(&fit, &truth, L1Measure::Lebesgue { lo: -t, hi: t }, &cfg.quadrature)?;
            Ok(RateRecord { gamma: cfg.gammas[gi], n, replicate: r, err_pointwise, err_l1 })
        })
        .collect::<Result<_>>()?;

    let ns: Vec<f64> = cfg.n_list.iter().map(|&n| n as f64).collect();
    let beta = cfg.scenario.beta();
    let mut fits = Vec::new();
    for (gi, &gamma) in cfg.gammas.iter().enumerate() {
        for &metric in metrics {
            let medians: Vec<f64> = (0..cfg.n_list.len())
                .map(|ni| {
                    let start = (gi * cfg.n_list.len() + ni) * cfg.replicates;
                    let errs: Vec<f64> = records[start..start + cfg.replicates]
                        .iter()
                        .map(|r| match metric {
                            ErrorMetric::Pointwise => r.err_pointwise,
                            ErrorMetric::L1 => r.err_l1,
                        })
                        .collect();
                    median(&errs)
                })
                .collect();
            let fit = fit_loglog_slope(&ns, &medians)?;
            let target = target_slope(gamma, beta);
            let pass = (fit.slope - target).abs() <= cfg.slope_tolerance;
            fits.push(SlopeRow { gamma, metric, medians, fit, target, tolerance: cfg.slope_tolerance, pass });
        }
    }
    let passed = fits.iter().all(|f| f.pass);
    Ok(StudyResult { records, fits, passed })
}

pub fn run_pointwise_rate_study(cfg: &StudyConfig) -> Result<StudyResult> {
    run_rate_study(cfg, &[ErrorMetric::Pointwise])
}

pub fn run_l1_rate_study(cfg: &StudyConfig) -> Result<StudyResult> {
    run_rate_study(cfg, &[ErrorMetric::L1])
}

/// Mean of `(n/δ_n)^{1/3}·∫|Φ̂_n − Φ_n|dt` against `μ_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteringResult {
    pub n: u64,
    pub gamma: f64,
    pub scaled_l1: Estimate,
    pub abs_mean: Estimate,
    pub mu_n: f64,
    pub relative_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Slow-regime `L1` centering check at one sample size.
pub fn run_l1_centering(
    scn: &Scenario,
    n: u64,
    replicates: usize,
    abs_mean: Estimate,
    seed: u64,
    q: &QuadratureCfg,
    tolerance: f64,
) -> Result<CenteringResult> {
    scn.validate()?;
    if Regime::of(scn.impact_exponent, scn.beta()) != Regime::Slow || scn.beta() != 1 {
        return Err(invalid("the L1 centering check needs β = 1 and a slow-regime γ < 1/2"));
    }
    let scaled = scaled_l1_errors(scn, n, replicates, seed, q)?;
    let est = crate::limits::mean_se(&scaled);
    let mu = mu_n(scn, n, abs_mean.estimate, q)?;
    let relative_gap = (est.estimate - mu) / mu;
    Ok(CenteringResult {
        n,
        gamma: scn.impact_exponent,
        scaled_l1: est,
        abs_mean,
        mu_n: mu,
        relative_gap,
        tolerance,
        pass: relative_gap.abs() <= tolerance,
    })
}

fn scaled_l1_errors(scn: &Scenario, n: u64, replicates: usize, seed: u64, q: &QuadratureCfg) -> Result<Vec<f64>> {
    let t = scn.half_width();
    let scale = (n as f64 / scn.delta(n)).cbrt();
    let s_seed = cell_seed(seed, PART_CENTERING, n);
    (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let s = sample_dataset_with(scn, n, &mut stream(s_seed, experiment::DATA, r))?;
            let fit = npmle_fit(&s);
            Ok(scale * l1_error(&fit, &scn.regression(n), L1Measure::Lebesgue { lo: -t, hi: t }, q)?)
        })
        .collect()
}

/// Finite-sample statistic compared with a limit law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareKind {
    PointwiseSlow,
    PointwiseBoundary,
    PointwiseFast,
    L1Fast,
    /// Standardized slow-regime `L1` error against `N(0, σ²)`; long-running.
    L1Slow,
}

impl CompareKind {
    pub fn regime(self) -> Regime {
        match self {
            CompareKind::PointwiseSlow | CompareKind::L1Slow => Regime::Slow,
            CompareKind::PointwiseBoundary => Regime::Boundary,
            CompareKind::PointwiseFast | CompareKind::L1Fast => Regime::Fast,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CompareKind::PointwiseSlow => "pointwise_slow",
            CompareKind::PointwiseBoundary => "pointwise_boundary",
            CompareKind::PointwiseFast => "pointwise_fast",
            CompareKind::L1Fast => "l1_fast",
            CompareKind::L1Slow => "l1_slow",
        }
    }
}

/// Constants for the `L1Slow` comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct L1SlowConstants {
    pub abs_mean_draws: usize,
    pub cov_paths: usize,
    pub a_max: f64,
    pub a_step: f64,
}

impl Default for L1SlowConstants {
    fn default() -> Self {
        Self { abs_mean_draws: 20_000, cov_paths: 20_000, a_max: 4.0, a_step: 0.125 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub kind: CompareKind,
    pub scenario: Scenario,
    pub n: u64,
    pub replicates: usize,
    pub limit_draws: usize,
    pub x0: f64,
    pub seed: u64,
    pub tolerance: f64,
    /// Grid for the limit sampler; the law's default when absent.
    #[serde(default)]
    pub grid: Option<PathGrid>,
    #[serde(default)]
    pub quadrature: QuadratureCfg,
    #[serde(default)]
    pub l1_slow: L1SlowConstants,
}

impl CompareConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        check_interior(&self.scenario.law, self.x0)?;
        if self.n == 0 || self.replicates < 50 || self.limit_draws < 2 {
            return Err(invalid("need n >= 1, replicates >= 50 and at least two limit draws"));
        }
        let beta = self.scenario.beta();
        let regime = Regime::of(self.scenario.impact_exponent, beta);
        if regime != self.kind.regime() {
            return Err(invalid(format!(
                "{} needs the {:?} regime but gamma = {} with beta = {beta} is {:?} (edge at 1/(2 beta) = {})",
                self.kind.name(),
                self.kind.regime(),
                self.scenario.impact_exponent,
                regime,
                1.0 / (2.0 * beta as f64)
            )));
        }
        if matches!(self.kind, CompareKind::L1Fast | CompareKind::L1Slow) && beta != 1 {
            return Err(invalid("L1 limit comparisons need beta = 1"));
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        Ok(())
    }
}

/// One limit comparison: CSV row plus the draws behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRecord {
    pub kind: CompareKind,
    pub n: u64,
    pub gamma: f64,
    pub ks: f64,
    pub draws_finite: usize,
    pub draws_limit: usize,
    pub tolerance: f64,
    pub pass: bool,
    /// `nδ_n^{2β}`, the boundary constant used at finite `n`.
    pub regime_index: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub record: CompareRecord,
    pub finite: Vec<f64>,
    pub limit: LimitBatch,
}

/// Standardized finite-sample statistics against a matched limit batch.
pub fn run_limit_comparison(cfg: &CompareConfig) -> Result<Comparison> {
    cfg.validate()?;
    let scn = cfg.scenario;
    let n = cfg.n;
    let beta = scn.beta();
    let b = beta as f64;
    let delta = scn.delta(n);
    let c = scn.regime_index(n);
    let (law_tag, boundary_c) = match cfg.kind {
        CompareKind::PointwiseSlow if beta == 1 => (LimitLaw::ScaledChernoff, 0.0),
        CompareKind::PointwiseSlow => (LimitLaw::SlowFbeta, 0.0),
        CompareKind::PointwiseBoundary => (LimitLaw::BoundaryGbc, c),
        CompareKind::PointwiseFast => (LimitLaw::FastWSlope, 0.0),
        CompareKind::L1Fast => (LimitLaw::L1FastMaxA, 0.0),
        CompareKind::L1Slow => (LimitLaw::ScaledChernoff, 0.0),
    };
    let grid = cfg.grid.unwrap_or_else(|| law_tag.default_grid());
    let limit_seed = derive_seed(cfg.seed, LIMIT_TAG);
    let mut limit = if cfg.kind == CompareKind::L1Slow {
        l1_slow_reference(cfg, &grid, limit_seed)?
    } else {
        let setup = LimitSetup { law_tag, link: scn.link, law: scn.law, x0: cfg.x0, c: boundary_c, grid };
        simulate_limit(&setup, cfg.limit_draws, limit_seed)?
    };
    limit.params.insert("regime_index".into(), c);

    let s_seed = cell_seed(cfg.seed, PART_COMPARE + cfg.kind as u64, n);
    let x0 = cfg.x0;
    let finite: Vec<f64> = match cfg.kind {
        CompareKind::L1Slow => {
            let mu = limit.params["mu_n"];
            let scaled = scaled_l1_errors(&scn, n, cfg.replicates, s_seed, &cfg.quadrature)?;
            let lift = (n as f64 * delta * delta).powf(1.0 / 6.0);
            scaled.into_iter().map(|v| lift * (v - mu)).collect()
        }
        kind => (0..cfg.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let s = sample_dataset_with(&scn, n, &mut stream(s_seed, experiment::DATA, r))?;
                let fit = npmle_fit(&s);
                let truth = scn.regression(n);
                Ok(match kind {
                    CompareKind::PointwiseSlow => {
                        (n as f64 / delta).powf(b / (2.0 * b + 1.0)) * (fit.value(x0) - truth.value(x0))
                    }
                    CompareKind::PointwiseBoundary | CompareKind::PointwiseFast => {
                        (n as f64).sqrt() * (fit.value(x0) - truth.value(x0))
                    }
                    _ => {
                        let e = l1_error(&fit, &truth, L1Measure::Empirical(&s), &cfg.quadrature)?;
                        (n as f64).sqrt() * e
                    }
                })
            })
            .collect::<Result<_>>()?,
    };
    let ks = ks_two_sample(&finite, &limit.draws)?;
    let record = CompareRecord {
        kind: cfg.kind,
        n,
        gamma: scn.impact_exponent,
        ks,
        draws_finite: finite.len(),
        draws_limit: limit.draws.len(),
        tolerance: cfg.tolerance,
        pass: ks <= cfg.tolerance,
        regime_index: c,
    };
    Ok(Comparison { record, finite, limit })
}

/// `N(0, σ²)` draws with `σ²` and `μ_n` estimated from Chernoff paths.
fn l1_slow_reference(cfg: &CompareConfig, grid: &PathGrid, seed: u64) -> Result<LimitBatch> {
    use rand_distr::{Distribution, StandardNormal};
    let k = cfg.l1_slow;
    let scn = cfg.scenario;
    let abs_mean = chernoff_abs_mean(grid, k.abs_mean_draws, derive_seed(seed, 1))?;
    let cov = chernoff_cov_integral(grid, k.a_max, k.a_step, k.cov_paths, derive_seed(seed, 2))?;
    let s2 = sigma_sq(&scn.link, &scn.law, cov.estimate, &cfg.quadrature)?;
    let mu = mu_n(&scn, cfg.n, abs_mean.estimate, &cfg.quadrature)?;
    let sd = s2.max(0.0).sqrt();
    let draws: Vec<f64> = (0..cfg.limit_draws as u64)
        .map(|r| {
            let z: f64 = StandardNormal.sample(&mut stream(seed, experiment::CHERNOFF, r));
            sd * z
        })
        .collect();
    let params = [
        ("abs_mean", abs_mean.estimate),
        ("abs_mean_se", abs_mean.se),
        ("cov_integral", cov.estimate),
        ("cov_integral_se", cov.se),
        ("cov_tail_max_z", cov.tail_max_z),
        ("sigma_sq", s2),
        ("mu_n", mu),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    Ok(LimitBatch { law_tag: LimitLaw::ScaledChernoff, grid: *grid, params, seed, draws })
}

/// Configuration of the lower-bound audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub law: FeatureLaw,
    pub n_list: Vec<u64>,
    pub x0: f64,
    pub delta_fast: f64,
    pub delta_slow: f64,
    pub delta_cube: f64,
    #[serde(default)]
    pub c_fast: Option<f64>,
    #[serde(default)]
    pub c_slow: Option<f64>,
    #[serde(default)]
    pub c_cube: Option<f64>,
    /// Absolute tolerance for `n·d²`.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            law: FeatureLaw::uniform(1.0),
            n_list: vec![10_000, 1_000_000],
            x0: 0.0,
            delta_fast: 0.0005,
            delta_slow: 0.1,
            delta_cube: 0.1,
            c_fast: None,
            c_slow: None,
            c_cube: None,
            tolerance: 1e-8,
            seed: 20_240_601,
        }
    }
}

/// One audited construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub construction: String,
    pub n: u64,
    pub delta: f64,
    pub c: f64,
    /// Largest `n·d²` over the audited hypothesis pairs.
    pub n_d2: f64,
    pub alpha: f64,
    pub inequality: String,
    pub members: bool,
    /// Separation (pairs) or smallest one-flip `L1` gap (cube) minus its
    /// lower bound; nonnegative when the bound holds.
    pub separation_margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    pub records: Vec<AuditRecord>,
    pub passed: bool,
}

fn audit_quadrature(n: u64, tol: f64) -> QuadratureCfg {
    QuadratureCfg { abs_tol: tol / n as f64, max_depth: 60 }
}

/// Build every hypothesis family, check class membership and the Hellinger
/// budgets `n·d² ≤ α < 2`.
pub fn run_lower_bound_audit(cfg: &AuditConfig) -> Result<AuditResult> {
    cfg.law.validate()?;
    check_ladder(&cfg.n_list)?;
    if !(cfg.tolerance > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let t = cfg.law.half_width();
    let mut records = Vec::new();
    for &n in &cfg.n_list {
        let q = audit_quadrature(n, cfg.tolerance);
        let slack = cfg.tolerance;
        for (name, delta, c) in [
            ("fast_pair", cfg.delta_fast, cfg.c_fast.unwrap_or(DEFAULT_FAST_C)),
            ("slow_pair", cfg.delta_slow, cfg.c_slow.unwrap_or_else(|| default_slow_c(&cfg.law))),
        ] {
            let pair = build_pointwise_hypotheses(delta, n, c, &cfg.law, cfg.x0)?;
            let n_d2 = n as f64 * hellinger(&pair.upper, &pair.lower, &cfg.law, &q)?.powi(2);
            let alpha = pair.alpha(&cfg.law);
            let members = [&pair.upper, &pair.lower].iter().all(|f| check_membership(*f, delta, t).member);
            let sep = pair.upper.value(cfg.x0) - pair.lower.value(cfg.x0);
            let margin = sep - pair.target_separation();
            let inequality = if name == "fast_pair" {
                format!("n d^2 = {n_d2:.6} <= 4C^2 = alpha = {alpha:.6} < 2")
            } else {
                format!("n d^2 = {n_d2:.6} <= 8^2 C^3 sup p_X = alpha = {alpha:.6} < 2")
            };
            records.push(AuditRecord {
                construction: name.into(),
                n,
                delta,
                c,
                n_d2,
                alpha,
                inequality,
                members,
                separation_margin: margin,
                pass: n_d2 <= alpha + slack && alpha < 2.0 && members && margin >= -1e-12,
            });
        }
        let c = cfg.c_cube.unwrap_or_else(|| default_cube_c(&cfg.law));
        let cube = build_assouad_cube(cfg.delta_cube, n, c, &cfg.law)?;
        let alpha = cube.alpha(&cfg.law);
        let base_bits = random_bits(cube.cells, derive_seed(cfg.seed, n));
        let mut worst = 0.0f64;
        let mut margin = f64::INFINITY;
        let mut members = true;
        for base in [vec![false; cube.cells], vec![true; cube.cells], base_bits] {
            let f = cube.evaluate(&base)?;
            members &= check_membership(&f, cube.delta, t).member;
            let (lo, hi) = (f.values()[0], f.values()[f.values().len() - 1]);
            members &= lo >= 0.25 - 1e-15 && hi <= 0.75 + 1e-15;
            for k in 0..cube.cells {
                let mut flipped = base.clone();
                flipped[k] = !flipped[k];
                let g = cube.evaluate(&flipped)?;
                worst = worst.max(n as f64 * hellinger(&f, &g, &cfg.law, &q)?.powi(2));
                let (a, b) = (cube.cell_start(k), cube.cell_start(k + 1));
                let inside = crate::metrics::l1_distance_lebesgue(&f, &g, a, b, &q)?;
                let outside = crate::metrics::l1_distance_lebesgue(&f, &g, -t, a, &q)?
                    + crate::metrics::l1_distance_lebesgue(&f, &g, b, t, &q)?;
                margin = margin.min(inside - cube.cell_l1_gap_bound());
                if outside != 0.0 {
                    margin = f64::NEG_INFINITY;
                }
            }
        }
        records.push(AuditRecord {
            construction: "assouad_one_flip".into(),
            n,
            delta: cube.delta,
            c,
            n_d2: worst,
            alpha,
            inequality: format!("n d^2 = {worst:.6} <= 64 C^3 sup p_X = alpha = {alpha:.6} < 2"),
            members,
            separation_margin: margin,
            pass: worst <= alpha + slack && alpha < 2.0 && members && margin >= -1e-12,
        });
    }
    let passed = records.iter().all(|r| r.pass);
    Ok(AuditResult { records, passed })
}

fn random_bits(m: usize, seed: u64) -> Vec<bool> {
    use rand::Rng;
    let mut rng = stream(seed, experiment::CANDIDATES, 0);
    (0..m).map(|_| rng.random::<bool>()).collect()
}

/// Configuration of the Hellinger and sup-norm consistency study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencyConfig {
    pub scenario: Scenario,
    /// Exponents whose Hellinger medians must shrink by `hellinger_ratio`.
    pub hellinger_gammas: Vec<f64>,
    /// Exponents whose sup-norm medians must decrease strictly.
    pub sup_gammas: Vec<f64>,
    pub n_list: Vec<u64>,
    pub replicates: usize,
    pub hellinger_ratio: f64,
    pub seed: u64,
    #[serde(default)]
    pub quadrature: QuadratureCfg,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            hellinger_gammas: vec![0.0],
            sup_gammas: vec![0.25, 0.8],
            n_list: vec![400, 800, 1600, 3200, 6400],
            replicates: 200,
            hellinger_ratio: 0.55,
            seed: 20_240_601,
            quadrature: QuadratureCfg::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub gamma: f64,
    pub metric: String,
    pub medians: Vec<f64>,
    /// Last over first median for Hellinger; 1 or 0 for the sup-norm
    /// monotonicity check.
    pub statistic: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyResult {
    pub n_list: Vec<u64>,
    pub rows: Vec<ConsistencyRow>,
    pub passed: bool,
}

pub fn run_consistency_study(cfg: &ConsistencyConfig) -> Result<ConsistencyResult> {
    cfg.scenario.validate()?;
    check_ladder(&cfg.n_list)?;
    if cfg.replicates < 50 {
        return Err(invalid("replicates must be at least 50"));
    }
    let t = cfg.scenario.half_width();
    let study = |gamma: f64, part: u64, metric: &(dyn Fn(&Scenario, u64, &Sample) -> Result<f64> + Sync)| {
        let scn = cfg.scenario.with_exponent(gamma);
        cfg.n_list
            .iter()
            .map(|&n| {
                let seed = cell_seed(cfg.seed, part, n);
                let vals: Vec<f64> = (0..cfg.replicates as u64)
                    .into_par_iter()
                    .map(|r| {
                        let s = sample_dataset_with(&scn, n, &mut stream(seed, experiment::DATA, r))?;
                        metric(&scn, n, &s)
                    })
                    .collect::<Result<_>>()?;
                Ok(median(&vals))
            })
            .collect::<Result<Vec<f64>>>()
    };
    let mut rows = Vec::new();
    for (i, &gamma) in cfg.hellinger_gammas.iter().enumerate() {
        let medians = study(gamma, PART_CONSISTENCY + i as u64, &|scn, n, s| {
            hellinger(&npmle_fit(s), &scn.regression(n), &scn.law, &cfg.quadrature)
        })?;
        let ratio = medians[medians.len() - 1] / medians[0];
        rows.push(ConsistencyRow {
            gamma,
            metric: "hellinger".into(),
            medians,
            statistic: ratio,
            pass: ratio <= cfg.hellinger_ratio,
        });
    }
    for (i, &gamma) in cfg.sup_gammas.iter().enumerate() {
        let medians = study(gamma, PART_CONSISTENCY + 64 + i as u64, &|scn, n, s| {
            Ok(sup_norm_on(&npmle_fit(s), &scn.regression(n), -0.5 * t, 0.5 * t))
        })?;
        let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
        rows.push(ConsistencyRow {
            gamma,
            metric: "sup_norm".into(),
            medians,
            statistic: if decreasing { 1.0 } else { 0.0 },
            pass: decreasing,
        });
    }
    let passed = rows.iter().all(|r| r.pass);
    Ok(ConsistencyResult { n_list: cfg.n_list.clone(), rows, passed })
}

/// Configuration of the inverse-process probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailProbeConfig {
    pub scenario: Scenario,
    pub n_list: Vec<u64>,
    pub replicates: usize,
    pub x0: f64,
    /// Deviation thresholds `x` for the tail frequencies.
    pub thresholds: Vec<f64>,
    pub slope_tolerance: f64,
    pub seed: u64,
}

impl Default for TailProbeConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::default().with_exponent(0.25),
            n_list: (10..=16).map(|k| 1u64 << k).collect(),
            replicates: 400,
            x0: 0.0,
            thresholds: vec![0.01, 0.02, 0.05],
            slope_tolerance: 0.1,
            seed: 20_240_601,
        }
    }
}

/// Empirical `P(|Ũ_n(a) − λ_n^{-1}(a)| ≥ x)` at one `(n, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub n: u64,
    pub x: f64,
    /// `nδ_n²x³`.
    pub index: f64,
    pub frequency: f64,
    /// `x < (nδ_n²)^{-1/3}`, where the tail bound says nothing.
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailProbeResult {
    pub rows: Vec<TailRow>,
    pub medians: Vec<f64>,
    pub fit: SlopeFit,
    pub target: f64,
    pub slope_pass: bool,
    /// Frequencies nonincreasing in `n` at every threshold.
    pub monotone: bool,
}

/// Deviations of the inverse process at `a = Φ_n(x0)` from
/// `λ_n^{-1}(a) = F_X(x0)`.
pub fn run_tail_bound_probe(cfg: &TailProbeConfig) -> Result<TailProbeResult> {
    let scn = cfg.scenario;
    scn.validate()?;
    check_ladder(&cfg.n_list)?;
    check_interior(&scn.law, cfg.x0)?;
    if Regime::of(scn.impact_exponent, 1) != Regime::Slow {
        return Err(invalid("the tail probe needs a slow-regime exponent gamma < 1/2"));
    }
    if cfg.replicates < 50 {
        return Err(invalid("replicates must be at least 50"));
    }
    let target_t = scn.law.cdf(cfg.x0);
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    for &n in &cfg.n_list {
        let a = scn.phi_n(n, cfg.x0);
        let seed = cell_seed(cfg.seed, PART_TAIL, n);
        let devs: Vec<f64> = (0..cfg.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let s = sample_dataset_with(&scn, n, &mut stream(seed, experiment::DATA, r))?;
                let d = CusumDiagram::new(&s);
                Ok((inverse_on_diagram(&d, &s, a)?.grid_t - target_t).abs())
            })
            .collect::<Result<_>>()?;
        let nd2 = n as f64 * scn.delta(n).powi(2);
        for &x in &cfg.thresholds {
            let hits = devs.iter().filter(|&&d| d >= x).count();
            rows.push(TailRow {
                n,
                x,
                index: nd2 * x.powi(3),
                frequency: hits as f64 / devs.len() as f64,
                vacuous: x < nd2.powf(-1.0 / 3.0),
            });
        }
        medians.push(median(&devs));
    }
    let ns: Vec<f64> = cfg.n_list.iter().map(|&n| n as f64).collect();
    let fit = fit_loglog_slope(&ns, &medians)?;
    let target = -(1.0 - 2.0 * scn.impact_exponent) / 3.0;
    let k = cfg.thresholds.len();
    let monotone = (0..k).all(|j| {
        let freqs: Vec<f64> = rows.iter().skip(j).step_by(k).map(|r| r.frequency).collect();
        freqs.windows(2).all(|w| w[1] <= w[0])
    });
    Ok(TailProbeResult { rows, medians, fit, target, slope_pass: (fit.slope - target).abs() <= cfg.slope_tolerance, monotone })
}

/// Lower-bound pair and cube functions for plotting.
pub fn hypothesis_curves(cfg: &AuditConfig) -> Result<Vec<(String, PiecewiseLinear)>> {
    let n = cfg.n_list[0];
    let mut out = Vec::new();
    let pair = build_pointwise_hypotheses(
        cfg.delta_slow,
        n,
        cfg.c_slow.unwrap_or_else(|| default_slow_c(&cfg.law)),
        &cfg.law,
        cfg.x0,
    )?;
    out.push(("slow pair, upper".to_string(), pair.upper));
    out.push(("slow pair, lower".to_string(), pair.lower));
    let cube = build_assouad_cube(cfg.delta_cube, n, cfg.c_cube.unwrap_or_else(|| default_cube_c(&cfg.law)), &cfg.law)?;
    let alternating: Vec<bool> = (0..cube.cells).map(|k| k % 2 == 0).collect();
    out.push(("cube, alternating bits".to_string(), cube.evaluate(&alternating)?));
    Ok(out)
}
