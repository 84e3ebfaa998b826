//! Run configuration: a TOML file with one section per command, a shared
//! scenario, and every tolerance under `[tolerances]`.

use serde::{Deserialize, Serialize};
use wfi_core::experiments::{
    AuditConfig, CompareConfig, CompareKind, ConsistencyConfig, L1SlowConstants, StudyConfig, TailProbeConfig,
};
use wfi_core::limits::{LimitLaw, LimitSetup, PathGrid};
use wfi_core::{FeatureLaw, Link, QuadratureCfg, Result, Scenario};

/// Seed used when neither the flag, the file nor the environment sets one.
pub const DEFAULT_SEED: u64 = 20_240_601;

pub const SEED_ENV: &str = "MONOTONE_WFI_SEED";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    pub threads: usize,
    pub scenario: ScenarioSection,
    pub tolerances: Tolerances,
    pub simulate_limit: LimitSection,
    pub rate_study: RateSection,
    pub limit_compare: CompareSection,
    pub lower_bound_audit: AuditSection,
    pub constants: ConstantsSection,
    pub consistency: ConsistencySection,
    pub tail_probe: TailSection,
}

/// `Φ_n(x) = Φ0(δ_n x)` with `δ_n = impact_scale·n^{-γ}`; `γ` is set per
/// study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub link: Link,
    pub law: FeatureLaw,
    pub impact_scale: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let s = Scenario::default();
        Self { link: s.link, law: s.law, impact_scale: s.impact_scale }
    }
}

impl ScenarioSection {
    pub fn with_exponent(&self, gamma: f64) -> Scenario {
        Scenario { link: self.link, law: self.law, impact_scale: self.impact_scale, impact_exponent: gamma }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub quadrature: QuadratureCfg,
    /// Half width of the accepted band around each target log-log slope.
    pub rate_slope: f64,
    /// KS bound for the pointwise and fast `L1` comparisons.
    pub limit_ks: f64,
    /// KS bound for the opt-in slow `L1` comparison.
    pub l1_slow_ks: f64,
    /// Relative tolerance of the `L1` centering check.
    pub centering: f64,
    /// Absolute tolerance on `n·d²` in the lower-bound audit.
    pub audit: f64,
    pub hellinger_ratio: f64,
    pub tail_slope: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            quadrature: QuadratureCfg::default(),
            rate_slope: 0.07,
            limit_ks: 0.10,
            l1_slow_ks: 0.15,
            centering: 0.10,
            audit: 1e-8,
            hellinger_ratio: 0.55,
            tail_slope: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitSection {
    pub law: LimitLaw,
    pub draws: usize,
    pub x0: f64,
    /// Boundary constant, `boundary_gbc` only.
    pub c: f64,
    /// Defaults to the law's standard grid.
    pub grid: Option<PathGrid>,
}

impl Default for LimitSection {
    fn default() -> Self {
        Self { law: LimitLaw::ScaledChernoff, draws: 1000, x0: 0.0, c: 1.0, grid: None }
    }
}

impl LimitSection {
    pub fn setup(&self, scn: &ScenarioSection) -> LimitSetup {
        LimitSetup {
            law_tag: self.law,
            link: scn.link,
            law: scn.law,
            x0: self.x0,
            c: self.c,
            grid: self.grid.unwrap_or_else(|| self.law.default_grid()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateSection {
    pub gammas: Vec<f64>,
    pub n_list: Vec<u64>,
    pub replicates: usize,
    pub x0: f64,
}

impl Default for RateSection {
    fn default() -> Self {
        let d = StudyConfig::default();
        Self { gammas: d.gammas, n_list: d.n_list, replicates: d.replicates, x0: d.x0 }
    }
}

/// One finite-sample versus limit comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareRun {
    pub kind: CompareKind,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    pub runs: Vec<CompareRun>,
    pub n: u64,
    pub replicates: usize,
    pub limit_draws: usize,
    pub x0: f64,
    pub l1_slow: L1SlowConstants,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            runs: vec![
                CompareRun { kind: CompareKind::PointwiseSlow, gamma: 0.25 },
                CompareRun { kind: CompareKind::PointwiseFast, gamma: 0.9 },
                CompareRun { kind: CompareKind::L1Fast, gamma: 0.9 },
            ],
            n: 20_000,
            replicates: 2000,
            limit_draws: 50_000,
            x0: 0.0,
            l1_slow: L1SlowConstants::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSection {
    pub n_list: Vec<u64>,
    pub x0: f64,
    pub delta_fast: f64,
    pub delta_slow: f64,
    pub delta_cube: f64,
    pub c_fast: Option<f64>,
    pub c_slow: Option<f64>,
    pub c_cube: Option<f64>,
}

impl Default for AuditSection {
    fn default() -> Self {
        let d = AuditConfig::default();
        Self {
            n_list: d.n_list,
            x0: d.x0,
            delta_fast: d.delta_fast,
            delta_slow: d.delta_slow,
            delta_cube: d.delta_cube,
            c_fast: d.c_fast,
            c_slow: d.c_slow,
            c_cube: d.c_cube,
        }
    }
}

/// Monte Carlo constants of the `L1` limit, plus the centering check that
/// uses them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsSection {
    pub grid: PathGrid,
    pub abs_mean_draws: usize,
    pub cov_paths: usize,
    pub a_max: f64,
    pub a_step: f64,
    /// Sample size and exponent at which `μ_n` is reported.
    pub n: u64,
    pub gamma: f64,
    /// Replicates of the centering check; 0 skips it.
    pub centering_replicates: usize,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        Self {
            grid: PathGrid::chernoff_default(),
            abs_mean_draws: 10_000,
            cov_paths: 2000,
            a_max: 4.0,
            a_step: 0.125,
            n: 40_000,
            gamma: 0.25,
            centering_replicates: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsistencySection {
    pub hellinger_gammas: Vec<f64>,
    pub sup_gammas: Vec<f64>,
    pub n_list: Vec<u64>,
    pub replicates: usize,
}

impl Default for ConsistencySection {
    fn default() -> Self {
        let d = ConsistencyConfig::default();
        Self { hellinger_gammas: d.hellinger_gammas, sup_gammas: d.sup_gammas, n_list: d.n_list, replicates: d.replicates }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailSection {
    pub gamma: f64,
    pub n_list: Vec<u64>,
    pub replicates: usize,
    pub x0: f64,
    pub thresholds: Vec<f64>,
}

impl Default for TailSection {
    fn default() -> Self {
        let d = TailProbeConfig::default();
        Self {
            gamma: d.scenario.impact_exponent,
            n_list: d.n_list,
            replicates: d.replicates,
            x0: d.x0,
            thresholds: d.thresholds,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    /// Apply `key.path=value`; the value is read as a TOML literal, or as a
    /// string when it does not parse as one.
    pub fn set(&mut self, assignment: &str) -> std::result::Result<(), String> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| format!("--set expects key=value, got `{assignment}`"))?;
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut doc = toml::Value::try_from(&*self).map_err(|e| e.to_string())?;
        let keys: Vec<&str> = path.trim().split('.').collect();
        let (last, parents) = keys.split_last().ok_or("empty key")?;
        let mut node = &mut doc;
        for (i, key) in parents.iter().enumerate() {
            let table = node.as_table_mut().ok_or_else(|| format!("`{path}`: `{}` is not a section", keys[..i].join(".")))?;
            node = table.entry(key.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
        }
        node.as_table_mut()
            .ok_or_else(|| format!("`{path}`: `{}` is not a section", parents.join(".")))?
            .insert(last.to_string(), value);
        *self = doc.try_into().map_err(|e: toml::de::Error| format!("--set {path}: {e}"))?;
        Ok(())
    }

    pub fn rate_study(&self, seed: u64) -> StudyConfig {
        let r = &self.rate_study;
        StudyConfig {
            scenario: self.scenario.with_exponent(0.0),
            gammas: r.gammas.clone(),
            n_list: r.n_list.clone(),
            replicates: r.replicates,
            x0: r.x0,
            seed,
            quadrature: self.tolerances.quadrature,
            slope_tolerance: self.tolerances.rate_slope,
        }
    }

    pub fn comparisons(&self, seed: u64) -> Vec<CompareConfig> {
        let c = &self.limit_compare;
        c.runs
            .iter()
            .map(|run| CompareConfig {
                kind: run.kind,
                scenario: self.scenario.with_exponent(run.gamma),
                n: c.n,
                replicates: c.replicates,
                limit_draws: c.limit_draws,
                x0: c.x0,
                seed,
                tolerance: if run.kind == CompareKind::L1Slow {
                    self.tolerances.l1_slow_ks
                } else {
                    self.tolerances.limit_ks
                },
                grid: None,
                quadrature: self.tolerances.quadrature,
                l1_slow: c.l1_slow,
            })
            .collect()
    }

    pub fn audit(&self, seed: u64) -> AuditConfig {
        let a = &self.lower_bound_audit;
        AuditConfig {
            law: self.scenario.law,
            n_list: a.n_list.clone(),
            x0: a.x0,
            delta_fast: a.delta_fast,
            delta_slow: a.delta_slow,
            delta_cube: a.delta_cube,
            c_fast: a.c_fast,
            c_slow: a.c_slow,
            c_cube: a.c_cube,
            tolerance: self.tolerances.audit,
            seed,
        }
    }

    pub fn consistency(&self, seed: u64) -> ConsistencyConfig {
        let c = &self.consistency;
        ConsistencyConfig {
            scenario: self.scenario.with_exponent(0.0),
            hellinger_gammas: c.hellinger_gammas.clone(),
            sup_gammas: c.sup_gammas.clone(),
            n_list: c.n_list.clone(),
            replicates: c.replicates,
            hellinger_ratio: self.tolerances.hellinger_ratio,
            seed,
            quadrature: self.tolerances.quadrature,
        }
    }

    pub fn tail_probe(&self, seed: u64) -> TailProbeConfig {
        let t = &self.tail_probe;
        TailProbeConfig {
            scenario: self.scenario.with_exponent(t.gamma),
            n_list: t.n_list.clone(),
            replicates: t.replicates,
            x0: t.x0,
            thresholds: t.thresholds.clone(),
            slope_tolerance: self.tolerances.tail_slope,
            seed,
        }
    }

    /// Checks shared by every command.
    pub fn validate_common(&self) -> Result<()> {
        self.scenario.with_exponent(0.0).validate()?;
        self.tolerances.quadrature.validate()?;
        let t = &self.tolerances;
        for (name, v) in [
            ("rate_slope", t.rate_slope),
            ("limit_ks", t.limit_ks),
            ("l1_slow_ks", t.l1_slow_ks),
            ("centering", t.centering),
            ("audit", t.audit),
            ("hellinger_ratio", t.hellinger_ratio),
            ("tail_slope", t.tail_slope),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(wfi_core::Error::InvalidParameter(format!("tolerances.{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Resolve the seed: flag, then file, then environment, then the default.
pub fn resolve_seed(flag: Option<u64>, cfg: &RunConfig) -> std::result::Result<u64, String> {
    if let Some(s) = flag.or(cfg.seed) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| format!("{SEED_ENV}=`{v}` is not an unsigned integer")),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let text = RunConfig::default().to_toml();
        let parsed = RunConfig::from_toml(&text).unwrap();
        assert_eq!(parsed, RunConfig::default());
        assert_eq!(parsed.to_toml(), text);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        assert!(RunConfig::from_toml("[rate_study]\nreplicate = 3").is_err());
    }

    #[test]
    fn set_overrides_nested_fields() {
        let mut c = RunConfig::default();
        c.set("rate_study.replicates=60").unwrap();
        c.set("tolerances.quadrature.abs_tol=1e-9").unwrap();
        c.set("simulate_limit.law=l1_fast_maxA").unwrap();
        c.set("scenario.link={ kind = \"probit\" }").unwrap();
        assert_eq!(c.rate_study.replicates, 60);
        assert_eq!(c.tolerances.quadrature.abs_tol, 1e-9);
        assert_eq!(c.simulate_limit.law, LimitLaw::L1FastMaxA);
        assert_eq!(c.scenario.link, Link::Probit);
        assert!(c.set("rate_study.replicates=many").is_err());
        assert!(c.set("nonsense").is_err());
    }
}
