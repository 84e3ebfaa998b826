use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde_json::json;
use wfi_core::experiments::{
    hypothesis_curves, run_consistency_study, run_l1_centering, run_limit_comparison, run_lower_bound_audit,
    run_rate_study, run_tail_bound_probe, ErrorMetric,
};
use wfi_core::io::{
    config_hash, fmt_float, limit_meta, read_sample_csv, steps_meta, write_compare_csv, write_json, write_limit_csv,
    write_rate_csv, write_steps_csv, write_table, Manifest,
};
use wfi_core::limits::{chernoff_abs_mean, chernoff_cov_integral, mu_n, sigma_sq, simulate_limit, Estimate};
use wfi_core::{npmle_fit, Curve};

use crate::config::RunConfig;
use crate::svg;

/// Why a command stopped; each maps to an exit code.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Input(m) | Failure::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<wfi_core::Error> for Failure {
    fn from(e: wfi_core::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

pub type Outcome = Result<bool, Failure>;

/// Effective configuration, seed and output directory of one invocation.
pub struct Ctx {
    pub cfg: RunConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Ctx {
    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        fs::create_dir_all(&self.out)?;
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn write_svg(&self, name: &str, content: &str) -> Result<(), Failure> {
        fs::create_dir_all(&self.out)?;
        fs::write(self.out.join(name), content)?;
        Ok(())
    }

    fn manifest(&self, command: &str, checks: BTreeMap<String, bool>, details: serde_json::Value) -> Result<bool, Failure> {
        let mut effective = self.cfg.clone();
        effective.seed = Some(self.seed);
        let passed = checks.values().all(|&v| v);
        let m = Manifest {
            command: command.to_string(),
            config_hash: config_hash(&effective.to_toml()),
            seed: self.seed,
            passed,
            checks,
            details,
        };
        write_json(&m, self.create("manifest.json")?)?;
        Ok(passed)
    }
}

pub fn fit(input: &Path, prefix: &Path, out: &Path) -> Outcome {
    let file = File::open(input).map_err(|e| Failure::Input(format!("{}: {e}", input.display())))?;
    let sample = read_sample_csv(file)?;
    let step = npmle_fit(&sample);
    let base = if prefix.is_absolute() { prefix.to_path_buf() } else { out.join(prefix) };
    if let Some(dir) = base.parent() {
        fs::create_dir_all(dir)?;
    }
    let with_ext = |ext: &str| {
        let mut s = base.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    write_steps_csv(&step, BufWriter::new(File::create(with_ext(".steps.csv"))?))?;
    write_json(&steps_meta(&step), BufWriter::new(File::create(with_ext(".meta.json"))?))?;
    Ok(true)
}

pub fn simulate_limit_cmd(ctx: &Ctx) -> Outcome {
    let sec = &ctx.cfg.simulate_limit;
    if sec.draws == 0 {
        return Err(Failure::Input("simulate_limit.draws must be positive".into()));
    }
    let batch = simulate_limit(&sec.setup(&ctx.cfg.scenario), sec.draws, ctx.seed)?;
    write_limit_csv(&batch, ctx.create("limit.csv")?)?;
    write_json(&limit_meta(&batch), ctx.create("limit.json")?)?;
    Ok(true)
}

pub fn rate_study(ctx: &Ctx) -> Outcome {
    let cfg = ctx.cfg.rate_study(ctx.seed);
    cfg.validate()?;
    let res = run_rate_study(&cfg, &[ErrorMetric::Pointwise, ErrorMetric::L1])?;
    write_rate_csv(&res.records, ctx.create("rate.csv")?)?;
    let rows: Vec<Vec<String>> = res
        .fits
        .iter()
        .map(|f| {
            vec![
                fmt_float(f.gamma),
                metric_name(f.metric).into(),
                fmt_float(f.fit.slope),
                fmt_float(f.fit.se),
                fmt_float(f.target),
                fmt_float(f.tolerance),
                f.pass.to_string(),
            ]
        })
        .collect();
    write_table(&["gamma", "metric", "slope", "se", "target", "tolerance", "pass"], &rows, ctx.create("rate_fits.csv")?)?;
    let ns: Vec<f64> = cfg.n_list.iter().map(|&n| n as f64).collect();
    let plot_rows: Vec<_> = res
        .fits
        .iter()
        .map(|f| {
            (format!("{} gamma={}", metric_name(f.metric), f.gamma), ns.clone(), f.medians.clone(), f.fit.slope, f.fit.intercept)
        })
        .collect();
    ctx.write_svg("rate.svg", &svg::loglog_plot("Median error against n", &plot_rows))?;
    let checks = res
        .fits
        .iter()
        .map(|f| (format!("{}_gamma_{}", metric_name(f.metric), f.gamma), f.pass))
        .collect();
    let fits: Vec<_> = res
        .fits
        .iter()
        .map(|f| {
            json!({
                "gamma": f.gamma,
                "metric": metric_name(f.metric),
                "slope": f.fit.slope,
                "se": f.fit.se,
                "target_slope": f.target,
                "tolerance": f.tolerance,
            })
        })
        .collect();
    ctx.manifest("rate-study", checks, json!({ "fits": fits }))
}

fn metric_name(m: ErrorMetric) -> &'static str {
    match m {
        ErrorMetric::Pointwise => "pointwise",
        ErrorMetric::L1 => "l1",
    }
}

pub fn limit_compare(ctx: &Ctx) -> Outcome {
    let cfgs = ctx.cfg.comparisons(ctx.seed);
    if cfgs.is_empty() {
        return Err(Failure::Input("limit_compare.runs is empty".into()));
    }
    for c in &cfgs {
        c.validate()?;
    }
    let mut records = Vec::new();
    let mut details = Vec::new();
    let mut checks = BTreeMap::new();
    for c in &cfgs {
        let cmp = run_limit_comparison(c)?;
        let r = &cmp.record;
        let name = format!("{}_gamma_{}", r.kind.name(), r.gamma);
        let note = format!("KS = {:.4} (tolerance {})", r.ks, r.tolerance);
        let plot = svg::cdf_plot(
            &format!("{}: n = {}, gamma = {}", r.kind.name(), r.n, r.gamma),
            &[("finite sample", &cmp.finite), ("limit", &cmp.limit.draws)],
            &note,
        );
        ctx.write_svg(&format!("compare_{name}.svg"), &plot)?;
        checks.insert(name, r.pass);
        details.push(json!({
            "kind": r.kind.name(),
            "gamma": r.gamma,
            "n": r.n,
            "ks": r.ks,
            "tolerance": r.tolerance,
            "regime_index": r.regime_index,
            "law": cmp.limit.law_tag,
            "limit_params": cmp.limit.params,
        }));
        records.push(cmp.record);
    }
    write_compare_csv(&records, ctx.create("compare.csv")?)?;
    ctx.manifest("limit-compare", checks, json!({ "comparisons": details }))
}

pub fn lower_bound_audit(ctx: &Ctx) -> Outcome {
    let cfg = ctx.cfg.audit(ctx.seed);
    let res = run_lower_bound_audit(&cfg)?;
    let rows: Vec<Vec<String>> = res
        .records
        .iter()
        .map(|r| {
            vec![
                r.construction.clone(),
                r.n.to_string(),
                fmt_float(r.delta),
                fmt_float(r.c),
                fmt_float(r.n_d2),
                fmt_float(r.alpha),
                r.members.to_string(),
                fmt_float(r.separation_margin),
                r.pass.to_string(),
            ]
        })
        .collect();
    write_table(
        &["construction", "n", "delta", "c", "n_d2", "alpha", "members", "separation_margin", "pass"],
        &rows,
        ctx.create("audit.csv")?,
    )?;
    let curves: Vec<(String, Vec<(f64, f64)>)> = hypothesis_curves(&cfg)?
        .into_iter()
        .map(|(label, f)| {
            let t = cfg.law.half_width();
            let mut pts = vec![(-t, f.value(-t))];
            pts.extend(f.knots().iter().zip(f.values()).map(|(x, v)| (*x, *v)).filter(|(x, _)| x.abs() < t));
            pts.push((t, f.value(t)));
            (label, pts)
        })
        .collect();
    let note = format!("slopes equal delta = {} or delta/2", cfg.delta_slow);
    ctx.write_svg("hypotheses.svg", &svg::curves_plot("Lower-bound hypotheses", &curves, &note))?;
    let checks = res
        .records
        .iter()
        .map(|r| (format!("{}_n_{}", r.construction, r.n), r.pass))
        .collect();
    let details: Vec<_> = res
        .records
        .iter()
        .map(|r| json!({ "construction": r.construction, "n": r.n, "alpha": r.alpha, "inequality": r.inequality }))
        .collect();
    ctx.manifest("lower-bound-audit", checks, json!({ "records": details }))
}

pub fn constants(ctx: &Ctx) -> Outcome {
    let k = &ctx.cfg.constants;
    let q = ctx.cfg.tolerances.quadrature;
    let scn = ctx.cfg.scenario.with_exponent(k.gamma);
    scn.validate()?;
    k.grid.validate()?;
    if k.n == 0 {
        return Err(Failure::Input("constants.n must be positive".into()));
    }
    let abs_mean = chernoff_abs_mean(&k.grid, k.abs_mean_draws, ctx.seed)?;
    let cov = chernoff_cov_integral(&k.grid, k.a_max, k.a_step, k.cov_paths, ctx.seed)?;
    let mu = mu_n(&scn, k.n, abs_mean.estimate, &q)?;
    let mu_per_unit = mu / abs_mean.estimate;
    let s2 = sigma_sq(&scn.link, &scn.law, cov.estimate, &q)?;
    let s2_per_unit = if cov.estimate != 0.0 { s2 / cov.estimate } else { sigma_sq(&scn.link, &scn.law, 1.0, &q)? };
    let mut rows = vec![
        ("abs_mean", abs_mean),
        ("cov_integral", Estimate { estimate: cov.estimate, se: cov.se }),
        ("mu_n", Estimate { estimate: mu, se: mu_per_unit * abs_mean.se }),
        ("sigma_sq", Estimate { estimate: s2, se: (s2_per_unit * cov.se).abs() }),
    ];
    let mut checks = BTreeMap::new();
    checks.insert("cov_tail_negligible".to_string(), cov.tail_negligible);
    let mut centering = serde_json::Value::Null;
    if k.centering_replicates > 0 {
        let r = run_l1_centering(&scn, k.n, k.centering_replicates, abs_mean, ctx.seed, &q, ctx.cfg.tolerances.centering)?;
        rows.push(("scaled_l1_mean", r.scaled_l1));
        checks.insert("centering".into(), r.pass);
        centering = json!({ "relative_gap": r.relative_gap, "tolerance": r.tolerance, "mu_n": r.mu_n });
    }
    let table: Vec<Vec<String>> =
        rows.iter().map(|(name, e)| vec![name.to_string(), fmt_float(e.estimate), fmt_float(e.se)]).collect();
    write_table(&["quantity", "estimate", "se"], &table, ctx.create("constants.csv")?)?;
    let curve: Vec<Vec<String>> = cov
        .a_values
        .iter()
        .zip(&cov.covariances)
        .zip(&cov.covariance_se)
        .map(|((a, c), s)| vec![fmt_float(*a), fmt_float(*c), fmt_float(*s)])
        .collect();
    write_table(&["a", "covariance", "se"], &curve, ctx.create("cov_curve.csv")?)?;
    ctx.manifest(
        "constants",
        checks,
        json!({ "n": k.n, "gamma": k.gamma, "cov_tail_max_z": cov.tail_max_z, "centering": centering }),
    )
}

pub fn consistency(ctx: &Ctx) -> Outcome {
    let cfg = ctx.cfg.consistency(ctx.seed);
    let res = run_consistency_study(&cfg)?;
    let mut rows = Vec::new();
    for r in &res.rows {
        for (n, m) in res.n_list.iter().zip(&r.medians) {
            rows.push(vec![r.metric.clone(), fmt_float(r.gamma), n.to_string(), fmt_float(*m)]);
        }
    }
    write_table(&["metric", "gamma", "n", "median"], &rows, ctx.create("consistency.csv")?)?;
    let ns: Vec<f64> = res.n_list.iter().map(|&n| n as f64).collect();
    let plot_rows: Vec<_> = res
        .rows
        .iter()
        .filter_map(|r| {
            let fit = wfi_core::experiments::fit_loglog_slope(&ns, &r.medians).ok()?;
            Some((format!("{} gamma={}", r.metric, r.gamma), ns.clone(), r.medians.clone(), fit.slope, fit.intercept))
        })
        .collect();
    ctx.write_svg("consistency.svg", &svg::loglog_plot("Consistency medians", &plot_rows))?;
    let checks = res.rows.iter().map(|r| (format!("{}_gamma_{}", r.metric, r.gamma), r.pass)).collect();
    let details: Vec<_> =
        res.rows.iter().map(|r| json!({ "metric": r.metric, "gamma": r.gamma, "statistic": r.statistic })).collect();
    ctx.manifest("consistency", checks, json!({ "rows": details, "hellinger_ratio": cfg.hellinger_ratio }))
}

pub fn tail_probe(ctx: &Ctx) -> Outcome {
    let cfg = ctx.cfg.tail_probe(ctx.seed);
    let res = run_tail_bound_probe(&cfg)?;
    let rows: Vec<Vec<String>> = res
        .rows
        .iter()
        .map(|r| vec![r.n.to_string(), fmt_float(r.x), fmt_float(r.index), fmt_float(r.frequency), r.vacuous.to_string()])
        .collect();
    write_table(&["n", "x", "index", "frequency", "vacuous"], &rows, ctx.create("tail.csv")?)?;
    let ns: Vec<f64> = cfg.n_list.iter().map(|&n| n as f64).collect();
    let plot = svg::loglog_plot(
        "Median inverse-process deviation",
        &[("median deviation".into(), ns, res.medians.clone(), res.fit.slope, res.fit.intercept)],
    );
    ctx.write_svg("tail.svg", &plot)?;
    let mut checks = BTreeMap::new();
    checks.insert("slope".to_string(), res.slope_pass);
    ctx.manifest(
        "tail-probe",
        checks,
        json!({
            "slope": res.fit.slope,
            "se": res.fit.se,
            "target_slope": res.target,
            "monotone_frequencies": res.monotone,
            "medians": res.medians,
        }),
    )
}
