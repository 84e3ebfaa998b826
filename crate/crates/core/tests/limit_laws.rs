//! Distributional checks of the limit samplers and the studies built on them.

use wfi_core::experiments::{run_pointwise_rate_study, StudyConfig};
use wfi_core::limits::{mean_se, simulate_limit, LimitLaw, LimitSetup, PathGrid};
use wfi_core::metrics::ks_two_sample;
use wfi_core::{FeatureLaw, Link, Scenario};

fn setup(law_tag: LimitLaw, link: Link, grid: PathGrid) -> LimitSetup {
    LimitSetup { law_tag, link, law: FeatureLaw::uniform(1.0), x0: 0.0, c: 1.0, grid }
}

#[test]
fn beta_one_slow_limit_is_scaled_chernoff() {
    let g = PathGrid::chernoff_default();
    let slow = simulate_limit(&setup(LimitLaw::SlowFbeta, Link::Logistic, g), 50_000, 11).unwrap();
    let chern = simulate_limit(&setup(LimitLaw::ScaledChernoff, Link::Logistic, g), 50_000, 12).unwrap();
    let ks = ks_two_sample(&slow.draws, &chern.draws).unwrap();
    assert!(ks <= 0.02, "KS = {ks}");
}

/// Mean and sd agree within 3 combined standard errors after `h → h/2`
/// (and `S → 2S` on two-sided grids).
fn refinement_is_stable(tag: LimitLaw, link: Link) {
    let coarse = tag.default_grid();
    let fine = if coarse.two_sided {
        PathGrid::new(2.0 * coarse.half_width, coarse.step / 2.0, true).unwrap()
    } else {
        PathGrid::new(1.0, coarse.step / 2.0, false).unwrap()
    };
    let m = 4000;
    let a = simulate_limit(&setup(tag, link, coarse), m, 21).unwrap().draws;
    let b = simulate_limit(&setup(tag, link, fine), m, 22).unwrap().draws;
    let (ea, eb) = (mean_se(&a), mean_se(&b));
    let mean_gap = (ea.estimate - eb.estimate).abs();
    let mean_se_comb = ea.se.hypot(eb.se);
    assert!(mean_gap <= 3.0 * mean_se_comb, "{tag:?}: means {} vs {}", ea.estimate, eb.estimate);
    let sd = |x: &[f64], e: f64| (x.iter().map(|v| (v - e).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt();
    let (sa, sb) = (sd(&a, ea.estimate), sd(&b, eb.estimate));
    // se of a sample sd, using the fourth moment
    let sd_se = |x: &[f64], e: f64, s: f64| {
        let m4 = x.iter().map(|v| (v - e).powi(4)).sum::<f64>() / x.len() as f64;
        ((m4 - s.powi(4)) / (4.0 * s * s * x.len() as f64)).sqrt()
    };
    let sd_comb = sd_se(&a, ea.estimate, sa).hypot(sd_se(&b, eb.estimate, sb));
    assert!((sa - sb).abs() <= 3.0 * sd_comb, "{tag:?}: sds {sa} vs {sb}");
}

#[test]
fn chernoff_grid_refinement() {
    refinement_is_stable(LimitLaw::ScaledChernoff, Link::Logistic);
}

#[test]
fn slow_fbeta_grid_refinement() {
    refinement_is_stable(LimitLaw::SlowFbeta, Link::BetaFlat { beta: 3 });
}

#[test]
fn boundary_grid_refinement() {
    refinement_is_stable(LimitLaw::BoundaryGbc, Link::Logistic);
}

#[test]
fn fast_slope_grid_refinement() {
    refinement_is_stable(LimitLaw::FastWSlope, Link::Logistic);
}

#[test]
fn l1_fast_grid_refinement() {
    refinement_is_stable(LimitLaw::L1FastMaxA, Link::Logistic);
}

#[test]
fn l1_fast_draws_are_nonnegative() {
    let g = PathGrid::unit_default();
    let b = simulate_limit(&setup(LimitLaw::L1FastMaxA, Link::Logistic, g), 500, 3).unwrap();
    assert!(b.draws.iter().all(|&d| d >= 0.0));
}

#[test]
fn replicate_halves_give_consistent_slopes() {
    let base = StudyConfig {
        scenario: Scenario::default(),
        gammas: vec![0.0],
        n_list: (9..=13).map(|k| 1u64 << k).collect(),
        replicates: 200,
        ..StudyConfig::default()
    };
    let a = run_pointwise_rate_study(&StudyConfig { seed: 1, ..base.clone() }).unwrap();
    let b = run_pointwise_rate_study(&StudyConfig { seed: 2, ..base }).unwrap();
    let (fa, fb) = (&a.fits[0].fit, &b.fits[0].fit);
    assert!((fa.slope - fb.slope).abs() <= 2.0 * fa.se.hypot(fb.se), "{} vs {}", fa.slope, fb.slope);
}
