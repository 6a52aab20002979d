use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::*;
use crate::grid::{Cube, Grid};

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn empty_selection_passes_with_no_checks() {
    let r = run_suite(&[], DEFAULT_SEED).unwrap();
    assert!(r.checks.is_empty());
    assert!(r.passed());
    assert_eq!(r.exit_code(), 0);
}

#[test]
fn selection_follows_registry_order_and_collapses_duplicates() {
    let got = resolve_selection(&names(&["ex38", "grid", "ex38", "kernels"])).unwrap();
    assert_eq!(got, vec!["grid", "kernels", "ex38"]);
    assert_eq!(resolve_selection(&names(&["all"])).unwrap(), registry());
    assert_eq!(resolve_selection(&names(&["weights", "all"])).unwrap().len(), 9);
}

#[test]
fn unknown_names_are_configuration_errors() {
    assert!(matches!(resolve_selection(&names(&["ex39"])), Err(Error::Config(_))));
    assert!(matches!(run_scenario("grid", &RunParams::default()), Err(Error::Config(_))));
}

#[test]
fn permuted_selection_gives_the_same_report() {
    let a = run_suite(&names(&["kernels", "grid"]), 3).unwrap();
    let b = run_suite(&names(&["grid", "kernels"]), 3).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn report_uses_the_documented_schema() {
    let r = run_suite(&names(&["grid"]), DEFAULT_SEED).unwrap();
    let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
    assert_eq!(keys.len(), 5);
    for k in ["scenario", "params", "checks", "environment", "verdict"] {
        assert!(v.get(k).is_some(), "{k}");
    }
    for k in ["grid_h", "t_min", "t_max", "per_octave", "seed", "runtime_ms"] {
        assert!(v["environment"].get(k).is_some(), "{k}");
    }
    let c = &v["checks"][0];
    assert_eq!(c.as_object().unwrap().len(), 7);
    for k in ["id", "anchor", "computed", "reference", "provenance", "tolerance", "pass"] {
        assert!(c.get(k).is_some(), "{k}");
    }
    assert!(["PAPER", "TRIVIAL", "DERIVED"].contains(&c["provenance"].as_str().unwrap()));
    assert_eq!(v["verdict"], "pass");
    let back: ExperimentReport = serde_json::from_value(v).unwrap();
    assert_eq!(back, r);
}

#[test]
fn verdict_is_the_conjunction_of_checks() {
    let env = Environment { grid_h: None, t_min: None, t_max: None, per_octave: None, seed: 0, runtime_ms: None };
    let ok = Check::new("a", "x", Provenance::Trivial).computed(1.0).reference(2.0).at_most();
    let bad = Check::new("b", "x", Provenance::Derived).computed(1.0).reference(1.5).tolerance(0.1).relative();
    assert!(ok.pass && !bad.pass);
    let r = ExperimentReport::new("t", serde_json::json!({}), vec![ok.clone(), bad], env.clone());
    assert_eq!(r.verdict, Verdict::Fail);
    assert_eq!(r.exit_code(), 1);
    assert!(ExperimentReport::new("t", serde_json::json!({}), vec![ok], env).passed());
}

#[test]
fn check_builders_reject_non_finite_values() {
    let c = Check::new("a", "x", Provenance::Trivial).computed(f64::NAN).reference(0.0).tolerance(1.0).absolute();
    assert!(!c.pass);
    let c = Check::new("a", "x", Provenance::Trivial).computed(f64::INFINITY).reference(0.0).at_least();
    assert!(!c.pass);
    let c = Check::new("a", "x", Provenance::Trivial).pass_if(true);
    assert!(!c.pass);
}

#[test]
fn named_streams_are_reproducible_and_distinct() {
    use rand::Rng;
    let draw = |seed, name| scenario_rng(seed, name).random::<u64>();
    assert_eq!(draw(7, "ex37"), draw(7, "ex37"));
    assert_ne!(draw(7, "ex37"), draw(7, "ex38"));
    assert_ne!(draw(7, "ex37"), draw(8, "ex37"));
}

#[test]
fn band_limited_fixture_has_its_energy_in_the_band() {
    let g = Grid::interval(-128.0, 128.0, 1.0 / 8.0).unwrap();
    let mut rng = scenario_rng(1, "band");
    let f = band_limited(&g, &mut rng, 1.0, 4.0, 3).unwrap();
    let n = g.len();
    let mut buf: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let (mut inside, mut total) = (0.0, 0.0);
    for (k, z) in buf.iter().enumerate() {
        let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let xi = (2.0 * std::f64::consts::PI * kk / (n as f64 * g.h())).abs();
        total += z.norm_sqr();
        if (0.9..=4.1).contains(&xi) {
            inside += z.norm_sqr();
        }
    }
    assert!(total > 0.0);
    assert!(1.0 - inside / total < 1e-6, "{}", 1.0 - inside / total);
}

#[test]
fn random_box_sets_stay_inside_the_root() {
    let root = Cube::new(vec![-2.0, 0.0], 4.0).unwrap();
    let mut rng = scenario_rng(5, "boxes");
    for _ in 0..50 {
        let e = random_box_set(&mut rng, &root, 4, 16).unwrap();
        assert!(e.measure() > 0.0 && e.measure() <= 16.0 + 1e-12);
    }
}

#[test]
fn ex38_closed_form_matches_quoted_values() {
    for (x, v) in [(-0.5, 0.0681), (-0.25, 0.3550), (-0.1, 0.9976)] {
        assert!((ex38_closed_form(x) - v).abs() < 1e-4, "{x}");
    }
}

#[test]
fn ex37_rejects_out_of_range_parameters() {
    let p = Ex37Params { alpha: 3.5, ..Ex37Params::default() };
    assert!(matches!(p.validate(), Err(Error::Parameter(_))));
    let p = Ex37Params { q: 0.5, ..Ex37Params::default() };
    assert!(matches!(p.validate(), Err(Error::Parameter(_))));
}

#[test]
fn oversized_runs_are_capacity_errors() {
    let r = RunParams { grid_h: Some(1e-7), ..RunParams::default() };
    let e = run_scenario("ex38", &r).unwrap_err();
    assert_eq!(e.exit_code(), 3);
}
