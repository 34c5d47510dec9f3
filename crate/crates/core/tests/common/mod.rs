//! Randomized property suites shared by the `properties` tests and the
//! acceptance run. Each suite draws 1000 cases.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use aoi_core::analysis::{cond_avg_aoi, cond_peak_aoi};
use aoi_core::geometry::sample_bipolar;
use aoi_core::meta::{uniform_grid, MetaDistribution, TabulatedCdf};
use aoi_core::policy::{eta_residual, solve_eta};
use aoi_core::sim::{run, ConstantAccess, Engine, SimConfig};
use aoi_core::{Region, SystemParams};

pub const CASES: u32 = 1000;

type Outcome = std::result::Result<(), TestCaseError>;

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    })
}

fn check<S, F>(strategy: S, test: F) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
    F: Fn(S::Value) -> Outcome,
{
    runner().run(&strategy, test).map_err(|e| e.to_string())
}

fn terms() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((1e-3f64..50.0, 0.0f64..=1.0), 0..12)
}

pub fn beta_cdf_is_monotone() -> Result<(), String> {
    check((0.05f64..60.0, 0.005f64..20.0), |(a, b)| {
        let d = MetaDistribution::Beta { a, b };
        let mut last = 0.0;
        for u in uniform_grid(200) {
            let f = d.cdf(u);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!(f >= last - 1e-15);
            last = f;
        }
        Ok(())
    })
}

pub fn tabulated_cdf_is_monotone() -> Result<(), String> {
    check(prop::collection::vec(-0.2f64..1.2, 2..40), |raw| {
        let n = raw.len();
        let u: Vec<f64> = (1..=n).map(|k| k as f64 / (n + 1) as f64).collect();
        let d = MetaDistribution::Tabulated {
            table: TabulatedCdf::new(u, raw).unwrap(),
        };
        let mut last = 0.0;
        for u in uniform_grid(300) {
            let f = d.cdf(u);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!(f >= last);
            last = f;
        }
        Ok(())
    })
}

pub fn peak_age_dominates_average() -> Result<(), String> {
    check((0.01f64..=1.0, 0.01f64..=1.0, 1e-4f64..=1.0), |(xi, p, mu)| {
        let avg = cond_avg_aoi(xi, p, mu).unwrap();
        let peak = cond_peak_aoi(xi, p, mu).unwrap();
        prop_assert!(peak >= avg - 1e-12 * avg);
        Ok(())
    })
}

pub fn eta_residual_and_range() -> Result<(), String> {
    check((terms(), 0.0f64..5.0), |(t, tail)| {
        let eta = solve_eta(&t, tail).unwrap();
        prop_assert!(eta > 0.0 && eta <= 1.0);
        if eta < 1.0 {
            prop_assert!(eta_residual(eta, &t, tail).abs() < 1e-9);
        }
        Ok(())
    })
}

pub fn eta_decreases_with_closer_neighbors() -> Result<(), String> {
    let s = (terms(), 0.0f64..5.0, any::<prop::sample::Index>(), 0.05f64..0.95);
    check(s, |(t, tail, pick, shrink)| {
        prop_assume!(!t.is_empty());
        let eta = solve_eta(&t, tail).unwrap();
        let mut closer = t.clone();
        let k = pick.index(t.len());
        closer[k].0 *= shrink;
        let eta2 = solve_eta(&closer, tail).unwrap();
        prop_assert!(eta2 <= eta);
        if eta < 1.0 && closer[k].1 > 0.0 {
            prop_assert!(eta2 < eta);
        }
        Ok(())
    })
}

pub fn eta_decreases_with_added_neighbor() -> Result<(), String> {
    check((terms(), 0.0f64..5.0, 1e-3f64..50.0, 0.0f64..=1.0), |(t, tail, d, a)| {
        let eta = solve_eta(&t, tail).unwrap();
        let mut more = t.clone();
        more.push((d, a));
        let eta2 = solve_eta(&more, tail).unwrap();
        prop_assert!(eta2 <= eta);
        if eta < 1.0 {
            prop_assert!(eta2 < eta);
        }
        Ok(())
    })
}

pub fn age_recursion_holds_over_full_runs() -> Result<(), String> {
    let engines = prop_oneof![Just(Engine::Thinned), Just(Engine::Explicit), Just(Engine::Frozen)];
    let s = (0.005f64..0.2, 0.05f64..=1.0, 0.05f64..=1.0, any::<u64>(), engines);
    check(s, |(lambda, xi, p, seed, engine)| {
        let params = SystemParams {
            lambda,
            xi,
            p,
            r: 1.0,
            ..SystemParams::default()
        };
        let topo = sample_bipolar(&params, &Region::torus(20.0), seed);
        prop_assume!(!topo.is_empty());
        // The checked config asserts the age recursion slot by slot.
        let cfg = SimConfig::new(300, seed).with_engine(engine).checked();
        let m = run(&topo, &params, &cfg, &mut ConstantAccess(p)).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for l in &m.links {
            prop_assert!(l.avg_aoi >= 1.0);
            prop_assert!(l.emp_busy >= 0.0 && l.emp_busy <= 1.0);
        }
        Ok(())
    })
}

pub fn same_seed_same_metrics() -> Result<(), String> {
    check((0.005f64..0.1, 0.05f64..=1.0, any::<u64>()), |(lambda, xi, seed)| {
        let params = SystemParams {
            lambda,
            xi,
            ..SystemParams::default()
        };
        let region = Region::torus(25.0);
        let a = sample_bipolar(&params, &region, seed);
        let b = sample_bipolar(&params, &region, seed);
        prop_assert_eq!(&a, &b);
        prop_assume!(!a.is_empty());
        let cfg = SimConfig::new(200, seed);
        let m1 = run(&a, &params, &cfg, &mut ConstantAccess(1.0)).unwrap();
        let m2 = run(&b, &params, &cfg, &mut ConstantAccess(1.0)).unwrap();
        prop_assert_eq!(m1, m2);
        Ok(())
    })
}

pub type Suite = (&'static str, fn() -> Result<(), String>);

pub const SUITES: [Suite; 8] = [
    ("beta_cdf_is_monotone", beta_cdf_is_monotone),
    ("tabulated_cdf_is_monotone", tabulated_cdf_is_monotone),
    ("peak_age_dominates_average", peak_age_dominates_average),
    ("eta_residual_and_range", eta_residual_and_range),
    ("eta_decreases_with_closer_neighbors", eta_decreases_with_closer_neighbors),
    ("eta_decreases_with_added_neighbor", eta_decreases_with_added_neighbor),
    ("age_recursion_holds_over_full_runs", age_recursion_holds_over_full_runs),
    ("same_seed_same_metrics", same_seed_same_metrics),
];
