//! Acceptance run. Prints one PASS/FAIL line per criterion and exits with a
//! failure status if any criterion fails.
//!
//! Positional numeric arguments select a subset, e.g.
//! `cargo test --test acceptance -- 1 4 6`. Sweep outputs are written under
//! `$CARGO_TARGET_TMPDIR/acceptance/`.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;

use aoi_core::analysis::{bound_z, buffer_nonempty, cond_avg_aoi, cond_peak_aoi, lambert_w0, regime_results};
use aoi_core::experiments::{preset, run_scenario, Mode, Scenario, ScenarioOutput, SummaryRow};
use aoi_core::geometry::BipolarTopology;
use aoi_core::params::{c_alpha_quadrature, db_to_linear};
use aoi_core::rng::stream_rng;
use aoi_core::sim::{queue_oracle, run, ConstantAccess, SimConfig};
use aoi_core::{Region, SystemParams};

// Criterion 1
const QUEUE_SLOTS: u64 = 1_000_000;
const QUEUE_REL_TOL: f64 = 0.01;
const QUEUE_TIME_LIMIT: Duration = Duration::from_secs(60);
// Criterion 2
const FIG4_CDF_SUP: f64 = 0.05;
const FIG4_EXACT_SUP: f64 = 0.02;
const FIG4_MIN_TOPOLOGIES: usize = 200;
const FIG4_TIME_LIMIT: Duration = Duration::from_secs(600);
// Criterion 3
const FIG5_REL_TOL: f64 = 0.05;
const FIG5_XI: [f64; 13] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95, 1.0];
const FIG5_REPLICATIONS: usize = 6;
const FIG5_SLOTS: u64 = 10_000;
// Criterion 4
const NOISE_REL_TOL: f64 = 0.02;
const NOISE_SLOTS: u64 = 2_000_000;
const NOISE_PAIRS: [(f64, f64); 3] = [(0.2, 1.0), (0.5, 0.6), (0.8, 0.3)];
const NOISE_LINK_R: f64 = 550.0;
// Criterion 5
const FIG8_GAP: f64 = 0.05;
const FIG8_RESIDUAL: f64 = 1e-10;
const FIG8_XI: [f64; 12] = [0.1, 0.15, 0.25, 0.3, 0.35, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
const FIG8_REPLICATIONS: usize = 3;
const FIG8_SLOTS: u64 = 10_000;
// Criterion 6
const REGIME_SETS: usize = 20;
const REGIME_P_STEP: f64 = 1e-3;
const LAMBERT_RESIDUAL: f64 = 1e-12;
const C4_TOL: f64 = 1e-12;
// Criterion 7
const POLICY_TOPOLOGIES: usize = 20;
const POLICY_SLOTS: u64 = 5_000;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

fn out_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name)
}

fn sweep(s: &Scenario) -> Result<ScenarioOutput, String> {
    let dir = out_dir(&s.name);
    run_scenario(s, Some(&dir), 0).map_err(|e| format!("{} failed: {e}", s.name))
}

fn max_or_zero<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

fn criterion_1() -> Result<Verdict, String> {
    let start = Instant::now();
    let xis = [0.1, 0.3, 0.5, 0.7, 0.9];
    let ss = [0.2, 0.45, 0.7, 0.95];
    let mut worst: (f64, String) = (0.0, String::new());
    let points: Vec<(f64, f64)> = xis.iter().flat_map(|&x| ss.iter().map(move |&s| (x, s))).collect();
    for (k, &(xi, s)) in points.iter().enumerate() {
        let o = queue_oracle(xi, s, QUEUE_SLOTS, 100 + k as u64).map_err(|e| e.to_string())?;
        let checks = [
            ("average", o.avg_aoi, cond_avg_aoi(xi, 1.0, s).map_err(|e| e.to_string())?),
            ("peak", o.peak_aoi, cond_peak_aoi(xi, 1.0, s).map_err(|e| e.to_string())?),
            ("busy", o.busy_fraction, buffer_nonempty(xi, 1.0, s)),
        ];
        for (name, sim, exact) in checks {
            let rel = (sim - exact).abs() / exact;
            if rel > worst.0 {
                worst = (rel, format!("{name} at xi={xi}, s={s}"));
            }
        }
    }
    let elapsed = start.elapsed();
    Ok(Verdict::new(
        worst.0 <= QUEUE_REL_TOL && elapsed < QUEUE_TIME_LIMIT,
        format!(
            "queue formulas on 20 points x {QUEUE_SLOTS} slots: max rel err {:.3}% ({}), tol {}%; {:.1} s (limit {} s)",
            100.0 * worst.0,
            worst.1,
            100.0 * QUEUE_REL_TOL,
            elapsed.as_secs_f64(),
            QUEUE_TIME_LIMIT.as_secs()
        ),
    ))
}

fn criterion_2() -> Result<Verdict, String> {
    let start = Instant::now();
    let s = preset("fig4").map_err(|e| e.to_string())?;
    if s.run.replications < FIG4_MIN_TOPOLOGIES || s.run.region_side != 200.0 {
        return Err("fig4 preset no longer matches the acceptance setting".into());
    }
    let out = sweep(&s)?;
    let elapsed = start.elapsed();
    let rows = out.rows();
    let emp = max_or_zero(rows.iter().map(|r| r.sup_beta_empirical));
    let exact = max_or_zero(rows.iter().map(|r| r.sup_exact_beta));
    let complete = rows.iter().all(|r| r.sup_beta_empirical.is_finite() && r.sup_exact_beta.is_finite());
    let per_point: Vec<String> = rows
        .iter()
        .map(|r| format!("xi={}: {:.4}/{:.4}", r.xi, r.sup_beta_empirical, r.sup_exact_beta))
        .collect();
    Ok(Verdict::new(
        complete && emp <= FIG4_CDF_SUP && exact <= FIG4_EXACT_SUP && elapsed <= FIG4_TIME_LIMIT,
        format!(
            "meta distribution, {} topologies x {} slots: sup(beta, empirical) {emp:.4} (tol {FIG4_CDF_SUP}), \
             sup(exact, beta) {exact:.4} (tol {FIG4_EXACT_SUP}) [{}]; {:.0} s (limit {} s)",
            s.run.replications,
            s.run.slots,
            per_point.join(", "),
            elapsed.as_secs_f64(),
            FIG4_TIME_LIMIT.as_secs()
        ),
    ))
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Index of the minimum lies strictly inside the sequence.
fn interior_min(v: &[f64]) -> bool {
    let Some((k, _)) = v.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)) else {
        return false;
    };
    k > 0 && k + 1 < v.len()
}

fn criterion_3() -> Result<Verdict, String> {
    let mut s = preset("fig5").map_err(|e| e.to_string())?;
    s.name = "fig5".into();
    s.grid.xi = FIG5_XI.to_vec();
    s.run.replications = FIG5_REPLICATIONS;
    s.run.slots = FIG5_SLOTS;
    let out = sweep(&s)?;
    let rows = out.rows();
    let finite: Vec<&SummaryRow> = rows.iter().filter(|r| r.ana_divergent == 0.0).collect();
    let failing: Vec<&&SummaryRow> = finite.iter().filter(|r| !(r.rel_err_avg_aoi <= FIG5_REL_TOL)).collect();
    let worst = finite
        .iter()
        .max_by(|a, b| a.rel_err_avg_aoi.total_cmp(&b.rel_err_avg_aoi))
        .ok_or("no finite grid points")?;
    let curve = |lambda: f64, col: fn(&SummaryRow) -> f64| -> Vec<f64> {
        finite.iter().filter(|r| r.lambda == lambda).map(|r| col(r)).collect()
    };
    let ana = |r: &SummaryRow| r.ana_avg_aoi;
    let sim = |r: &SummaryRow| r.sim_avg_aoi;
    let mono_ana = strictly_decreasing(&curve(0.01, ana));
    let mono_sim = strictly_decreasing(&curve(0.01, sim));
    let min_ana = interior_min(&curve(0.05, ana));
    let min_sim = interior_min(&curve(0.05, sim));
    let fails: Vec<String> = failing
        .iter()
        .map(|r| format!("({}, {}): {:.1}%", r.lambda, r.xi, 100.0 * r.rel_err_avg_aoi))
        .collect();
    Ok(Verdict::new(
        failing.is_empty() && mono_ana && mono_sim && min_ana && min_sim,
        format!(
            "network average age, {} reps x {} slots: {}/{} non-divergent points within {}% \
             (worst {:.1}% at lambda={}, xi={}); outside: [{}]; monotone at lambda=0.01 analysis {mono_ana} / sim {mono_sim}; \
             interior minimum at lambda=0.05 analysis {min_ana} / sim {min_sim}",
            s.run.replications,
            s.run.slots,
            finite.len() - failing.len(),
            finite.len(),
            100.0 * FIG5_REL_TOL,
            100.0 * worst.rel_err_avg_aoi,
            worst.lambda,
            worst.xi,
            fails.join(", ")
        ),
    ))
}

fn criterion_4() -> Result<Verdict, String> {
    let region = Region::torus(4.0 * NOISE_LINK_R);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (k, &(xi, p)) in NOISE_PAIRS.iter().enumerate() {
        let params = SystemParams::default().with_r(NOISE_LINK_R).with_xi(xi).with_p(p).with_lambda(0.0);
        let derived = params.derive().map_err(|e| e.to_string())?;
        let closed = regime_results(&params, &derived).map_err(|e| e.to_string())?.noise_limited_aoi;
        let topo = BipolarTopology::single_link(NOISE_LINK_R, region);
        let cfg = SimConfig::new(NOISE_SLOTS, 40 + k as u64);
        let m = run(&topo, &params, &cfg, &mut ConstantAccess(p)).map_err(|e| e.to_string())?;
        let sim = m.links[0].avg_aoi;
        let rel = (sim - closed).abs() / closed;
        worst = worst.max(rel);
        parts.push(format!("(xi={xi}, p={p}, mu={:.3}): {sim:.4} vs {closed:.4}", derived.mu_max));
    }
    Ok(Verdict::new(
        worst <= NOISE_REL_TOL,
        format!(
            "noise-limited single link, {NOISE_SLOTS} slots: max rel err {:.3}% (tol {}%) [{}]",
            100.0 * worst,
            100.0 * NOISE_REL_TOL,
            parts.join("; ")
        ),
    ))
}

fn criterion_5() -> Result<Verdict, String> {
    let mut s = preset("fig8").map_err(|e| e.to_string())?;
    s.grid.xi = FIG8_XI.to_vec();
    s.run.replications = FIG8_REPLICATIONS;
    s.run.slots = FIG8_SLOTS;
    let out = sweep(&s)?;
    let rows = out.rows();
    let gap = max_or_zero(rows.iter().map(|r| r.gap_peak_outage));
    let complete = rows.iter().all(|r| r.gap_peak_outage.is_finite());
    let residual = max_or_zero(rows.iter().map(|r| r.ana_peak_residual).filter(|v| v.is_finite()));
    let mut shape = Vec::new();
    let mut interior = true;
    for r in [0.5, 0.7, 1.0] {
        let pick = |col: fn(&SummaryRow) -> f64| -> Vec<f64> { rows.iter().filter(|x| x.r == r).map(col).collect() };
        let ana = interior_min(&pick(|x| x.ana_peak_outage));
        let sim = interior_min(&pick(|x| x.sim_peak_outage));
        let worst = max_or_zero(rows.iter().filter(|x| x.r == r).map(|x| x.gap_peak_outage));
        interior &= ana && sim;
        shape.push(format!("r={r}: gap {worst:.4}, interior minimum analysis {ana} / sim {sim}"));
    }
    Ok(Verdict::new(
        complete && gap <= FIG8_GAP && interior && residual < FIG8_RESIDUAL,
        format!(
            "peak outage, A={}, {} reps x {} slots: max gap {gap:.4} (tol {FIG8_GAP}); max root residual {residual:.1e} \
             (tol {FIG8_RESIDUAL:.0e}) [{}]",
            s.a_threshold,
            s.run.replications,
            s.run.slots,
            shape.join("; ")
        ),
    ))
}

fn criterion_6() -> Result<Verdict, String> {
    let mut rng = stream_rng(6, 0);
    let mut worst_p = 0.0f64;
    let mut worst_w = 0.0f64;
    for _ in 0..REGIME_SETS {
        let params = SystemParams {
            lambda: rng.gen_range(0.005..0.2),
            r: rng.gen_range(0.3..2.0),
            alpha: rng.gen_range(3.0..5.0),
            theta: db_to_linear(rng.gen_range(-5.0..5.0)),
            xi: rng.gen_range(0.05..=1.0),
            ..SystemParams::default()
        };
        let derived = params.derive().map_err(|e| e.to_string())?;
        let reg = regime_results(&params, &derived).map_err(|e| e.to_string())?;
        let n = (1.0 / REGIME_P_STEP).round() as usize;
        let argmin = (1..=n)
            .map(|k| k as f64 * REGIME_P_STEP)
            .min_by(|a, b| bound_z(&params, &derived, params.xi, *a).total_cmp(&bound_z(&params, &derived, params.xi, *b)))
            .ok_or("empty p grid")?;
        worst_p = worst_p.max((argmin - reg.p_star).abs());
        let (_, res) = lambert_w0(params.p).map_err(|e| e.to_string())?;
        worst_w = worst_w.max(res).max(reg.lambert_residual);
    }
    let c4 = (c_alpha_quadrature(4.0).map_err(|e| e.to_string())? - std::f64::consts::FRAC_PI_2).abs();
    Ok(Verdict::new(
        worst_p <= REGIME_P_STEP && worst_w < LAMBERT_RESIDUAL && c4 < C4_TOL,
        format!(
            "regime formulas on {REGIME_SETS} sets: max |p* - grid argmin| {worst_p:.1e} (grid step {REGIME_P_STEP:.0e}); \
             max Lambert residual {worst_w:.1e} (tol {LAMBERT_RESIDUAL:.0e}); |C(4) - pi/2| {c4:.1e} (tol {C4_TOL:.0e})"
        ),
    ))
}

fn criterion_7() -> Result<Verdict, String> {
    let mut s = preset("fig7").map_err(|e| e.to_string())?;
    s.grid.lambda = vec![0.1];
    s.run.replications = POLICY_TOPOLOGIES;
    s.run.slots = POLICY_SLOTS;
    if s.mode != Mode::Policy || s.policy.p_grid.len() != 10 || s.run.region_side != 200.0 {
        return Err("fig7 preset no longer matches the acceptance setting".into());
    }
    let out = sweep(&s)?;
    let r = out.rows()[0];
    let sep_best = r.pol_best_const_aoi - r.pol_adaptive_aoi;
    let sep_p1 = r.pol_p1_aoi - r.pol_best_const_aoi;
    let ci_best = r.pol_adaptive_ci.max(r.pol_best_const_ci);
    let ci_p1 = r.pol_best_const_ci.max(r.pol_p1_ci);
    let dsla = r.pol_dsla_aoi > r.pol_adaptive_aoi;
    Ok(Verdict::new(
        sep_best > ci_best && sep_p1 > ci_p1 && dsla,
        format!(
            "policy ordering over {} topologies x {} slots: adaptive {:.3} ± {:.3}, best constant (p={}) {:.3} ± {:.3}, \
             p=1 {:.3} ± {:.3}, DS-LA {:.3} ± {:.3}; separations {sep_best:.3} (half-width {ci_best:.3}) and \
             {sep_p1:.3} (half-width {ci_p1:.3}); DS-LA worse {dsla}",
            s.run.replications,
            s.run.slots,
            r.pol_adaptive_aoi,
            r.pol_adaptive_ci,
            r.pol_best_p,
            r.pol_best_const_aoi,
            r.pol_best_const_ci,
            r.pol_p1_aoi,
            r.pol_p1_ci,
            r.pol_dsla_aoi,
            r.pol_dsla_ci
        ),
    ))
}

fn criterion_8() -> Result<Verdict, String> {
    let mut failed = Vec::new();
    for (name, suite) in common::SUITES {
        if let Err(e) = suite() {
            failed.push(format!("{name}: {e}"));
        }
    }
    Ok(Verdict::new(
        failed.is_empty(),
        format!(
            "property suites, {} cases each: {}/{} pass{}",
            common::CASES,
            common::SUITES.len() - failed.len(),
            common::SUITES.len(),
            if failed.is_empty() { String::new() } else { format!(" [{}]", failed.join("; ")) }
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Result<Verdict, String>); 8] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut all = true;
    for (id, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= pass;
        println!(
            "{} criterion {id}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
