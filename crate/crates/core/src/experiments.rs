//! Scenario runner: parameter grids, replications, CSV artifacts and a run
//! manifest from which every output can be regenerated.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    mean_buffer_occupancy, network_avg_aoi, network_avg_aoi_censored, peak_outage, regime_results,
};
use crate::error::{AoiError, Result};
use crate::geometry::{sample_bipolar, BipolarTopology};
use crate::meta::{
    ecdf, solve_beta_fixed_point_with, solve_exact_fixed_point, sup_distance, uniform_grid,
    write_cdf_csv, BetaApprox, BetaOptions, ExactOptions, MetaDistribution,
};
use crate::params::{ParamsConfig, Region, SystemParams};
use crate::policy::{AdaptiveConfig, AdaptivePolicy, MeanActivity, PolicyVariant};
use crate::rng::mix_seed;
use crate::sim::{
    fmt_f, peak_outage_empirical, run_prepared, ConstantAccess, Engine, PreparedNetwork, SimConfig,
    SimMetrics,
};

pub const SWEEP_SCHEMA: &str = "# aoi-sweep v1";
pub const DEVIATION_SCHEMA: &str = "# aoi-deviation v1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const DEVIATION_FILE: &str = "deviation.csv";

/// Grid columns that identify a sweep point.
pub const KEY_COLUMNS: &[&str] = &["xi", "p", "lambda", "r", "a_threshold", "window_radius"];

const SIM_SEED_STREAM: u64 = 0x5EED;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    Analyze,
    #[default]
    Compare,
    Policy,
}

/// Lists of values swept in a cartesian product. An empty list keeps the
/// base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub xi: Vec<f64>,
    pub p: Vec<f64>,
    pub lambda: Vec<f64>,
    pub r: Vec<f64>,
    pub a_threshold: Vec<f64>,
    pub window_radius: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    #[default]
    Poisson,
    /// One link with no interferers.
    SingleLink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub replications: usize,
    /// Master seed; replication `j` uses `mix_seed(seed, j)` unless `seeds`
    /// lists them explicitly.
    pub seed: u64,
    pub seeds: Option<Vec<u64>>,
    pub slots: u64,
    /// Defaults to a tenth of `slots`.
    pub warmup: Option<u64>,
    pub region_side: f64,
    /// Uses a 1 km square instead of `region_side`.
    pub full_scale: bool,
    pub engine: Engine,
    pub topology: TopologyKind,
    /// Replays this topology in every replication instead of sampling.
    pub topology_file: Option<PathBuf>,
    pub write_links: bool,
    pub write_topologies: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            replications: 20,
            seed: 1,
            seeds: None,
            slots: 10_000,
            warmup: None,
            region_side: 200.0,
            full_scale: false,
            engine: Engine::default(),
            topology: TopologyKind::Poisson,
            topology_file: None,
            write_links: true,
            write_topologies: false,
        }
    }
}

impl RunConfig {
    pub fn region(&self) -> Region {
        Region::torus(if self.full_scale { 1000.0 } else { self.region_side })
    }

    pub fn replication_seeds(&self) -> Result<Vec<u64>> {
        let seeds = match &self.seeds {
            Some(s) => {
                if s.len() != self.replications {
                    return Err(AoiError::Config(format!(
                        "{} seeds listed for {} replications",
                        s.len(),
                        self.replications
                    )));
                }
                s.clone()
            }
            None => (0..self.replications as u64).map(|j| mix_seed(self.seed, j)).collect(),
        };
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(AoiError::Config("replication seeds must be unique".into()));
        }
        Ok(seeds)
    }

    fn sim_config(&self, seed: u64) -> SimConfig {
        let mut cfg = SimConfig::new(self.slots, mix_seed(seed, SIM_SEED_STREAM)).with_engine(self.engine);
        if let Some(w) = self.warmup {
            cfg = cfg.with_warmup(w);
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub beta_tol: f64,
    pub beta_max_iter: usize,
    /// Also solve the full fixed point by Gil-Pelaez inversion.
    pub solve_exact: bool,
    pub exact: ExactOptions,
    /// Reports the network average age restricted to `t ≥ censor_eps`.
    pub censor_eps: Option<f64>,
    /// Points of the uniform grid used for CDF output and sup-distances.
    pub cdf_points: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            beta_tol: 1e-10,
            beta_max_iter: 100,
            solve_exact: false,
            exact: ExactOptions::default(),
            censor_eps: None,
            cdf_points: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeanActivityMode {
    /// Running network-wide mean of the reports.
    #[default]
    Empirical,
    /// Mean buffer occupancy under the solved Beta meta distribution.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub frame_len: u64,
    /// Constant access probabilities the adaptive policy is compared with.
    pub p_grid: Vec<f64>,
    pub mean_activity: MeanActivityMode,
    pub include_dsla: bool,
    /// Writes the per-frame trace of the first replication.
    pub write_trace: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            frame_len: 200,
            p_grid: (1..=10).map(|k| k as f64 / 10.0).collect(),
            mean_activity: MeanActivityMode::Empirical,
            include_dsla: true,
            write_trace: true,
        }
    }
}

/// Declared tolerances of the simulation-versus-analysis report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub avg_aoi_rel: f64,
    pub peak_outage_abs: f64,
    pub cdf_sup: f64,
    pub exact_sup: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            avg_aoi_rel: 0.05,
            peak_outage_abs: 0.05,
            cdf_sup: 0.05,
            exact_sup: 0.02,
        }
    }
}

/// A complete, self-describing experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    pub output_dir: Option<PathBuf>,
    pub params: ParamsConfig,
    /// Peak-age threshold `A` when the grid does not list one.
    pub a_threshold: f64,
    /// Observation radius `R` when the grid does not list one.
    pub window_radius: f64,
    pub grid: Grid,
    pub run: RunConfig,
    pub analysis: AnalysisConfig,
    pub policy: PolicyConfig,
    pub tolerances: Tolerances,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            mode: Mode::Compare,
            output_dir: None,
            params: ParamsConfig::default(),
            a_threshold: 5.0,
            window_radius: 20.0,
            grid: Grid::default(),
            run: RunConfig::default(),
            analysis: AnalysisConfig::default(),
            policy: PolicyConfig::default(),
            tolerances: Tolerances::default(),
        }
    }
}

/// One point of the cartesian grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub params: SystemParams,
    pub a_threshold: f64,
    pub window_radius: f64,
}

impl GridPoint {
    pub fn key(&self) -> [f64; 6] {
        [
            self.params.xi,
            self.params.p,
            self.params.lambda,
            self.params.r,
            self.a_threshold,
            self.window_radius,
        ]
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| AoiError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| AoiError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| AoiError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.replications == 0 {
            return Err(AoiError::Config("at least one replication is required".into()));
        }
        if self.run.slots <= self.run.warmup.unwrap_or(self.run.slots / 10) {
            return Err(AoiError::Config("slots must exceed warmup".into()));
        }
        self.run.region().validate()?;
        self.run.replication_seeds()?;
        if self.analysis.cdf_points == 0 {
            return Err(AoiError::Config("cdf_points must be positive".into()));
        }
        if self.policy.frame_len == 0 {
            return Err(AoiError::Config("policy frame length must be at least 1".into()));
        }
        if self.mode == Mode::Policy && self.policy.p_grid.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(AoiError::Config("policy p_grid values must lie in (0, 1]".into()));
        }
        for p in self.points()? {
            p.params.validate()?;
            if !(p.a_threshold > 0.0) {
                return Err(AoiError::InvalidParameter {
                    name: "a_threshold",
                    value: p.a_threshold,
                    reason: "must be positive",
                });
            }
            if !(p.window_radius >= 0.0) {
                return Err(AoiError::InvalidParameter {
                    name: "window_radius",
                    value: p.window_radius,
                    reason: "must be non-negative",
                });
            }
        }
        Ok(())
    }

    /// Cartesian product of the grid, `ξ` varying fastest.
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        let base = self.params.to_params();
        let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let g = &self.grid;
        let mut out = Vec::new();
        for &lambda in &or(&g.lambda, base.lambda) {
            for &r in &or(&g.r, base.r) {
                for &p in &or(&g.p, base.p) {
                    for &a in &or(&g.a_threshold, self.a_threshold) {
                        for &w in &or(&g.window_radius, self.window_radius) {
                            for &xi in &or(&g.xi, base.xi) {
                                out.push(GridPoint {
                                    index: out.len(),
                                    params: base.with_lambda(lambda).with_r(r).with_p(p).with_xi(xi),
                                    a_threshold: a,
                                    window_radius: w,
                                });
                            }
                        }
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(AoiError::Config("parameter grid is empty".into()));
        }
        Ok(out)
    }
}

macro_rules! summary_row {
    ($($field:ident),* $(,)?) => {
        /// One row of the sweep summary; absent quantities are NaN.
        #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
        pub struct SummaryRow {
            $(pub $field: f64,)*
        }

        impl Default for SummaryRow {
            fn default() -> Self {
                Self { $($field: f64::NAN,)* }
            }
        }

        impl SummaryRow {
            pub const COLUMNS: &'static [&'static str] = &[$(stringify!($field)),*];

            pub fn values(&self) -> Vec<f64> {
                vec![$(self.$field),*]
            }
        }
    };
}

summary_row!(
    point,
    xi,
    p,
    lambda,
    r,
    a_threshold,
    window_radius,
    sim_avg_aoi,
    sim_avg_aoi_ci,
    sim_peak_aoi,
    sim_peak_outage,
    sim_success_mean,
    sim_busy_mean,
    sim_links,
    sim_censored_links,
    ana_kappa,
    ana_beta,
    ana_shape_a,
    ana_iterations,
    ana_avg_aoi,
    ana_divergent,
    ana_avg_aoi_censored,
    ana_peak_outage,
    ana_mu_th,
    ana_peak_residual,
    ana_busy_mean,
    ana_bound_z,
    ana_noise_limited_aoi,
    ana_lambda0,
    ana_p_star,
    exact_iterations,
    sup_beta_empirical,
    sup_exact_beta,
    sup_exact_empirical,
    rel_err_avg_aoi,
    gap_peak_outage,
    pol_adaptive_aoi,
    pol_adaptive_ci,
    pol_dsla_aoi,
    pol_dsla_ci,
    pol_p1_aoi,
    pol_p1_ci,
    pol_best_p,
    pol_best_const_aoi,
    pol_best_const_ci,
    pol_mean_activity,
    pol_max_residual,
);

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| AoiError::io(path, e))?;
    writeln!(file, "{SWEEP_SCHEMA}").map_err(|e| AoiError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(SummaryRow::COLUMNS)?;
    for r in rows {
        w.write_record(r.values().into_iter().map(fmt_f))?;
    }
    w.flush().map_err(|e| AoiError::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationKind {
    /// `|l - r| / |r|`, or `|l - r|` when `r = 0`.
    Rel,
    Abs,
    /// Largest absolute difference over all keys.
    Sup,
}

impl std::str::FromStr for DeviationKind {
    type Err = AoiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rel" => Ok(Self::Rel),
            "abs" => Ok(Self::Abs),
            "sup" => Ok(Self::Sup),
            other => Err(AoiError::Config(format!("unknown deviation kind `{other}`"))),
        }
    }
}

impl DeviationKind {
    fn name(self) -> &'static str {
        match self {
            Self::Rel => "rel",
            Self::Abs => "abs",
            Self::Sup => "sup",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// One side is missing or non-finite.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub key: String,
    pub left_column: String,
    pub right_column: String,
    pub kind: DeviationKind,
    pub left: f64,
    pub right: f64,
    pub deviation: f64,
    pub tol: f64,
    pub status: Status,
}

impl DeviationRow {
    fn new(key: String, left_column: &str, right_column: &str, kind: DeviationKind, left: f64, right: f64, tol: f64) -> Self {
        let deviation = match kind {
            DeviationKind::Rel if right != 0.0 => (left - right).abs() / right.abs(),
            _ => (left - right).abs(),
        };
        let status = if left.is_nan() || right.is_nan() {
            Status::Skipped
        } else if left.is_infinite() || right.is_infinite() {
            if left == right { Status::Pass } else { Status::Skipped }
        } else if deviation <= tol {
            Status::Pass
        } else {
            Status::Fail
        };
        let deviation = if left == right { 0.0 } else { deviation };
        Self {
            key,
            left_column: left_column.into(),
            right_column: right_column.into(),
            kind,
            left,
            right,
            deviation,
            tol,
            status,
        }
    }

    fn sup(key: String, left_column: &str, right_column: &str, deviation: f64, tol: f64) -> Self {
        Self {
            key,
            left_column: left_column.into(),
            right_column: right_column.into(),
            kind: DeviationKind::Sup,
            left: f64::NAN,
            right: f64::NAN,
            deviation,
            tol,
            status: if deviation.is_nan() {
                Status::Skipped
            } else if deviation <= tol {
                Status::Pass
            } else {
                Status::Fail
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DeviationReport {
    pub rows: Vec<DeviationRow>,
}

impl DeviationReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.status != Status::Fail)
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.status == Status::Fail).count()
    }

    pub fn max_deviation(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.status != Status::Skipped)
            .map(|r| r.deviation)
            .fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| AoiError::io(path, e))?;
        self.write_to(file)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{DEVIATION_SCHEMA}").map_err(|e| AoiError::io("<deviation csv>", e))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["key", "left_column", "right_column", "kind", "left", "right", "deviation", "tol", "status"])?;
        for r in &self.rows {
            let status = match r.status {
                Status::Pass => "pass",
                Status::Fail => "fail",
                Status::Skipped => "skipped",
            };
            w.write_record(&[
                r.key.clone(),
                r.left_column.clone(),
                r.right_column.clone(),
                r.kind.name().to_string(),
                fmt_f(r.left),
                fmt_f(r.right),
                fmt_f(r.deviation),
                fmt_f(r.tol),
                status.to_string(),
            ])?;
        }
        w.flush().map_err(|e| AoiError::io("<deviation csv>", e))?;
        Ok(())
    }
}

/// A CSV file with an optional schema comment.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: Option<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| AoiError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let schema = text
            .lines()
            .next()
            .filter(|l| l.starts_with('#'))
            .map(|l| l.trim().to_string());
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(AoiError::Schema {
                path: path.into(),
                reason: "no header row".into(),
            });
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Self { schema, header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn key_columns(&self, other: &Table) -> Vec<String> {
        let shared = |c: &str| self.column(c).is_some() && other.column(c).is_some();
        let keys: Vec<String> = KEY_COLUMNS.iter().filter(|c| shared(c)).map(|c| c.to_string()).collect();
        if !keys.is_empty() {
            return keys;
        }
        if shared("u") {
            return vec!["u".into()];
        }
        match (self.header.first(), other.header.first()) {
            (Some(a), Some(b)) if a == b => vec![a.clone()],
            _ => Vec::new(),
        }
    }

    fn keyed(&self, keys: &[String], path_hint: &str) -> Result<BTreeMap<String, usize>> {
        let idx: Vec<usize> = keys.iter().map(|k| self.column(k).expect("shared key")).collect();
        let mut map = BTreeMap::new();
        for (row_idx, row) in self.rows.iter().enumerate() {
            let key = idx
                .iter()
                .map(|&i| canonical(row.get(i).map(String::as_str).unwrap_or("")))
                .collect::<Vec<_>>()
                .join("|");
            if map.insert(key.clone(), row_idx).is_some() {
                return Err(AoiError::KeyMismatch(format!("duplicate key {key} in {path_hint}")));
            }
        }
        Ok(map)
    }

    fn value(&self, row: usize, col: usize, name: &str) -> Result<f64> {
        let raw = self.rows[row].get(col).map(String::as_str).unwrap_or("");
        if raw.is_empty() {
            return Ok(f64::NAN);
        }
        raw.parse::<f64>().map_err(|_| AoiError::Schema {
            path: PathBuf::new(),
            reason: format!("column `{name}` holds non-numeric value `{raw}`"),
        })
    }
}

fn canonical(s: &str) -> String {
    s.parse::<f64>().map(fmt_f).unwrap_or_else(|_| s.to_string())
}

/// Column pair compared by [`compare_tables`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub left: String,
    pub right: String,
    pub kind: DeviationKind,
    pub tol: f64,
}

impl MetricPair {
    /// Parses `left[:right[:kind[:tol]]]`, with omitted parts taken from
    /// the defaults.
    pub fn parse(spec: &str, kind: DeviationKind, tol: f64) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.is_empty() || parts.len() > 4 || parts[0].is_empty() {
            return Err(AoiError::Config(format!("bad column pair `{spec}`")));
        }
        let tol = match parts.get(3) {
            Some(t) => t
                .parse()
                .map_err(|_| AoiError::Config(format!("bad tolerance in `{spec}`")))?,
            None => tol,
        };
        Ok(Self {
            left: parts[0].into(),
            right: parts.get(1).filter(|s| !s.is_empty()).unwrap_or(&parts[0]).to_string(),
            kind: parts.get(2).map(|k| k.parse()).transpose()?.unwrap_or(kind),
            tol,
        })
    }
}

/// Joins two tables on their shared key columns and reports deviations.
///
/// Without explicit pairs every shared non-key column is compared with
/// itself using `default_kind` and `default_tol`.
pub fn compare_tables(
    left: &Table,
    right: &Table,
    pairs: &[MetricPair],
    default_kind: DeviationKind,
    default_tol: f64,
) -> Result<DeviationReport> {
    let keys = left.key_columns(right);
    if keys.is_empty() {
        return Err(AoiError::KeyMismatch("the inputs share no key column".into()));
    }
    let lmap = left.keyed(&keys, "left input")?;
    let rmap = right.keyed(&keys, "right input")?;
    if let Some(k) = lmap.keys().find(|k| !rmap.contains_key(*k)) {
        return Err(AoiError::KeyMismatch(format!("key {k} only in left input")));
    }
    if let Some(k) = rmap.keys().find(|k| !lmap.contains_key(*k)) {
        return Err(AoiError::KeyMismatch(format!("key {k} only in right input")));
    }
    let pairs: Vec<MetricPair> = if pairs.is_empty() {
        left.header
            .iter()
            .filter(|c| !keys.contains(c) && c.as_str() != "point" && right.column(c).is_some())
            .map(|c| MetricPair {
                left: c.clone(),
                right: c.clone(),
                kind: default_kind,
                tol: default_tol,
            })
            .collect()
    } else {
        pairs.to_vec()
    };
    let mut report = DeviationReport::default();
    for pair in &pairs {
        let lc = left.column(&pair.left).ok_or_else(|| AoiError::Schema {
            path: PathBuf::from("left input"),
            reason: format!("missing column `{}`", pair.left),
        })?;
        let rc = right.column(&pair.right).ok_or_else(|| AoiError::Schema {
            path: PathBuf::from("right input"),
            reason: format!("missing column `{}`", pair.right),
        })?;
        let mut sup: f64 = 0.0;
        let mut any = false;
        for (key, &li) in &lmap {
            let ri = rmap[key];
            let lv = left.value(li, lc, &pair.left)?;
            let rv = right.value(ri, rc, &pair.right)?;
            if pair.kind == DeviationKind::Sup {
                if lv.is_finite() && rv.is_finite() {
                    sup = sup.max((lv - rv).abs());
                    any = true;
                }
            } else {
                report
                    .rows
                    .push(DeviationRow::new(key.clone(), &pair.left, &pair.right, pair.kind, lv, rv, pair.tol));
            }
        }
        if pair.kind == DeviationKind::Sup {
            let d = if any { sup } else { f64::NAN };
            report.rows.push(DeviationRow::sup("*".into(), &pair.left, &pair.right, d, pair.tol));
        }
    }
    Ok(report)
}

pub fn compare_files(
    left: &Path,
    right: &Path,
    pairs: &[MetricPair],
    default_kind: DeviationKind,
    default_tol: f64,
) -> Result<DeviationReport> {
    let l = Table::read(left)?;
    let r = Table::read(right)?;
    if l.schema != r.schema {
        return Err(AoiError::Schema {
            path: right.into(),
            reason: format!("schema {:?} differs from {:?}", r.schema, l.schema),
        });
    }
    compare_tables(&l, &r, pairs, default_kind, default_tol)
}

/// Quadrature and solver settings recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverRecord {
    pub expectation: crate::quad::QuadConfig,
    pub nested_expectation: crate::quad::QuadConfig,
    pub beta_tol: f64,
    pub beta_max_iter: usize,
    pub exact: Option<ExactOptions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestPoint {
    pub index: usize,
    pub params: SystemParams,
    pub a_threshold: f64,
    pub window_radius: f64,
    pub kappa: Option<f64>,
    pub beta: Option<f64>,
    pub beta_iterations: Option<usize>,
    pub exact_iterations: Option<usize>,
    pub mean_activity_mode: Option<MeanActivityMode>,
    pub mean_activity: Option<f64>,
}

/// Everything needed to regenerate a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub scenario: Scenario,
    pub seeds: Vec<u64>,
    pub solver: SolverRecord,
    pub points: Vec<ManifestPoint>,
    pub outputs: Vec<String>,
    pub deviation_pass: Option<bool>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| AoiError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| AoiError::io(path, e))
    }
}

/// Analysis results at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointAnalysis {
    pub beta: BetaApprox,
    pub distribution: MetaDistribution,
    pub exact: Option<MetaDistribution>,
    pub exact_iterations: Option<usize>,
}

/// Replication-level policy comparison at one point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolicyRuns {
    pub adaptive: Vec<f64>,
    pub dsla: Vec<f64>,
    /// `(p, per-replication averages)`.
    pub constant: Vec<(f64, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub point: GridPoint,
    pub row: SummaryRow,
    /// Network average age of each replication.
    pub sim_replications: Vec<f64>,
    pub sim: Option<SimMetrics>,
    pub analysis: Option<PointAnalysis>,
    pub policy: Option<PolicyRuns>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub points: Vec<PointResult>,
    pub report: Option<DeviationReport>,
    pub manifest: Manifest,
}

impl ScenarioOutput {
    pub fn rows(&self) -> Vec<SummaryRow> {
        self.points.iter().map(|p| p.row).collect()
    }
}

fn mean_ci(values: &[f64]) -> (f64, f64) {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, Z95 * (var / n).sqrt())
}

/// Mean and 95% half-width of the per-replication values.
pub fn replication_ci(values: &[f64]) -> (f64, f64) {
    mean_ci(values)
}

struct Runner<'a> {
    scenario: &'a Scenario,
    seeds: Vec<u64>,
    replay: Option<BipolarTopology>,
}

impl Runner<'_> {
    fn topology(&self, point: &GridPoint, rep: usize) -> BipolarTopology {
        if let Some(t) = &self.replay {
            return t.clone();
        }
        let region = self.scenario.run.region();
        match self.scenario.run.topology {
            TopologyKind::SingleLink => BipolarTopology::single_link(point.params.r, region),
            TopologyKind::Poisson => sample_bipolar(&point.params, &region, self.seeds[rep]),
        }
    }

    fn simulate(&self, point: &GridPoint, rep: usize) -> Result<SimMetrics> {
        let topo = self.topology(point, rep);
        let cfg = self.scenario.run.sim_config(self.seeds[rep]);
        if topo.is_empty() {
            return Ok(SimMetrics {
                links: Vec::new(),
                slots_measured: cfg.slots - cfg.warmup,
            });
        }
        let net = PreparedNetwork::new(&topo, &point.params, cfg.engine)?;
        run_prepared(&net, &cfg, &mut ConstantAccess(point.params.p))
    }

    fn analyze(&self, point: &GridPoint) -> Result<PointAnalysis> {
        let a = &self.scenario.analysis;
        let derived = point.params.derive()?;
        let beta = solve_beta_fixed_point_with(
            &point.params,
            &derived,
            &BetaOptions {
                tol: a.beta_tol,
                max_iter: a.beta_max_iter,
                damping: None,
            },
        )?;
        if !beta.converged {
            return Err(AoiError::NonConvergent {
                iterations: beta.iteration_count,
                last_step: beta.history.last().map_or(f64::NAN, |h| h.step),
            });
        }
        let distribution = beta.distribution();
        let (exact, exact_iterations) = if a.solve_exact {
            let sol = solve_exact_fixed_point(&point.params, &derived, &distribution, &a.exact)?;
            if !sol.converged {
                return Err(AoiError::NonConvergent {
                    iterations: sol.iterations,
                    last_step: sol.history.last().copied().unwrap_or(f64::NAN),
                });
            }
            (Some(sol.distribution()), Some(sol.iterations))
        } else {
            (None, None)
        };
        Ok(PointAnalysis {
            beta,
            distribution,
            exact,
            exact_iterations,
        })
    }

    /// Returns per-scheme averages and, for the first replication, the
    /// policy with its trace.
    fn policy(
        &self,
        point: &GridPoint,
        rep: usize,
        mean_activity: MeanActivity,
    ) -> Result<(f64, f64, Vec<f64>, f64, Option<AdaptivePolicy>)> {
        let pc = &self.scenario.policy;
        let topo = self.topology(point, rep);
        let cfg = self.scenario.run.sim_config(self.seeds[rep]);
        if topo.is_empty() {
            return Err(AoiError::EmptyTopology);
        }
        let net = PreparedNetwork::new(&topo, &point.params, cfg.engine)?;
        let mut acfg = AdaptiveConfig::new(pc.frame_len, point.window_radius);
        acfg.mean_activity = mean_activity;
        acfg.record_trace = pc.write_trace && rep == 0;
        let mut adaptive = AdaptivePolicy::new(&topo, &point.params, acfg)?;
        let a = run_prepared(&net, &cfg, &mut adaptive)?.network()?.avg_aoi;
        let d = if pc.include_dsla {
            let mut dcfg = acfg;
            dcfg.variant = PolicyVariant::DominantSystem;
            dcfg.record_trace = false;
            let mut dsla = AdaptivePolicy::new(&topo, &point.params, dcfg)?;
            run_prepared(&net, &cfg, &mut dsla)?.network()?.avg_aoi
        } else {
            f64::NAN
        };
        let consts = self
            .constant_grid()
            .iter()
            .map(|&p| Ok(run_prepared(&net, &cfg, &mut ConstantAccess(p))?.network()?.avg_aoi))
            .collect::<Result<Vec<f64>>>()?;
        let residual = adaptive.max_residual;
        Ok((a, d, consts, residual, (rep == 0).then_some(adaptive)))
    }

    fn constant_grid(&self) -> Vec<f64> {
        let mut grid = self.scenario.policy.p_grid.clone();
        if !grid.contains(&1.0) {
            grid.push(1.0);
        }
        grid
    }
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| AoiError::io(path, e))
}

/// Runs a scenario. Outputs are written under `out_dir` when given. The
/// thread count affects speed only, never results.
pub fn run_scenario(scenario: &Scenario, out_dir: Option<&Path>, threads: usize) -> Result<ScenarioOutput> {
    scenario.validate()?;
    let points = scenario.points()?;
    let seeds = scenario.run.replication_seeds()?;
    let replay = match &scenario.run.topology_file {
        Some(path) => Some(BipolarTopology::read_csv(path, scenario.run.region())?),
        None => None,
    };
    let runner = Runner {
        scenario,
        seeds: seeds.clone(),
        replay,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| AoiError::Config(format!("thread pool: {e}")))?;
    let reps = scenario.run.replications;
    let mode = scenario.mode;
    let wants_sim = matches!(mode, Mode::Simulate | Mode::Compare);
    let wants_analysis = matches!(mode, Mode::Analyze | Mode::Compare)
        || (mode == Mode::Policy && scenario.policy.mean_activity == MeanActivityMode::Analytic);
    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|i| (0..reps).map(move |j| (i, j)))
        .collect();

    let analyses: Vec<Option<PointAnalysis>> = if wants_analysis {
        pool.install(|| points.par_iter().map(|p| runner.analyze(p).map(Some)).collect::<Result<_>>())?
    } else {
        vec![None; points.len()]
    };

    let sims: Vec<Vec<SimMetrics>> = if wants_sim {
        let flat: Vec<SimMetrics> = pool.install(|| {
            tasks
                .par_iter()
                .map(|&(i, j)| runner.simulate(&points[i], j))
                .collect::<Result<_>>()
        })?;
        let mut it = flat.into_iter();
        (0..points.len()).map(|_| it.by_ref().take(reps).collect()).collect()
    } else {
        vec![Vec::new(); points.len()]
    };

    let mean_activity: Vec<MeanActivity> = points
        .iter()
        .zip(&analyses)
        .map(|(p, a)| match (scenario.policy.mean_activity, a) {
            (MeanActivityMode::Analytic, Some(a)) => {
                mean_buffer_occupancy(&a.distribution, p.params.xi, p.params.p).map(MeanActivity::Fixed)
            }
            _ => Ok(MeanActivity::Empirical),
        })
        .collect::<Result<_>>()?;

    type PolicyOut = (f64, f64, Vec<f64>, f64, Option<AdaptivePolicy>);
    let policies: Vec<Vec<PolicyOut>> = if mode == Mode::Policy {
        let flat: Vec<PolicyOut> = pool.install(|| {
            tasks
                .par_iter()
                .map(|&(i, j)| runner.policy(&points[i], j, mean_activity[i]))
                .collect::<Result<_>>()
        })?;
        let mut it = flat.into_iter();
        (0..points.len()).map(|_| it.by_ref().take(reps).collect()).collect()
    } else {
        vec![Vec::new(); points.len()]
    };

    let points_dir = out_dir.map(|d| d.join("points"));
    if let Some(d) = &points_dir {
        ensure_dir(d)?;
    }
    let mut outputs: Vec<String> = Vec::new();
    let mut report = DeviationReport::default();
    let mut results = Vec::with_capacity(points.len());
    let grid = uniform_grid(scenario.analysis.cdf_points);
    let tol = scenario.tolerances;

    for (((point, analysis), runs), pol) in points.iter().zip(analyses).zip(sims).zip(policies) {
        let k = point.index;
        let mut row = SummaryRow {
            point: k as f64,
            xi: point.params.xi,
            p: point.params.p,
            lambda: point.params.lambda,
            r: point.params.r,
            a_threshold: point.a_threshold,
            window_radius: point.window_radius,
            ..SummaryRow::default()
        };
        let key = format!("point {k}");
        let mut cdf_columns: Vec<(&str, Vec<f64>)> = Vec::new();

        let mut sim_replications = Vec::new();
        let mut merged = None;
        let mut empirical: Option<Vec<f64>> = None;
        if wants_sim {
            sim_replications = runs
                .iter()
                .filter(|m| !m.links.is_empty())
                .map(|m| m.network().map(|n| n.avg_aoi))
                .collect::<Result<_>>()?;
            let all = SimMetrics::merge(runs);
            let net = all.network()?;
            let (_, ci) = mean_ci(&sim_replications);
            row.sim_avg_aoi = net.avg_aoi;
            row.sim_avg_aoi_ci = ci;
            row.sim_peak_aoi = net.peak_aoi_mean;
            row.sim_peak_outage = peak_outage_empirical(&all, point.a_threshold);
            row.sim_success_mean = net.mean_success;
            row.sim_busy_mean = net.mean_busy;
            row.sim_links = net.links as f64;
            row.sim_censored_links = net.censored_links as f64;
            let mut succ: Vec<f64> = all.links.iter().map(|l| l.emp_success).filter(|s| s.is_finite()).collect();
            succ.sort_by(f64::total_cmp);
            if !succ.is_empty() {
                cdf_columns.push(("empirical", grid.iter().map(|&u| ecdf(&succ, u)).collect()));
                empirical = Some(succ);
            }
            if let Some(d) = &points_dir {
                if scenario.run.write_links {
                    let name = format!("p{k:03}_links.csv");
                    all.write_csv(&d.join(&name))?;
                    outputs.push(format!("points/{name}"));
                }
                if scenario.run.write_topologies {
                    for j in 0..reps {
                        let name = format!("p{k:03}_r{j:03}_topology.csv");
                        runner.topology(point, j).write_csv(&d.join(&name))?;
                        outputs.push(format!("points/{name}"));
                    }
                }
            }
            merged = Some(all);
        }

        if let Some(a) = &analysis {
            let params = &point.params;
            let derived = params.derive()?;
            let dist = &a.distribution;
            row.ana_kappa = a.beta.kappa;
            row.ana_beta = a.beta.beta;
            row.ana_shape_a = if a.beta.point_mass { f64::INFINITY } else { a.beta.alpha_shape() };
            row.ana_iterations = a.beta.iteration_count as f64;
            if mode != Mode::Policy {
                let net = network_avg_aoi(dist, params.xi, params.p)?;
                row.ana_avg_aoi = net.value;
                row.ana_divergent = f64::from(u8::from(net.divergent));
                if let Some(eps) = scenario.analysis.censor_eps {
                    row.ana_avg_aoi_censored = network_avg_aoi_censored(dist, params.xi, params.p, eps)?.value;
                }
                let out = peak_outage(point.a_threshold, dist, params.xi, params.p)?;
                row.ana_peak_outage = out.probability;
                row.ana_mu_th = out.mu_th.unwrap_or(f64::NAN);
                row.ana_peak_residual = out.residual;
                let reg = regime_results(params, &derived)?;
                row.ana_bound_z = reg.bound_z;
                row.ana_noise_limited_aoi = reg.noise_limited_aoi;
                row.ana_lambda0 = reg.lambda0;
                row.ana_p_star = reg.p_star;
            }
            row.ana_busy_mean = mean_buffer_occupancy(dist, params.xi, params.p)?;
            cdf_columns.push(("beta", grid.iter().map(|&u| dist.cdf(u)).collect()));
            if let Some(e) = &a.exact {
                row.exact_iterations = a.exact_iterations.map_or(f64::NAN, |n| n as f64);
                row.sup_exact_beta = sup_distance(&grid, |u| e.cdf(u), |u| dist.cdf(u));
                cdf_columns.push(("exact", grid.iter().map(|&u| e.cdf(u)).collect()));
            }
            if let Some(s) = &empirical {
                row.sup_beta_empirical = sup_distance(&grid, |u| dist.cdf(u), |u| ecdf(s, u));
                if let Some(e) = &a.exact {
                    row.sup_exact_empirical = sup_distance(&grid, |u| e.cdf(u), |u| ecdf(s, u));
                }
            }
        }

        if mode == Mode::Compare {
            row.rel_err_avg_aoi = if row.ana_divergent == 1.0 {
                f64::NAN
            } else {
                (row.sim_avg_aoi - row.ana_avg_aoi).abs() / row.ana_avg_aoi
            };
            row.gap_peak_outage = (row.sim_peak_outage - row.ana_peak_outage).abs();
            report.rows.push(DeviationRow::new(
                key.clone(),
                "sim_avg_aoi",
                "ana_avg_aoi",
                DeviationKind::Rel,
                row.sim_avg_aoi,
                row.ana_avg_aoi,
                tol.avg_aoi_rel,
            ));
            report.rows.push(DeviationRow::new(
                key.clone(),
                "sim_peak_outage",
                "ana_peak_outage",
                DeviationKind::Abs,
                row.sim_peak_outage,
                row.ana_peak_outage,
                tol.peak_outage_abs,
            ));
            report
                .rows
                .push(DeviationRow::sup(key.clone(), "empirical", "beta", row.sup_beta_empirical, tol.cdf_sup));
            if scenario.analysis.solve_exact {
                report
                    .rows
                    .push(DeviationRow::sup(key.clone(), "exact", "beta", row.sup_exact_beta, tol.exact_sup));
            }
        }

        let mut policy_runs = None;
        if mode == Mode::Policy {
            let mut runs = PolicyRuns::default();
            let consts = runner.constant_grid();
            runs.constant = consts.iter().map(|&p| (p, Vec::new())).collect();
            let mut max_residual: f64 = 0.0;
            let mut first = None;
            for (a, d, c, res, pol) in pol {
                runs.adaptive.push(a);
                runs.dsla.push(d);
                for (slot, v) in runs.constant.iter_mut().zip(c) {
                    slot.1.push(v);
                }
                max_residual = max_residual.max(res);
                if pol.is_some() {
                    first = pol;
                }
            }
            (row.pol_adaptive_aoi, row.pol_adaptive_ci) = mean_ci(&runs.adaptive);
            if scenario.policy.include_dsla {
                (row.pol_dsla_aoi, row.pol_dsla_ci) = mean_ci(&runs.dsla);
            }
            let stats: Vec<(f64, f64, f64)> = runs
                .constant
                .iter()
                .map(|(p, v)| {
                    let (m, ci) = mean_ci(v);
                    (*p, m, ci)
                })
                .collect();
            if let Some(&(_, m, ci)) = stats.iter().find(|s| s.0 == 1.0) {
                row.pol_p1_aoi = m;
                row.pol_p1_ci = ci;
            }
            if let Some(&(p, m, ci)) = stats
                .iter()
                .filter(|s| scenario.policy.p_grid.contains(&s.0) && s.1.is_finite())
                .min_by(|a, b| a.1.total_cmp(&b.1))
            {
                row.pol_best_p = p;
                row.pol_best_const_aoi = m;
                row.pol_best_const_ci = ci;
            }
            row.pol_max_residual = max_residual;
            row.pol_mean_activity = match mean_activity[k] {
                MeanActivity::Fixed(v) => v,
                // Network mean of the last frame's reports, first replication.
                MeanActivity::Empirical => first.as_ref().map_or(f64::NAN, |a| a.state.mean_a),
            };
            if let (Some(d), Some(first)) = (&points_dir, &first) {
                if scenario.policy.write_trace {
                    let name = format!("p{k:03}_trace.csv");
                    first.write_trace_csv(&d.join(&name))?;
                    outputs.push(format!("points/{name}"));
                }
            }
            policy_runs = Some(runs);
        }

        if let Some(d) = &points_dir {
            if !cdf_columns.is_empty() {
                let name = format!("p{k:03}_cdf.csv");
                write_cdf_csv(&d.join(&name), &grid, &cdf_columns)?;
                outputs.push(format!("points/{name}"));
            }
        }

        results.push(PointResult {
            point: *point,
            row,
            sim_replications,
            sim: merged,
            analysis,
            policy: policy_runs,
        });
    }

    let report = (mode == Mode::Compare).then_some(report);
    if out_dir.is_some() {
        outputs.push(SUMMARY_FILE.into());
        if report.is_some() {
            outputs.push(DEVIATION_FILE.into());
        }
        outputs.push(MANIFEST_FILE.into());
    }
    let mut recorded = scenario.clone();
    recorded.output_dir = None;
    let manifest = Manifest {
        tool: "aoi".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: recorded,
        seeds,
        solver: SolverRecord {
            expectation: crate::meta::EXPECT_CFG,
            nested_expectation: crate::meta::NESTED_CFG,
            beta_tol: scenario.analysis.beta_tol,
            beta_max_iter: scenario.analysis.beta_max_iter,
            exact: scenario.analysis.solve_exact.then_some(scenario.analysis.exact),
        },
        points: results
            .iter()
            .map(|r| ManifestPoint {
                index: r.point.index,
                params: r.point.params,
                a_threshold: r.point.a_threshold,
                window_radius: r.point.window_radius,
                kappa: r.analysis.as_ref().map(|a| a.beta.kappa),
                beta: r.analysis.as_ref().map(|a| a.beta.beta),
                beta_iterations: r.analysis.as_ref().map(|a| a.beta.iteration_count),
                exact_iterations: r.analysis.as_ref().and_then(|a| a.exact_iterations),
                mean_activity_mode: (mode == Mode::Policy).then_some(scenario.policy.mean_activity),
                mean_activity: match mean_activity[r.point.index] {
                    MeanActivity::Fixed(v) if mode == Mode::Policy => Some(v),
                    _ => None,
                },
            })
            .collect(),
        outputs,
        deviation_pass: report.as_ref().map(DeviationReport::pass),
    };
    let output = ScenarioOutput {
        points: results,
        report,
        manifest,
    };
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        write_summary_csv(&dir.join(SUMMARY_FILE), &output.rows())?;
        if let Some(r) = &output.report {
            r.write_csv(&dir.join(DEVIATION_FILE))?;
        }
        output.manifest.write(&dir.join(MANIFEST_FILE))?;
    }
    Ok(output)
}

/// Re-runs the scenario recorded in a manifest.
pub fn rerun_manifest(manifest: &Path, out_dir: Option<&Path>, threads: usize) -> Result<ScenarioOutput> {
    let m = Manifest::read(manifest)?;
    run_scenario(&m.scenario, out_dir, threads)
}

pub const PRESETS: &[&str] = &["fig4", "fig5", "fig6", "fig7", "fig8", "fig9"];

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| ((lo + k as f64 * step) * 1e6).round() / 1e6).collect()
}

/// Desk-scale versions of the published experiment settings.
pub fn preset(name: &str) -> Result<Scenario> {
    let mut s = Scenario {
        name: name.into(),
        ..Scenario::default()
    };
    match name {
        "fig4" => {
            s.params.p = 1.0;
            s.params.r = 0.5;
            s.params.lambda = 0.01;
            s.grid.xi = vec![0.2, 0.5];
            s.run.replications = 200;
            s.run.slots = 10_000;
            s.analysis.solve_exact = true;
        }
        "fig5" => {
            s.params.p = 1.0;
            s.params.r = 0.5;
            s.grid.lambda = vec![0.01, 0.03, 0.05];
            s.grid.xi = [vec![0.05], steps(0.1, 1.0, 0.05)].concat();
            s.run.slots = 20_000;
        }
        "fig6" => {
            s.params.r = 0.5;
            s.params.lambda = 0.05;
            s.grid.xi = vec![0.25, 0.5, 0.75];
            s.grid.p = steps(0.05, 1.0, 0.05);
            s.run.slots = 20_000;
        }
        "fig7" => {
            s.mode = Mode::Policy;
            s.params.xi = 0.6;
            s.params.r = 2.5;
            s.window_radius = 20.0;
            s.grid.lambda = vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5];
            s.run.slots = 10_000;
        }
        "fig8" => {
            s.params.p = 1.0;
            s.params.lambda = 0.05;
            s.a_threshold = 5.0;
            s.grid.r = vec![0.5, 0.7, 1.0];
            s.grid.xi = steps(0.1, 1.0, 0.05);
            s.run.slots = 20_000;
        }
        "fig9" => {
            s.params.r = 0.7;
            s.params.lambda = 0.05;
            s.a_threshold = 5.0;
            s.grid.xi = vec![0.5, 0.7, 0.9];
            s.grid.p = steps(0.05, 1.0, 0.05);
            s.run.slots = 20_000;
        }
        other => {
            return Err(AoiError::Config(format!(
                "unknown preset `{other}`, expected one of {}",
                PRESETS.join(", ")
            )))
        }
    }
    s.validate()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let s = preset(name).unwrap();
            let back = Scenario::from_toml_str(&s.to_toml().unwrap()).unwrap();
            assert_eq!(back, s);
        }
        let fig5 = preset("fig5").unwrap();
        assert_eq!(fig5.points().unwrap().len(), 3 * 20);
        assert!(preset("fig10").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Scenario::from_toml_str("name = \"x\"\nbogus = 1\n").is_err());
        assert!(Scenario::from_toml_str("[run]\nreplications = 0\n").is_err());
        assert!(Scenario::from_toml_str("[run]\nreplications = 2\nseeds = [3, 3]\n").is_err());
    }

    #[test]
    fn confidence_interval() {
        let (m, ci) = mean_ci(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((ci - Z95 * 1.0).abs() < 1e-12);
        assert!(mean_ci(&[2.0]).1.is_nan());
    }

    #[test]
    fn metric_pair_parsing() {
        let p = MetricPair::parse("a:b:abs:0.1", DeviationKind::Rel, 1.0).unwrap();
        assert_eq!((p.left.as_str(), p.right.as_str(), p.kind, p.tol), ("a", "b", DeviationKind::Abs, 0.1));
        let p = MetricPair::parse("a", DeviationKind::Sup, 0.5).unwrap();
        assert_eq!((p.right.as_str(), p.kind, p.tol), ("a", DeviationKind::Sup, 0.5));
        assert!(MetricPair::parse("a:b:weird", DeviationKind::Rel, 1.0).is_err());
    }
}
