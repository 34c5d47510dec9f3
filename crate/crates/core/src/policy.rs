//! Locally adaptive slotted ALOHA.
//!
//! Every node picks its access probability `η` from what it observes inside a
//! disk around its transmitter: the distances to nearby receivers and their
//! reported buffer occupancy. The rest of the network enters through a
//! mean-field tail term. Updates happen at frame boundaries.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AoiError, Result};
use crate::geometry::{transmitters_in, BipolarTopology, CellGrid, StoppingSet};
use crate::params::{DerivedParams, SystemParams};
use crate::quad::{integrate_from, QuadConfig};
use crate::sim::{fmt_f, run, AccessPolicy, SimConfig, SimMetrics};

pub const TRACE_SCHEMA: &str = "# aoi-policy-trace v1";

/// `λ E[a] ∫_{|z|>R} dz / (1 + |z|^α/(θ r^α))`.
///
/// With `v = (ρ/(θ^{1/α} r))²` this is `λ E[a] π θ^δ r² ∫_{R'^2}^∞ dv/(1+v^{α/2})`,
/// `R' = R/(θ^{1/α} r)`.
pub fn tail_integral(
    window_radius: f64,
    lambda: f64,
    mean_a: f64,
    params: &SystemParams,
    derived: &DerivedParams,
) -> Result<f64> {
    if !(window_radius >= 0.0) {
        return Err(AoiError::InvalidParameter {
            name: "window_radius",
            value: window_radius,
            reason: "must be non-negative",
        });
    }
    if window_radius.is_infinite() || lambda == 0.0 || mean_a == 0.0 {
        return Ok(0.0);
    }
    let a = params.alpha / 2.0;
    let scaled = window_radius / (params.theta.powf(1.0 / params.alpha) * params.r);
    let cfg = QuadConfig::with_tol(1e-16, 1e-13);
    let integral = integrate_from(|v: f64| 1.0 / (1.0 + v.powf(a)), scaled * scaled, a, &cfg)?.value;
    Ok(lambda * mean_a * derived.area_scale * integral)
}

/// `h(η) = 1/η - Σ 1/(1 + D_j - a_j η) - tail`.
pub fn eta_residual(eta: f64, terms: &[(f64, f64)], tail: f64) -> f64 {
    1.0 / eta - terms.iter().map(|&(d, a)| 1.0 / (1.0 + d - a * eta)).sum::<f64>() - tail
}

/// Access probability solving `h(η) = 0` on `(0, 1)`, or one when
/// `Σ 1/(1 + D_j - a_j) + tail ≤ 1`.
///
/// `terms` holds `(D_j, a_j)` with `D_j` the normalized path loss from this
/// node's transmitter to neighbor receiver `j` and `a_j` that neighbor's
/// buffer occupancy.
pub fn solve_eta(terms: &[(f64, f64)], tail: f64) -> Result<f64> {
    for &(d, a) in terms {
        if !(d > 0.0 && d.is_finite()) {
            return Err(AoiError::InvalidParameter {
                name: "D",
                value: d,
                reason: "normalized path loss must be positive and finite",
            });
        }
        if !(0.0..=1.0).contains(&a) {
            return Err(AoiError::InvalidParameter {
                name: "a",
                value: a,
                reason: "buffer occupancy must lie in [0, 1]",
            });
        }
        if 1.0 + d - a <= 0.0 {
            return Err(AoiError::InvalidParameter {
                name: "1+D-a",
                value: 1.0 + d - a,
                reason: "must be positive",
            });
        }
    }
    if !(tail >= 0.0 && tail.is_finite()) {
        return Err(AoiError::InvalidParameter {
            name: "tail",
            value: tail,
            reason: "must be finite and non-negative",
        });
    }
    let load: f64 = terms.iter().map(|&(d, a)| 1.0 / (1.0 + d - a)).sum::<f64>() + tail;
    if load <= 1.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eta_residual(mid, terms, tail) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo > 0.0 && eta_residual(lo, terms, tail).abs() < eta_residual(hi, terms, tail).abs() {
        Ok(lo)
    } else {
        Ok(hi)
    }
}

/// Success probability of link `node` given the activity of transmitters
/// inside `window` and a mean-field tail outside it.
///
/// `etas[j] * a_hats[j]` is the probability that transmitter `j` is active.
/// `mean_activity` is the mean active probability outside the window. The
/// tail is exact for a window centered at the receiver of `node`.
#[allow(clippy::too_many_arguments)]
pub fn conditional_success_given_window(
    node: usize,
    window: &StoppingSet,
    topo: &BipolarTopology,
    etas: &[f64],
    a_hats: &[f64],
    mean_activity: f64,
    params: &SystemParams,
    derived: &DerivedParams,
) -> Result<f64> {
    if node >= topo.len() || etas.len() != topo.len() || a_hats.len() != topo.len() {
        return Err(AoiError::Config("node index or per-node vectors do not match the topology".into()));
    }
    let s = params.theta * params.r.powf(params.alpha);
    let mut log_p = -derived.noise_term;
    for j in transmitters_in(window, topo, node) {
        let d = topo.cross_distance(j, node).powf(params.alpha) / s;
        log_p += (1.0 - etas[j] * a_hats[j] / (1.0 + d)).ln();
    }
    let tail = tail_integral(window.radius, params.lambda, mean_activity, params, derived)?;
    Ok((log_p - tail).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PolicyVariant {
    /// Uses the reported buffer occupancies.
    #[default]
    Proposed,
    /// Treats every neighbor as always backlogged.
    DominantSystem,
}

/// Source of the population mean buffer occupancy in the tail term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum MeanActivity {
    /// Running mean of the reports over all nodes.
    #[default]
    Empirical,
    /// A fixed value, e.g. the mean occupancy of a solved meta distribution.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub frame_len: u64,
    pub window_radius: f64,
    pub variant: PolicyVariant,
    pub mean_activity: MeanActivity,
    /// Stop updating after this many updates.
    pub freeze_after: Option<u64>,
    pub record_trace: bool,
}

impl AdaptiveConfig {
    pub fn new(frame_len: u64, window_radius: f64) -> Self {
        Self {
            frame_len,
            window_radius,
            variant: PolicyVariant::Proposed,
            mean_activity: MeanActivity::Empirical,
            freeze_after: None,
            record_trace: false,
        }
    }
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self::new(200, 20.0)
    }
}

/// Current per-node decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub eta: Vec<f64>,
    pub reported_a: Vec<f64>,
    pub frame_len: u64,
    pub window_radius: f64,
    pub mean_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub frame_index: u64,
    pub node_id: usize,
    pub eta: f64,
    pub reported_a: f64,
}

/// Frame-based adaptive access policy; plugs into [`crate::sim::run`].
#[derive(Debug, Clone)]
pub struct AdaptivePolicy {
    cfg: AdaptiveConfig,
    lambda: f64,
    /// Tail integral for unit mean occupancy.
    unit_tail: f64,
    /// `(j, D_ij)` for receivers `j ≠ i` inside the window of node `i`.
    neighbors: Vec<Vec<(usize, f64)>>,
    updates: u64,
    pub state: PolicyState,
    pub trace: Vec<TraceRow>,
    /// Largest `|h(η)|` over all solved nodes so far.
    pub max_residual: f64,
}

impl AdaptivePolicy {
    pub fn new(topo: &BipolarTopology, params: &SystemParams, cfg: AdaptiveConfig) -> Result<Self> {
        if cfg.frame_len == 0 {
            return Err(AoiError::Config("frame length must be at least 1".into()));
        }
        if let MeanActivity::Fixed(v) = cfg.mean_activity {
            if !(0.0..=1.0).contains(&v) {
                return Err(AoiError::InvalidParameter {
                    name: "mean_activity",
                    value: v,
                    reason: "must lie in [0, 1]",
                });
            }
        }
        let derived = params.derive()?;
        let unit_tail = tail_integral(cfg.window_radius, params.lambda, 1.0, params, &derived)?;
        let s = params.theta * params.r.powf(params.alpha);
        let grid = CellGrid::new(&topo.rx, &topo.region, cfg.window_radius.max(topo.region.side / 256.0));
        let neighbors = (0..topo.len())
            .map(|i| {
                let mut list = Vec::new();
                if cfg.window_radius > 0.0 {
                    grid.for_each_within(topo.tx[i], cfg.window_radius, |j, d2| {
                        if j != i {
                            list.push((j, d2.powf(params.alpha / 2.0) / s));
                        }
                    });
                }
                list.sort_unstable_by_key(|e| e.0);
                list
            })
            .collect();
        let n = topo.len();
        Ok(Self {
            cfg,
            lambda: params.lambda,
            unit_tail,
            neighbors,
            updates: 0,
            state: PolicyState {
                eta: vec![1.0; n],
                reported_a: vec![1.0; n],
                frame_len: cfg.frame_len,
                window_radius: cfg.window_radius,
                mean_a: 1.0,
            },
            trace: Vec::new(),
            max_residual: 0.0,
        })
    }

    pub fn neighbor_terms(&self, i: usize) -> Vec<(f64, f64)> {
        self.neighbors[i]
            .iter()
            .map(|&(j, d)| (d, self.state.reported_a[j]))
            .collect()
    }

    pub fn config(&self) -> &AdaptiveConfig {
        &self.cfg
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        write_trace_csv(path, &self.trace)
    }
}

impl AccessPolicy for AdaptivePolicy {
    fn initial(&mut self, topo: &BipolarTopology, _params: &SystemParams) -> Result<Vec<f64>> {
        if topo.len() != self.neighbors.len() {
            return Err(AoiError::Config("policy was built for another topology".into()));
        }
        Ok(self.state.eta.clone())
    }

    fn frame_len(&self) -> Option<u64> {
        Some(self.cfg.frame_len)
    }

    fn update(&mut self, frame_index: u64, busy_fraction: &[f64], eta: &mut [f64]) -> Result<()> {
        if self.cfg.freeze_after.is_some_and(|k| self.updates >= k) {
            return Ok(());
        }
        self.updates += 1;
        match self.cfg.variant {
            PolicyVariant::Proposed => {
                self.state.reported_a.copy_from_slice(busy_fraction);
            }
            PolicyVariant::DominantSystem => self.state.reported_a.iter_mut().for_each(|a| *a = 1.0),
        }
        self.state.mean_a = match (self.cfg.variant, self.cfg.mean_activity) {
            (PolicyVariant::DominantSystem, _) => 1.0,
            (_, MeanActivity::Fixed(v)) => v,
            (_, MeanActivity::Empirical) => {
                let n = self.state.reported_a.len().max(1);
                self.state.reported_a.iter().sum::<f64>() / n as f64
            }
        };
        let tail = self.unit_tail * self.state.mean_a;
        for i in 0..eta.len() {
            let terms = self.neighbor_terms(i);
            let e = solve_eta(&terms, tail)?;
            if e < 1.0 {
                self.max_residual = self.max_residual.max(eta_residual(e, &terms, tail).abs());
            }
            eta[i] = e;
            self.state.eta[i] = e;
            if self.cfg.record_trace {
                self.trace.push(TraceRow {
                    frame_index,
                    node_id: i,
                    eta: e,
                    reported_a: self.state.reported_a[i],
                });
            }
        }
        Ok(())
    }
}

/// Runs the simulator under the adaptive policy with default options.
pub fn run_algorithm1(
    topo: &BipolarTopology,
    params: &SystemParams,
    sim: &SimConfig,
    frame_len: u64,
    window_radius: f64,
) -> Result<SimMetrics> {
    let mut policy = AdaptivePolicy::new(topo, params, AdaptiveConfig::new(frame_len, window_radius))?;
    run(topo, params, sim, &mut policy)
}

/// Runs the simulator under an adaptive policy and returns it for
/// inspection of its state and trace.
pub fn run_adaptive(
    topo: &BipolarTopology,
    params: &SystemParams,
    sim: &SimConfig,
    cfg: AdaptiveConfig,
) -> Result<(SimMetrics, AdaptivePolicy)> {
    let mut policy = AdaptivePolicy::new(topo, params, cfg)?;
    let metrics = run(topo, params, sim, &mut policy)?;
    Ok((metrics, policy))
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| AoiError::io(path, e))?;
    writeln!(file, "{TRACE_SCHEMA}").map_err(|e| AoiError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["frame_index", "node_id", "eta", "reported_a"])?;
    for r in rows {
        w.write_record(&[
            r.frame_index.to_string(),
            r.node_id.to_string(),
            fmt_f(r.eta),
            fmt_f(r.reported_a),
        ])?;
    }
    w.flush().map_err(|e| AoiError::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn tail_limits() {
        let p = SystemParams::default();
        let d = p.derive().unwrap();
        assert_eq!(tail_integral(f64::INFINITY, 0.1, 0.5, &p, &d).unwrap(), 0.0);
        let full = tail_integral(0.0, 0.1, 0.5, &p, &d).unwrap();
        assert!((full - 0.1 * 0.5 * d.area_scale * d.c_alpha).abs() < 1e-13);
        assert!(tail_integral(1e6, 0.1, 0.5, &p, &d).unwrap() < 1e-9);
    }

    #[test]
    fn tail_arctangent_form() {
        let p = SystemParams {
            alpha: 4.0,
            theta: 1.0,
            r: 1.0,
            ..SystemParams::default()
        };
        let d = p.derive().unwrap();
        // 2πλa ∫_1^∞ ρ dρ/(1+ρ⁴) = πλa (π/2 - atan 1).
        let want = PI * 0.2 * 0.7 * (PI / 2.0 - 1f64.atan());
        let got = tail_integral(1.0, 0.2, 0.7, &p, &d).unwrap();
        assert!((got - want).abs() < 1e-9 * want);
    }

    #[test]
    fn eta_boundaries() {
        assert_eq!(solve_eta(&[], 0.0).unwrap(), 1.0);
        // 1/(1 + D - a) + tail = 1 exactly.
        assert_eq!(solve_eta(&[(1.0, 0.5)], 1.0 - 1.0 / 1.5).unwrap(), 1.0);
        let e = solve_eta(&[(0.2, 1.0), (0.3, 0.9)], 0.4).unwrap();
        assert!(e < 1.0 && eta_residual(e, &[(0.2, 1.0), (0.3, 0.9)], 0.4).abs() < 1e-9);
        assert!(solve_eta(&[(0.0, 0.5)], 0.0).is_err());
        assert!(solve_eta(&[(1.0, 1.5)], 0.0).is_err());
    }

    #[test]
    fn empty_window_success() {
        let p = SystemParams::default();
        let d = p.derive().unwrap();
        let topo = BipolarTopology::single_link(p.r, crate::params::Region::torus(50.0));
        let w = StoppingSet::around_rx(&topo, 0, 0.0);
        let got = conditional_success_given_window(0, &w, &topo, &[1.0], &[1.0], 0.6, &p, &d).unwrap();
        let want = (-d.noise_term).exp() * (-p.lambda * 0.6 * d.area_scale * d.c_alpha).exp();
        assert!((got - want).abs() < 1e-14);
    }
}
