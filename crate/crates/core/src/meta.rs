//! Distribution of the per-link conditional success probability.
//!
//! The success probability `μ` of a typical link given the point process
//! solves a fixed-point equation: its law depends on the buffer occupancy of
//! the interferers, which in turn depends on their own success probabilities.
//! Two solvers are provided. [`solve_beta_fixed_point`] projects every iterate
//! onto a Beta law by matching the first two moments. [`solve_exact_fixed_point`]
//! iterates the full law, recovering the CDF from the characteristic function
//! of `ln μ` by a Gaussian-regularized Gil-Pelaez inversion.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{AoiError, Result};
use crate::params::{DerivedParams, SystemParams};
use crate::quad::{integrate, integrate_zero_to_inf, QuadConfig};
use crate::sim::fmt_f;

pub const CDF_SCHEMA: &str = "# aoi-cdf v1";

/// Transmit probability of an interferer whose own success probability is
/// `t`: `p` times its buffer non-empty probability.
#[inline]
pub fn interferer_activity(t: f64, p: f64, xi: f64) -> f64 {
    p * xi / (xi + (1.0 - xi) * p * t)
}

/// `∫₀^∞ (1 + v^{α/2})^{-k} dv` by quadrature.
pub fn power_kernel_integral(alpha: f64, k: u32, cfg: &QuadConfig) -> Result<f64> {
    let a = alpha / 2.0;
    let k = k as i32;
    Ok(integrate_zero_to_inf(|v: f64| (1.0 + v.powf(a)).powi(-k), a * k as f64, cfg)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Exact,
    Beta,
}

/// CDF sampled on an increasing grid of `u ∈ (0, 1)`, with `F(0) = 0` and
/// `F(1) = 1` implied and linear interpolation in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedCdf {
    pub u: Vec<f64>,
    pub f: Vec<f64>,
}

impl TabulatedCdf {
    /// Builds a table, clamping to `[0, 1]` and enforcing monotonicity with a
    /// running maximum.
    pub fn new(u: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if u.len() != f.len() || u.is_empty() {
            return Err(AoiError::Config("CDF table needs matching, non-empty columns".into()));
        }
        if u.windows(2).any(|w| !(w[0] < w[1])) || u[0] <= 0.0 || *u.last().unwrap() >= 1.0 {
            return Err(AoiError::Config("CDF grid must increase strictly inside (0, 1)".into()));
        }
        let mut run = 0.0f64;
        let f = f
            .into_iter()
            .map(|v| {
                let v = if v.is_nan() { run } else { v.clamp(0.0, 1.0) };
                run = run.max(v);
                run
            })
            .collect();
        Ok(Self { u, f })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let k = self.u.partition_point(|&g| g <= x);
        let (u0, f0) = if k == 0 { (0.0, 0.0) } else { (self.u[k - 1], self.f[k - 1]) };
        let (u1, f1) = if k == self.u.len() { (1.0, 1.0) } else { (self.u[k], self.f[k]) };
        f0 + (f1 - f0) * (x - u0) / (u1 - u0)
    }

    /// Cell masses placed at cell midpoints.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.u.len() + 1);
        let mut prev_u = 0.0;
        let mut prev_f = 0.0;
        for (&u, &f) in self.u.iter().zip(&self.f) {
            if f > prev_f {
                out.push((0.5 * (prev_u + u), f - prev_f));
            }
            prev_u = u;
            prev_f = f;
        }
        if prev_f < 1.0 {
            out.push((0.5 * (prev_u + 1.0), 1.0 - prev_f));
        }
        out
    }
}

/// Law of the conditional success probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetaDistribution {
    PointMass { at: f64 },
    Beta { a: f64, b: f64 },
    Tabulated { table: TabulatedCdf },
}

impl MetaDistribution {
    pub fn provenance(&self) -> Provenance {
        match self {
            MetaDistribution::Tabulated { .. } => Provenance::Exact,
            _ => Provenance::Beta,
        }
    }

    pub fn cdf(&self, u: f64) -> f64 {
        match self {
            MetaDistribution::PointMass { at } => {
                if u >= *at {
                    1.0
                } else {
                    0.0
                }
            }
            MetaDistribution::Beta { a, b } => {
                if u <= 0.0 {
                    0.0
                } else if u >= 1.0 {
                    1.0
                } else {
                    beta_reg(*a, *b, u)
                }
            }
            MetaDistribution::Tabulated { table } => table.cdf(u),
        }
    }

    /// `E[g(T)]`.
    pub fn expect<G: FnMut(f64) -> f64>(&self, mut g: G) -> Result<f64> {
        match self {
            MetaDistribution::PointMass { at } => Ok(g(*at)),
            MetaDistribution::Beta { a, b } => beta_expect(*a, *b, g),
            MetaDistribution::Tabulated { table } => {
                Ok(table.atoms().into_iter().map(|(t, w)| w * g(t)).sum())
            }
        }
    }

    pub fn mean(&self) -> Result<f64> {
        match self {
            MetaDistribution::Beta { a, b } => Ok(a / (a + b)),
            _ => self.expect(|t| t),
        }
    }

    pub fn second_moment(&self) -> Result<f64> {
        match self {
            MetaDistribution::Beta { a, b } => Ok(a * (a + 1.0) / ((a + b) * (a + b + 1.0))),
            _ => self.expect(|t| t * t),
        }
    }

    /// Probability mass strictly above `u`.
    pub fn mass_above(&self, u: f64) -> f64 {
        1.0 - self.cdf(u)
    }

    /// Discrete approximation by weighted atoms `(t, w)`.
    ///
    /// Beta laws are cut on a logit-spaced grid; each atom carries the exact
    /// cell mass at the exact conditional mean of its cell.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            MetaDistribution::PointMass { at } => vec![(*at, 1.0)],
            MetaDistribution::Tabulated { table } => table.atoms(),
            MetaDistribution::Beta { a, b } => {
                let (a, b) = (*a, *b);
                let grid = logit_grid(-36.0, 36.0, 0.1);
                let mean = a / (a + b);
                let mut out = Vec::with_capacity(grid.len() + 1);
                let mut prev = (0.0, 0.0, 0.0);
                let edges = grid.iter().copied().chain(std::iter::once(1.0));
                for x in edges {
                    let (f, g) = if x >= 1.0 {
                        (1.0, 1.0)
                    } else {
                        (beta_reg(a, b, x), beta_reg(a + 1.0, b, x))
                    };
                    let mass = f - prev.1;
                    if mass > 0.0 {
                        let first = mean * (g - prev.2);
                        let t = (first / mass).clamp(prev.0, x);
                        out.push((if t.is_finite() { t } else { 0.5 * (prev.0 + x) }, mass));
                    }
                    prev = (x, f, g);
                }
                out
            }
        }
    }
}

/// `1/(1+e^{-s})` for `s` on a uniform grid.
pub fn logit_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    let mut v: Vec<f64> = (0..=n)
        .map(|k| 1.0 / (1.0 + (-(lo + k as f64 * step)).exp()))
        .filter(|&u| u > 0.0 && u < 1.0)
        .collect();
    v.dedup();
    v
}

/// Quadrature settings for expectations of smooth functions.
pub const EXPECT_CFG: QuadConfig = QuadConfig {
    abs_tol: 1e-15,
    rel_tol: 1e-12,
    max_intervals: 2000,
};

/// Outer settings when the integrand is itself a quadrature result.
pub const NESTED_CFG: QuadConfig = QuadConfig {
    abs_tol: 1e-14,
    rel_tol: 1e-10,
    max_intervals: 2000,
};

fn beta_expect<G: FnMut(f64) -> f64>(a: f64, b: f64, g: G) -> Result<f64> {
    beta_expect_with(a, b, g, &EXPECT_CFG)
}

fn beta_expect_with<G: FnMut(f64) -> f64>(a: f64, b: f64, mut g: G, cfg: &QuadConfig) -> Result<f64> {
    let lnb = ln_beta(a, b);
    let m = a / (a + b);
    let sd = (a * b / ((a + b) * (a + b) * (a + b + 1.0))).sqrt();
    let mut cuts: Vec<f64> = [-10.0, -5.0, -2.0, 0.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|k| m + k * sd)
        .filter(|&x| x > 0.0 && x < 1.0)
        .collect();
    cuts.insert(0, 0.0);
    cuts.push(1.0);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (l, r) = (w[0], w[1]);
        let part = if l == 0.0 {
            // t = y^{1/a} absorbs t^{a-1}.
            let top = r.powf(a);
            let scale = (-lnb).exp() / a;
            integrate(
                |y: f64| {
                    let t = y.powf(1.0 / a);
                    g(t) * (1.0 - t).powf(b - 1.0) * scale
                },
                0.0,
                top,
                cfg,
            )?
            .value
        } else if r == 1.0 {
            // t = 1 - x^{1/b} absorbs (1-t)^{b-1}.
            let top = (1.0 - l).powf(b);
            let scale = (-lnb).exp() / b;
            integrate(
                |x: f64| {
                    let t = 1.0 - x.powf(1.0 / b);
                    g(t) * t.powf(a - 1.0) * scale
                },
                0.0,
                top,
                cfg,
            )?
            .value
        } else {
            integrate(
                |t: f64| g(t) * ((a - 1.0) * t.ln() + (b - 1.0) * (-t).ln_1p() - lnb).exp(),
                l,
                r,
                cfg,
            )?
            .value
        };
        total += part;
    }
    Ok(total)
}

fn check_dist(dist: &MetaDistribution) -> Result<()> {
    match dist {
        MetaDistribution::PointMass { at } if !(0.0..=1.0).contains(at) => {
            Err(AoiError::InvalidParameter {
                name: "point_mass",
                value: *at,
                reason: "must lie in [0, 1]",
            })
        }
        MetaDistribution::Beta { a, b } if !(*a > 0.0 && *b > 0.0) => Err(AoiError::InvalidParameter {
            name: "beta_shape",
            value: a.min(*b),
            reason: "Beta shapes must be positive",
        }),
        _ => Ok(()),
    }
}

/// Logarithm of `M(s) = E[μ^s]` where `μ` is the success probability of a
/// typical link whose interferers' success probabilities follow `dist`.
///
/// The complex power `(1 - w)^s` is evaluated as `exp(s ln(1 - w))` on the
/// principal branch, which sums the binomial series in closed form.
pub fn mgf_exponent(
    s: Complex64,
    dist: &MetaDistribution,
    derived: &DerivedParams,
    params: &SystemParams,
) -> Result<Complex64> {
    check_dist(dist)?;
    let noise = -s * derived.noise_term;
    let k = derived.density_scale(params.lambda);
    if k == 0.0 || s == Complex64::new(0.0, 0.0) {
        return Ok(noise);
    }
    let a = params.alpha / 2.0;
    let inner_cfg = QuadConfig::with_tol(1e-16, 1e-12);
    let inner = |q: f64| -> Result<Complex64> {
        Ok(integrate_zero_to_inf(
            |v: f64| {
                let w = q / (1.0 + v.powf(a));
                -exp_m1(s * (-w).ln_1p())
            },
            a,
            &inner_cfg,
        )?
        .value)
    };
    let interference = match dist {
        MetaDistribution::PointMass { at } => inner(interferer_activity(*at, params.p, params.xi))?,
        MetaDistribution::Tabulated { table } => {
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, w) in table.atoms() {
                acc += inner(interferer_activity(t, params.p, params.xi))? * w;
            }
            acc
        }
        MetaDistribution::Beta { a: ba, b: bb } => {
            let mut err = None;
            let re = beta_expect_with(
                *ba,
                *bb,
                |t| match inner(interferer_activity(t, params.p, params.xi)) {
                    Ok(v) => v.re,
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                },
                &NESTED_CFG,
            )?;
            let im = if s.im != 0.0 {
                beta_expect_with(
                    *ba,
                    *bb,
                    |t| match inner(interferer_activity(t, params.p, params.xi)) {
                        Ok(v) => v.im,
                        Err(e) => {
                            err.get_or_insert(e);
                            0.0
                        }
                    },
                    &NESTED_CFG,
                )?
            } else {
                0.0
            };
            if let Some(e) = err {
                return Err(e);
            }
            Complex64::new(re, im)
        }
    };
    Ok(noise - interference * k)
}

/// `e^z - 1` without cancellation for small `|z|`.
pub fn exp_m1(z: Complex64) -> Complex64 {
    let (sin, cos) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    Complex64::new(z.re.exp_m1() * cos - 2.0 * half * half, z.re.exp() * sin)
}

/// `η^{(k)} = (-1)^{k+1} ∫(1+v^{α/2})^{-k} dv · E[q(T)^k]`.
fn eta_terms(m: u32, q_moments: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let cfg = QuadConfig::with_tol(1e-15, 1e-13);
    (1..=m)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            Ok(sign * power_kernel_integral(alpha, k, &cfg)? * q_moments[k as usize - 1])
        })
        .collect()
}

fn moment_from_eta(m: u32, eta: &[f64], derived: &DerivedParams, lambda: f64) -> f64 {
    let mut binom = 1.0;
    let mut sum = 0.0;
    for k in 1..=m {
        binom *= (m - k + 1) as f64 / k as f64;
        sum += binom * eta[k as usize - 1];
    }
    (-(m as f64) * derived.noise_term - derived.density_scale(lambda) * sum).exp()
}

/// `E[μ^m]` through the finite binomial expansion of `1 - (1 - q w)^m`.
pub fn integer_moment(
    m: u32,
    dist: &MetaDistribution,
    derived: &DerivedParams,
    params: &SystemParams,
) -> Result<f64> {
    check_dist(dist)?;
    if m == 0 {
        return Ok(1.0);
    }
    let q_moments = activity_moments(dist, m, params)?;
    let eta = eta_terms(m, &q_moments, params.alpha)?;
    Ok(moment_from_eta(m, &eta, derived, params.lambda))
}

/// `E[q(T)^k]` for `k = 1..=m`.
fn activity_moments(dist: &MetaDistribution, m: u32, params: &SystemParams) -> Result<Vec<f64>> {
    (1..=m)
        .map(|k| dist.expect(|t| interferer_activity(t, params.p, params.xi).powi(k as i32)))
        .collect()
}

/// One step of the Beta-projected iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaIterate {
    pub c1: f64,
    pub c2: f64,
    /// Beta shapes fitted to `c1`, `c2`; `None` when the variance collapsed.
    pub shape: Option<(f64, f64)>,
    /// `|Δc1| + |Δc2|` relative to the previous iterate.
    pub step: f64,
}

/// Converged (or last) Beta projection of the meta distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaApprox {
    /// Mean of the success probability.
    pub kappa: f64,
    /// Second shape parameter; infinite for the point-mass fallback.
    pub beta: f64,
    pub c2: f64,
    pub point_mass: bool,
    pub iteration_count: usize,
    pub converged: bool,
    pub history: Vec<BetaIterate>,
}

impl BetaApprox {
    /// First shape parameter `κβ/(1-κ)`.
    pub fn alpha_shape(&self) -> f64 {
        self.kappa * self.beta / (1.0 - self.kappa)
    }

    pub fn distribution(&self) -> MetaDistribution {
        if self.point_mass {
            MetaDistribution::PointMass { at: self.kappa }
        } else {
            MetaDistribution::Beta {
                a: self.alpha_shape(),
                b: self.beta,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the new moments in a relaxed update; `None` is plain Picard.
    pub damping: Option<f64>,
}

impl Default for BetaOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
            damping: None,
        }
    }
}

/// Variance below which the fit falls back to a point mass.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Fits Beta shapes to the first two moments.
pub fn beta_from_moments(c1: f64, c2: f64) -> Option<(f64, f64)> {
    let var = c2 - c1 * c1;
    if !(var >= DEGENERATE_VARIANCE) || c1 <= 0.0 || c1 >= 1.0 {
        return None;
    }
    let total = (c1 - c2) / var;
    if !(total > 0.0) {
        return None;
    }
    Some((c1 * total, (1.0 - c1) * total))
}

pub fn solve_beta_fixed_point(
    params: &SystemParams,
    derived: &DerivedParams,
    tol: f64,
    max_iter: usize,
) -> Result<BetaApprox> {
    solve_beta_fixed_point_with(
        params,
        derived,
        &BetaOptions {
            tol,
            max_iter,
            damping: None,
        },
    )
}

/// Beta-projected fixed point iteration.
///
/// The iteration starts from the favorable system in which every interferer
/// keeps its buffer non-empty with probability `ξ`, i.e. `q ≡ pξ`.
pub fn solve_beta_fixed_point_with(
    params: &SystemParams,
    derived: &DerivedParams,
    opts: &BetaOptions,
) -> Result<BetaApprox> {
    if !(opts.tol > 0.0) {
        return Err(AoiError::InvalidParameter {
            name: "tol",
            value: opts.tol,
            reason: "must be positive",
        });
    }
    let cfg = QuadConfig::with_tol(1e-15, 1e-13);
    let w1 = power_kernel_integral(params.alpha, 1, &cfg)?;
    let w2 = power_kernel_integral(params.alpha, 2, &cfg)?;
    let q0 = params.p * params.xi;
    let mut q_moments = [q0, q0 * q0];
    let mut history: Vec<BetaIterate> = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    let mut converged = false;
    let mut dist = MetaDistribution::PointMass { at: 1.0 };
    for _ in 0..opts.max_iter {
        let eta = [w1 * q_moments[0], -w2 * q_moments[1]];
        let mut c1 = moment_from_eta(1, &eta, derived, params.lambda);
        let mut c2 = moment_from_eta(2, &eta, derived, params.lambda);
        if let (Some(w), Some((p1, p2))) = (opts.damping, prev) {
            c1 = w * c1 + (1.0 - w) * p1;
            c2 = w * c2 + (1.0 - w) * p2;
        }
        let shape = beta_from_moments(c1, c2);
        let step = prev.map_or(f64::INFINITY, |(p1, p2)| (c1 - p1).abs() + (c2 - p2).abs());
        history.push(BetaIterate { c1, c2, shape, step });
        dist = match shape {
            Some((a, b)) => MetaDistribution::Beta { a, b },
            None => MetaDistribution::PointMass { at: c1 },
        };
        prev = Some((c1, c2));
        if step < opts.tol {
            converged = true;
            break;
        }
        let m = activity_moments(&dist, 2, params)?;
        q_moments = [m[0], m[1]];
    }
    let last = *history.last().expect("max_iter is positive");
    let _ = dist;
    Ok(BetaApprox {
        kappa: last.c1,
        beta: last.shape.map_or(f64::INFINITY, |s| s.1),
        c2: last.c2,
        point_mass: last.shape.is_none(),
        iteration_count: history.len(),
        converged,
        history,
    })
}

/// Settings of the regularized Gil-Pelaez inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    /// Standard deviation of the Gaussian kernel applied to `ln μ`.
    pub smoothing: f64,
    /// Period of the midpoint frequency lattice in `ln u`; mass farther than
    /// this from the evaluation point aliases.
    pub period: f64,
    /// Frequencies are kept while the Gaussian window exceeds this value.
    pub window_tol: f64,
    /// Ratio between consecutive edges of the log-spaced Lévy bins.
    pub bin_ratio: f64,
    /// Smallest bin edge; the measure below it enters through its first
    /// moment.
    pub z_min: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            smoothing: 1e-3,
            period: 64.0,
            window_tol: 1e-8,
            bin_ratio: 1.01,
            z_min: 1e-14,
        }
    }
}

/// Error budget of one inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpDiagnostics {
    pub smoothing: f64,
    pub step: f64,
    pub nodes: usize,
    pub omega_max: f64,
    /// Bound on the contribution of the discarded frequencies.
    pub truncation_bound: f64,
    /// Mass of the current iterate that can alias, `F(u e^{-period})` at the
    /// smallest evaluated `u`.
    pub aliasing_bound: f64,
}

/// Piecewise-uniform representation of the Lévy measure of `-ln μ`
/// (interference part) in the variable `z = -ln(1 - q w)`.
#[derive(Debug, Clone)]
pub struct LevyTable {
    centers: Vec<f64>,
    halves: Vec<f64>,
    masses: Vec<f64>,
    /// `∫ z^n dν` for n = 1..=5 over the bins treated by series expansion
    /// (plus the first moment below `z_min`).
    small_moments: [f64; 5],
    split: usize,
    noise: f64,
    scale: f64,
}

impl LevyTable {
    /// `omega_max` decides which bins are expanded in series.
    pub fn new(
        atoms: &[(f64, f64)],
        derived: &DerivedParams,
        params: &SystemParams,
        cfg: &GpConfig,
        omega_max: f64,
    ) -> Self {
        let a = params.alpha / 2.0;
        let z_top = 60.0f64;
        let mut edges = vec![cfg.z_min];
        while *edges.last().unwrap() < z_top {
            let next = edges.last().unwrap() * cfg.bin_ratio;
            edges.push(next.min(z_top));
        }
        let nb = edges.len() - 1;
        let mut masses = vec![0.0; nb];
        let mut drift = 0.0;
        // v(z) solves -ln(1 - q/(1 + v^a)) = z; it decreases in z and hits 0
        // at z = -ln(1 - q).
        let v_of = |q: f64, z: f64| -> f64 {
            let w = -(-z).exp_m1() / q;
            if w >= 1.0 {
                0.0
            } else {
                (1.0 / w - 1.0).powf(1.0 / a)
            }
        };
        for &(t, weight) in atoms {
            if weight <= 0.0 {
                continue;
            }
            let q = interferer_activity(t, params.p, params.xi);
            if q <= 0.0 {
                continue;
            }
            let v_min = v_of(q, cfg.z_min);
            drift += weight * q * v_min.powf(1.0 - a) / (a - 1.0);
            let mut v_left = v_min;
            for (b, e) in edges[1..].iter().enumerate() {
                let v_right = v_of(q, *e);
                masses[b] += weight * (v_left - v_right);
                v_left = v_right;
                if v_right == 0.0 {
                    break;
                }
            }
            // Whatever lies beyond the last edge is placed in the last bin.
            masses[nb - 1] += weight * v_left;
        }
        let centers: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let halves: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[1] - w[0])).collect();
        let split = edges[1..].partition_point(|&e| e * omega_max <= 1e-2);
        let mut small_moments = [0.0; 5];
        small_moments[0] = drift;
        for b in 0..split {
            let (l, r) = (edges[b], edges[b + 1]);
            for (n, slot) in small_moments.iter_mut().enumerate() {
                let p = (n + 2) as i32;
                *slot += masses[b] * (r.powi(p) - l.powi(p)) / (p as f64 * (r - l));
            }
        }
        Self {
            centers,
            halves,
            masses,
            small_moments,
            split,
            noise: derived.noise_term,
            scale: derived.density_scale(params.lambda),
        }
    }

    /// `ln E[μ^{jω}]` on the lattice `ω_k = (k + 1/2) h`, `k = 0..n`.
    pub fn log_cf_lattice(&self, h: f64, n: usize) -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        let j = Complex64::new(0.0, 1.0);
        for (k, slot) in acc.iter_mut().enumerate() {
            let w = (k as f64 + 0.5) * h;
            let m = &self.small_moments;
            // 1 - e^{-jωz} = jωz + (ωz)²/2 - j(ωz)³/6 - (ωz)⁴/24 + j(ωz)⁵/120
            *slot = Complex64::new(
                w * w * m[1] / 2.0 - w.powi(4) * m[3] / 24.0,
                w * m[0] - w.powi(3) * m[2] / 6.0 + w.powi(5) * m[4] / 120.0,
            );
        }
        const RESYNC: usize = 256;
        for b in self.split..self.masses.len() {
            let mass = self.masses[b];
            if mass == 0.0 {
                continue;
            }
            let (zc, hw) = (self.centers[b], self.halves[b]);
            let rot_p = Complex64::from_polar(1.0, -h * zc);
            let rot_s = Complex64::from_polar(1.0, h * hw);
            let mut p = Complex64::new(0.0, 0.0);
            let mut s = Complex64::new(0.0, 0.0);
            for (k, slot) in acc.iter_mut().enumerate() {
                let w = (k as f64 + 0.5) * h;
                if k % RESYNC == 0 {
                    p = Complex64::from_polar(1.0, -w * zc);
                    s = Complex64::from_polar(1.0, w * hw);
                }
                let x = w * hw;
                let sinc = if x < 1e-4 { 1.0 - x * x / 6.0 } else { s.im / x };
                *slot += (Complex64::new(1.0, 0.0) - p * sinc) * mass;
                p *= rot_p;
                s *= rot_s;
            }
        }
        acc.iter()
            .enumerate()
            .map(|(k, v)| {
                let w = (k as f64 + 0.5) * h;
                -j * w * self.noise - v * self.scale
            })
            .collect()
    }

    /// `ln E[μ^{jω}]` at a single frequency.
    pub fn log_cf(&self, omega: f64) -> Complex64 {
        let h = 2.0 * omega;
        self.log_cf_lattice(h, 1)[0]
    }
}

/// Precomputed regularized Gil-Pelaez inversion for one iterate.
#[derive(Debug, Clone)]
pub struct GilPelaez {
    /// `φ(ω_k) W(ω_k) / (k + 1/2)`.
    coeffs: Vec<Complex64>,
    h: f64,
    pub diagnostics: GpDiagnostics,
}

impl GilPelaez {
    pub fn new(
        dist: &MetaDistribution,
        derived: &DerivedParams,
        params: &SystemParams,
        cfg: &GpConfig,
    ) -> Result<Self> {
        check_dist(dist)?;
        if !(cfg.smoothing > 0.0 && cfg.period > 0.0 && cfg.window_tol > 0.0 && cfg.window_tol < 1.0) {
            return Err(AoiError::Config("invalid Gil-Pelaez settings".into()));
        }
        let h = 2.0 * PI / cfg.period;
        let omega_max = (2.0 * (1.0 / cfg.window_tol).ln()).sqrt() / cfg.smoothing;
        let n = (omega_max / h).ceil() as usize;
        let table = LevyTable::new(&dist.atoms(), derived, params, cfg, omega_max);
        let logs = table.log_cf_lattice(h, n);
        let sig = cfg.smoothing;
        let coeffs = logs
            .into_iter()
            .enumerate()
            .map(|(k, l)| {
                let w = (k as f64 + 0.5) * h;
                (l - 0.5 * (sig * w).powi(2)).exp() / (k as f64 + 0.5)
            })
            .collect();
        let mut truncation = 0.0;
        let mut k = n;
        loop {
            let w = (k as f64 + 0.5) * h;
            let term = (-0.5 * (sig * w).powi(2)).exp() / (PI * (k as f64 + 0.5));
            truncation += term;
            if term < 1e-300 || k > n * 4 + 1000 {
                break;
            }
            k += 1;
        }
        Ok(Self {
            coeffs,
            h,
            diagnostics: GpDiagnostics {
                smoothing: cfg.smoothing,
                step: h,
                nodes: n,
                omega_max,
                truncation_bound: truncation,
                aliasing_bound: 0.0,
            },
        })
    }

    /// Smoothed CDF of `μ` at `u ∈ (0, 1]`.
    pub fn cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let y = u.ln();
        let rot = Complex64::from_polar(1.0, -self.h * y);
        let mut e = Complex64::new(0.0, 0.0);
        let mut sum = 0.0;
        for (k, c) in self.coeffs.iter().enumerate() {
            if k % 256 == 0 {
                e = Complex64::from_polar(1.0, -(k as f64 + 0.5) * self.h * y);
            }
            sum += (e * c).im;
            e *= rot;
        }
        0.5 - sum / PI
    }

    pub fn cdf_grid(&self, us: &[f64]) -> Vec<f64> {
        us.iter().map(|&u| self.cdf(u)).collect()
    }
}

/// Outcome of an inversion at a single point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpValue {
    pub value: f64,
    /// The raw estimate left `[0, 1]` by more than the error budget.
    pub clamped: bool,
    pub diagnostics: GpDiagnostics,
}

/// `F(u)` of the success probability of a typical link whose interferers
/// follow `dist`, by regularized Gil-Pelaez inversion.
pub fn gil_pelaez_cdf(
    u: f64,
    dist: &MetaDistribution,
    derived: &DerivedParams,
    params: &SystemParams,
    cfg: &GpConfig,
) -> Result<GpValue> {
    if !(u > 0.0 && u < 1.0) {
        return Err(AoiError::InvalidParameter {
            name: "u",
            value: u,
            reason: "must lie in (0, 1)",
        });
    }
    let gp = GilPelaez::new(dist, derived, params, cfg)?;
    let raw = gp.cdf(u);
    let mut diagnostics = gp.diagnostics;
    diagnostics.aliasing_bound = dist.cdf(u * (-cfg.period).exp());
    let budget = diagnostics.truncation_bound + diagnostics.aliasing_bound + 1e-9;
    Ok(GpValue {
        value: raw.clamp(0.0, 1.0),
        clamped: raw < -budget || raw > 1.0 + budget,
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactOptions {
    pub gp: GpConfig,
    /// Sup-norm change between consecutive tabulated iterates that stops the
    /// iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Logit range and step of the tabulation grid.
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_step: f64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            gp: GpConfig::default(),
            tol: 1e-4,
            max_iter: 30,
            grid_lo: -16.0,
            grid_hi: 16.0,
            grid_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub cdf: TabulatedCdf,
    pub iterations: usize,
    pub converged: bool,
    /// Sup-norm change per iteration.
    pub history: Vec<f64>,
    pub diagnostics: GpDiagnostics,
}

impl ExactSolution {
    pub fn distribution(&self) -> MetaDistribution {
        MetaDistribution::Tabulated {
            table: self.cdf.clone(),
        }
    }
}

/// Iterates the full law on a tabulation grid, starting from `start`.
pub fn solve_exact_fixed_point(
    params: &SystemParams,
    derived: &DerivedParams,
    start: &MetaDistribution,
    opts: &ExactOptions,
) -> Result<ExactSolution> {
    let grid = logit_grid(opts.grid_lo, opts.grid_hi, opts.grid_step);
    let mut dist = start.clone();
    let mut prev: Vec<f64> = grid.iter().map(|&u| dist.cdf(u)).collect();
    let mut history = Vec::new();
    let mut diagnostics = None;
    for _ in 0..opts.max_iter {
        let gp = GilPelaez::new(&dist, derived, params, &opts.gp)?;
        let mut diag = gp.diagnostics;
        diag.aliasing_bound = dist.cdf(grid[0] * (-opts.gp.period).exp());
        diagnostics = Some(diag);
        let table = TabulatedCdf::new(grid.clone(), gp.cdf_grid(&grid))?;
        let change = table
            .f
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        history.push(change);
        prev = table.f.clone();
        dist = MetaDistribution::Tabulated { table };
        if change < opts.tol {
            break;
        }
    }
    let converged = history.last().is_some_and(|&c| c < opts.tol);
    let MetaDistribution::Tabulated { table } = dist else {
        return Err(AoiError::NonConvergent {
            iterations: 0,
            last_step: f64::NAN,
        });
    };
    Ok(ExactSolution {
        cdf: table,
        iterations: history.len(),
        converged,
        history,
        diagnostics: diagnostics.expect("at least one iteration"),
    })
}

/// Largest absolute difference between two CDFs on a grid.
pub fn sup_distance<F: Fn(f64) -> f64, G: Fn(f64) -> f64>(grid: &[f64], f: F, g: G) -> f64 {
    grid.iter().map(|&u| (f(u) - g(u)).abs()).fold(0.0, f64::max)
}

/// Midpoints `(k - 1/2)/n`, `k = 1..=n`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|k| (k as f64 - 0.5) / n as f64).collect()
}

/// Empirical CDF of a sample, evaluated at `u`.
pub fn ecdf(sorted: &[f64], u: f64) -> f64 {
    sorted.partition_point(|&x| x <= u) as f64 / sorted.len() as f64
}

/// Writes `u` followed by one column per named CDF.
pub fn write_cdf_csv(path: &Path, grid: &[f64], columns: &[(&str, Vec<f64>)]) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| AoiError::io(path, e))?;
    writeln!(file, "{CDF_SCHEMA}").map_err(|e| AoiError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["u".to_string()];
    header.extend(columns.iter().map(|c| c.0.to_string()));
    w.write_record(&header)?;
    for (k, u) in grid.iter().enumerate() {
        let mut row = vec![fmt_f(*u)];
        row.extend(columns.iter().map(|c| fmt_f(c.1[k])));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| AoiError::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::c_alpha_closed_form;

    fn fig4(xi: f64) -> (SystemParams, DerivedParams) {
        let p = SystemParams::default().with_xi(xi);
        let d = p.derive().unwrap();
        (p, d)
    }

    #[test]
    fn power_kernel_matches_beta_function() {
        let cfg = QuadConfig::default();
        for &alpha in &[2.5, 3.8, 4.0, 5.5] {
            let a: f64 = alpha / 2.0;
            for k in 1..=4u32 {
                let want = (ln_beta(1.0 / a, k as f64 - 1.0 / a)).exp() / a;
                let got = power_kernel_integral(alpha, k, &cfg).unwrap();
                assert!((got - want).abs() < 1e-11 * want, "alpha {alpha} k {k}");
            }
            let c = power_kernel_integral(alpha, 1, &cfg).unwrap();
            assert!((c - c_alpha_closed_form(alpha)).abs() < 1e-10);
        }
    }

    #[test]
    fn beta_expectation_matches_closed_forms() {
        for &(a, b) in &[(3.19, 0.021), (0.4, 0.6), (50.0, 2.0), (400.0, 300.0), (2.0, 2.0)] {
            let d = MetaDistribution::Beta { a, b };
            let one = d.expect(|_| 1.0).unwrap();
            let mean = d.expect(|t| t).unwrap();
            assert!((one - 1.0).abs() < 1e-9, "({a},{b}) mass {one}");
            assert!((mean - a / (a + b)).abs() < 1e-9, "({a},{b}) mean {mean}");
            if a > 1.0 {
                let inv = d.expect(|t| 1.0 / t).unwrap();
                let want = (a + b - 1.0) / (a - 1.0);
                assert!((inv - want).abs() < 1e-8 * want, "({a},{b}) inv {inv} vs {want}");
            }
        }
    }

    #[test]
    fn beta_atoms_preserve_mean() {
        let d = MetaDistribution::Beta { a: 3.19, b: 0.021 };
        let atoms = d.atoms();
        let mass: f64 = atoms.iter().map(|a| a.1).sum();
        let mean: f64 = atoms.iter().map(|a| a.0 * a.1).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!((mean - 3.19 / 3.211).abs() < 1e-9);
    }

    #[test]
    fn mgf_trivial_cases() {
        let (p, d) = fig4(0.5);
        let dist = MetaDistribution::Beta { a: 3.0, b: 0.5 };
        let zero = mgf_exponent(Complex64::new(0.0, 0.0), &dist, &d, &p).unwrap();
        assert_eq!(zero, Complex64::new(0.0, 0.0));
        let p0 = p.with_lambda(0.0);
        let s = Complex64::new(1.5, -2.0);
        let v = mgf_exponent(s, &dist, &d, &p0).unwrap();
        assert_eq!(v, -s * d.noise_term);
    }

    #[test]
    fn mgf_point_mass_at_one_is_favorable_system() {
        let (p, d) = fig4(0.3);
        let dist = MetaDistribution::PointMass { at: 1.0 };
        let v = mgf_exponent(Complex64::new(1.0, 0.0), &dist, &d, &p).unwrap();
        let want = -d.noise_term - p.lambda * d.area_scale * d.c_alpha * p.p * p.xi;
        assert!((v.re - want).abs() < 1e-12 && v.im.abs() < 1e-15);
    }

    #[test]
    fn integer_moment_agrees_with_mgf() {
        let (p, d) = fig4(0.5);
        for dist in [
            MetaDistribution::Beta { a: 3.19, b: 0.021 },
            MetaDistribution::Beta { a: 1.5, b: 2.0 },
            MetaDistribution::PointMass { at: 0.7 },
        ] {
            for m in 1..=3u32 {
                let a = integer_moment(m, &dist, &d, &p).unwrap();
                let b = mgf_exponent(Complex64::new(m as f64, 0.0), &dist, &d, &p).unwrap().exp();
                assert!((a - b.norm()).abs() < 1e-8, "m={m}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_density_collapses_to_point_mass() {
        let (p, d) = fig4(0.5);
        let sol = solve_beta_fixed_point(&p.with_lambda(0.0), &d, 1e-12, 20).unwrap();
        assert!(sol.point_mass && sol.converged);
        assert!((sol.kappa - d.mu_max).abs() < 1e-15);
    }

    #[test]
    fn moment_matching_is_exact_at_every_iterate() {
        let (p, d) = fig4(0.5);
        let sol = solve_beta_fixed_point(&p, &d, 1e-12, 50).unwrap();
        assert!(sol.converged);
        assert!(sol.iteration_count < 10);
        for it in &sol.history {
            let (a, b) = it.shape.unwrap();
            let m1 = a / (a + b);
            let m2 = a * (a + 1.0) / ((a + b) * (a + b + 1.0));
            assert!((m1 - it.c1).abs() < 1e-9 && (m2 - it.c2).abs() < 1e-9);
        }
    }

    #[test]
    fn tabulated_cdf_repairs_input() {
        let t = TabulatedCdf::new(vec![0.2, 0.4, 0.6], vec![0.1, 0.05, 1.3]).unwrap();
        assert_eq!(t.f, vec![0.1, 0.1, 1.0]);
        assert_eq!(t.cdf(0.0), 0.0);
        assert_eq!(t.cdf(1.0), 1.0);
        assert!((t.cdf(0.1) - 0.05).abs() < 1e-15);
        assert!(TabulatedCdf::new(vec![0.4, 0.2], vec![0.0, 0.0]).is_err());
    }
}
