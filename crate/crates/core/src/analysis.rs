//! Closed-form and semi-analytical age quantities.

use serde::{Deserialize, Serialize};

use crate::error::{AoiError, Result};
use crate::meta::MetaDistribution;
use crate::params::{DerivedParams, SystemParams};

fn check_xi(xi: f64) -> Result<()> {
    if xi > 0.0 && xi <= 1.0 {
        Ok(())
    } else {
        Err(AoiError::InvalidParameter {
            name: "xi",
            value: xi,
            reason: "must lie in (0, 1]",
        })
    }
}

fn check_service(p: f64, mu: f64) -> Result<f64> {
    let s = p * mu;
    if s == 0.0 {
        return Err(AoiError::InfiniteAge(s));
    }
    if !(s > 0.0 && s <= 1.0) || !(p > 0.0 && p <= 1.0) {
        return Err(AoiError::InvalidParameter {
            name: "p*mu",
            value: s,
            reason: "must lie in (0, 1]",
        });
    }
    Ok(s)
}

/// Average age of a link with arrival rate `xi`, access probability `p` and
/// per-attempt success probability `mu`: `1/ξ + 1/(pμ) - 1`.
pub fn cond_avg_aoi(xi: f64, p: f64, mu: f64) -> Result<f64> {
    check_xi(xi)?;
    let s = check_service(p, mu)?;
    Ok(1.0 / xi + 1.0 / s - 1.0)
}

/// Average peak age: `1/ξ + 1/(pμ) + 1/(1 - (1-ξ)(1-pμ)) - 2`.
pub fn cond_peak_aoi(xi: f64, p: f64, mu: f64) -> Result<f64> {
    check_xi(xi)?;
    let s = check_service(p, mu)?;
    Ok(1.0 / xi + 1.0 / s + 1.0 / (xi + (1.0 - xi) * s) - 2.0)
}

/// Probability that the buffer is non-empty when the access decision is
/// made: `ξ / (ξ + (1-ξ)pμ)`.
pub fn buffer_nonempty(xi: f64, p: f64, mu: f64) -> f64 {
    xi / (xi + (1.0 - xi) * p * mu)
}

/// Network average age, or a divergence flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkAoi {
    /// `+∞` when divergent.
    pub value: f64,
    pub divergent: bool,
    /// First Beta shape, when the law is Beta.
    pub lower_shape: Option<f64>,
}

impl NetworkAoi {
    fn divergent(lower_shape: Option<f64>) -> Self {
        Self {
            value: f64::INFINITY,
            divergent: true,
            lower_shape,
        }
    }
}

/// `1/ξ - 1 + E[1/(pT)]` where `T` follows `dist`.
///
/// Divergence is reported when the Beta lower shape is at most one, and when
/// `ξ = p = 1` with a non-degenerate law: every interferer is then always
/// active and `E[1/μ]` is infinite because the interference kernel is not
/// integrable at the receiver.
pub fn network_avg_aoi(dist: &MetaDistribution, xi: f64, p: f64) -> Result<NetworkAoi> {
    check_xi(xi)?;
    check_service(p, 1.0)?;
    let base = 1.0 / xi - 1.0;
    match dist {
        MetaDistribution::PointMass { at } => {
            if *at <= 0.0 {
                return Ok(NetworkAoi::divergent(None));
            }
            Ok(NetworkAoi {
                value: cond_avg_aoi(xi, p, *at)?,
                divergent: false,
                lower_shape: None,
            })
        }
        MetaDistribution::Beta { a, b } => {
            if *a <= 1.0 || (xi >= 1.0 && p >= 1.0) {
                return Ok(NetworkAoi::divergent(Some(*a)));
            }
            Ok(NetworkAoi {
                value: base + (a + b - 1.0) / ((a - 1.0) * p),
                divergent: false,
                lower_shape: Some(*a),
            })
        }
        MetaDistribution::Tabulated { .. } => {
            if xi >= 1.0 && p >= 1.0 {
                return Ok(NetworkAoi::divergent(None));
            }
            let inv = dist.expect(|t| 1.0 / t)?;
            Ok(NetworkAoi {
                value: base + inv / p,
                divergent: !inv.is_finite(),
                lower_shape: None,
            })
        }
    }
}

/// Network average age with the integral restricted to `t ≥ eps`
/// (renormalized), with the value at `eps / 10` for sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensoredAoi {
    pub eps: f64,
    pub value: f64,
    pub value_at_tenth: f64,
    /// Mass removed by the cut.
    pub cut_mass: f64,
}

pub fn network_avg_aoi_censored(
    dist: &MetaDistribution,
    xi: f64,
    p: f64,
    eps: f64,
) -> Result<CensoredAoi> {
    check_xi(xi)?;
    check_service(p, 1.0)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(AoiError::InvalidParameter {
            name: "eps",
            value: eps,
            reason: "must lie in (0, 1)",
        });
    }
    let at = |e: f64| -> Result<f64> {
        let kept = 1.0 - dist.cdf(e);
        let inv = dist.expect(|t| if t >= e { 1.0 / t } else { 0.0 })?;
        Ok(1.0 / xi - 1.0 + inv / (kept * p))
    };
    Ok(CensoredAoi {
        eps,
        value: at(eps)?,
        value_at_tenth: at(eps / 10.0)?,
        cut_mass: dist.cdf(eps),
    })
}

/// `E[ξ / (ξ + (1-ξ) p T)]`, the mean buffer occupancy under `dist`.
pub fn mean_buffer_occupancy(dist: &MetaDistribution, xi: f64, p: f64) -> Result<f64> {
    dist.expect(|t| buffer_nonempty(xi, p, t))
}

/// Roots of three algebraic forms of the threshold condition, kept for
/// diagnostics. Each is `None` when its discriminant is negative or the form
/// is undefined (`ξ = 1` or `c = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootCandidates {
    /// `(-ξ(1+c) + √(ξ²c² + 4ξc + 2ξ²c - 3ξ²)) / (2c(1-ξ)p)`.
    pub reduced_discriminant: Option<f64>,
    /// `(-ξ(1+c) + √([ξ(1+c)]² + 4ξc(1-ξ))) / (2c(1-ξ)p)`.
    pub sign_flipped: Option<f64>,
    /// Positive root of `c(1-ξ)X² + (cξ - 2 + ξ)X - ξ = 0`, divided by `p`;
    /// this is the form that follows from the peak-age expression.
    pub quadratic: Option<f64>,
}

impl RootCandidates {
    pub fn new(c: f64, xi: f64, p: f64) -> Self {
        let den = 2.0 * c * (1.0 - xi) * p;
        let form = |disc: f64| -> Option<f64> {
            if disc < 0.0 || den == 0.0 {
                None
            } else {
                Some((-xi * (1.0 + c) + disc.sqrt()) / den)
            }
        };
        let quadratic = {
            let qa = c * (1.0 - xi);
            let qb = c * xi - 2.0 + xi;
            let x = if qa == 0.0 {
                if qb != 0.0 {
                    Some(xi / qb)
                } else {
                    None
                }
            } else {
                let disc = qb * qb + 4.0 * qa * xi;
                (disc >= 0.0).then(|| {
                    // Cancellation-free form of the positive root.
                    2.0 * xi / (qb + disc.sqrt())
                })
            };
            x.filter(|v| v.is_finite()).map(|x| x / p)
        };
        Self {
            reduced_discriminant: form(xi * xi * c * c + 4.0 * xi * c + 2.0 * xi * xi * c - 3.0 * xi * xi),
            sign_flipped: form((xi * (1.0 + c)).powi(2) + 4.0 * xi * c * (1.0 - xi)),
            quadratic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakOutage {
    pub probability: f64,
    /// Success probability below which a link's mean peak age exceeds the
    /// threshold; `None` when no link can meet it or every link does.
    pub mu_th: Option<f64>,
    pub c: f64,
    /// `|peak(μ_th) - A|` at the returned root.
    pub residual: f64,
    pub candidates: RootCandidates,
}

/// `g(x) = 1/(px) + 1/(ξ + (1-ξ)px) - c`, i.e. mean peak age minus the
/// threshold.
pub fn peak_gap(x: f64, xi: f64, p: f64, c: f64) -> f64 {
    1.0 / (p * x) + 1.0 / (xi + (1.0 - xi) * p * x) - c
}

/// Fraction of links whose mean peak age exceeds `a_threshold`.
///
/// The mean peak age decreases in `μ`, so the event is `{μ < μ_th}` with
/// `μ_th` the root of [`peak_gap`], found by bisection.
pub fn peak_outage(a_threshold: f64, dist: &MetaDistribution, xi: f64, p: f64) -> Result<PeakOutage> {
    check_xi(xi)?;
    check_service(p, 1.0)?;
    if !(a_threshold > 0.0) {
        return Err(AoiError::InvalidParameter {
            name: "a_threshold",
            value: a_threshold,
            reason: "must be positive",
        });
    }
    let c = a_threshold + 2.0 - 1.0 / xi;
    let candidates = RootCandidates::new(c, xi, p);
    if a_threshold.is_infinite() {
        return Ok(PeakOutage {
            probability: 0.0,
            mu_th: None,
            c,
            residual: 0.0,
            candidates,
        });
    }
    let g1 = peak_gap(1.0, xi, p, c);
    if c <= 0.0 || g1 >= 0.0 {
        // Even μ = 1 misses the threshold.
        return Ok(PeakOutage {
            probability: 1.0,
            mu_th: None,
            c,
            residual: 0.0,
            candidates,
        });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // Seed the bracket with the quadratic root when it is consistent.
    if let Some(x) = candidates.quadratic.filter(|x| *x > 0.0 && *x < 1.0) {
        let step = 1e-9 * x.max(1e-300);
        if peak_gap(x - step, xi, p, c) > 0.0 {
            lo = x - step;
        }
        if peak_gap(x + step, xi, p, c) < 0.0 {
            hi = x + step;
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if lo == 0.0 && hi > 0.0 && mid < 1e-300 {
            break;
        }
        if peak_gap(mid, xi, p, c) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = if peak_gap(lo, xi, p, c).abs() < peak_gap(hi, xi, p, c).abs() && lo > 0.0 {
        lo
    } else {
        hi
    };
    let residual = peak_gap(root, xi, p, c).abs();
    Ok(PeakOutage {
        probability: cdf_left(dist, root),
        mu_th: Some(root),
        c,
        residual,
        candidates,
    })
}

/// `P(T < u)`.
fn cdf_left(dist: &MetaDistribution, u: f64) -> f64 {
    match dist {
        MetaDistribution::PointMass { at } => {
            if *at < u {
                1.0
            } else {
                0.0
            }
        }
        _ => dist.cdf(u),
    }
}

/// Principal branch of the Lambert W function for `x ≥ 0`, by Newton
/// iteration. Returns the root and the residual `|w e^w - x|`.
pub fn lambert_w0(x: f64) -> Result<(f64, f64)> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(AoiError::InvalidParameter {
            name: "x",
            value: x,
            reason: "Lambert W is evaluated for finite x >= 0 only",
        });
    }
    let mut w = (1.0 + x).ln();
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let next = w - f / (ew * (w + 1.0));
        if (next - w).abs() <= 1e-16 * next.abs().max(1e-300) {
            w = next;
            break;
        }
        w = next;
    }
    Ok((w, (w * w.exp() - x).abs()))
}

/// Closed-form results for limiting regimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeResults {
    /// Average age without interference: `1/ξ - 1 + e^{θr^α/ρ}/p`.
    pub noise_limited_aoi: f64,
    /// Lower bound obtained when all interferers are always backlogged with
    /// probability `ξ`: `1/ξ - 1 + exp(λπr²θ^δ C(α) pξ)/p`.
    pub bound_z: f64,
    /// Density beyond which the bound starts to grow faster than the
    /// interference-free term: `W₀(p)/(pπr²θ^δ C(α))`.
    pub lambda0: f64,
    pub lambert_residual: f64,
    /// Access probability minimizing the bound:
    /// `min{1, 1/(ξλπr²θ^δ C(α))}`.
    pub p_star: f64,
}

/// `Z(ξ, p) = 1/ξ - 1 + exp(λπr²θ^δ C(α) pξ)/p`.
pub fn bound_z(params: &SystemParams, derived: &DerivedParams, xi: f64, p: f64) -> f64 {
    let k = derived.density_scale(params.lambda) * derived.c_alpha;
    1.0 / xi - 1.0 + (k * p * xi).exp() / p
}

pub fn regime_results(params: &SystemParams, derived: &DerivedParams) -> Result<RegimeResults> {
    params.validate()?;
    let (xi, p) = (params.xi, params.p);
    let kc = derived.area_scale * derived.c_alpha;
    let (w, residual) = lambert_w0(p)?;
    let load = xi * params.lambda * kc;
    Ok(RegimeResults {
        noise_limited_aoi: 1.0 / xi - 1.0 + derived.noise_term.exp() / p,
        bound_z: bound_z(params, derived, xi, p),
        lambda0: w / (p * kc),
        lambert_residual: residual,
        p_star: if load <= 1.0 { 1.0 } else { 1.0 / load },
    })
}

/// Summary of the analysis at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoiReport {
    pub network_avg_aoi: f64,
    pub divergent: bool,
    pub peak_outage: f64,
    pub a_threshold: f64,
    pub bound_z: f64,
    /// Interference exponent of the favorable system below the noise exponent.
    pub noise_limited: bool,
    pub above_lambda0: bool,
}

pub fn aoi_report(
    params: &SystemParams,
    derived: &DerivedParams,
    dist: &MetaDistribution,
    a_threshold: f64,
) -> Result<AoiReport> {
    let net = network_avg_aoi(dist, params.xi, params.p)?;
    let out = peak_outage(a_threshold, dist, params.xi, params.p)?;
    let reg = regime_results(params, derived)?;
    let interference = derived.density_scale(params.lambda) * derived.c_alpha * params.p * params.xi;
    Ok(AoiReport {
        network_avg_aoi: net.value,
        divergent: net.divergent,
        peak_outage: out.probability,
        a_threshold,
        bound_z: reg.bound_z,
        noise_limited: interference < derived.noise_term,
        above_lambda0: params.lambda > reg.lambda0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditional_ages() {
        assert_eq!(cond_avg_aoi(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(cond_avg_aoi(0.5, 1.0, 0.5).unwrap(), 3.0);
        assert_eq!(cond_peak_aoi(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert!((cond_peak_aoi(0.5, 1.0, 0.5).unwrap() - 10.0 / 3.0).abs() < 1e-14);
        assert!(matches!(cond_avg_aoi(0.5, 1.0, 0.0), Err(AoiError::InfiniteAge(_))));
        assert!(cond_peak_aoi(0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn buffer_probability() {
        assert_eq!(buffer_nonempty(1.0, 0.3, 0.2), 1.0);
        assert!((buffer_nonempty(0.5, 1.0, 0.5) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn point_mass_reduces_to_conditional() {
        let d = MetaDistribution::PointMass { at: 0.8 };
        let n = network_avg_aoi(&d, 0.4, 0.7).unwrap();
        assert!((n.value - cond_avg_aoi(0.4, 0.7, 0.8).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn beta_divergence_flag() {
        let d = MetaDistribution::Beta { a: 0.9, b: 0.3 };
        assert!(network_avg_aoi(&d, 0.5, 1.0).unwrap().divergent);
        let d = MetaDistribution::Beta { a: 3.0, b: 0.3 };
        assert!(!network_avg_aoi(&d, 0.5, 1.0).unwrap().divergent);
        assert!(network_avg_aoi(&d, 1.0, 1.0).unwrap().divergent);
    }

    #[test]
    fn censored_variant_approaches_full_value() {
        let d = MetaDistribution::Beta { a: 3.0, b: 0.3 };
        let full = network_avg_aoi(&d, 0.5, 1.0).unwrap().value;
        let cut = network_avg_aoi_censored(&d, 0.5, 1.0, 1e-4).unwrap();
        assert!((cut.value - full).abs() < 1e-6);
        assert!(cut.cut_mass < 1e-10);
    }

    #[test]
    fn outage_edge_cases() {
        let d = MetaDistribution::Beta { a: 3.0, b: 0.3 };
        assert_eq!(peak_outage(0.5, &d, 1.0, 1.0).unwrap().probability, 1.0);
        assert_eq!(peak_outage(f64::INFINITY, &d, 0.5, 1.0).unwrap().probability, 0.0);
        let pm = MetaDistribution::PointMass { at: 0.5 };
        let peak = cond_peak_aoi(0.5, 1.0, 0.5).unwrap();
        assert_eq!(peak_outage(peak * 0.999, &pm, 0.5, 1.0).unwrap().probability, 1.0);
        assert_eq!(peak_outage(peak * 1.001, &pm, 0.5, 1.0).unwrap().probability, 0.0);
    }

    #[test]
    fn outage_root_solves_threshold() {
        let d = MetaDistribution::Beta { a: 3.0, b: 0.3 };
        for &xi in &[0.22, 0.3, 0.5, 0.8, 1.0] {
            let o = peak_outage(5.0, &d, xi, 1.0).unwrap();
            let mu = o.mu_th.unwrap();
            assert!((cond_peak_aoi(xi, 1.0, mu).unwrap() - 5.0).abs() < 1e-10);
            assert!(o.residual < 1e-10);
            if let Some(q) = o.candidates.quadratic {
                assert!((q - mu).abs() < 1e-12, "xi {xi}: {q} vs {mu}");
            }
        }
    }

    #[test]
    fn lambert_w_at_one() {
        let (w, r) = lambert_w0(1.0).unwrap();
        assert!((w - 0.567_143_290_409_783_8).abs() < 1e-15);
        assert!(r < 1e-12);
        assert_eq!(lambert_w0(0.0).unwrap().0, 0.0);
    }
}
