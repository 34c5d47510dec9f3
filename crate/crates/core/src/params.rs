//! Model constants, unit conversions and derived quantities.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{AoiError, Result};
use crate::quad::{integrate_zero_to_inf, QuadConfig};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    linear_to_db(mw)
}

/// Physical and protocol constants, all in linear units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Transmitter density (per m²).
    pub lambda: f64,
    /// Link distance (m).
    pub r: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// SINR decoding threshold.
    pub theta: f64,
    /// ALOHA access probability.
    pub p: f64,
    /// Per-slot packet arrival probability.
    pub xi: f64,
    /// Transmit power (mW).
    pub ptx: f64,
    /// Noise power (mW). Zero gives the noise-free limit.
    pub sigma2: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        ParamsConfig::default().to_params()
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, value: f64, reason: &'static str) -> Result<()> {
            Err(AoiError::InvalidParameter {
                name,
                value,
                reason,
            })
        }
        let all = [
            self.lambda,
            self.r,
            self.alpha,
            self.theta,
            self.p,
            self.xi,
            self.ptx,
            self.sigma2,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("params", f64::NAN, "all parameters must be finite");
        }
        if self.alpha <= 2.0 {
            return Err(AoiError::DivergingIntegral(self.alpha));
        }
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return bad("xi", self.xi, "must lie in (0, 1]");
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return bad("p", self.p, "must lie in (0, 1]");
        }
        if self.theta <= 0.0 {
            return bad("theta", self.theta, "must be positive");
        }
        if self.r <= 0.0 {
            return bad("r", self.r, "must be positive");
        }
        if self.lambda < 0.0 {
            return bad("lambda", self.lambda, "must be non-negative");
        }
        if self.ptx <= 0.0 {
            return bad("ptx", self.ptx, "must be positive");
        }
        if self.sigma2 < 0.0 {
            return bad("sigma2", self.sigma2, "must be non-negative");
        }
        Ok(())
    }

    pub fn derive(&self) -> Result<DerivedParams> {
        derive(self)
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = xi;
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.r = r;
        self
    }
}

/// Quantities computed once from [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Signal-to-noise ratio `ptx / sigma2` (infinite when noise-free).
    pub rho: f64,
    /// `2 / alpha`.
    pub delta: f64,
    /// `∫₀^∞ dv / (1 + v^{α/2})`.
    pub c_alpha: f64,
    /// `θ r^α / ρ`, the exponent of the noise-only success probability.
    pub noise_term: f64,
    /// Noise-only success probability `exp(-θ r^α / ρ)`.
    pub mu_max: f64,
    /// `π r² θ^δ`, the area scale of the interference exponent.
    pub area_scale: f64,
}

impl DerivedParams {
    /// `λ π r² θ^δ`, the interference exponent prefactor.
    pub fn density_scale(&self, lambda: f64) -> f64 {
        lambda * self.area_scale
    }
}

/// Closed form of `C(α)` via the reflection formula.
pub fn c_alpha_closed_form(alpha: f64) -> f64 {
    let x = 2.0 * PI / alpha;
    x / x.sin()
}

/// `C(α)` by adaptive quadrature.
pub fn c_alpha_quadrature(alpha: f64) -> Result<f64> {
    if alpha <= 2.0 {
        return Err(AoiError::DivergingIntegral(alpha));
    }
    let a = alpha / 2.0;
    let cfg = QuadConfig::with_tol(1e-14, 1e-13);
    Ok(integrate_zero_to_inf(|v: f64| 1.0 / (1.0 + v.powf(a)), a, &cfg)?.value)
}

pub fn derive(params: &SystemParams) -> Result<DerivedParams> {
    params.validate()?;
    let rho = params.ptx / params.sigma2;
    let delta = 2.0 / params.alpha;
    let noise_term = params.theta * params.r.powf(params.alpha) * params.sigma2 / params.ptx;
    Ok(DerivedParams {
        rho,
        delta,
        c_alpha: c_alpha_quadrature(params.alpha)?,
        noise_term,
        mu_max: (-noise_term).exp(),
        area_scale: PI * params.r * params.r * params.theta.powf(delta),
    })
}

/// Wrap-around behaviour of the simulation region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Torus,
    Open,
}

/// Square simulation region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub side: f64,
    #[serde(default)]
    pub boundary: Boundary,
}

impl Region {
    pub fn torus(side: f64) -> Self {
        Self {
            side,
            boundary: Boundary::Torus,
        }
    }

    pub fn open(side: f64) -> Self {
        Self {
            side,
            boundary: Boundary::Open,
        }
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    pub fn validate(&self) -> Result<()> {
        if self.side.is_finite() && self.side > 0.0 {
            Ok(())
        } else {
            Err(AoiError::InvalidParameter {
                name: "side",
                value: self.side,
                reason: "must be positive and finite",
            })
        }
    }
}

impl Default for Region {
    fn default() -> Self {
        Self::torus(200.0)
    }
}

/// Configuration-file view of [`SystemParams`], with powers and threshold in
/// decibels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub lambda: f64,
    pub r: f64,
    pub alpha: f64,
    pub theta_db: f64,
    pub p: f64,
    pub xi: f64,
    pub ptx_dbm: f64,
    /// Noise power in dBm, ignored when `noise_free` is set.
    pub sigma2_dbm: f64,
    pub noise_free: bool,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            r: 0.5,
            alpha: 3.8,
            theta_db: 0.0,
            p: 1.0,
            xi: 0.5,
            ptx_dbm: 17.0,
            sigma2_dbm: -90.0,
            noise_free: false,
        }
    }
}

impl ParamsConfig {
    pub fn to_params(&self) -> SystemParams {
        SystemParams {
            lambda: self.lambda,
            r: self.r,
            alpha: self.alpha,
            theta: db_to_linear(self.theta_db),
            p: self.p,
            xi: self.xi,
            ptx: dbm_to_mw(self.ptx_dbm),
            sigma2: if self.noise_free {
                0.0
            } else {
                dbm_to_mw(self.sigma2_dbm)
            },
        }
    }
}
