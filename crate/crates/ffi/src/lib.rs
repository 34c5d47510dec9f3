//! C interface to `aoi-core`.
//!
//! Every function returns an [`AoiStatus`]; results go through out-pointers.
//! After a failure, [`aoi_last_error_message`] describes it. Objects are
//! opaque handles released with their matching `_free` function. Panics never
//! cross the boundary; they surface as [`AoiStatus::Panic`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use aoi_core::analysis::{network_avg_aoi, peak_outage};
use aoi_core::geometry::{sample_bipolar, BipolarTopology};
use aoi_core::meta::{solve_beta_fixed_point, solve_exact_fixed_point, ExactOptions, MetaDistribution};
use aoi_core::policy::{run_algorithm1, solve_eta};
use aoi_core::sim::{queue_oracle, run, ConstantAccess, SimConfig, SimMetrics};
use aoi_core::{AoiError, Region, SystemParams};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AoiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NonConvergent = 3,
    /// The requested mean is infinite; the out value is set to +inf.
    Divergent = 4,
    EmptyTopology = 5,
    Io = 6,
    Internal = 7,
    Panic = 8,
}

/// Model parameters in linear units.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoiParams {
    /// Transmitter density per square meter.
    pub lambda: f64,
    /// Link distance in meters.
    pub r: f64,
    /// Path-loss exponent, above 2.
    pub alpha: f64,
    /// SINR threshold.
    pub theta: f64,
    /// Channel access probability.
    pub p: f64,
    /// Packet arrival probability per slot.
    pub xi: f64,
    /// Transmit power in milliwatts.
    pub ptx: f64,
    /// Noise power in milliwatts; zero disables noise.
    pub sigma2: f64,
}

impl From<AoiParams> for SystemParams {
    fn from(p: AoiParams) -> Self {
        SystemParams {
            lambda: p.lambda,
            r: p.r,
            alpha: p.alpha,
            theta: p.theta,
            p: p.p,
            xi: p.xi,
            ptx: p.ptx,
            sigma2: p.sigma2,
        }
    }
}

impl From<SystemParams> for AoiParams {
    fn from(p: SystemParams) -> Self {
        AoiParams {
            lambda: p.lambda,
            r: p.r,
            alpha: p.alpha,
            theta: p.theta,
            p: p.p,
            xi: p.xi,
            ptx: p.ptx,
            sigma2: p.sigma2,
        }
    }
}

/// Network-level simulation results.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AoiSimSummary {
    pub avg_aoi: f64,
    pub peak_aoi_mean: f64,
    pub mean_success: f64,
    pub mean_busy: f64,
    pub links: u64,
    pub censored_links: u64,
}

/// A solved meta distribution.
pub struct AoiMetaDist {
    inner: MetaDistribution,
}

/// A bipolar topology on a torus.
pub struct AoiTopology {
    inner: BipolarTopology,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend_from_slice(msg.as_bytes());
    });
}

fn status_of(err: &AoiError) -> AoiStatus {
    match err {
        AoiError::InvalidParameter { .. } | AoiError::DivergingIntegral(_) | AoiError::Config(_) => {
            AoiStatus::InvalidArgument
        }
        AoiError::NonConvergent { .. } | AoiError::Quadrature { .. } => AoiStatus::NonConvergent,
        AoiError::InfiniteAge(_) => AoiStatus::Divergent,
        AoiError::EmptyTopology => AoiStatus::EmptyTopology,
        AoiError::Io { .. } | AoiError::Csv(_) | AoiError::Schema { .. } | AoiError::Json(_) => AoiStatus::Io,
        AoiError::KeyMismatch(_) => AoiStatus::Internal,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard<F: FnOnce() -> Result<AoiStatus, AoiError>>(f: F) -> AoiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => {
            if status == AoiStatus::Ok {
                set_error("");
            }
            status
        }
        Ok(Err(e)) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            AoiStatus::Panic
        }
    }
}

fn null(what: &str) -> Result<AoiStatus, AoiError> {
    set_error(&format!("null pointer: {what}"));
    Ok(AoiStatus::NullPointer)
}

macro_rules! deref {
    ($ptr:expr, $name:literal) => {
        match unsafe { $ptr.as_ref() } {
            Some(v) => v,
            None => return null($name),
        }
    };
}

macro_rules! out {
    ($ptr:expr, $name:literal) => {
        match unsafe { $ptr.as_mut() } {
            Some(v) => v,
            None => return null($name),
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aoi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default parameters: λ = 0.01, r = 0.5, α = 3.8, θ = 1, p = 1, ξ = 0.5,
/// 17 dBm transmit power and -90 dBm noise.
#[no_mangle]
pub extern "C" fn aoi_params_default() -> AoiParams {
    SystemParams::default().into()
}

/// Copies the message of the last failure on this thread into `buf`
/// (NUL-terminated, truncated to `len`) and returns the full message length.
#[no_mangle]
pub unsafe extern "C" fn aoi_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            std::ptr::copy_nonoverlapping(e.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Solves the Beta-approximated meta distribution.
#[no_mangle]
pub unsafe extern "C" fn aoi_meta_solve_beta(
    params: *const AoiParams,
    tol: f64,
    max_iter: u32,
    out: *mut *mut AoiMetaDist,
) -> AoiStatus {
    guard(|| {
        let params: SystemParams = (*deref!(params, "params")).into();
        let out = out!(out, "out");
        *out = std::ptr::null_mut();
        let derived = params.derive()?;
        let beta = solve_beta_fixed_point(&params, &derived, tol, max_iter.max(1) as usize)?;
        if !beta.converged {
            set_error("Beta fixed point did not converge");
            return Ok(AoiStatus::NonConvergent);
        }
        *out = Box::into_raw(Box::new(AoiMetaDist {
            inner: beta.distribution(),
        }));
        Ok(AoiStatus::Ok)
    })
}

/// Solves the full meta distribution by characteristic-function inversion,
/// starting from `start`.
#[no_mangle]
pub unsafe extern "C" fn aoi_meta_solve_exact(
    params: *const AoiParams,
    start: *const AoiMetaDist,
    out: *mut *mut AoiMetaDist,
) -> AoiStatus {
    guard(|| {
        let params: SystemParams = (*deref!(params, "params")).into();
        let start = deref!(start, "start");
        let out = out!(out, "out");
        *out = std::ptr::null_mut();
        let derived = params.derive()?;
        let sol = solve_exact_fixed_point(&params, &derived, &start.inner, &ExactOptions::default())?;
        if !sol.converged {
            set_error("exact fixed point did not converge");
            return Ok(AoiStatus::NonConvergent);
        }
        *out = Box::into_raw(Box::new(AoiMetaDist {
            inner: sol.distribution(),
        }));
        Ok(AoiStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn aoi_meta_free(dist: *mut AoiMetaDist) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// CDF of the success probability at `u`.
#[no_mangle]
pub unsafe extern "C" fn aoi_meta_cdf(dist: *const AoiMetaDist, u: f64, out: *mut f64) -> AoiStatus {
    guard(|| {
        let dist = deref!(dist, "dist");
        *out!(out, "out") = dist.inner.cdf(u);
        Ok(AoiStatus::Ok)
    })
}

/// Shapes of a Beta law; fails with `InvalidArgument` for other laws.
#[no_mangle]
pub unsafe extern "C" fn aoi_meta_beta_shapes(dist: *const AoiMetaDist, a: *mut f64, b: *mut f64) -> AoiStatus {
    guard(|| {
        let dist = deref!(dist, "dist");
        let a = out!(a, "a");
        let b = out!(b, "b");
        match dist.inner {
            MetaDistribution::Beta { a: sa, b: sb } => {
                *a = sa;
                *b = sb;
                Ok(AoiStatus::Ok)
            }
            _ => Err(AoiError::Config("distribution is not a Beta law".into())),
        }
    })
}

/// Network average age of information; `Divergent` with `+inf` when the
/// mean does not exist.
#[no_mangle]
pub unsafe extern "C" fn aoi_network_avg_aoi(dist: *const AoiMetaDist, xi: f64, p: f64, out: *mut f64) -> AoiStatus {
    guard(|| {
        let dist = deref!(dist, "dist");
        let out = out!(out, "out");
        let net = network_avg_aoi(&dist.inner, xi, p)?;
        *out = net.value;
        if net.divergent {
            set_error("network average age diverges");
            return Ok(AoiStatus::Divergent);
        }
        Ok(AoiStatus::Ok)
    })
}

/// Fraction of links whose mean peak age exceeds `a_threshold`.
#[no_mangle]
pub unsafe extern "C" fn aoi_peak_outage(
    dist: *const AoiMetaDist,
    a_threshold: f64,
    xi: f64,
    p: f64,
    out: *mut f64,
) -> AoiStatus {
    guard(|| {
        let dist = deref!(dist, "dist");
        *out!(out, "out") = peak_outage(a_threshold, &dist.inner, xi, p)?.probability;
        Ok(AoiStatus::Ok)
    })
}

/// Samples a Poisson bipolar network on a torus of side `side` meters.
#[no_mangle]
pub unsafe extern "C" fn aoi_topology_sample(
    params: *const AoiParams,
    side: f64,
    seed: u64,
    out: *mut *mut AoiTopology,
) -> AoiStatus {
    guard(|| {
        let params: SystemParams = (*deref!(params, "params")).into();
        let out = out!(out, "out");
        *out = std::ptr::null_mut();
        params.validate()?;
        let region = Region::torus(side);
        region.validate()?;
        *out = Box::into_raw(Box::new(AoiTopology {
            inner: sample_bipolar(&params, &region, seed),
        }));
        Ok(AoiStatus::Ok)
    })
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, AoiError> {
    if path.is_null() {
        return Err(AoiError::Config("null path".into()));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(Path::new)
        .map_err(|_| AoiError::Config("path is not UTF-8".into()))
}

/// Loads a topology CSV (`id, tx_x, tx_y, rx_x, rx_y`).
#[no_mangle]
pub unsafe extern "C" fn aoi_topology_read_csv(path: *const c_char, side: f64, out: *mut *mut AoiTopology) -> AoiStatus {
    guard(|| {
        let out = out!(out, "out");
        *out = std::ptr::null_mut();
        let region = Region::torus(side);
        region.validate()?;
        let topo = BipolarTopology::read_csv(path_arg(path)?, region)?;
        *out = Box::into_raw(Box::new(AoiTopology { inner: topo }));
        Ok(AoiStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn aoi_topology_write_csv(topo: *const AoiTopology, path: *const c_char) -> AoiStatus {
    guard(|| {
        let topo = deref!(topo, "topo");
        topo.inner.write_csv(path_arg(path)?)?;
        Ok(AoiStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn aoi_topology_len(topo: *const AoiTopology, out: *mut usize) -> AoiStatus {
    guard(|| {
        let topo = deref!(topo, "topo");
        *out!(out, "out") = topo.inner.len();
        Ok(AoiStatus::Ok)
    })
}

#[no_mangle]
pub unsafe extern "C" fn aoi_topology_free(topo: *mut AoiTopology) {
    if !topo.is_null() {
        drop(Box::from_raw(topo));
    }
}

fn summarize(m: &SimMetrics, out: &mut AoiSimSummary) -> Result<AoiStatus, AoiError> {
    let net = m.network()?;
    *out = AoiSimSummary {
        avg_aoi: net.avg_aoi,
        peak_aoi_mean: net.peak_aoi_mean,
        mean_success: net.mean_success,
        mean_busy: net.mean_busy,
        links: net.links as u64,
        censored_links: net.censored_links as u64,
    };
    Ok(AoiStatus::Ok)
}

/// Simulates `slots` slots (the first tenth discarded) with every node using
/// access probability `params.p`.
#[no_mangle]
pub unsafe extern "C" fn aoi_simulate(
    topo: *const AoiTopology,
    params: *const AoiParams,
    slots: u64,
    seed: u64,
    out: *mut AoiSimSummary,
) -> AoiStatus {
    guard(|| {
        let topo = deref!(topo, "topo");
        let params: SystemParams = (*deref!(params, "params")).into();
        let out = out!(out, "out");
        let m = run(&topo.inner, &params, &SimConfig::new(slots, seed), &mut ConstantAccess(params.p))?;
        summarize(&m, out)
    })
}

/// Simulates under the locally adaptive access policy with frames of
/// `frame_len` slots and observation radius `window_radius`.
#[no_mangle]
pub unsafe extern "C" fn aoi_simulate_adaptive(
    topo: *const AoiTopology,
    params: *const AoiParams,
    slots: u64,
    seed: u64,
    frame_len: u64,
    window_radius: f64,
    out: *mut AoiSimSummary,
) -> AoiStatus {
    guard(|| {
        let topo = deref!(topo, "topo");
        let params: SystemParams = (*deref!(params, "params")).into();
        let out = out!(out, "out");
        let m = run_algorithm1(&topo.inner, &params, &SimConfig::new(slots, seed), frame_len, window_radius)?;
        summarize(&m, out)
    })
}

/// Access probability from `n` neighbor terms `(d[j], a[j])` and a tail
/// term. `d` and `a` may be null when `n` is zero.
#[no_mangle]
pub unsafe extern "C" fn aoi_solve_eta(d: *const f64, a: *const f64, n: usize, tail: f64, out: *mut f64) -> AoiStatus {
    guard(|| {
        let out = out!(out, "out");
        let terms: Vec<(f64, f64)> = if n == 0 {
            Vec::new()
        } else {
            if d.is_null() || a.is_null() {
                return null("d or a");
            }
            let d = std::slice::from_raw_parts(d, n);
            let a = std::slice::from_raw_parts(a, n);
            d.iter().copied().zip(a.iter().copied()).collect()
        };
        *out = solve_eta(&terms, tail)?;
        Ok(AoiStatus::Ok)
    })
}

/// Simulates a single queue with per-slot success probability `s`.
#[no_mangle]
pub unsafe extern "C" fn aoi_queue_oracle(
    xi: f64,
    s: f64,
    slots: u64,
    seed: u64,
    avg_aoi: *mut f64,
    peak_aoi: *mut f64,
    busy_fraction: *mut f64,
) -> AoiStatus {
    guard(|| {
        let avg = out!(avg_aoi, "avg_aoi");
        let peak = out!(peak_aoi, "peak_aoi");
        let busy = out!(busy_fraction, "busy_fraction");
        let q = queue_oracle(xi, s, slots, seed)?;
        *avg = q.avg_aoi;
        *peak = q.peak_aoi;
        *busy = q.busy_fraction;
        Ok(AoiStatus::Ok)
    })
}
