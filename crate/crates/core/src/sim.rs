//! Slot-synchronous simulation of LCFS-with-replacement queues under slotted
//! ALOHA with SINR-based delivery.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{AoiError, Result};
use crate::geometry::{torus_distance_sq, BipolarTopology, CellGrid};
use crate::params::{DerivedParams, SystemParams};
use crate::rng::stream_rng;

pub const LINKS_SCHEMA: &str = "# aoi-links v1";

/// Bernoulli draw that consumes no randomness when `prob >= 1`, so runs that
/// differ only in whether a probability is exactly one stay bit-identical.
#[inline]
pub fn gate<R: Rng>(rng: &mut R, prob: f64) -> bool {
    if prob >= 1.0 {
        true
    } else {
        rng.gen::<f64>() < prob
    }
}

/// How the interference-plus-noise success event is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Engine {
    /// Fresh unit-mean exponential fade for every directed pair in every
    /// slot; cost grows with the square of the number of active links.
    Explicit,
    /// All fades fixed to one.
    Frozen,
    /// Samples the same Rayleigh success event through independent
    /// per-interferer "kill" trials. Interferers whose kill probability can
    /// exceed `bound` are checked one by one; the rest are visited by
    /// geometric skipping. `bound = None` picks a value from the geometry.
    #[default]
    Thinned,
    ThinnedWithBound { bound: f64 },
}

/// Per-link state of the unit buffer and the age process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    pub buffer_occupied: bool,
    pub gen_time: i64,
    pub aoi: u64,
    pub latest_delivered_gen: Option<i64>,
}

impl Default for LinkState {
    fn default() -> Self {
        Self {
            buffer_occupied: false,
            gen_time: 0,
            aoi: 1,
            latest_delivered_gen: None,
        }
    }
}

impl LinkState {
    /// Arrival phase of slot `t`: a new packet replaces any buffered one.
    #[inline]
    pub fn arrive(&mut self, t: i64) {
        self.buffer_occupied = true;
        self.gen_time = t;
    }

    /// Age-update phase of slot `t`. Returns the age value that preceded the
    /// delivery when one occurred.
    #[inline]
    pub fn finish_slot(&mut self, t: i64, delivered: bool) -> Option<u64> {
        if delivered {
            debug_assert!(self.buffer_occupied);
            let peak = self.aoi;
            self.aoi = (t - self.gen_time + 1) as u64;
            self.buffer_occupied = false;
            self.latest_delivered_gen = Some(self.gen_time);
            Some(peak)
        } else {
            self.aoi += 1;
            None
        }
    }
}

/// Run-length configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub slots: u64,
    pub warmup: u64,
    pub seed: u64,
    pub engine: Engine,
    /// Verify the age recursion and the buffer discipline every slot.
    pub check_invariants: bool,
}

impl SimConfig {
    /// `slots` total with the default 10% warmup.
    pub fn new(slots: u64, seed: u64) -> Self {
        Self {
            slots,
            warmup: slots / 10,
            seed,
            engine: Engine::default(),
            check_invariants: false,
        }
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn with_warmup(mut self, warmup: u64) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn checked(mut self) -> Self {
        self.check_invariants = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.slots <= self.warmup {
            return Err(AoiError::Config(format!(
                "slots ({}) must exceed warmup ({})",
                self.slots, self.warmup
            )));
        }
        Ok(())
    }
}

/// Source of per-node access probabilities.
pub trait AccessPolicy {
    /// Access probabilities for the first slot.
    fn initial(&mut self, topo: &BipolarTopology, params: &SystemParams) -> Result<Vec<f64>>;

    /// Slots between updates, `None` for a static policy.
    fn frame_len(&self) -> Option<u64> {
        None
    }

    /// Called at the start of every frame after the first with the
    /// per-node busy fraction observed over the previous frame.
    fn update(&mut self, _frame_index: u64, _busy_fraction: &[f64], _eta: &mut [f64]) -> Result<()> {
        Ok(())
    }
}

/// Classic slotted ALOHA with a common access probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantAccess(pub f64);

impl AccessPolicy for ConstantAccess {
    fn initial(&mut self, topo: &BipolarTopology, _params: &SystemParams) -> Result<Vec<f64>> {
        if !(self.0 > 0.0 && self.0 <= 1.0) {
            return Err(AoiError::InvalidParameter {
                name: "p",
                value: self.0,
                reason: "must lie in (0, 1]",
            });
        }
        Ok(vec![self.0; topo.len()])
    }
}

/// Fixed, possibly heterogeneous, access probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticAccess(pub Vec<f64>);

impl AccessPolicy for StaticAccess {
    fn initial(&mut self, topo: &BipolarTopology, _params: &SystemParams) -> Result<Vec<f64>> {
        if self.0.len() != topo.len() {
            return Err(AoiError::Config(format!(
                "{} access probabilities for {} links",
                self.0.len(),
                topo.len()
            )));
        }
        Ok(self.0.clone())
    }
}

/// Statistics of one link after warmup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub avg_aoi: f64,
    /// Mean of the age values observed just before deliveries; infinite when
    /// nothing was delivered.
    pub peak_aoi_mean: f64,
    pub emp_success: f64,
    pub emp_busy: f64,
    pub attempts: u64,
    pub deliveries: u64,
    /// No delivery after warmup; the average age is only a lower bound.
    pub censored: bool,
}

/// Averages over links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkMetrics {
    /// Mean of link average ages over uncensored links.
    pub avg_aoi: f64,
    pub peak_aoi_mean: f64,
    pub mean_success: f64,
    pub mean_busy: f64,
    pub links: usize,
    pub censored_links: usize,
    pub divergent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub links: Vec<LinkMetrics>,
    pub slots_measured: u64,
}

impl SimMetrics {
    /// Concatenates link statistics of independent runs.
    pub fn merge<I: IntoIterator<Item = SimMetrics>>(runs: I) -> SimMetrics {
        let mut links = Vec::new();
        let mut slots = 0;
        for m in runs {
            links.extend(m.links);
            slots = slots.max(m.slots_measured);
        }
        SimMetrics {
            links,
            slots_measured: slots,
        }
    }

    pub fn network(&self) -> Result<NetworkMetrics> {
        if self.links.is_empty() {
            return Err(AoiError::EmptyTopology);
        }
        let n = self.links.len();
        let live: Vec<&LinkMetrics> = self.links.iter().filter(|l| !l.censored).collect();
        let mean = |f: &dyn Fn(&LinkMetrics) -> f64, set: &[&LinkMetrics]| {
            if set.is_empty() {
                f64::INFINITY
            } else {
                set.iter().map(|l| f(l)).sum::<f64>() / set.len() as f64
            }
        };
        let all: Vec<&LinkMetrics> = self.links.iter().collect();
        Ok(NetworkMetrics {
            avg_aoi: mean(&|l| l.avg_aoi, &live),
            peak_aoi_mean: mean(&|l| l.peak_aoi_mean, &live),
            mean_success: mean(&|l| l.emp_success, &all),
            mean_busy: mean(&|l| l.emp_busy, &all),
            links: n,
            censored_links: n - live.len(),
            divergent: live.len() < n,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| AoiError::io(path, e))?;
        self.write_to(file).map_err(|e| match e {
            AoiError::Csv(c) => AoiError::Csv(c),
            other => other,
        })
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{LINKS_SCHEMA}").map_err(|e| AoiError::io("<links csv>", e))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "link_id",
            "emp_success",
            "emp_busy",
            "avg_aoi",
            "peak_aoi_mean",
            "attempts",
            "deliveries",
            "censored",
        ])?;
        for (i, l) in self.links.iter().enumerate() {
            w.write_record(&[
                i.to_string(),
                fmt_f(l.emp_success),
                fmt_f(l.emp_busy),
                fmt_f(l.avg_aoi),
                fmt_f(l.peak_aoi_mean),
                l.attempts.to_string(),
                l.deliveries.to_string(),
                u8::from(l.censored).to_string(),
            ])?;
        }
        if let Ok(net) = self.network() {
            w.write_record(&[
                "network".to_string(),
                fmt_f(net.mean_success),
                fmt_f(net.mean_busy),
                fmt_f(net.avg_aoi),
                fmt_f(net.peak_aoi_mean),
                String::new(),
                String::new(),
                net.censored_links.to_string(),
            ])?;
        }
        w.flush().map_err(|e| AoiError::io("<links csv>", e))?;
        Ok(())
    }
}

/// Shortest round-trip representation, used for all numeric CSV output.
pub fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

/// Fraction of links whose mean peak age exceeds `a_threshold`. Links with no
/// delivery count as exceeding every finite threshold.
pub fn peak_outage_empirical(metrics: &SimMetrics, a_threshold: f64) -> f64 {
    if metrics.links.is_empty() {
        return f64::NAN;
    }
    let out = metrics
        .links
        .iter()
        .filter(|l| l.peak_aoi_mean > a_threshold)
        .count();
    out as f64 / metrics.links.len() as f64
}

/// Topology-dependent data shared by runs that differ only in access policy
/// or seed.
#[derive(Debug, Clone)]
pub struct PreparedNetwork {
    topo: BipolarTopology,
    params: SystemParams,
    derived: DerivedParams,
    engine: Engine,
    /// Signal path gain `ptx r_i^{-α}` used by the explicit engines.
    signal: Vec<f64>,
    /// Near interferers per receiver: (transmitter, kill probability).
    near: Vec<Vec<(u32, f64)>>,
    near_radius_sq: f64,
    bound: f64,
}

impl PreparedNetwork {
    pub fn new(topo: &BipolarTopology, params: &SystemParams, engine: Engine) -> Result<Self> {
        let derived = params.derive()?;
        let n = topo.len();
        let signal = (0..n)
            .map(|i| params.ptx * topo.link_length(i).powf(-params.alpha))
            .collect();
        let mut prepared = Self {
            topo: topo.clone(),
            params: *params,
            derived,
            engine,
            signal,
            near: Vec::new(),
            near_radius_sq: 0.0,
            bound: 1.0,
        };
        let bound = match engine {
            Engine::Thinned => Some(auto_bound(params, topo)),
            Engine::ThinnedWithBound { bound } => Some(bound),
            _ => None,
        };
        if let Some(bound) = bound {
            if !(bound > 0.0 && bound < 1.0) {
                return Err(AoiError::InvalidParameter {
                    name: "bound",
                    value: bound,
                    reason: "thinning bound must lie in (0, 1)",
                });
            }
            // Kill probability k(d) = s/(s + d^α) with s = θ r^α; k(d) ≤ bound
            // for d ≥ R_c.
            let s = params.theta * params.r.powf(params.alpha);
            let rc = (s * (1.0 / bound - 1.0)).powf(1.0 / params.alpha);
            let grid = CellGrid::new(&topo.tx, &topo.region, rc.max(topo.region.side / 512.0));
            prepared.near = (0..n)
                .map(|i| {
                    let mut list = Vec::new();
                    grid.for_each_within(topo.rx[i], rc, |j, d2| {
                        if j != i {
                            list.push((j as u32, kill_prob(s, d2, params.alpha)));
                        }
                    });
                    list.sort_unstable_by_key(|e| e.0);
                    list
                })
                .collect();
            prepared.near_radius_sq = rc * rc;
            prepared.bound = bound;
        }
        Ok(prepared)
    }

    pub fn topology(&self) -> &BipolarTopology {
        &self.topo
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    /// Probability bound used by the thinned engine.
    pub fn thinning_bound(&self) -> Option<f64> {
        match self.engine {
            Engine::Thinned | Engine::ThinnedWithBound { .. } => Some(self.bound),
            _ => None,
        }
    }

    /// Exact per-slot success probability of link `i` when the links in
    /// `active` transmit (Rayleigh fading).
    pub fn success_probability(&self, i: usize, active: &[usize]) -> f64 {
        let s = self.params.theta * self.params.r.powf(self.params.alpha);
        let mut log_p = -self.derived.noise_term;
        for &j in active {
            if j != i {
                let d2 = torus_distance_sq(self.topo.tx[j], self.topo.rx[i], &self.topo.region);
                log_p += (1.0 - kill_prob(s, d2, self.params.alpha)).ln();
            }
        }
        log_p.exp()
    }

    fn succeeds(
        &self,
        i: usize,
        active: &[usize],
        is_active: &[bool],
        rng: &mut ChaCha8Rng,
    ) -> bool {
        let p = &self.params;
        match self.engine {
            Engine::Explicit | Engine::Frozen => {
                let fade = |rng: &mut ChaCha8Rng| -> f64 {
                    if self.engine == Engine::Explicit {
                        rng.sample(Exp1)
                    } else {
                        1.0
                    }
                };
                let sig = fade(rng) * self.signal[i];
                let mut interference = 0.0;
                for &j in active {
                    if j != i {
                        let d2 = torus_distance_sq(self.topo.tx[j], self.topo.rx[i], &self.topo.region);
                        interference += fade(rng) * p.ptx * d2.powf(-p.alpha / 2.0);
                    }
                }
                sig > p.theta * (interference + p.sigma2)
            }
            Engine::Thinned | Engine::ThinnedWithBound { .. } => {
                if self.derived.noise_term > 0.0 && rng.gen::<f64>() >= self.derived.mu_max {
                    return false;
                }
                for &(j, k) in &self.near[i] {
                    if is_active[j as usize] && rng.gen::<f64>() < k {
                        return false;
                    }
                }
                // Far interferers, each checked with probability `bound`.
                let s = p.theta * p.r.powf(p.alpha);
                let log_q = (1.0 - self.bound).ln();
                let mut pos = geometric_skip(rng, log_q);
                while pos < active.len() {
                    let j = active[pos];
                    if j != i {
                        let d2 = torus_distance_sq(self.topo.tx[j], self.topo.rx[i], &self.topo.region);
                        if d2 > self.near_radius_sq {
                            let k = kill_prob(s, d2, p.alpha);
                            if rng.gen::<f64>() * self.bound < k {
                                return false;
                            }
                        }
                    }
                    pos = pos.saturating_add(1).saturating_add(geometric_skip(rng, log_q));
                }
                true
            }
        }
    }
}

#[inline]
fn kill_prob(s: f64, d2: f64, alpha: f64) -> f64 {
    let da = d2.powf(alpha / 2.0);
    s / (s + da)
}

/// Number of failures before the first success of a Bernoulli sequence with
/// failure log-probability `log_q`.
#[inline]
fn geometric_skip(rng: &mut ChaCha8Rng, log_q: f64) -> usize {
    let u: f64 = 1.0 - rng.gen::<f64>();
    let k = (u.ln() / log_q).floor();
    if k >= usize::MAX as f64 {
        usize::MAX
    } else {
        k as usize
    }
}

/// Balances near-list length against far-candidate count.
fn auto_bound(params: &SystemParams, topo: &BipolarTopology) -> f64 {
    let area = topo.region.area();
    let s = std::f64::consts::PI * params.r * params.r * params.theta.powf(2.0 / params.alpha);
    (s / area)
        .powf(params.alpha / (params.alpha + 2.0))
        .clamp(1e-4, 0.05)
}

/// Runs the slot loop on a fresh topology.
pub fn run(
    topo: &BipolarTopology,
    params: &SystemParams,
    cfg: &SimConfig,
    policy: &mut dyn AccessPolicy,
) -> Result<SimMetrics> {
    let prepared = PreparedNetwork::new(topo, params, cfg.engine)?;
    run_prepared(&prepared, cfg, policy)
}

/// Runs the slot loop on a prepared network. The engine stored in the
/// prepared network takes precedence over `cfg.engine`.
pub fn run_prepared(
    net: &PreparedNetwork,
    cfg: &SimConfig,
    policy: &mut dyn AccessPolicy,
) -> Result<SimMetrics> {
    cfg.validate()?;
    let n = net.topo.len();
    let params = &net.params;
    let mut eta = policy.initial(&net.topo, params)?;
    if eta.len() != n {
        return Err(AoiError::Config("policy returned wrong number of probabilities".into()));
    }
    let frame = policy.frame_len();
    if frame == Some(0) {
        return Err(AoiError::Config("frame length must be at least 1".into()));
    }

    let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|i| stream_rng(cfg.seed, i as u64)).collect();
    let mut state = vec![LinkState::default(); n];
    let mut busy_frame = vec![0u64; n];
    let mut busy_fraction = vec![0.0; n];

    let mut sum_aoi = vec![0u64; n];
    let mut sum_peak = vec![0u64; n];
    let mut attempts = vec![0u64; n];
    let mut deliveries = vec![0u64; n];
    let mut busy_slots = vec![0u64; n];

    let mut active: Vec<usize> = Vec::with_capacity(n);
    let mut is_active = vec![false; n];
    let mut delivered = vec![false; n];

    for t in 0..cfg.slots {
        if let Some(fl) = frame {
            if t > 0 && t % fl == 0 {
                for (f, b) in busy_fraction.iter_mut().zip(&busy_frame) {
                    *f = *b as f64 / fl as f64;
                }
                policy.update(t / fl, &busy_fraction, &mut eta)?;
                busy_frame.iter_mut().for_each(|b| *b = 0);
            }
        }
        let measuring = t >= cfg.warmup;
        let ti = t as i64;
        active.clear();
        for i in 0..n {
            let rng = &mut rngs[i];
            if gate(rng, params.xi) {
                state[i].arrive(ti);
                if cfg.check_invariants && state[i].gen_time != ti {
                    return Err(invariant(i, t, "arrival did not replace the buffer"));
                }
            }
            if state[i].buffer_occupied {
                busy_frame[i] += 1;
                if measuring {
                    busy_slots[i] += 1;
                }
                if gate(rng, eta[i]) {
                    active.push(i);
                    is_active[i] = true;
                }
            }
        }
        for &i in &active {
            delivered[i] = net.succeeds(i, &active, &is_active, &mut rngs[i]);
        }
        for i in 0..n {
            let before = state[i];
            let ok = delivered[i];
            let peak = state[i].finish_slot(ti, ok);
            if cfg.check_invariants {
                check_step(i, t, &before, &state[i], ok)?;
            }
            if measuring {
                sum_aoi[i] += state[i].aoi;
                if is_active[i] {
                    attempts[i] += 1;
                }
                if let Some(pk) = peak {
                    deliveries[i] += 1;
                    sum_peak[i] += pk;
                }
            }
        }
        for &i in &active {
            is_active[i] = false;
            delivered[i] = false;
        }
    }

    let measured = cfg.slots - cfg.warmup;
    let links = (0..n)
        .map(|i| {
            let d = deliveries[i];
            LinkMetrics {
                avg_aoi: sum_aoi[i] as f64 / measured as f64,
                peak_aoi_mean: if d > 0 {
                    sum_peak[i] as f64 / d as f64
                } else {
                    f64::INFINITY
                },
                emp_success: if attempts[i] > 0 {
                    d as f64 / attempts[i] as f64
                } else {
                    f64::NAN
                },
                emp_busy: busy_slots[i] as f64 / measured as f64,
                attempts: attempts[i],
                deliveries: d,
                censored: d == 0,
            }
        })
        .collect();
    Ok(SimMetrics {
        links,
        slots_measured: measured,
    })
}

fn invariant(i: usize, t: u64, what: &str) -> AoiError {
    AoiError::Config(format!("invariant violated on link {i} at slot {t}: {what}"))
}

fn check_step(i: usize, t: u64, before: &LinkState, after: &LinkState, delivered: bool) -> Result<()> {
    let ti = t as i64;
    let grow = before.aoi + 1;
    if delivered {
        let reset = (ti - before.gen_time + 1) as u64;
        if after.aoi != reset {
            return Err(invariant(i, t, "reset branch produced the wrong age"));
        }
        if let Some(prev) = before.latest_delivered_gen {
            if before.gen_time <= prev {
                return Err(invariant(i, t, "delivered packet is not fresher"));
            }
        }
        if after.buffer_occupied {
            return Err(invariant(i, t, "delivered packet stayed in the buffer"));
        }
    } else if after.aoi != grow {
        return Err(invariant(i, t, "age did not grow by one"));
    }
    if after.aoi < 1 {
        return Err(invariant(i, t, "age dropped below one"));
    }
    Ok(())
}

/// Monte-Carlo statistics of an isolated unit-buffer queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueOracle {
    pub avg_aoi: f64,
    pub peak_aoi: f64,
    pub busy_fraction: f64,
}

/// Simulates one LCFS-with-replacement queue whose transmissions succeed
/// independently with probability `s` per slot.
pub fn queue_oracle(xi: f64, s: f64, slots: u64, seed: u64) -> Result<QueueOracle> {
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(AoiError::InvalidParameter {
            name: "xi",
            value: xi,
            reason: "must lie in (0, 1]",
        });
    }
    if !(s > 0.0 && s <= 1.0) {
        return Err(AoiError::InvalidParameter {
            name: "s",
            value: s,
            reason: "must lie in (0, 1]",
        });
    }
    if slots == 0 {
        return Err(AoiError::Config("slots must be positive".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let mut st = LinkState::default();
    let (mut sum, mut peaks, mut npeaks, mut busy) = (0u64, 0u64, 0u64, 0u64);
    for t in 0..slots as i64 {
        if gate(&mut rng, xi) {
            st.arrive(t);
        }
        let ok = if st.buffer_occupied {
            busy += 1;
            gate(&mut rng, s)
        } else {
            false
        };
        if let Some(pk) = st.finish_slot(t, ok) {
            peaks += pk;
            npeaks += 1;
        }
        sum += st.aoi;
    }
    Ok(QueueOracle {
        avg_aoi: sum as f64 / slots as f64,
        peak_aoi: if npeaks > 0 {
            peaks as f64 / npeaks as f64
        } else {
            f64::INFINITY
        },
        busy_fraction: busy as f64 / slots as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_bipolar;
    use crate::params::{ParamsConfig, Region};

    #[test]
    fn deterministic_queue_cycle() {
        let q = queue_oracle(1.0, 1.0, 1000, 1).unwrap();
        assert_eq!(q.avg_aoi, 1.0);
        assert_eq!(q.peak_aoi, 1.0);
        assert_eq!(q.busy_fraction, 1.0);
    }

    #[test]
    fn isolated_noise_free_link_always_delivers() {
        let params = ParamsConfig {
            xi: 1.0,
            p: 1.0,
            noise_free: true,
            ..ParamsConfig::default()
        }
        .to_params();
        let topo = BipolarTopology::single_link(0.5, Region::torus(10.0));
        for engine in [Engine::Explicit, Engine::Frozen, Engine::Thinned] {
            let cfg = SimConfig::new(500, 3).with_engine(engine).checked();
            let m = run(&topo, &params, &cfg, &mut ConstantAccess(1.0)).unwrap();
            assert_eq!(m.links[0].avg_aoi, 1.0);
            assert_eq!(m.links[0].emp_success, 1.0);
        }
    }

    #[test]
    fn frozen_fades_are_deterministic() {
        // SINR = ρ r^{-α}; threshold above it means no delivery ever.
        let base = SystemParams::default();
        let d = base.derive().unwrap();
        let snr = d.rho * base.r.powf(-base.alpha);
        let topo = BipolarTopology::single_link(base.r, Region::torus(10.0));
        let cfg = SimConfig::new(200, 1).with_engine(Engine::Frozen);
        let above = SystemParams { theta: snr * 1.01, xi: 1.0, ..base };
        let m = run(&topo, &above, &cfg, &mut ConstantAccess(1.0)).unwrap();
        assert_eq!(m.links[0].deliveries, 0);
        assert!(m.links[0].censored);
        let below = SystemParams { theta: snr * 0.99, xi: 1.0, ..base };
        let m = run(&topo, &below, &cfg, &mut ConstantAccess(1.0)).unwrap();
        assert_eq!(m.links[0].emp_success, 1.0);
    }

    #[test]
    fn outage_threshold_limits() {
        let params = SystemParams::default().with_lambda(0.02);
        let topo = sample_bipolar(&params, &Region::torus(40.0), 2);
        let m = run(&topo, &params, &SimConfig::new(2000, 4), &mut ConstantAccess(1.0)).unwrap();
        assert_eq!(peak_outage_empirical(&m, 0.0), 1.0);
        assert_eq!(peak_outage_empirical(&m, f64::INFINITY), 0.0);
    }

    #[test]
    fn warmup_must_be_shorter_than_run() {
        let params = SystemParams::default();
        let topo = BipolarTopology::single_link(0.5, Region::torus(10.0));
        let cfg = SimConfig::new(10, 0).with_warmup(10);
        assert!(run(&topo, &params, &cfg, &mut ConstantAccess(1.0)).is_err());
    }

    #[test]
    fn empty_topology_has_no_network_metrics() {
        let params = SystemParams::default().with_lambda(0.0);
        let topo = sample_bipolar(&params, &Region::torus(10.0), 0);
        let m = run(&topo, &params, &SimConfig::new(10, 0), &mut ConstantAccess(1.0)).unwrap();
        assert!(matches!(m.network(), Err(AoiError::EmptyTopology)));
    }
}
