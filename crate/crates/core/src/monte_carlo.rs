//! Monte Carlo outage estimation over sampled Poisson line Cox networks.
//!
//! Each trial draws its randomness from counter-based streams keyed by
//! `(seed, trial)`, so results do not depend on the number of workers. The
//! per-trial sampler is fused: BSs on other roads are generated line by line
//! and folded straight into the interference sums without being stored.
//!
//! Queries that share the road and BS densities are answered from the same
//! trials (common random numbers). Queries that differ only in power split,
//! rates or SNR reuse identical channel draws.
//!
//! The typical road is sampled out to a length chosen from the largest
//! decoding threshold in the batch; interference beyond it, and from roads
//! outside the sampled window, enters as its mean. With path-loss exponent 3
//! on the typical road a fixed 2 km cut biases outage low near the
//! feasibility limit by many standard errors.

use std::collections::HashMap;
use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::link::{
    path_gain, path_gain_sq, sinr_comp, sinr_noma_stage1, sinr_noma_stage2,
    two_slot_interference_power, CooperationPartition, UserId,
};
use crate::numerics::{gamma, integrate, integrate_tail, QuadratureSettings};
use crate::point_process::{noma_x, sample_realization, NomaPlacement, Truncation};
use crate::streams::{self, StreamRng, TrialKey};

/// Default number of trials per estimate.
pub const DEFAULT_TRIALS: u64 = 100_000;

/// Default seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_190_501;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecutionMode {
    /// Data-parallel over trials. Falls back to sequential without the
    /// `parallel` feature.
    #[default]
    Parallel,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub n_trials: u64,
    pub seed: u64,
    pub trunc: Truncation,
    /// Worker-count hint. `None` uses the global pool.
    pub workers: Option<usize>,
    pub mode: ExecutionMode,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            n_trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            trunc: Truncation::default(),
            workers: None,
            mode: ExecutionMode::Parallel,
        }
    }
}

impl McSettings {
    pub fn new(n_trials: u64, seed: u64) -> Self {
        Self {
            n_trials,
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutageEstimate {
    pub p_hat: f64,
    pub n_trials: u64,
    pub stderr: f64,
    pub seed: u64,
    pub outages: u64,
}

impl OutageEstimate {
    pub fn from_counts(outages: u64, n_trials: u64, seed: u64) -> Self {
        let n = n_trials as f64;
        let p_hat = outages as f64 / n;
        Self {
            p_hat,
            n_trials,
            stderr: (p_hat * (1.0 - p_hat) / n).sqrt(),
            seed,
            outages,
        }
    }

    /// Standardized gap to an analytic value. The scale is the largest of the
    /// binomial standard errors at `p_hat` and at `p_analytic`, and `1/n`, so a
    /// zero count does not produce an infinite score.
    pub fn z_score(&self, p_analytic: f64) -> f64 {
        let n = self.n_trials as f64;
        let se_a = (p_analytic * (1.0 - p_analytic) / n).max(0.0).sqrt();
        let sigma = self.stderr.max(se_a).max(1.0 / n);
        (self.p_hat - p_analytic) / sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Nnoma,
    Oma,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumRateEstimate {
    pub scheme: Scheme,
    /// `R_k (1 - p_k)` per served user.
    pub per_user: Vec<(UserId, f64)>,
    pub total: f64,
    pub outages: Vec<OutageEstimate>,
}

/// One outage probability to estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageQuery {
    pub cfg: SystemConfig,
    pub user: UserId,
}

impl OutageQuery {
    pub fn new(cfg: &SystemConfig, user: UserId) -> Self {
        Self {
            cfg: cfg.clone(),
            user,
        }
    }
}

/// Channel state of one user in one trial.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UserSample {
    pub x: f64,
    pub h_l2: f64,
    pub h_r2: f64,
    pub zeta_intra: f64,
    pub zeta_inter: f64,
}

impl UserSample {
    pub fn zeta(&self) -> f64 {
        self.zeta_intra + self.zeta_inter
    }
}

/// Parameters that fix the typical-road layout.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Geometry {
    d1: f64,
    d2: f64,
    seg_radius: f64,
    alpha0: f64,
}

impl Geometry {
    fn of(cfg: &SystemConfig) -> Self {
        Self {
            d1: cfg.d1,
            d2: cfg.d2,
            seg_radius: cfg.seg_radius,
            alpha0: cfg.alpha0,
        }
    }

    fn key(&self) -> [u64; 4] {
        [
            self.d1.to_bits(),
            self.d2.to_bits(),
            self.seg_radius.to_bits(),
            self.alpha0.to_bits(),
        ]
    }
}

/// Parameters that fix the random network.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Network {
    lambda_l: f64,
    lambda_b: f64,
    alpha1: f64,
}

impl Network {
    fn of(cfg: &SystemConfig) -> Self {
        Self {
            lambda_l: cfg.lambda_l,
            lambda_b: cfg.lambda_b,
            alpha1: cfg.alpha1,
        }
    }

    fn key(&self) -> [u64; 3] {
        [
            self.lambda_l.to_bits(),
            self.lambda_b.to_bits(),
            self.alpha1.to_bits(),
        ]
    }
}

/// Decision rule of one query, reduced to numbers.
#[derive(Debug, Clone, Copy)]
struct Rule {
    slot: usize,
    user: UserId,
    beta: f64,
    rho: f64,
    eps0: f64,
    eps_k: f64,
}

impl Rule {
    #[inline]
    fn outage(&self, s: &UserSample) -> bool {
        let lg = crate::link::LinkGains::new(s.h_l2, s.h_r2);
        let zeta = s.zeta();
        match self.user {
            UserId::Comp => !(sinr_comp(lg, self.beta, zeta, self.rho) > self.eps0),
            UserId::Noma1 | UserId::Noma2 => {
                let (own, other) = if self.user == UserId::Noma1 {
                    (s.h_l2, s.h_r2)
                } else {
                    (s.h_r2, s.h_l2)
                };
                let stage1 = sinr_noma_stage1(lg, self.beta, zeta, self.rho) > self.eps0;
                let stage2 = sinr_noma_stage2(own, other, self.beta, zeta, self.rho) > self.eps_k;
                !(stage1 && stage2)
            }
        }
    }
}

/// Queries sharing one network, compiled for the trial loop.
#[derive(Debug, Clone)]
struct Plan {
    network: Network,
    trunc: Truncation,
    geometries: Vec<Geometry>,
    /// (geometry index, user) per channel-sample slot.
    slots: Vec<(usize, UserId)>,
    rules: Vec<Rule>,
    /// Typical-road BSs are sampled out to this distance; the mean of the
    /// rest is added.
    typical_extent: f64,
    /// Mean interference from the unsampled part of the other roads.
    inter_tail_mean: f64,
}

impl Plan {
    fn build(queries: &[&OutageQuery], trunc: Truncation) -> Result<Self> {
        let network = Network::of(&queries[0].cfg);
        let mut geometries: Vec<Geometry> = Vec::new();
        let mut geo_index: HashMap<[u64; 4], usize> = HashMap::new();
        let mut slots: Vec<(usize, UserId)> = Vec::new();
        let mut rules = Vec::with_capacity(queries.len());
        for q in queries {
            q.cfg.validate()?;
            let g = Geometry::of(&q.cfg);
            let gi = *geo_index.entry(g.key()).or_insert_with(|| {
                geometries.push(g);
                geometries.len() - 1
            });
            let slot = match slots.iter().position(|&s| s == (gi, q.user)) {
                Some(i) => i,
                None => {
                    slots.push((gi, q.user));
                    slots.len() - 1
                }
            };
            let der = q.cfg.derive()?;
            rules.push(Rule {
                slot,
                user: q.user,
                beta: q.cfg.beta,
                rho: der.rho,
                eps0: der.eps[0],
                eps_k: der.eps[q.user.index()],
            });
        }
        let s_max = rules
            .iter()
            .zip(queries)
            .map(|(r, q)| laplace_scale(r, &Geometry::of(&q.cfg)))
            .fold(0.0, f64::max);
        let alpha0 = geometries
            .iter()
            .map(|g| g.alpha0)
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            network,
            trunc,
            typical_extent: typical_extent(s_max, network.lambda_b, alpha0),
            inter_tail_mean: inter_tail_mean(network, trunc)?,
            geometries,
            slots,
            rules,
        })
    }
}

/// Largest Laplace argument at which the decision of `r` is sensitive to
/// interference: the threshold divided by the usable signal power, with the
/// farthest serving link and unit fading.
fn laplace_scale(r: &Rule, g: &Geometry) -> f64 {
    let reach = (g.d1 + g.d2 + g.seg_radius).powf(g.alpha0);
    let margin = 1.0 - r.beta - r.eps0 * r.beta;
    let mut scale: f64 = 0.0;
    if margin > 0.0 {
        scale = r.eps0 / margin;
    }
    if r.user != UserId::Comp && r.beta > 0.0 {
        scale = scale.max(r.eps_k / r.beta);
    }
    scale * reach
}

/// Allowed `s * sd` of the typical-road interference left to its mean.
const TYPICAL_TAIL_TOL: f64 = 1e-5;
const MIN_TYPICAL_EXTENT: f64 = 2000.0;
const MAX_TYPICAL_EXTENT: f64 = 1e6;

/// Distance beyond which one side of the typical road contributes
/// interference with standard deviation below `TYPICAL_TAIL_TOL / s_max`.
/// The tail beyond `H` has variance `2 lambda_b H^(1-2a) / (2a-1)`.
fn typical_extent(s_max: f64, lambda_b: f64, alpha0: f64) -> f64 {
    if !(s_max > 0.0) || lambda_b <= 0.0 || !alpha0.is_finite() {
        return MIN_TYPICAL_EXTENT;
    }
    let k = 2.0 * alpha0 - 1.0;
    let h =
        (2.0 * lambda_b * s_max * s_max / (k * TYPICAL_TAIL_TOL * TYPICAL_TAIL_TOL)).powf(1.0 / k);
    h.clamp(MIN_TYPICAL_EXTENT, MAX_TYPICAL_EXTENT)
}

/// Mean of `sum g r^(-alpha1)` over other-road BSs outside the sampled
/// window, seen from the origin: roads with `rho > r_max`, and the parts of
/// nearer roads with `|u| > half_length`.
fn inter_tail_mean(net: Network, trunc: Truncation) -> Result<f64> {
    if net.lambda_l <= 0.0 || net.lambda_b <= 0.0 {
        return Ok(0.0);
    }
    let a = net.alpha1;
    let (r, h) = (trunc.r_max, trunc.half_length);
    let qs = QuadratureSettings {
        rel_tol: 1e-8,
        ..QuadratureSettings::default()
    };
    // Full roads beyond r_max: the integral over u of (rho^2 + u^2)^(-a/2)
    // is c rho^(1-a) with c = sqrt(pi) G((a-1)/2) / G(a/2).
    let c = std::f64::consts::PI.sqrt() * gamma(0.5 * (a - 1.0)) / gamma(0.5 * a);
    let far_roads = c * r.powf(2.0 - a) / (a - 2.0);
    let road_ends = integrate(
        |rho| {
            integrate_tail(|u| (rho * rho + u * u).powf(-0.5 * a), h, h, &qs)
                .map(|i| 2.0 * i.value)
                .unwrap_or(f64::NAN)
        },
        0.0,
        r,
        &qs,
    )?
    .value;
    if !road_ends.is_finite() {
        return Err(Error::Numeric {
            routine: "inter_tail_mean",
            detail: "inner integral failed".into(),
            estimate: road_ends,
        });
    }
    Ok(TAU * net.lambda_l * net.lambda_b * (far_roads + road_ends))
}

/// Per-worker buffers.
#[derive(Debug, Default)]
struct Scratch {
    targets: Vec<(UserId, f64)>,
    slot_target: Vec<usize>,
    inter: Vec<f64>,
    fading: Vec<StreamRng>,
    samples: Vec<UserSample>,
}

/// Accumulates other-road interference at every target `(user, x)` on the
/// typical road.
fn accumulate_inter(
    key: TrialKey,
    net: Network,
    trunc: Truncation,
    targets: &[(UserId, f64)],
    fading: &mut Vec<StreamRng>,
    acc: &mut [f64],
) {
    acc.iter_mut().for_each(|a| *a = 0.0);
    if net.lambda_l <= 0.0 || net.lambda_b <= 0.0 || targets.is_empty() {
        return;
    }
    let mut line_rng = key.rng(streams::LINES, 0);
    let line_rate = TAU * net.lambda_l;
    let alpha = net.alpha1;
    let mut rho = 0.0;
    let mut index = 0u64;
    loop {
        let gap: f64 = Exp1.sample(&mut line_rng);
        rho += gap / line_rate;
        if rho > trunc.r_max {
            break;
        }
        let theta = TAU * line_rng.random::<f64>();
        let (s, c) = theta.sin_cos();
        let (fx, fy) = (rho * c, rho * s);
        for (dir, purpose, group) in [
            (1.0, streams::LINE_NODES_UP, 2),
            (-1.0, streams::LINE_NODES_DOWN, 3),
        ] {
            let mut node_rng = key.rng(purpose, index);
            fading.clear();
            fading.extend(
                targets
                    .iter()
                    .map(|(u, _)| key.fading_rng(u.index(), group, index)),
            );
            let mut u = 0.0;
            loop {
                let gap: f64 = Exp1.sample(&mut node_rng);
                u += gap / net.lambda_b;
                if u > trunc.half_length {
                    break;
                }
                let off = dir * u;
                let px = fx - off * s;
                let py = fy + off * c;
                let py2 = py * py;
                for (t, &(_, x)) in targets.iter().enumerate() {
                    let dx = px - x;
                    let g: f64 = Exp1.sample(&mut fading[t]);
                    acc[t] += g * path_gain_sq(dx * dx + py2, alpha);
                }
            }
        }
        index += 1;
    }
}

/// Interference from the typical road at `x`, with interferers beyond `d1`
/// on the left and beyond `d2` on the right. Positions come from a stream
/// started at the origin, so the draws are shared across serving distances.
fn typical_road_interference(
    key: TrialKey,
    user: UserId,
    x: f64,
    g: &Geometry,
    lambda_b: f64,
    extent: f64,
) -> f64 {
    if lambda_b <= 0.0 {
        return 0.0;
    }
    // Mean of everything beyond the sampled extent.
    let tail = |h: f64| lambda_b * h.powf(1.0 - g.alpha0) / (g.alpha0 - 1.0);
    let mut total = tail(extent.max(g.d1) + x) + tail(extent.max(g.d2) - x);
    for (purpose, group, start) in [
        (streams::TYPICAL_LEFT, 0, g.d1),
        (streams::TYPICAL_RIGHT, 1, g.d2),
    ] {
        let mut pos_rng = key.rng(purpose, 0);
        let mut fade_rng = key.fading_rng(user.index(), group, 0);
        let mut d = 0.0;
        loop {
            let gap: f64 = Exp1.sample(&mut pos_rng);
            d += gap / lambda_b;
            if d > extent {
                break;
            }
            let fade: f64 = Exp1.sample(&mut fade_rng);
            if d <= start {
                continue;
            }
            // Left BS at -d, right BS at +d.
            let dist = if group == 0 { x + d } else { d - x };
            total += fade * path_gain(dist, g.alpha0);
        }
    }
    total
}

fn placements(key: TrialKey) -> [NomaPlacement; 2] {
    // Unit segment; scaled per geometry.
    let mut a = key.rng(streams::NOMA_PLACEMENT, 1);
    let mut b = key.rng(streams::NOMA_PLACEMENT, 2);
    [
        NomaPlacement::sample(1.0, &mut a),
        NomaPlacement::sample(1.0, &mut b),
    ]
}

fn user_x(g: &Geometry, user: UserId, unit: &[NomaPlacement; 2]) -> f64 {
    let k = user.index();
    if k == 0 {
        return 0.0;
    }
    let mut p = unit[k - 1];
    p.r *= g.seg_radius;
    noma_x(g.d1, g.d2, k, p)
}

/// Fills `scratch.samples` with the channel state of every slot in `plan`.
fn sample_slots(plan: &Plan, key: TrialKey, scratch: &mut Scratch) {
    let unit = placements(key);
    scratch.targets.clear();
    scratch.slot_target.clear();
    for &(gi, user) in &plan.slots {
        let x = user_x(&plan.geometries[gi], user, &unit);
        let t = match scratch
            .targets
            .iter()
            .position(|&(u, tx)| u == user && tx.to_bits() == x.to_bits())
        {
            Some(t) => t,
            None => {
                scratch.targets.push((user, x));
                scratch.targets.len() - 1
            }
        };
        scratch.slot_target.push(t);
    }
    scratch.inter.resize(scratch.targets.len(), 0.0);
    accumulate_inter(
        key,
        plan.network,
        plan.trunc,
        &scratch.targets,
        &mut scratch.fading,
        &mut scratch.inter,
    );

    scratch.samples.clear();
    for (i, &(gi, user)) in plan.slots.iter().enumerate() {
        let g = &plan.geometries[gi];
        let x = scratch.targets[scratch.slot_target[i]].1;
        let mut srng = key.rng(streams::SERVING_FADING, user.index() as u64);
        let gl: f64 = Exp1.sample(&mut srng);
        let gr: f64 = Exp1.sample(&mut srng);
        scratch.samples.push(UserSample {
            x,
            h_l2: gl * path_gain((x + g.d1).abs(), g.alpha0),
            h_r2: gr * path_gain((g.d2 - x).abs(), g.alpha0),
            zeta_intra: typical_road_interference(
                key,
                user,
                x,
                g,
                plan.network.lambda_b,
                plan.typical_extent,
            ),
            zeta_inter: scratch.inter[scratch.slot_target[i]] + plan.inter_tail_mean,
        });
    }
}

/// Channel state of all three users of `cfg` in trial `trial`. The same
/// values are used by the estimators.
pub fn sample_trial(
    cfg: &SystemConfig,
    trunc: Truncation,
    seed: u64,
    trial: u64,
) -> Result<[UserSample; 3]> {
    let queries: Vec<OutageQuery> = UserId::ALL
        .iter()
        .map(|&u| OutageQuery::new(cfg, u))
        .collect();
    let refs: Vec<&OutageQuery> = queries.iter().collect();
    let plan = Plan::build(&refs, trunc)?;
    let mut scratch = Scratch::default();
    sample_slots(&plan, TrialKey::new(seed, trial), &mut scratch);
    Ok([scratch.samples[0], scratch.samples[1], scratch.samples[2]])
}

/// Runs `f` over trials `0..n`, summing the per-trial count vectors.
fn count_trials<F>(n: u64, width: usize, settings: &McSettings, f: F) -> Result<Vec<u64>>
where
    F: Fn(u64, &mut Scratch, &mut [u64]) + Sync + Send,
{
    let sequential = || {
        let mut scratch = Scratch::default();
        let mut acc = vec![0u64; width];
        for t in 0..n {
            f(t, &mut scratch, &mut acc);
        }
        acc
    };
    match settings.mode {
        ExecutionMode::Sequential => Ok(sequential()),
        ExecutionMode::Parallel => {
            parallel_counts(n, width, settings.workers, &f).map(|o| o.unwrap_or_else(sequential))
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_counts<F>(
    n: u64,
    width: usize,
    workers: Option<usize>,
    f: &F,
) -> Result<Option<Vec<u64>>>
where
    F: Fn(u64, &mut Scratch, &mut [u64]) + Sync + Send,
{
    use rayon::prelude::*;
    let run = || {
        (0..n)
            .into_par_iter()
            .fold(
                || (Scratch::default(), vec![0u64; width]),
                |(mut scratch, mut acc), t| {
                    f(t, &mut scratch, &mut acc);
                    (scratch, acc)
                },
            )
            .map(|(_, acc)| acc)
            .reduce(
                || vec![0u64; width],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    };
    match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::Domain(format!("cannot build worker pool: {e}")))?;
            Ok(Some(pool.install(run)))
        }
        None => Ok(Some(run())),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_counts<F>(
    _n: u64,
    _width: usize,
    _workers: Option<usize>,
    _f: &F,
) -> Result<Option<Vec<u64>>>
where
    F: Fn(u64, &mut Scratch, &mut [u64]) + Sync + Send,
{
    Ok(None)
}

/// Estimates every query. Queries sharing road and BS densities are answered
/// from the same trials.
pub fn estimate_outages(
    queries: &[OutageQuery],
    settings: &McSettings,
) -> Result<Vec<OutageEstimate>> {
    if settings.n_trials == 0 {
        return Err(Error::Domain("n_trials must be at least 1".into()));
    }
    let mut groups: Vec<([u64; 3], Vec<usize>)> = Vec::new();
    for (i, q) in queries.iter().enumerate() {
        let k = Network::of(&q.cfg).key();
        match groups.iter_mut().find(|(gk, _)| *gk == k) {
            Some((_, v)) => v.push(i),
            None => groups.push((k, vec![i])),
        }
    }
    let mut out =
        vec![OutageEstimate::from_counts(0, settings.n_trials, settings.seed); queries.len()];
    for (_, members) in groups {
        let refs: Vec<&OutageQuery> = members.iter().map(|&i| &queries[i]).collect();
        let plan = Plan::build(&refs, settings.trunc)?;
        let seed = settings.seed;
        let counts = count_trials(
            settings.n_trials,
            plan.rules.len(),
            settings,
            |t, scratch, acc| {
                sample_slots(&plan, TrialKey::new(seed, t), scratch);
                for (r, a) in plan.rules.iter().zip(acc.iter_mut()) {
                    if r.outage(&scratch.samples[r.slot]) {
                        *a += 1;
                    }
                }
            },
        )?;
        for (j, &i) in members.iter().enumerate() {
            out[i] = OutageEstimate::from_counts(counts[j], settings.n_trials, seed);
        }
    }
    Ok(out)
}

pub fn estimate_outage(
    cfg: &SystemConfig,
    user: UserId,
    settings: &McSettings,
) -> Result<OutageEstimate> {
    Ok(estimate_outages(&[OutageQuery::new(cfg, user)], settings)?[0])
}

/// Queries needed for the sum rate of `scheme`.
pub fn sum_rate_queries(cfg: &SystemConfig, scheme: Scheme) -> Vec<OutageQuery> {
    match scheme {
        Scheme::Nnoma => UserId::ALL
            .iter()
            .map(|&u| OutageQuery::new(cfg, u))
            .collect(),
        Scheme::Oma => vec![OutageQuery::new(
            &SystemConfig {
                beta: 0.0,
                ..cfg.clone()
            },
            UserId::Comp,
        )],
    }
}

/// Outage sum rate `Σ R_k (1 - p_k)` from already estimated outages, ordered
/// as [`sum_rate_queries`] returns them.
pub fn sum_rate_from(
    cfg: &SystemConfig,
    scheme: Scheme,
    outages: Vec<OutageEstimate>,
) -> SumRateEstimate {
    let users: &[UserId] = match scheme {
        Scheme::Nnoma => &UserId::ALL,
        Scheme::Oma => &[UserId::Comp],
    };
    let per_user: Vec<(UserId, f64)> = users
        .iter()
        .zip(&outages)
        .map(|(&u, e)| (u, cfg.rates[u.index()] * (1.0 - e.p_hat)))
        .collect();
    let total = per_user.iter().map(|(_, r)| r).sum();
    SumRateEstimate {
        scheme,
        per_user,
        total,
        outages,
    }
}

pub fn estimate_sum_rate(
    cfg: &SystemConfig,
    scheme: Scheme,
    settings: &McSettings,
) -> Result<SumRateEstimate> {
    let outages = estimate_outages(&sum_rate_queries(cfg, scheme), settings)?;
    Ok(sum_rate_from(cfg, scheme, outages))
}

/// Pooled agreement of the two-slot interference power with `P ζ` for one
/// pairing fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma1Row {
    pub q: f64,
    /// Sum over realizations of the measured `E|Ĩ_p|²`, averaged over `p`.
    pub measured: f64,
    /// Sum over realizations of `P ζ`.
    pub reference: f64,
    /// Pooled standardized gap, `Σ z_j / sqrt(J)` over realizations and both
    /// detection outputs.
    pub z_score: f64,
    /// Largest per-realization `|z|`.
    pub max_abs_z: f64,
    /// Pooled standardized gap between this `q` and the first entry of the grid.
    pub cross_z: f64,
    pub realizations: usize,
}

/// Settings of the signal-level check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma1Settings {
    pub n_realizations: usize,
    pub n_symbols: usize,
    pub seed: u64,
    /// Networks are sampled inside this square window to keep symbol-level
    /// simulation affordable.
    pub trunc: Truncation,
    pub user: UserId,
}

impl Default for Lemma1Settings {
    fn default() -> Self {
        Self {
            n_realizations: 50,
            n_symbols: 10_000,
            seed: DEFAULT_SEED,
            trunc: Truncation::square(300.0),
            user: UserId::Comp,
        }
    }
}

pub fn validate_lemma1(
    cfg: &SystemConfig,
    q_grid: &[f64],
    settings: &Lemma1Settings,
) -> Result<Vec<Lemma1Row>> {
    use rand::SeedableRng;
    cfg.validate()?;
    let nq = q_grid.len();
    let mut measured = vec![0.0; nq];
    let mut reference = vec![0.0; nq];
    let mut zsum = vec![0.0; nq];
    let mut zmax = vec![0.0f64; nq];
    let mut cross = vec![0.0; nq];
    let mut used = 0usize;
    let mut attempt = 0u64;
    // Realizations without interferers carry no information; skip them.
    while used < settings.n_realizations {
        if attempt > 100 * settings.n_realizations as u64 + 1000 {
            return Err(Error::Domain(
                "network too sparse: no interferers in sampled realizations".into(),
            ));
        }
        let key = TrialKey::new(settings.seed, attempt);
        attempt += 1;
        let real = sample_realization(cfg, settings.trunc, &mut key.rng(streams::LINES, 0));
        let n = real.interferer_count();
        if n == 0 {
            continue;
        }
        let mut first: Option<crate::link::TwoSlotPower> = None;
        for (i, &q) in q_grid.iter().enumerate() {
            let part = CooperationPartition::adjacent(n, q)?;
            // Same fading for every q; the symbol draws differ.
            let mut rng = rand_pcg::Pcg64Mcg::from_rng(&mut key.rng(streams::SERVING_FADING, 0));
            let r = two_slot_interference_power(
                &real,
                cfg,
                settings.user,
                &part,
                settings.n_symbols,
                &mut rng,
            )?;
            for p in 0..2 {
                let z = (r.measured[p] - r.reference) / r.stderr[p].max(f64::MIN_POSITIVE);
                zsum[i] += z;
                zmax[i] = zmax[i].max(z.abs());
            }
            measured[i] += 0.5 * (r.measured[0] + r.measured[1]);
            reference[i] += r.reference;
            match first {
                None => first = Some(r),
                Some(f) => {
                    for p in 0..2 {
                        let s = (f.stderr[p].powi(2) + r.stderr[p].powi(2))
                            .sqrt()
                            .max(f64::MIN_POSITIVE);
                        cross[i] += (r.measured[p] - f.measured[p]) / s;
                    }
                }
            }
        }
        used += 1;
    }
    let norm = (2.0 * used as f64).sqrt();
    Ok((0..nq)
        .map(|i| Lemma1Row {
            q: q_grid[i],
            measured: measured[i],
            reference: reference[i],
            z_score: zsum[i] / norm,
            max_abs_z: zmax[i],
            cross_z: cross[i] / norm,
            realizations: used,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationRow {
    pub radius: f64,
    pub p_hat: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    pub user: UserId,
    pub rows: Vec<TruncationRow>,
    /// True when the last two radii differ by more than two combined standard
    /// errors.
    pub flagged: bool,
}

/// Outage estimates at growing truncation radii. Streams are nested, so the
/// larger network contains the smaller one trial by trial.
pub fn truncation_convergence(
    cfg: &SystemConfig,
    user: UserId,
    radii: &[f64],
    settings: &McSettings,
) -> Result<TruncationReport> {
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let s = McSettings {
            trunc: Truncation::square(r),
            ..*settings
        };
        let e = estimate_outage(cfg, user, &s)?;
        rows.push(TruncationRow {
            radius: r,
            p_hat: e.p_hat,
            stderr: e.stderr,
        });
    }
    let flagged = match rows.as_slice() {
        [.., a, b] => {
            (a.p_hat - b.p_hat).abs() > 2.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
        }
        _ => false,
    };
    Ok(TruncationReport {
        user,
        rows,
        flagged,
    })
}

impl Serialize for UserId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> McSettings {
        McSettings {
            n_trials: 2_000,
            seed: 7,
            trunc: Truncation::square(400.0),
            workers: None,
            mode: ExecutionMode::Parallel,
        }
    }

    #[test]
    fn zero_trials_is_an_error() {
        let s = McSettings {
            n_trials: 0,
            ..small()
        };
        assert!(estimate_outage(&SystemConfig::default(), UserId::Comp, &s).is_err());
    }

    #[test]
    fn infeasible_split_fails_every_user() {
        let cfg = SystemConfig {
            rates: [3.0, 0.5, 0.5],
            ..SystemConfig::default()
        };
        for u in UserId::ALL {
            assert_eq!(estimate_outage(&cfg, u, &small()).unwrap().p_hat, 1.0);
        }
    }

    #[test]
    fn zero_beta_fails_noma_users() {
        let cfg = SystemConfig {
            beta: 0.0,
            ..SystemConfig::default()
        };
        assert_eq!(
            estimate_outage(&cfg, UserId::Noma1, &small())
                .unwrap()
                .p_hat,
            1.0
        );
        assert_eq!(
            estimate_outage(&cfg, UserId::Noma2, &small())
                .unwrap()
                .p_hat,
            1.0
        );
    }

    #[test]
    fn zero_rates_give_zero_sum_rate() {
        let cfg = SystemConfig {
            rates: [0.0; 3],
            ..SystemConfig::default()
        };
        let s = estimate_sum_rate(&cfg, Scheme::Nnoma, &small()).unwrap();
        assert_eq!(s.total, 0.0);
    }

    #[test]
    fn oma_outage_not_above_nnoma_comp_outage() {
        let cfg = SystemConfig::default();
        let n = estimate_sum_rate(&cfg, Scheme::Nnoma, &small()).unwrap();
        let o = estimate_sum_rate(&cfg, Scheme::Oma, &small()).unwrap();
        assert!(o.outages[0].outages <= n.outages[0].outages);
        assert!(n.total <= cfg.rates.iter().sum::<f64>());
        assert!((n.total - n.per_user.iter().map(|p| p.1).sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let cfg = SystemConfig::default();
        let queries: Vec<_> = UserId::ALL
            .iter()
            .map(|&u| OutageQuery::new(&cfg, u))
            .collect();
        let base = estimate_outages(
            &queries,
            &McSettings {
                mode: ExecutionMode::Sequential,
                ..small()
            },
        )
        .unwrap();
        for w in [1, 2, 3, 8] {
            let s = McSettings {
                workers: Some(w),
                ..small()
            };
            assert_eq!(estimate_outages(&queries, &s).unwrap(), base);
        }
    }

    #[test]
    fn batched_queries_match_single_queries() {
        let cfg = SystemConfig::default();
        let other = SystemConfig {
            d2: 150.0,
            beta: 0.3,
            ..cfg.clone()
        };
        let queries = vec![
            OutageQuery::new(&cfg, UserId::Comp),
            OutageQuery::new(&other, UserId::Noma2),
            OutageQuery::new(&other, UserId::Comp),
        ];
        let batch = estimate_outages(&queries, &small()).unwrap();
        for (q, b) in queries.iter().zip(&batch) {
            assert_eq!(estimate_outage(&q.cfg, q.user, &small()).unwrap(), *b);
        }
    }

    #[test]
    fn comp_outage_count_grows_with_beta() {
        let base = SystemConfig::default();
        let queries: Vec<_> = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
            .iter()
            .map(|&beta| {
                OutageQuery::new(
                    &SystemConfig {
                        beta,
                        ..base.clone()
                    },
                    UserId::Comp,
                )
            })
            .collect();
        let est = estimate_outages(&queries, &small()).unwrap();
        for w in est.windows(2) {
            assert!(w[1].outages >= w[0].outages);
        }
    }

    #[test]
    fn nested_truncation_is_monotone_and_settles() {
        let cfg = SystemConfig {
            lambda_l: 0.0,
            ..SystemConfig::default()
        };
        let r =
            truncation_convergence(&cfg, UserId::Comp, &[500.0, 1000.0, 2000.0], &small()).unwrap();
        // Nested networks only add interference.
        assert!(r.rows.windows(2).all(|w| w[0].p_hat <= w[1].p_hat));
        assert!(!r.flagged);
    }

    #[test]
    fn sampled_users_sit_where_the_layout_says() {
        let cfg = SystemConfig::default();
        for t in 0..50 {
            let s = sample_trial(&cfg, Truncation::square(300.0), 3, t).unwrap();
            assert_eq!(s[0].x, 0.0);
            assert!((s[1].x + cfg.d1).abs() <= cfg.seg_radius);
            assert!((s[2].x - cfg.d2).abs() <= cfg.seg_radius);
            for u in s {
                assert!(
                    u.h_l2 >= 0.0 && u.h_r2 >= 0.0 && u.zeta_intra >= 0.0 && u.zeta_inter >= 0.0
                );
            }
        }
    }

    #[test]
    fn tail_means_make_windows_agree_on_average() {
        let cfg = SystemConfig::default();
        let n = 20_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for t in 0..n {
            let small = sample_trial(&cfg, Truncation::square(400.0), 11, t).unwrap();
            let big = sample_trial(&cfg, Truncation::square(1600.0), 11, t).unwrap();
            let d = big[0].zeta_inter - small[0].zeta_inter;
            sum += d;
            sq += d * d;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!(mean.abs() < 4.0 * se, "mean {mean:e} se {se:e}");
    }

    #[test]
    fn far_roads_mean_matches_closed_form() {
        // Roads never end: only the roads beyond r_max are missing, and for
        // alpha1 = 4 their mean is 2 pi lambda (pi / 2) / (2 r^2).
        let net = Network {
            lambda_l: 5e-4,
            lambda_b: 5e-3,
            alpha1: 4.0,
        };
        let trunc = Truncation {
            r_max: 1000.0,
            half_length: 1e12,
        };
        let want = TAU * 5e-4 * 5e-3 * std::f64::consts::FRAC_PI_2 / (2.0 * 1000.0f64.powi(2));
        let got = inter_tail_mean(net, trunc).unwrap();
        assert!((got / want - 1.0).abs() < 1e-6, "{got:e} vs {want:e}");
    }

    #[test]
    fn typical_extent_grows_with_threshold_and_is_bounded() {
        let a = typical_extent(1e7, 5e-3, 3.0);
        let b = typical_extent(1e9, 5e-3, 3.0);
        assert!(a >= MIN_TYPICAL_EXTENT && b > a && b <= MAX_TYPICAL_EXTENT);
        assert_eq!(typical_extent(0.0, 5e-3, 3.0), MIN_TYPICAL_EXTENT);
        assert_eq!(typical_extent(1e30, 5e-3, 1.01), MAX_TYPICAL_EXTENT);
    }

    #[test]
    fn z_score_handles_zero_counts() {
        let e = OutageEstimate::from_counts(0, 1000, 1);
        assert!(e.z_score(0.0).abs() < 1e-12);
        assert!(e.z_score(0.001).is_finite());
    }
}
