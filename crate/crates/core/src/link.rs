//! Channel gains, interference sums, SINRs and the two-slot Alamouti signal
//! path.
//!
//! All SINR math is normalized by the transmit power: interference is a sum of
//! channel gains `ζ` and noise enters as `1/ρ`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::point_process::NetworkRealization;

/// Distances are floored here before a power law is applied.
pub const MIN_DISTANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UserId {
    Comp,
    Noma1,
    Noma2,
}

impl UserId {
    pub const ALL: [UserId; 3] = [UserId::Comp, UserId::Noma1, UserId::Noma2];

    pub fn index(self) -> usize {
        match self {
            UserId::Comp => 0,
            UserId::Noma1 => 1,
            UserId::Noma2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UserId::Comp => "comp",
            UserId::Noma1 => "noma1",
            UserId::Noma2 => "noma2",
        }
    }

    /// Position of the user on the typical road (the x-axis).
    pub fn x(self, real: &NetworkRealization) -> f64 {
        match self {
            UserId::Comp => 0.0,
            UserId::Noma1 => real.typical.noma1_x(),
            UserId::Noma2 => real.typical.noma2_x(),
        }
    }
}

impl std::str::FromStr for UserId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "comp" | "0" => Ok(UserId::Comp),
            "noma1" | "1" => Ok(UserId::Noma1),
            "noma2" | "2" => Ok(UserId::Noma2),
            _ => Err(Error::Parse(format!(
                "unknown user {s:?}, expected comp, noma1 or noma2"
            ))),
        }
    }
}

/// Small-scale fading coefficient, `CN(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingDraw {
    pub g: Complex64,
}

impl FadingDraw {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self { g: cn(rng, 1.0) }
    }

    pub fn power(&self) -> f64 {
        self.g.norm_sqr()
    }
}

/// Circularly-symmetric complex Gaussian with variance `var`.
pub fn cn<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// `dist^{-alpha}` given the squared distance.
#[inline]
pub fn path_gain_sq(dist_sq: f64, alpha: f64) -> f64 {
    let d2 = dist_sq.max(MIN_DISTANCE * MIN_DISTANCE);
    if alpha == 4.0 {
        1.0 / (d2 * d2)
    } else if alpha == 3.0 {
        1.0 / (d2 * d2.sqrt())
    } else if alpha == 2.0 {
        1.0 / d2
    } else {
        d2.powf(-0.5 * alpha)
    }
}

#[inline]
pub fn path_gain(dist: f64, alpha: f64) -> f64 {
    path_gain_sq(dist * dist, alpha)
}

/// Serving-channel power gains seen by one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGains {
    /// `|h_L|²` from the left serving BS.
    pub h_l2: f64,
    /// `|h_R|²` from the right serving BS.
    pub h_r2: f64,
    /// `C² = |h_L|² + |h_R|²`.
    pub c2: f64,
}

impl LinkGains {
    pub fn new(h_l2: f64, h_r2: f64) -> Self {
        Self {
            h_l2,
            h_r2,
            c2: h_l2 + h_r2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InterferenceSample {
    pub zeta_intra: f64,
    pub zeta_inter: f64,
    pub zeta: f64,
}

impl InterferenceSample {
    pub fn new(zeta_intra: f64, zeta_inter: f64) -> Self {
        Self {
            zeta_intra,
            zeta_inter,
            zeta: zeta_intra + zeta_inter,
        }
    }
}

/// Distances from `user` to the two serving BSs at `-d1` and `d2`.
pub fn serving_distances(real: &NetworkRealization, user: UserId) -> (f64, f64) {
    let x = user.x(real);
    let t = &real.typical;
    ((x + t.serving_left).abs(), (t.serving_right - x).abs())
}

/// Draws Rayleigh fading on both serving links of `user`.
pub fn serving_gains<R: Rng + ?Sized>(
    real: &NetworkRealization,
    cfg: &SystemConfig,
    user: UserId,
    rng: &mut R,
) -> LinkGains {
    let (dl, dr) = serving_distances(real, user);
    let gl: f64 = Exp1.sample(rng);
    let gr: f64 = Exp1.sample(rng);
    LinkGains::new(
        gl * path_gain(dl, cfg.alpha0),
        gr * path_gain(dr, cfg.alpha0),
    )
}

/// Path gains (no fading) from every interfering BS to `user`, split into
/// typical-road and other-road groups. Order: left typical interferers, right
/// typical interferers, then other roads in line order.
pub fn interferer_path_gains(
    real: &NetworkRealization,
    cfg: &SystemConfig,
    user: UserId,
) -> (Vec<f64>, Vec<f64>) {
    let x = user.x(real);
    let t = &real.typical;
    let intra = t
        .left_interferers
        .iter()
        .map(|&d| path_gain(x + d, cfg.alpha0))
        .chain(
            t.right_interferers
                .iter()
                .map(|&d| path_gain(d - x, cfg.alpha0)),
        )
        .collect();
    let mut inter = Vec::with_capacity(real.off_line_node_count());
    for (line, offsets) in real.other_lines() {
        for &u in offsets {
            inter.push(path_gain_sq(
                line.distance_sq_to_axis_point(u, x),
                cfg.alpha1,
            ));
        }
    }
    (intra, inter)
}

/// Draws `|g|² ~ Exp(1)` per interfering BS and accumulates `|g|²/dist^α`.
pub fn compute_zeta<R: Rng + ?Sized>(
    real: &NetworkRealization,
    cfg: &SystemConfig,
    user: UserId,
    rng: &mut R,
) -> InterferenceSample {
    let x = user.x(real);
    let t = &real.typical;
    let mut intra = 0.0;
    for &d in &t.left_interferers {
        let g: f64 = Exp1.sample(rng);
        intra += g * path_gain(x + d, cfg.alpha0);
    }
    for &d in &t.right_interferers {
        let g: f64 = Exp1.sample(rng);
        intra += g * path_gain(d - x, cfg.alpha0);
    }
    let mut inter = 0.0;
    for (line, offsets) in real.other_lines() {
        for &u in offsets {
            let g: f64 = Exp1.sample(rng);
            inter += g * path_gain_sq(line.distance_sq_to_axis_point(u, x), cfg.alpha1);
        }
    }
    InterferenceSample::new(intra, inter)
}

/// SINR of the common (CoMP) message.
#[inline]
pub fn sinr_comp(lg: LinkGains, beta: f64, zeta: f64, rho: f64) -> f64 {
    lg.c2 * (1.0 - beta) / (lg.c2 * beta + zeta + 1.0 / rho)
}

/// SINR of the common message at a NOMA user, before SIC.
#[inline]
pub fn sinr_noma_stage1(lg: LinkGains, beta: f64, zeta: f64, rho: f64) -> f64 {
    sinr_comp(lg, beta, zeta, rho)
}

/// SINR of a NOMA user's own message after SIC. `own2` is the gain from its
/// serving BS, `other2` from the far one.
#[inline]
pub fn sinr_noma_stage2(own2: f64, other2: f64, beta: f64, zeta: f64, rho: f64) -> f64 {
    own2 * beta / (other2 * beta + zeta + 1.0 / rho)
}

/// Split of the interfering BSs into independent transmitters (Ω₁) and
/// cooperating Alamouti pairs (Ω₂).
#[derive(Debug, Clone, PartialEq)]
pub struct CooperationPartition {
    pub pairing_fraction: f64,
    pub pairs: Vec<(usize, usize)>,
    n_nodes: usize,
}

impl CooperationPartition {
    /// Pairs adjacent indices `(0,1), (2,3), ...` until a fraction `q` of the
    /// `n_nodes` interferers is in Ω₂.
    pub fn adjacent(n_nodes: usize, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain(format!(
                "pairing fraction must be in [0, 1], got {q}"
            )));
        }
        let n_pairs = ((q * n_nodes as f64) / 2.0).floor() as usize;
        let pairs = (0..n_pairs).map(|i| (2 * i, 2 * i + 1)).collect();
        Ok(Self {
            pairing_fraction: q,
            pairs,
            n_nodes,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Indices of Ω₁ members.
    pub fn singles(&self) -> Vec<usize> {
        let mut paired = vec![false; self.n_nodes];
        for &(u, v) in &self.pairs {
            paired[u] = true;
            paired[v] = true;
        }
        (0..self.n_nodes).filter(|&i| !paired[i]).collect()
    }

    fn check(&self, realization: usize) -> Result<()> {
        if self.n_nodes != realization {
            return Err(Error::PartitionMismatch {
                partition: self.n_nodes,
                realization,
            });
        }
        let mut seen = vec![false; self.n_nodes];
        for &(u, v) in &self.pairs {
            for i in [u, v] {
                if i >= self.n_nodes || seen[i] {
                    return Err(Error::Domain(format!(
                        "pair index {i} out of range or reused"
                    )));
                }
                seen[i] = true;
            }
        }
        Ok(())
    }
}

/// Complex serving-channel coefficients `h_L`, `h_R` of one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServingChannel {
    pub h_l: Complex64,
    pub h_r: Complex64,
}

impl ServingChannel {
    pub fn c(&self) -> f64 {
        (self.h_l.norm_sqr() + self.h_r.norm_sqr()).sqrt()
    }

    pub fn gains(&self) -> LinkGains {
        LinkGains::new(self.h_l.norm_sqr(), self.h_r.norm_sqr())
    }

    /// Detection rows `θ_1 = (h_L*, h_R)/C` and `θ_2 = (h_R*, -h_L)/C`, applied
    /// to `(r(1), r(2)*)`.
    pub fn detection_rows(&self) -> Result<[[Complex64; 2]; 2]> {
        let c = self.c();
        if !(c > 0.0) {
            return Err(Error::DegenerateChannel);
        }
        Ok([
            [self.h_l.conj() / c, self.h_r / c],
            [self.h_r.conj() / c, -self.h_l / c],
        ])
    }
}

/// Two-slot transmit signals of the serving pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServingSignals {
    /// Alamouti-coded common symbols `s̃_c(1), s̃_c(2)`.
    pub common: [Complex64; 2],
    pub private_l: [Complex64; 2],
    pub private_r: [Complex64; 2],
    pub s_l: [Complex64; 2],
    pub s_r: [Complex64; 2],
}

impl ServingSignals {
    pub fn sample<R: Rng + ?Sized>(beta: f64, p: f64, rng: &mut R) -> Self {
        let common = [cn(rng, (1.0 - beta) * p), cn(rng, (1.0 - beta) * p)];
        let private_l = [cn(rng, beta * p), cn(rng, beta * p)];
        let private_r = [cn(rng, beta * p), cn(rng, beta * p)];
        Self::build(common, private_l, private_r)
    }

    pub fn build(
        common: [Complex64; 2],
        private_l: [Complex64; 2],
        private_r: [Complex64; 2],
    ) -> Self {
        let s_l = [private_l[0] + common[0], private_l[1] - common[1].conj()];
        let s_r = [private_r[0] + common[1], private_r[1] + common[0].conj()];
        Self {
            common,
            private_l,
            private_r,
            s_l,
            s_r,
        }
    }

    /// Noise- and interference-free reception through `ch`.
    pub fn received(&self, ch: &ServingChannel) -> [Complex64; 2] {
        [
            ch.h_l * self.s_l[0] + ch.h_r * self.s_r[0],
            ch.h_l * self.s_l[1] + ch.h_r * self.s_r[1],
        ]
    }
}

/// Applies the detection matrix to a received two-slot pair.
pub fn alamouti_decode(rx: [Complex64; 2], ch: &ServingChannel) -> Result<[Complex64; 2]> {
    let rows = ch.detection_rows()?;
    let r2c = rx[1].conj();
    Ok([
        rows[0][0] * rx[0] + rows[0][1] * r2c,
        rows[1][0] * rx[0] + rows[1][1] * r2c,
    ])
}

/// Result of the two-slot interference measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSlotPower {
    /// Sample mean of `|Ĩ_p|²` for `p = 1, 2`.
    pub measured: [f64; 2],
    pub stderr: [f64; 2],
    /// `P ζ` computed from the same fading draws.
    pub reference: f64,
}

/// Simulates the interference seen by `user` after detection, with fading held
/// fixed and `n_symbols` independent symbol draws.
///
/// Ω₁ members send independent `CN(0, P)` symbols per slot. Each Ω₂ pair
/// `(u, v)` sends `z_u = (z̄_u(1) + ω(1), z̄_u(2) - ω(2)*)` and
/// `z_v = (z̄_v(1) + ω(2), z̄_v(2) + ω(1)*)` with `z̄ ~ CN(0, βP)` and
/// `ω ~ CN(0, (1-β)P)`.
pub fn two_slot_interference_power<R: Rng + ?Sized>(
    real: &NetworkRealization,
    cfg: &SystemConfig,
    user: UserId,
    partition: &CooperationPartition,
    n_symbols: usize,
    rng: &mut R,
) -> Result<TwoSlotPower> {
    partition.check(real.interferer_count())?;
    let p = cfg.derive()?.p_tx_mw;
    let beta = cfg.beta;

    let (intra, inter) = interferer_path_gains(real, cfg, user);
    let h: Vec<Complex64> = intra
        .iter()
        .chain(inter.iter())
        .map(|&pg| FadingDraw::sample(rng).g * pg.sqrt())
        .collect();
    let zeta: f64 = h.iter().map(|c| c.norm_sqr()).sum();

    let ch = ServingChannel {
        h_l: FadingDraw::sample(rng).g,
        h_r: FadingDraw::sample(rng).g,
    };
    let rows = ch.detection_rows()?;
    let singles = partition.singles();

    let mut sum = [0.0; 2];
    let mut sum_sq = [0.0; 2];
    for _ in 0..n_symbols {
        let mut i1 = Complex64::new(0.0, 0.0);
        let mut i2 = Complex64::new(0.0, 0.0);
        for &i in &singles {
            i1 += h[i] * cn(rng, p);
            i2 += h[i] * cn(rng, p);
        }
        for &(u, v) in &partition.pairs {
            let w = [cn(rng, (1.0 - beta) * p), cn(rng, (1.0 - beta) * p)];
            let zu = [cn(rng, beta * p) + w[0], cn(rng, beta * p) - w[1].conj()];
            let zv = [cn(rng, beta * p) + w[1], cn(rng, beta * p) + w[0].conj()];
            i1 += h[u] * zu[0] + h[v] * zv[0];
            i2 += h[u] * zu[1] + h[v] * zv[1];
        }
        let i2c = i2.conj();
        for pidx in 0..2 {
            let v = (rows[pidx][0] * i1 + rows[pidx][1] * i2c).norm_sqr();
            sum[pidx] += v;
            sum_sq[pidx] += v * v;
        }
    }
    let n = n_symbols.max(1) as f64;
    let mut measured = [0.0; 2];
    let mut stderr = [0.0; 2];
    for pidx in 0..2 {
        let mean = sum[pidx] / n;
        let var = (sum_sq[pidx] / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        measured[pidx] = mean;
        stderr[pidx] = (var / n).sqrt();
    }
    Ok(TwoSlotPower {
        measured,
        stderr,
        reference: p * zeta,
    })
}
