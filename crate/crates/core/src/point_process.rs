//! Poisson line process, Poisson line Cox process and the typical-road layout.
//!
//! A line is the set `{(x, y) : x cos θ + y sin θ = ρ}`. Nodes on a line are
//! addressed by their signed offset `u` from the foot of the perpendicular
//! from the origin, so a node's distance to the origin is `sqrt(ρ² + u²)`.
//!
//! The typical road is the x-axis. The CoMP user sits at the origin, its left
//! serving BS at `-d1` and its right serving BS at `d2`.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::config::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    /// Perpendicular distance from the origin, m.
    pub rho: f64,
    /// Angle of the perpendicular, rad in `[0, 2π)`.
    pub theta: f64,
}

impl Line {
    /// The typical road (the x-axis). A node at offset `u` sits at `(-u, 0)`.
    pub const TYPICAL: Line = Line {
        rho: 0.0,
        theta: FRAC_PI_2,
    };

    pub fn point_at(&self, offset: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.rho * c - offset * s, self.rho * s + offset * c)
    }

    /// Squared distance from the node at `offset` to the point `(x, 0)`.
    #[inline]
    pub fn distance_sq_to_axis_point(&self, offset: f64, x: f64) -> f64 {
        let (s, c) = self.theta.sin_cos();
        let dx = self.rho * c - offset * s - x;
        let dy = self.rho * s + offset * c;
        dx * dx + dy * dy
    }
}

/// Nodes dropped on one line.
#[derive(Debug, Clone, PartialEq)]
pub struct LineNodes {
    pub line: Line,
    /// Signed offsets along the line, ascending.
    pub offsets: Vec<f64>,
}

/// Which way a NOMA user sits relative to its serving BS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Between its serving BS and the origin, i.e. toward the other serving BS.
    TowardFarBs,
    /// On the far side of its serving BS from the origin.
    AwayFromFarBs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NomaPlacement {
    /// Distance to the serving BS, m, in `[0, seg_radius]`.
    pub r: f64,
    pub side: Side,
}

impl NomaPlacement {
    pub fn sample<R: Rng + ?Sized>(seg_radius: f64, rng: &mut R) -> Self {
        let r = seg_radius * rng.random::<f64>();
        let side = if rng.random::<bool>() {
            Side::TowardFarBs
        } else {
            Side::AwayFromFarBs
        };
        Self { r, side }
    }
}

/// BS and NOMA-user layout on the typical road.
#[derive(Debug, Clone, PartialEq)]
pub struct TypicalLineLayout {
    /// Distances from the origin of interfering BSs left of the origin, all `> d1`.
    pub left_interferers: Vec<f64>,
    /// Distances from the origin of interfering BSs right of the origin, all `> d2`.
    pub right_interferers: Vec<f64>,
    pub serving_left: f64,
    pub serving_right: f64,
    pub noma_user_1: NomaPlacement,
    pub noma_user_2: NomaPlacement,
}

impl TypicalLineLayout {
    /// x-coordinate of NOMA user 1 (served by the left BS).
    pub fn noma1_x(&self) -> f64 {
        noma_x(self.serving_left, self.serving_right, 1, self.noma_user_1)
    }

    /// x-coordinate of NOMA user 2 (served by the right BS).
    pub fn noma2_x(&self) -> f64 {
        noma_x(self.serving_left, self.serving_right, 2, self.noma_user_2)
    }
}

/// x-coordinate of NOMA user `k` on the typical road.
pub fn noma_x(d1: f64, d2: f64, k: usize, placement: NomaPlacement) -> f64 {
    let toward = placement.side == Side::TowardFarBs;
    match (k, toward) {
        (1, true) => -d1 + placement.r,
        (1, false) => -d1 - placement.r,
        (_, true) => d2 - placement.r,
        (_, false) => d2 + placement.r,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    /// Lines farther than this from the origin are dropped, m.
    pub r_max: f64,
    /// Nodes are kept within this offset from each line's foot point, and
    /// within this distance of the origin on the typical road, m.
    pub half_length: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            r_max: 2000.0,
            half_length: 2000.0,
        }
    }
}

impl Truncation {
    pub fn square(radius: f64) -> Self {
        Self {
            r_max: radius,
            half_length: radius,
        }
    }
}

/// Appends the points of a 1D HPPP of intensity `rate` on `(start, end]`,
/// in increasing order, built from exponential gaps.
pub fn sample_hppp_sorted<R: Rng + ?Sized>(
    rate: f64,
    start: f64,
    end: f64,
    rng: &mut R,
    out: &mut Vec<f64>,
) {
    if rate <= 0.0 || end <= start {
        return;
    }
    let mut x = start;
    loop {
        let gap: f64 = Exp1.sample(rng);
        x += gap / rate;
        if x > end {
            break;
        }
        out.push(x);
    }
}

/// Samples the lines of a Poisson line process that pass within `r_max` of
/// the origin. Lines come out ordered by `rho`.
pub fn sample_plp<R: Rng + ?Sized>(lambda_l: f64, r_max: f64, rng: &mut R) -> Vec<Line> {
    let mut rhos = Vec::new();
    sample_hppp_sorted(TAU * lambda_l, 0.0, r_max, rng, &mut rhos);
    rhos.into_iter()
        .map(|rho| Line {
            rho,
            theta: TAU * rng.random::<f64>(),
        })
        .collect()
}

/// Drops a 1D HPPP of intensity `lambda_b` on `line`, restricted to offsets in
/// `[-half_length, half_length]`.
pub fn sample_line_nodes<R: Rng + ?Sized>(
    line: Line,
    lambda_b: f64,
    half_length: f64,
    rng: &mut R,
) -> LineNodes {
    let mut offsets = Vec::new();
    sample_hppp_sorted(lambda_b, -half_length, half_length, rng, &mut offsets);
    LineNodes { line, offsets }
}

pub fn sample_typical_layout<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    half_length: f64,
    rng: &mut R,
) -> TypicalLineLayout {
    let mut left_interferers = Vec::new();
    let mut right_interferers = Vec::new();
    sample_hppp_sorted(
        cfg.lambda_b,
        cfg.d1,
        half_length,
        rng,
        &mut left_interferers,
    );
    sample_hppp_sorted(
        cfg.lambda_b,
        cfg.d2,
        half_length,
        rng,
        &mut right_interferers,
    );
    let noma_user_1 = NomaPlacement::sample(cfg.seg_radius, rng);
    let noma_user_2 = NomaPlacement::sample(cfg.seg_radius, rng);
    TypicalLineLayout {
        left_interferers,
        right_interferers,
        serving_left: cfg.d1,
        serving_right: cfg.d2,
        noma_user_1,
        noma_user_2,
    }
}

/// One sampled network: interfering BSs on other roads plus the typical road.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization {
    lines: Vec<Line>,
    offsets: Vec<f64>,
    // Nodes of line i are offsets[starts[i]..starts[i + 1]].
    starts: Vec<usize>,
    pub typical: TypicalLineLayout,
    pub trunc: Truncation,
}

impl NetworkRealization {
    pub fn from_parts(
        other_lines: Vec<LineNodes>,
        typical: TypicalLineLayout,
        trunc: Truncation,
    ) -> Self {
        let mut lines = Vec::with_capacity(other_lines.len());
        let mut offsets = Vec::new();
        let mut starts = vec![0];
        for ln in other_lines {
            lines.push(ln.line);
            offsets.extend_from_slice(&ln.offsets);
            starts.push(offsets.len());
        }
        Self {
            lines,
            offsets,
            starts,
            typical,
            trunc,
        }
    }

    pub fn other_lines(&self) -> impl Iterator<Item = (Line, &[f64])> + '_ {
        self.lines
            .iter()
            .enumerate()
            .map(move |(i, l)| (*l, &self.offsets[self.starts[i]..self.starts[i + 1]]))
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    /// Interfering BSs on roads other than the typical one.
    pub fn off_line_node_count(&self) -> usize {
        self.offsets.len()
    }

    /// All interfering BSs, on any road.
    pub fn interferer_count(&self) -> usize {
        self.offsets.len()
            + self.typical.left_interferers.len()
            + self.typical.right_interferers.len()
    }

    pub fn to_line_nodes(&self) -> Vec<LineNodes> {
        self.other_lines()
            .map(|(line, o)| LineNodes {
                line,
                offsets: o.to_vec(),
            })
            .collect()
    }
}

pub fn sample_realization<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    trunc: Truncation,
    rng: &mut R,
) -> NetworkRealization {
    let lines = sample_plp(cfg.lambda_l, trunc.r_max, rng);
    let mut offsets = Vec::new();
    let mut starts = Vec::with_capacity(lines.len() + 1);
    starts.push(0);
    for _ in &lines {
        sample_hppp_sorted(
            cfg.lambda_b,
            -trunc.half_length,
            trunc.half_length,
            rng,
            &mut offsets,
        );
        starts.push(offsets.len());
    }
    let typical = sample_typical_layout(cfg, trunc.half_length, rng);
    NetworkRealization {
        lines,
        offsets,
        starts,
        typical,
        trunc,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotKind {
    Line,
    Bs,
    User,
}

/// One row of a realization dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnapshotRow {
    pub kind: SnapshotKind,
    pub rho: f64,
    pub theta: f64,
    pub offset: f64,
    pub x: f64,
    pub y: f64,
}

/// Flattens a realization into rows for plotting. Users are sampled here with
/// intensity `lambda_u` on every road; the three tagged users come first.
pub fn snapshot_rows<R: Rng + ?Sized>(
    real: &NetworkRealization,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Vec<SnapshotRow> {
    let h = real.trunc.half_length;
    let mut rows = Vec::new();
    let mut push = |kind, line: Line, offset: f64| {
        let (x, y) = line.point_at(offset);
        rows.push(SnapshotRow {
            kind,
            rho: line.rho,
            theta: line.theta,
            offset,
            x,
            y,
        });
    };
    let typ = Line::TYPICAL;
    push(SnapshotKind::Line, typ, 0.0);
    push(SnapshotKind::User, typ, 0.0);
    push(SnapshotKind::User, typ, -real.typical.noma1_x());
    push(SnapshotKind::User, typ, -real.typical.noma2_x());
    push(SnapshotKind::Bs, typ, real.typical.serving_left);
    push(SnapshotKind::Bs, typ, -real.typical.serving_right);
    for &d in &real.typical.left_interferers {
        push(SnapshotKind::Bs, typ, d);
    }
    for &d in &real.typical.right_interferers {
        push(SnapshotKind::Bs, typ, -d);
    }
    let mut users = Vec::new();
    sample_hppp_sorted(cfg.lambda_u, -h, h, rng, &mut users);
    for &u in &users {
        push(SnapshotKind::User, typ, u);
    }
    for (line, offsets) in real.other_lines() {
        push(SnapshotKind::Line, line, 0.0);
        for &u in offsets {
            push(SnapshotKind::Bs, line, u);
        }
        users.clear();
        sample_hppp_sorted(cfg.lambda_u, -h, h, rng, &mut users);
        for &u in &users {
            push(SnapshotKind::User, line, u);
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_pcg::Pcg64Mcg;

    fn rng(seed: u64) -> Pcg64Mcg {
        Pcg64Mcg::seed_from_u64(seed)
    }

    /// Checks a sample mean of Poisson counts against the exact mean.
    fn assert_poisson_mean(counts: &[usize], mean: f64) {
        let n = counts.len() as f64;
        let m = counts.iter().sum::<usize>() as f64 / n;
        let se = (mean / n).sqrt();
        assert!(
            (m - mean).abs() < 3.0 * se,
            "sample mean {m} vs {mean} (se {se})"
        );
    }

    #[test]
    fn zero_intensity_gives_no_lines() {
        assert!(sample_plp(0.0, 2000.0, &mut rng(1)).is_empty());
    }

    #[test]
    fn plp_line_count_mean() {
        let mut r = rng(2);
        let counts: Vec<usize> = (0..10_000)
            .map(|_| sample_plp(5e-4, 2000.0, &mut r).len())
            .collect();
        assert_poisson_mean(&counts, 5e-4 * 2000.0 * TAU);
    }

    #[test]
    fn plp_ranges() {
        let lines = sample_plp(5e-4, 2000.0, &mut rng(3));
        assert!(!lines.is_empty());
        for l in lines {
            assert!((0.0..=2000.0).contains(&l.rho));
            assert!((0.0..TAU).contains(&l.theta));
        }
    }

    #[test]
    fn line_nodes_mean_and_distance() {
        let line = Line {
            rho: 30.0,
            theta: 1.1,
        };
        assert!(sample_line_nodes(line, 0.0, 100.0, &mut rng(4))
            .offsets
            .is_empty());

        let mut r = rng(5);
        let counts: Vec<usize> = (0..10_000)
            .map(|_| sample_line_nodes(line, 5e-3, 2000.0, &mut r).offsets.len())
            .collect();
        assert_poisson_mean(&counts, 20.0);

        let (x, y) = line.point_at(40.0);
        assert!(((x * x + y * y).sqrt() - 50.0).abs() < 1e-12);
        assert!((line.distance_sq_to_axis_point(40.0, 0.0) - 2500.0).abs() < 1e-9);
    }

    #[test]
    fn typical_layout_edge_cases() {
        let cfg = SystemConfig {
            lambda_b: 0.0,
            seg_radius: 0.0,
            ..Default::default()
        };
        let t = sample_typical_layout(&cfg, 2000.0, &mut rng(6));
        assert!(t.left_interferers.is_empty() && t.right_interferers.is_empty());
        assert_eq!((t.serving_left, t.serving_right), (100.0, 100.0));
        assert_eq!(t.noma1_x(), -100.0);
        assert_eq!(t.noma2_x(), 100.0);
    }

    #[test]
    fn typical_layout_interferer_mean() {
        let cfg = SystemConfig {
            d2: 150.0,
            ..Default::default()
        };
        let mut r = rng(7);
        let layouts: Vec<_> = (0..10_000)
            .map(|_| sample_typical_layout(&cfg, 2000.0, &mut r))
            .collect();
        let left: Vec<usize> = layouts.iter().map(|t| t.left_interferers.len()).collect();
        let right: Vec<usize> = layouts.iter().map(|t| t.right_interferers.len()).collect();
        assert_poisson_mean(&left, 5e-3 * 1900.0);
        assert_poisson_mean(&right, 5e-3 * 1850.0);
        for t in &layouts {
            assert!(t.left_interferers.iter().all(|&d| d > 100.0 && d <= 2000.0));
            assert!(t
                .right_interferers
                .iter()
                .all(|&d| d > 150.0 && d <= 2000.0));
        }
    }

    #[test]
    fn realization_is_deterministic() {
        let cfg = SystemConfig::default();
        let a = sample_realization(&cfg, Truncation::default(), &mut rng(8));
        let b = sample_realization(&cfg, Truncation::default(), &mut rng(8));
        assert_eq!(a, b);
        assert!(a.line_count() > 0 && a.off_line_node_count() > 0);
        let rebuilt = NetworkRealization::from_parts(a.to_line_nodes(), a.typical.clone(), a.trunc);
        assert_eq!(rebuilt, a);
    }

    #[test]
    fn doubling_r_max_doubles_line_count() {
        let cfg = SystemConfig {
            lambda_l: 1e-3,
            lambda_b: 1e-3,
            ..Default::default()
        };
        let mut r = rng(9);
        let n = 4000;
        let mean = |r_max: f64, r: &mut Pcg64Mcg| {
            (0..n)
                .map(|_| {
                    sample_realization(
                        &cfg,
                        Truncation {
                            r_max,
                            half_length: 100.0,
                        },
                        r,
                    )
                    .line_count()
                })
                .sum::<usize>() as f64
                / n as f64
        };
        let small = mean(200.0, &mut r);
        let large = mean(400.0, &mut r);
        let expected_small = 1e-3 * 200.0 * TAU;
        assert!((small - expected_small).abs() < 3.0 * (expected_small / n as f64).sqrt());
        assert!(
            (large - 2.0 * expected_small).abs() < 3.0 * (2.0 * expected_small / n as f64).sqrt()
        );
    }

    /// Fraction of the rectangle `[0, r] x [0, h]` inside the disc of radius `t`.
    fn rect_disc_cdf(t: f64, r: f64, h: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let a = r.min(t);
        let f = |x: f64| {
            0.5 * (x * (t * t - x * x).max(0.0).sqrt() + t * t * (x / t).clamp(-1.0, 1.0).asin())
        };
        let x0 = (t * t - h * h).max(0.0).sqrt().min(a);
        (h * x0 + f(a) - f(x0)) / (r * h)
    }

    #[test]
    fn node_distance_distribution_ks() {
        let cfg = SystemConfig {
            lambda_l: 0.01,
            lambda_b: 0.05,
            ..Default::default()
        };
        let trunc = Truncation {
            r_max: 50.0,
            half_length: 80.0,
        };
        let mut r = rng(10);
        let mut dists = Vec::new();
        while dists.len() < 100_000 {
            let real = sample_realization(&cfg, trunc, &mut r);
            for (line, offsets) in real.other_lines() {
                dists.extend(offsets.iter().map(|u| (line.rho * line.rho + u * u).sqrt()));
            }
        }
        dists.sort_by(f64::total_cmp);
        let n = dists.len() as f64;
        let ks = dists
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let f = rect_disc_cdf(d, trunc.r_max, trunc.half_length);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        let critical = 1.628 / n.sqrt();
        assert!(ks < critical, "KS statistic {ks} exceeds {critical}");
    }

    #[test]
    fn snapshot_contains_all_kinds() {
        let cfg = SystemConfig::default();
        let real = sample_realization(&cfg, Truncation::square(400.0), &mut rng(11));
        let rows = snapshot_rows(&real, &cfg, &mut rng(12));
        let count = |k| rows.iter().filter(|r| r.kind == k).count();
        assert_eq!(count(SnapshotKind::Line), real.line_count() + 1);
        assert_eq!(count(SnapshotKind::Bs), real.interferer_count() + 2);
        assert!(count(SnapshotKind::User) >= 3);
        assert_eq!((rows[1].x, rows[1].y), (0.0, 0.0));
        assert!((rows[4].x + 100.0).abs() < 1e-12 && rows[4].y.abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sampled_values_stay_in_range(
            seed in any::<u64>(),
            lambda_l in 0.0f64..2e-3,
            lambda_b in 0.0f64..2e-2,
            d1 in 20.0f64..300.0,
            d2 in 20.0f64..300.0,
            frac in 0.0f64..0.99,
            radius in 50.0f64..400.0,
        ) {
            let cfg = SystemConfig {
                lambda_l, lambda_b, d1, d2,
                seg_radius: frac * 0.5 * (d1 + d2).min(2.0 * d1.min(d2)),
                ..Default::default()
            };
            let trunc = Truncation::square(radius);
            let real = sample_realization(&cfg, trunc, &mut rng(seed));
            for (line, offsets) in real.other_lines() {
                prop_assert!(line.rho >= 0.0 && line.rho <= radius);
                prop_assert!((0.0..TAU).contains(&line.theta));
                prop_assert!(offsets.windows(2).all(|w| w[0] <= w[1]));
                prop_assert!(offsets.iter().all(|u| u.abs() <= radius));
            }
            let t = &real.typical;
            prop_assert!(t.left_interferers.iter().all(|&d| d > d1 && d <= radius));
            prop_assert!(t.right_interferers.iter().all(|&d| d > d2 && d <= radius));
            for p in [t.noma_user_1, t.noma_user_2] {
                prop_assert!(p.r >= 0.0 && p.r <= cfg.seg_radius);
            }
        }

        #[test]
        fn sorting_preserves_offsets(seed in any::<u64>()) {
            let nodes = sample_line_nodes(Line { rho: 1.0, theta: 0.3 }, 0.05, 200.0, &mut rng(seed));
            let mut shuffled = nodes.offsets.clone();
            shuffled.reverse();
            shuffled.sort_by(f64::total_cmp);
            prop_assert_eq!(shuffled, nodes.offsets);
        }
    }
}
