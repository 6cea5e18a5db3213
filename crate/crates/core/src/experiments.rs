//! Figure recipes, parameter sweeps, CSV output and validation suites.
//!
//! Every figure is a list of [`RecipePoint`]s. Running a recipe evaluates the
//! analytic outage at each point and, when Monte Carlo settings are given,
//! estimates all points in one batched call so that points sharing a network
//! also share trials. Output rows are flat and written as CSV; plotting reads
//! the CSV back and never recomputes.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::analytic::{
    laplace_intra, AnalyticModel, CompBranchChoice, NomaCaseChoice, DEFAULT_CHEBYSHEV_N,
};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::link::UserId;
use crate::monte_carlo::{
    estimate_outages, truncation_convergence, validate_lemma1, Lemma1Settings, McSettings,
    OutageEstimate, OutageQuery, Scheme,
};
use crate::numerics::{beta_fn, gauss_2f1_neg, integrate_tail, QuadratureSettings};
use crate::point_process::{sample_realization, snapshot_rows, SnapshotRow, Truncation};
use crate::streams::{self, TrialKey};

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepValues {
    List(Vec<f64>),
    Range {
        start: f64,
        stop: f64,
        count: usize,
        spacing: Spacing,
    },
}

/// One swept config field.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: String,
    pub values: SweepValues,
}

impl SweepSpec {
    pub fn list(variable: &str, values: &[f64]) -> Self {
        Self {
            variable: variable.into(),
            values: SweepValues::List(values.to_vec()),
        }
    }

    pub fn range(variable: &str, start: f64, stop: f64, count: usize, spacing: Spacing) -> Self {
        Self {
            variable: variable.into(),
            values: SweepValues::Range {
                start,
                stop,
                count,
                spacing,
            },
        }
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match &self.values {
            SweepValues::List(v) => v.clone(),
            &SweepValues::Range {
                start,
                stop,
                count,
                spacing,
            } => {
                if count == 0 {
                    Vec::new()
                } else if count == 1 {
                    vec![start]
                } else {
                    if spacing == Spacing::Log && (start <= 0.0 || stop <= 0.0) {
                        return Err(Error::Domain("log sweep needs positive endpoints".into()));
                    }
                    let mut v: Vec<f64> = (0..count)
                        .map(|i| {
                            let t = i as f64 / (count - 1) as f64;
                            match spacing {
                                Spacing::Linear => start + t * (stop - start),
                                Spacing::Log => (start.ln() + t * (stop.ln() - start.ln())).exp(),
                            }
                        })
                        .collect();
                    v[0] = start;
                    v[count - 1] = stop;
                    v
                }
            }
        };
        if v.is_empty() {
            return Err(Error::Domain(format!(
                "sweep over `{}` has no values",
                self.variable
            )));
        }
        Ok(v)
    }

    /// One validated config per sweep value.
    pub fn apply(&self, base: &SystemConfig) -> Result<Vec<(f64, SystemConfig)>> {
        self.values()?
            .into_iter()
            .map(|x| {
                let mut cfg = base.clone();
                cfg.set_field(&self.variable, &x.to_string())?;
                cfg.validate()?;
                Ok((x, cfg))
            })
            .collect()
    }
}

impl FromStr for SweepSpec {
    type Err = Error;

    /// `field=v1,v2,...` or `field=start:stop:count[:log]`.
    fn from_str(s: &str) -> Result<Self> {
        let (var, rest) = s
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("sweep `{s}` is not of the form field=values")))?;
        let var = var.trim();
        if !SystemConfig::FIELD_NAMES.contains(&var) {
            return Err(Error::Parse(format!("unknown sweep field `{var}`")));
        }
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{t}` in sweep")))
        };
        if rest.contains(':') {
            let parts: Vec<&str> = rest.split(':').collect();
            if !(3..=4).contains(&parts.len()) {
                return Err(Error::Parse(format!("bad range `{rest}`")));
            }
            let count = parts[2]
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad count `{}`", parts[2])))?;
            let spacing = match parts.get(3).map(|p| p.trim()) {
                None | Some("lin") | Some("linear") => Spacing::Linear,
                Some("log") => Spacing::Log,
                Some(other) => return Err(Error::Parse(format!("unknown spacing `{other}`"))),
            };
            Ok(Self::range(
                var,
                num(parts[0])?,
                num(parts[1])?,
                count,
                spacing,
            ))
        } else {
            let values = rest.split(',').map(num).collect::<Result<Vec<_>>>()?;
            Ok(Self::list(var, &values))
        }
    }
}

// ---------------------------------------------------------------------------
// Recipes

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Snapshot,
}

impl FigureId {
    pub const ALL: [FigureId; 7] = [
        FigureId::Fig2,
        FigureId::Fig3,
        FigureId::Fig4,
        FigureId::Fig5,
        FigureId::Fig6,
        FigureId::Fig7,
        FigureId::Snapshot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6 => "fig6",
            FigureId::Fig7 => "fig7",
            FigureId::Snapshot => "snapshot",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| {
                Error::Domain(format!(
                    "unknown figure `{s}`; expected one of fig2..fig7, snapshot"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Outage,
    SumRate,
}

/// One evaluated quantity at one abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct RecipePoint {
    pub panel: &'static str,
    pub series: String,
    pub scheme: Scheme,
    pub x: f64,
    pub cfg: SystemConfig,
    /// `None` for sum rates, which cover all served users.
    pub user: Option<UserId>,
    pub quantity: Quantity,
    pub asymptotic: bool,
}

/// Axis description of one output panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub name: &'static str,
    pub x_label: &'static str,
    pub y_label: &'static str,
    pub log_x: bool,
    pub log_y: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureRecipe {
    pub id: FigureId,
    pub title: &'static str,
    pub x_name: &'static str,
    pub panels: Vec<Panel>,
    pub points: Vec<RecipePoint>,
}

// Shared operating point. Noise -170 dBm/Hz, 2 GHz carrier, 10 MHz band,
// 30 dBm transmit power, lambda_l = 5e-4, lambda_b = 5e-3, alpha0 = 3.
fn base() -> SystemConfig {
    SystemConfig::default()
}

/// Cross-road exponent where a figure leaves it unstated.
const DEFAULT_ALPHA1: f64 = 4.0;
/// NOMA segment half-length where a figure leaves it unstated.
const DEFAULT_SEG_RADIUS: f64 = 20.0;

// CoMP accuracy figure: beta = 1/5; Case I d = (100, 100), Case II d = (100, 150).
const FIG2_BETA: f64 = 0.2;
const FIG2_CASES: [(&str, f64, f64); 2] = [("case1", 100.0, 100.0), ("case2", 100.0, 150.0)];
const FIG2_R0: [f64; 11] = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 2.2];

// NOMA accuracy: d1 = d2 = 100, beta = 1/5, R0 = 0.5.
const FIG3_NOMA_R0: f64 = 0.5;
const FIG3_NOMA_RK: [f64; 8] = [0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
// N-NOMA vs OMA: d1 = d2 = 100, alpha1 = 4, beta = 1/5, segment 20 m.
// Case I rates (1, 0.5, 0.5), Case II rates (2, 1, 1).
const FIG3_CASES: [(&str, [f64; 3]); 2] = [("case1", [1.0, 0.5, 0.5]), ("case2", [2.0, 1.0, 1.0])];
const FIG3_LAMBDA_B: [f64; 10] = [1e-3, 2e-3, 3e-3, 4e-3, 5e-3, 6e-3, 7e-3, 8e-3, 9e-3, 1e-2];

// Power split: d1 = d2 = 100, alpha1 = 4, segment 20 m.
// Case I all rates 0.5, Case II all rates 1.
const FIG4_CASES: [(&str, f64); 2] = [("case1", 0.5), ("case2", 1.0)];
const FIG4_BETA_START: f64 = 0.02;
const FIG4_BETA_STOP: f64 = 0.98;
const FIG4_BETA_COUNT: usize = 49;

// Distances: alpha1 = 4, beta = 1/4, all rates 0.5.
// Case I d2 = 100, Case II d1 + d2 = 400.
const FIG5_BETA: f64 = 0.25;
const FIG5_D2_FIXED: f64 = 100.0;
const FIG5_D_SUM: f64 = 400.0;
const FIG5_D1: [f64; 9] = [
    100.0, 125.0, 150.0, 175.0, 200.0, 225.0, 250.0, 275.0, 300.0,
];

// Densities: alpha1 = 4, beta = 1/4, segment 40 m, all rates 0.5,
// d1 = d2 = 1/(2 lambda_b).
const FIG6_BETA: f64 = 0.25;
const FIG6_SEG_RADIUS: f64 = 40.0;
const FIG6_LAMBDA_L: [f64; 3] = [1e-4, 5e-4, 1e-3];
const FIG6_LAMBDA_B: [f64; 10] = [1e-3, 2e-3, 3e-3, 4e-3, 5e-3, 6e-3, 7e-3, 8e-3, 9e-3, 1e-2];

// Fixed product lambda_l * lambda_b = 2.5e-6: alpha1 = 4, beta = 1/4.
// CoMP Case I d = (100, 100), Case II d = (100, 150); NOMA d = (100, 100), R0 = 0.5.
pub const FIG7_DENSITY_PRODUCT: f64 = 2.5e-6;
const FIG7_BETA: f64 = 0.25;
const FIG7_LAMBDA_B: [f64; 7] = [1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4];

fn outage_panel(name: &'static str, x_label: &'static str, log_x: bool) -> Panel {
    Panel {
        name,
        x_label,
        y_label: "Outage probability",
        log_x,
        log_y: true,
    }
}

fn rate_panel(name: &'static str, x_label: &'static str, log_x: bool) -> Panel {
    Panel {
        name,
        x_label,
        y_label: "Outage sum rate (bps/Hz)",
        log_x,
        log_y: false,
    }
}

fn outage_point(
    panel: &'static str,
    series: impl Into<String>,
    x: f64,
    cfg: &SystemConfig,
    user: UserId,
) -> RecipePoint {
    RecipePoint {
        panel,
        series: series.into(),
        scheme: Scheme::Nnoma,
        x,
        cfg: cfg.clone(),
        user: Some(user),
        quantity: Quantity::Outage,
        asymptotic: false,
    }
}

fn rate_point(
    panel: &'static str,
    series: impl Into<String>,
    scheme: Scheme,
    x: f64,
    cfg: &SystemConfig,
) -> RecipePoint {
    RecipePoint {
        panel,
        series: series.into(),
        scheme,
        x,
        cfg: cfg.clone(),
        user: None,
        quantity: Quantity::SumRate,
        asymptotic: false,
    }
}

pub fn recipe(id: FigureId) -> Result<FigureRecipe> {
    let b = SystemConfig {
        alpha1: DEFAULT_ALPHA1,
        seg_radius: DEFAULT_SEG_RADIUS,
        ..base()
    };
    let mut points = Vec::new();
    let r = match id {
        FigureId::Fig2 => {
            for (case, d1, d2) in FIG2_CASES {
                for r0 in FIG2_R0 {
                    let cfg = SystemConfig {
                        d1,
                        d2,
                        beta: FIG2_BETA,
                        rates: [r0, b.rates[1], b.rates[2]],
                        ..b.clone()
                    };
                    points.push(outage_point("comp", case, r0, &cfg, UserId::Comp));
                }
            }
            FigureRecipe {
                id,
                title: "CoMP user outage",
                x_name: "r0",
                panels: vec![outage_panel("comp", "Target rate R0 (bps/Hz)", false)],
                points,
            }
        }
        FigureId::Fig3 => {
            for rk in FIG3_NOMA_RK {
                let cfg = SystemConfig {
                    beta: FIG2_BETA,
                    rates: [FIG3_NOMA_R0, rk, rk],
                    ..b.clone()
                };
                for u in [UserId::Noma1, UserId::Noma2] {
                    points.push(outage_point("noma", u.name(), rk, &cfg, u));
                }
            }
            for (case, rates) in FIG3_CASES {
                for lb in FIG3_LAMBDA_B {
                    let cfg = SystemConfig {
                        lambda_b: lb,
                        beta: FIG2_BETA,
                        rates,
                        ..b.clone()
                    };
                    points.push(rate_point(
                        "sum_rate",
                        format!("{case}_nnoma"),
                        Scheme::Nnoma,
                        lb,
                        &cfg,
                    ));
                    points.push(rate_point(
                        "sum_rate",
                        format!("{case}_oma"),
                        Scheme::Oma,
                        lb,
                        &cfg,
                    ));
                    for u in UserId::ALL {
                        points.push(outage_point(
                            "outage",
                            format!("{case}_nnoma_{}", u.name()),
                            lb,
                            &cfg,
                            u,
                        ));
                    }
                    let oma = SystemConfig {
                        beta: 0.0,
                        ..cfg.clone()
                    };
                    let mut p =
                        outage_point("outage", format!("{case}_oma_comp"), lb, &oma, UserId::Comp);
                    p.scheme = Scheme::Oma;
                    points.push(p);
                }
            }
            FigureRecipe {
                id,
                title: "NOMA user outage and comparison with OMA",
                x_name: "rk_or_lambda_b",
                panels: vec![
                    outage_panel("noma", "Target rate Rk (bps/Hz)", false),
                    rate_panel("sum_rate", "lambda_b (nodes/m)", false),
                    outage_panel("outage", "lambda_b (nodes/m)", false),
                ],
                points,
            }
        }
        FigureId::Fig4 => {
            let betas = SweepSpec::range(
                "beta",
                FIG4_BETA_START,
                FIG4_BETA_STOP,
                FIG4_BETA_COUNT,
                Spacing::Linear,
            )
            .values()?;
            for (case, rate) in FIG4_CASES {
                for &beta in &betas {
                    let cfg = SystemConfig {
                        beta,
                        rates: [rate; 3],
                        ..b.clone()
                    };
                    points.push(outage_point(
                        "outage",
                        format!("{case}_comp"),
                        beta,
                        &cfg,
                        UserId::Comp,
                    ));
                    points.push(outage_point(
                        "outage",
                        format!("{case}_noma1"),
                        beta,
                        &cfg,
                        UserId::Noma1,
                    ));
                    points.push(rate_point("sum_rate", case, Scheme::Nnoma, beta, &cfg));
                }
            }
            FigureRecipe {
                id,
                title: "Impact of the power allocation coefficient",
                x_name: "beta",
                panels: vec![
                    outage_panel("outage", "beta", false),
                    rate_panel("sum_rate", "beta", false),
                ],
                points,
            }
        }
        FigureId::Fig5 => {
            for d1 in FIG5_D1 {
                for (case, d2) in [("case1", FIG5_D2_FIXED), ("case2", FIG5_D_SUM - d1)] {
                    let cfg = SystemConfig {
                        d1,
                        d2,
                        beta: FIG5_BETA,
                        rates: [0.5; 3],
                        ..b.clone()
                    };
                    for u in UserId::ALL {
                        points.push(outage_point(
                            "outage",
                            format!("{case}_{}", u.name()),
                            d1,
                            &cfg,
                            u,
                        ));
                    }
                }
            }
            FigureRecipe {
                id,
                title: "Impact of the serving distances",
                x_name: "d1",
                panels: vec![outage_panel("outage", "d1 (m)", false)],
                points,
            }
        }
        FigureId::Fig6 => {
            for ll in FIG6_LAMBDA_L {
                for lb in FIG6_LAMBDA_B {
                    let d = 1.0 / (2.0 * lb);
                    let cfg = SystemConfig {
                        lambda_l: ll,
                        lambda_b: lb,
                        d1: d,
                        d2: d,
                        beta: FIG6_BETA,
                        seg_radius: FIG6_SEG_RADIUS,
                        rates: [0.5; 3],
                        ..b.clone()
                    };
                    for u in [UserId::Comp, UserId::Noma1] {
                        points.push(outage_point(
                            "outage",
                            format!("ll{ll:e}_{}", u.name()),
                            lb,
                            &cfg,
                            u,
                        ));
                    }
                }
            }
            FigureRecipe {
                id,
                title: "Impact of the road and BS densities",
                x_name: "lambda_b",
                panels: vec![outage_panel("outage", "lambda_b (nodes/m)", false)],
                points,
            }
        }
        FigureId::Fig7 => {
            for lb in FIG7_LAMBDA_B {
                let at = |d2: f64| SystemConfig {
                    lambda_l: FIG7_DENSITY_PRODUCT / lb,
                    lambda_b: lb,
                    d2,
                    beta: FIG7_BETA,
                    rates: [0.5; 3],
                    ..b.clone()
                };
                for (case, d2) in [("case1", 100.0), ("case2", 150.0)] {
                    let mut p = outage_point("comp", case, lb, &at(d2), UserId::Comp);
                    p.asymptotic = true;
                    points.push(p);
                }
                let mut p = outage_point("noma", "noma1", lb, &at(100.0), UserId::Noma1);
                p.asymptotic = true;
                points.push(p);
            }
            FigureRecipe {
                id,
                title: "Exact and asymptotic outage at fixed lambda_l * lambda_b",
                x_name: "lambda_b",
                panels: vec![
                    outage_panel("comp", "lambda_b (nodes/m)", true),
                    outage_panel("noma", "lambda_b (nodes/m)", true),
                ],
                points,
            }
        }
        FigureId::Snapshot => FigureRecipe {
            id,
            title: "One network realization",
            x_name: "x",
            panels: vec![Panel {
                name: "snapshot",
                x_label: "x (m)",
                y_label: "y (m)",
                log_x: false,
                log_y: false,
            }],
            points,
        },
    };
    Ok(r)
}

// ---------------------------------------------------------------------------
// Rows

/// One row of a figure CSV. Empty cells are absent values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureRow {
    pub figure: String,
    pub panel: String,
    pub series: String,
    pub scheme: Scheme,
    pub x_name: String,
    pub x: f64,
    pub user: String,
    pub quantity: Quantity,
    pub analytic: Option<f64>,
    pub asymptotic: Option<f64>,
    pub mc: Option<f64>,
    pub stderr: Option<f64>,
    pub n_trials: Option<u64>,
    pub z_score: Option<f64>,
}

pub const FIGURE_CSV_HEADER: [&str; 14] = [
    "figure",
    "panel",
    "series",
    "scheme",
    "x_name",
    "x",
    "user",
    "quantity",
    "analytic",
    "asymptotic",
    "mc",
    "stderr",
    "n_trials",
    "z_score",
];

/// Monte Carlo row of a single scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRow {
    pub scenario: String,
    pub user: String,
    pub n_trials: Option<u64>,
    pub p_hat: Option<f64>,
    pub stderr: Option<f64>,
    pub analytic_p: f64,
    pub z_score: Option<f64>,
}

pub const SCENARIO_CSV_HEADER: [&str; 7] = [
    "scenario",
    "user",
    "n_trials",
    "p_hat",
    "stderr",
    "analytic_p",
    "z_score",
];

/// Analytic outage of `user`, exact or asymptotic.
pub fn analytic_outage(
    cfg: &SystemConfig,
    user: UserId,
    asymptotic: bool,
    n_points: usize,
) -> Result<f64> {
    let m = AnalyticModel::new(cfg)?;
    let v = match (user, asymptotic) {
        (UserId::Comp, false) => m.comp(CompBranchChoice::Auto)?,
        (UserId::Comp, true) => m.comp_asymptotic(CompBranchChoice::Auto)?,
        (u, false) => m.noma(u.index(), n_points, NomaCaseChoice::Auto)?,
        (u, true) => m.noma_asymptotic(u.index(), n_points, NomaCaseChoice::Auto)?,
    };
    Ok(v.p)
}

/// Analytic outage sum rate of `scheme`.
pub fn analytic_sum_rate(cfg: &SystemConfig, scheme: Scheme, n_points: usize) -> Result<f64> {
    match scheme {
        Scheme::Nnoma => UserId::ALL
            .iter()
            .map(|&u| Ok(cfg.rates[u.index()] * (1.0 - analytic_outage(cfg, u, false, n_points)?)))
            .sum(),
        Scheme::Oma => {
            let oma = SystemConfig {
                beta: 0.0,
                ..cfg.clone()
            };
            Ok(cfg.rates[0] * (1.0 - analytic_outage(&oma, UserId::Comp, false, n_points)?))
        }
    }
}

fn point_queries(p: &RecipePoint) -> Vec<OutageQuery> {
    match p.user {
        Some(u) => vec![OutageQuery::new(&p.cfg, u)],
        None => crate::monte_carlo::sum_rate_queries(&p.cfg, p.scheme),
    }
}

/// Evaluates a recipe. Monte Carlo columns are filled when `mc` is given.
pub fn run_recipe(r: &FigureRecipe, mc: Option<&McSettings>) -> Result<Vec<FigureRow>> {
    let mut queries = Vec::new();
    let mut spans = Vec::with_capacity(r.points.len());
    for p in &r.points {
        let q = point_queries(p);
        spans.push(queries.len()..queries.len() + q.len());
        queries.extend(q);
    }
    let estimates: Option<Vec<OutageEstimate>> = match mc {
        Some(s) if !queries.is_empty() => Some(estimate_outages(&queries, s)?),
        _ => None,
    };
    let mut rows = Vec::with_capacity(r.points.len());
    for (p, span) in r.points.iter().zip(spans) {
        let mut row = FigureRow {
            figure: r.id.name().into(),
            panel: p.panel.into(),
            series: p.series.clone(),
            scheme: p.scheme,
            x_name: r.x_name.into(),
            x: p.x,
            user: p.user.map_or("all", |u| u.name()).into(),
            quantity: p.quantity,
            analytic: None,
            asymptotic: None,
            mc: None,
            stderr: None,
            n_trials: None,
            z_score: None,
        };
        match (p.quantity, p.user) {
            (Quantity::Outage, Some(u)) => {
                let a = analytic_outage(&p.cfg, u, false, DEFAULT_CHEBYSHEV_N)?;
                row.analytic = Some(a);
                if p.asymptotic {
                    row.asymptotic = Some(analytic_outage(&p.cfg, u, true, DEFAULT_CHEBYSHEV_N)?);
                }
                if let Some(est) = &estimates {
                    let e = est[span.start];
                    row.mc = Some(e.p_hat);
                    row.stderr = Some(e.stderr);
                    row.n_trials = Some(e.n_trials);
                    row.z_score = Some(e.z_score(a));
                }
            }
            _ => {
                row.analytic = Some(analytic_sum_rate(&p.cfg, p.scheme, DEFAULT_CHEBYSHEV_N)?);
                if let Some(est) = &estimates {
                    let outs = est[span].to_vec();
                    let n = outs[0].n_trials;
                    let var: f64 = outs
                        .iter()
                        .enumerate()
                        .map(|(i, e)| (p.cfg.rates[i] * e.stderr).powi(2))
                        .sum();
                    let s = crate::monte_carlo::sum_rate_from(&p.cfg, p.scheme, outs);
                    row.mc = Some(s.total);
                    row.stderr = Some(var.sqrt());
                    row.n_trials = Some(n);
                }
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Analytic and optional Monte Carlo outage of each user of one scenario.
pub fn run_scenario(
    scenario: &str,
    cfg: &SystemConfig,
    users: &[UserId],
    mc: Option<&McSettings>,
) -> Result<Vec<ScenarioRow>> {
    cfg.validate()?;
    let estimates = match mc {
        Some(s) => Some(estimate_outages(
            &users
                .iter()
                .map(|&u| OutageQuery::new(cfg, u))
                .collect::<Vec<_>>(),
            s,
        )?),
        None => None,
    };
    users
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let a = analytic_outage(cfg, u, false, DEFAULT_CHEBYSHEV_N)?;
            let e = estimates.as_ref().map(|v| v[i]);
            Ok(ScenarioRow {
                scenario: scenario.into(),
                user: u.name().into(),
                n_trials: e.map(|e| e.n_trials),
                p_hat: e.map(|e| e.p_hat),
                stderr: e.map(|e| e.stderr),
                analytic_p: a,
                z_score: e.map(|e| e.z_score(a)),
            })
        })
        .collect()
}

/// One realization dump, drawn from the seed's first trial streams.
pub fn snapshot(cfg: &SystemConfig, trunc: Truncation, seed: u64) -> Result<Vec<SnapshotRow>> {
    cfg.validate()?;
    let key = TrialKey::new(seed, 0);
    let real = sample_realization(cfg, trunc, &mut key.rng(streams::LINES, 0));
    Ok(snapshot_rows(
        &real,
        cfg,
        &mut key.rng(streams::SNAPSHOT_USERS, 0),
    ))
}

/// Writes serializable rows as CSV with a header row. Parent directories are
/// created. An empty slice still produces `header`.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Validation suites

/// Signature of an intra-road Laplace transform `(s, d1, d2, lambda_b, alpha0)`.
pub type IntraLaplaceFn = fn(f64, f64, f64, f64, f64) -> Result<f64>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub suite: String,
    pub check: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn new(
        suite: &str,
        check: impl Into<String>,
        value: f64,
        tolerance: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            suite: suite.into(),
            check: check.into(),
            passed: value.is_finite() && value <= tolerance,
            value,
            tolerance,
            detail: detail.into(),
        }
    }
}

pub const CHECK_CSV_HEADER: [&str; 6] =
    ["suite", "check", "passed", "value", "tolerance", "detail"];

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    pub seed: u64,
    pub lemma1: Lemma1Settings,
    pub lemma1_q: Vec<f64>,
    pub truncation_trials: u64,
    pub truncation_radii: Vec<f64>,
    /// Implementation under test for the intra-road oracle comparison.
    pub intra: IntraLaplaceFn,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            seed: crate::monte_carlo::DEFAULT_SEED,
            lemma1: Lemma1Settings::default(),
            lemma1_q: vec![0.0, 0.25, 0.5, 1.0],
            truncation_trials: 100_000,
            truncation_radii: vec![500.0, 1000.0, 2000.0, 4000.0],
            intra: laplace_intra,
        }
    }
}

fn oracle_settings() -> QuadratureSettings {
    QuadratureSettings {
        abs_tol: 1e-300,
        rel_tol: 1e-12,
        max_subdivisions: 5000,
    }
}

/// Intra-road Laplace transform by direct quadrature of the PGFL exponent.
pub fn intra_laplace_quadrature(
    s: f64,
    d1: f64,
    d2: f64,
    lambda_b: f64,
    alpha0: f64,
) -> Result<f64> {
    let side = |d: f64| -> Result<f64> {
        Ok(integrate_tail(|r| s / (s + r.powf(alpha0)), d, d, &oracle_settings())?.value)
    };
    Ok((-lambda_b * (side(d1)? + side(d2)?)).exp())
}

/// The 100-point `(s, d1, d2, alpha0)` grid of the special-function suite.
pub fn intra_oracle_grid() -> Vec<[f64; 4]> {
    let mut g = Vec::with_capacity(100);
    for s in [1e2, 1e4, 1e5, 1e6, 1e8] {
        for (d1, d2) in [
            (20.0, 20.0),
            (50.0, 150.0),
            (100.0, 100.0),
            (100.0, 400.0),
            (300.0, 250.0),
        ] {
            for a in [2.0, 2.5, 3.0, 4.0] {
                g.push([s, d1, d2, a]);
            }
        }
    }
    g
}

pub fn special_function_suite(intra: IntraLaplaceFn) -> Result<Vec<CheckResult>> {
    const SUITE: &str = "special_functions";
    let lambda_b = 5e-3;
    let mut worst = 0.0f64;
    let mut at = [0.0; 4];
    for p in intra_oracle_grid() {
        let [s, d1, d2, a] = p;
        let got = intra(s, d1, d2, lambda_b, a)?;
        let want = intra_laplace_quadrature(s, d1, d2, lambda_b, a)?;
        let rel = ((got - want) / want).abs();
        if !(rel <= worst) {
            worst = rel;
            at = p;
        }
    }
    let ln2 = (gauss_2f1_neg(1.0, 1.0, 2.0, -1.0)? - std::f64::consts::LN_2).abs();
    let bpi = (beta_fn(0.5, 0.5)? - std::f64::consts::PI).abs();
    Ok(vec![
        CheckResult::new(
            SUITE,
            "intra_laplace_vs_quadrature",
            worst,
            1e-8,
            format!(
                "worst relative error over 100 points at s={:e} d1={} d2={} alpha0={}",
                at[0], at[1], at[2], at[3]
            ),
        ),
        CheckResult::new(
            SUITE,
            "2f1_log_identity",
            ln2,
            1e-10,
            "2F1(1,1;2;-1) vs ln 2",
        ),
        CheckResult::new(SUITE, "beta_half_half", bpi, 1e-12, "B(1/2,1/2) vs pi"),
    ])
}

/// Scenarios used by the quadrature-order stability check.
pub fn stability_scenarios() -> Result<Vec<SystemConfig>> {
    let mut out = Vec::new();
    for id in [
        FigureId::Fig3,
        FigureId::Fig4,
        FigureId::Fig5,
        FigureId::Fig6,
        FigureId::Fig7,
    ] {
        for p in recipe(id)?.points {
            if p.user.is_some_and(|u| u != UserId::Comp) && !out.contains(&p.cfg) {
                out.push(p.cfg);
            }
        }
    }
    Ok(out)
}

pub fn chebyshev_suite() -> Result<Vec<CheckResult>> {
    let mut worst = 0.0f64;
    let mut n = 0;
    for cfg in stability_scenarios()? {
        for k in [UserId::Noma1, UserId::Noma2] {
            let a = analytic_outage(&cfg, k, false, 64)?;
            let b = analytic_outage(&cfg, k, false, 256)?;
            worst = worst.max((a - b).abs());
            n += 1;
        }
    }
    Ok(vec![CheckResult::new(
        "chebyshev",
        "n64_vs_n256",
        worst,
        1e-4,
        format!("largest absolute outage gap over {n} scenario-user pairs"),
    )])
}

pub fn lemma1_suite(cfg: &SystemConfig, opts: &ValidateOptions) -> Result<Vec<CheckResult>> {
    const SUITE: &str = "lemma1";
    let s = Lemma1Settings {
        seed: opts.seed,
        ..opts.lemma1
    };
    let rows = validate_lemma1(cfg, &opts.lemma1_q, &s)?;
    let mut out = Vec::new();
    for r in &rows {
        out.push(CheckResult::new(
            SUITE,
            format!("q={}_max_abs_z", r.q),
            r.max_abs_z,
            4.0,
            format!("{} realizations, pooled z {:.3}", r.realizations, r.z_score),
        ));
        out.push(CheckResult::new(
            SUITE,
            format!("q={}_pooled_z", r.q),
            r.z_score.abs(),
            4.0,
            "",
        ));
        if r.q != rows[0].q {
            out.push(CheckResult::new(
                SUITE,
                format!("q={}_vs_q={}", r.q, rows[0].q),
                r.cross_z.abs(),
                4.0,
                "pooled difference in combined standard errors",
            ));
        }
    }
    Ok(out)
}

pub fn truncation_suite(cfg: &SystemConfig, opts: &ValidateOptions) -> Result<Vec<CheckResult>> {
    const SUITE: &str = "truncation";
    let s = McSettings::new(opts.truncation_trials, opts.seed);
    let mut out = Vec::new();
    for user in [UserId::Comp, UserId::Noma1] {
        let rep = truncation_convergence(cfg, user, &opts.truncation_radii, &s)?;
        let gap = match rep.rows.as_slice() {
            [.., a, b] => {
                (a.p_hat - b.p_hat).abs()
                    / (a.stderr.powi(2) + b.stderr.powi(2))
                        .sqrt()
                        .max(f64::MIN_POSITIVE)
            }
            _ => 0.0,
        };
        let detail = rep
            .rows
            .iter()
            .map(|r| format!("{}m:{:.5}", r.radius, r.p_hat))
            .collect::<Vec<_>>()
            .join(" ");
        out.push(CheckResult::new(
            SUITE,
            format!("{}_last_two_radii", user.name()),
            gap,
            2.0,
            detail,
        ));
    }
    Ok(out)
}

/// Runs every suite on `cfg`.
pub fn run_validation(cfg: &SystemConfig, opts: &ValidateOptions) -> Result<Vec<CheckResult>> {
    let mut out = special_function_suite(opts.intra)?;
    out.extend(chebyshev_suite()?);
    out.extend(lemma1_suite(cfg, opts)?);
    out.extend(truncation_suite(cfg, opts)?);
    Ok(out)
}
