//! Closed-form outage probabilities of the CoMP and NOMA users.

use serde::Serialize;

use super::laplace::{LaplaceModel, LaplaceSpec};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::numerics::{numeric_derivative, ChebyshevNodes};
use crate::point_process::Side;

/// Default number of Gauss–Chebyshev nodes for the NOMA expressions.
pub const DEFAULT_CHEBYSHEV_N: usize = 64;

/// Relative step of the numeric derivative in the equal-distance branch.
pub const DERIVATIVE_REL_STEP: f64 = 1e-4;

/// Below this relative gap between `d1^α` and `d2^α` the equal-distance branch
/// is used.
pub const NEAR_EQUAL_REL: f64 = 1e-6;

/// Floating error tolerated before a probability is clamped into `[0, 1]`.
pub const CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutageBranch {
    UnequalDistances,
    EqualDistances,
    CaseI,
    CaseII,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutageValue {
    pub p: f64,
    pub branch: OutageBranch,
}

impl OutageValue {
    fn infeasible() -> Self {
        Self {
            p: 1.0,
            branch: OutageBranch::Infeasible,
        }
    }
}

/// Clamps `p` into `[0, 1]` when it is outside by at most `tol`.
fn clamp_probability(p: f64, tol: f64, branch: OutageBranch) -> Result<OutageValue> {
    if !p.is_finite() || p < -tol || p > 1.0 + tol {
        return Err(Error::Numeric {
            routine: "outage",
            detail: format!(
                "probability {p} outside [0, 1] beyond tolerance {tol:e} in branch {branch:?}"
            ),
            estimate: p,
        });
    }
    Ok(OutageValue {
        p: p.clamp(0.0, 1.0),
        branch,
    })
}

/// `μ(ε, d) = d^α ε / (1 - β - εβ)`.
pub fn mu(eps: f64, d: f64, alpha0: f64, beta: f64) -> f64 {
    d.powf(alpha0) * eps / (1.0 - beta - eps * beta)
}

/// Which CoMP expression to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompBranchChoice {
    /// Route by the near-equal rule.
    Auto,
    ForceUnequal,
    ForceEqual,
}

/// CoMP outage for an arbitrary transform `lap(s)` of the interference at the
/// origin.
pub fn comp_outage_with<F>(
    cfg: &SystemConfig,
    choice: CompBranchChoice,
    mut lap: F,
) -> Result<OutageValue>
where
    F: FnMut(f64) -> Result<f64>,
{
    let der = cfg.derive()?;
    if !der.comp_feasible {
        return Ok(OutageValue::infeasible());
    }
    let (a, beta, rho, eps0) = (cfg.alpha0, cfg.beta, der.rho, der.eps[0]);
    let a1 = cfg.d1.powf(a);
    let a2 = cfg.d2.powf(a);
    let equal = match choice {
        CompBranchChoice::Auto => (a1 - a2).abs() < NEAR_EQUAL_REL * a1,
        CompBranchChoice::ForceUnequal => false,
        CompBranchChoice::ForceEqual => true,
    };
    if equal {
        let m = mu(eps0, cfg.d1, a, beta);
        if m == 0.0 {
            return clamp_probability(0.0, CLAMP_TOL, OutageBranch::EqualDistances);
        }
        let e = (-m / rho).exp();
        let l = lap(m)?;
        let dl = numeric_derivative(&mut lap, m, DERIVATIVE_REL_STEP)?;
        let p = 1.0 - e * (1.0 + m / rho) * l + e * m * dl;
        clamp_probability(p, CLAMP_TOL, OutageBranch::EqualDistances)
    } else {
        if a1 == a2 {
            return Err(Error::Domain(
                "unequal-distance branch needs d1 != d2".into(),
            ));
        }
        let m1 = mu(eps0, cfg.d1, a, beta);
        let m2 = mu(eps0, cfg.d2, a, beta);
        let t1 = a2 / (a2 - a1) * (-m1 / rho).exp() * lap(m1)?;
        let t2 = a1 / (a2 - a1) * (-m2 / rho).exp() * lap(m2)?;
        clamp_probability(1.0 - t1 + t2, CLAMP_TOL, OutageBranch::UnequalDistances)
    }
}

/// Which NOMA expression to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NomaCaseChoice {
    Auto,
    ForceCaseI,
    ForceCaseII,
}

/// NOMA outage for user `k` given a transform `lap(s, r, side)` of the
/// interference at a user `r` from its serving BS on the given side.
pub fn noma_outage_with<F>(
    cfg: &SystemConfig,
    k: usize,
    n_points: usize,
    choice: NomaCaseChoice,
    mut lap: F,
) -> Result<OutageValue>
where
    F: FnMut(f64, f64, Side) -> Result<f64>,
{
    if k != 1 && k != 2 {
        return Err(Error::Domain(format!(
            "NOMA user index must be 1 or 2, got {k}"
        )));
    }
    let nodes = ChebyshevNodes::new(n_points)?;
    let der = cfg.derive()?;
    let beta = cfg.beta;
    if !der.comp_feasible || beta == 0.0 {
        return Ok(OutageValue::infeasible());
    }
    let (a, rho, eps0, eps_k) = (cfg.alpha0, der.rho, der.eps[0], der.eps[k]);
    let margin = der.comp_margin(beta);
    let m0 = eps0 / margin;
    let case_one = match choice {
        NomaCaseChoice::Auto => eps_k >= eps0 * beta / margin,
        NomaCaseChoice::ForceCaseI => true,
        NomaCaseChoice::ForceCaseII => false,
    };
    let eta = (eps0 * beta - eps_k * margin) / (beta * margin * (1.0 + eps_k));
    let dsum = cfg.d1 + cfg.d2;
    let w = std::f64::consts::PI / n_points as f64;

    let mut total = 0.0;
    for &theta in nodes.thetas() {
        let c = 0.5 * cfg.seg_radius * (1.0 + theta);
        let ca = c.powf(a);
        let mut inner = 0.0;
        for (sign, side) in [(-1.0, Side::TowardFarBs), (1.0, Side::AwayFromFarBs)] {
            let ra = (dsum + sign * c).powf(a);
            let d_weight = ra / (ra + eps_k * ca);
            if case_one {
                let s = ca * eps_k / beta;
                inner += d_weight * (-s / rho).exp() * lap(s, c, side)?;
            } else {
                let s0 = ca * m0;
                let phi = (ra - ca) * eta + s0;
                let psi = ca * eps_k / beta + (ra + ca * eps_k) * eta;
                let a_term = ra / (ra - ca)
                    * ((-s0 / rho).exp() * lap(s0, c, side)?
                        - (-phi / rho).exp() * lap(phi, c, side)?);
                let d_term = d_weight * (-psi / rho).exp() * lap(psi, c, side)?;
                inner += a_term + d_term;
            }
        }
        total += (1.0 - theta * theta).sqrt() * inner;
    }
    let success = 0.25 * w * total;
    let branch = if case_one {
        OutageBranch::CaseI
    } else {
        OutageBranch::CaseII
    };
    // The Chebyshev rule overweights a constant integrand by π²/(24N²), so a
    // near-certain success can exceed 1 by about that much.
    let tol = CLAMP_TOL + std::f64::consts::PI.powi(2) / (24.0 * (n_points * n_points) as f64);
    clamp_probability(1.0 - success, tol, branch)
}

/// Evaluates the closed-form outage expressions for one config.
#[derive(Debug)]
pub struct AnalyticModel {
    laplace: LaplaceModel,
}

impl AnalyticModel {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            laplace: LaplaceModel::new(cfg),
        })
    }

    pub fn config(&self) -> &SystemConfig {
        self.laplace.config()
    }

    pub fn laplace(&self) -> &LaplaceModel {
        &self.laplace
    }

    pub fn comp(&self, choice: CompBranchChoice) -> Result<OutageValue> {
        let cfg = self.config();
        let (d1, d2) = (cfg.d1, cfg.d2);
        let equal = match choice {
            CompBranchChoice::ForceEqual => true,
            CompBranchChoice::ForceUnequal => false,
            CompBranchChoice::Auto => {
                let (a1, a2) = (d1.powf(cfg.alpha0), d2.powf(cfg.alpha0));
                (a1 - a2).abs() < NEAR_EQUAL_REL * a1
            }
        };
        let spec = if equal {
            LaplaceSpec::Total { d1, d2: d1 }
        } else {
            LaplaceSpec::Total { d1, d2 }
        };
        comp_outage_with(cfg, choice, |s| self.laplace.eval(spec, s))
    }

    pub fn noma(&self, k: usize, n_points: usize, choice: NomaCaseChoice) -> Result<OutageValue> {
        let cfg = self.config();
        let (d1, d2) = (cfg.d1, cfg.d2);
        noma_outage_with(cfg, k, n_points, choice, |s, r, side| {
            self.laplace.eval(LaplaceSpec::noma(d1, d2, r, side), s)
        })
    }

    pub fn comp_asymptotic(&self, choice: CompBranchChoice) -> Result<OutageValue> {
        comp_outage_with(self.config(), choice, |s| {
            self.laplace.eval(LaplaceSpec::Asymptotic, s)
        })
    }

    pub fn noma_asymptotic(
        &self,
        k: usize,
        n_points: usize,
        choice: NomaCaseChoice,
    ) -> Result<OutageValue> {
        noma_outage_with(self.config(), k, n_points, choice, |s, _, _| {
            self.laplace.eval(LaplaceSpec::Asymptotic, s)
        })
    }
}

/// CoMP user outage.
pub fn outage_comp(cfg: &SystemConfig) -> Result<OutageValue> {
    AnalyticModel::new(cfg)?.comp(CompBranchChoice::Auto)
}

/// Outage of NOMA user `k ∈ {1, 2}` with an `n_points` Chebyshev rule.
pub fn outage_noma(cfg: &SystemConfig, k: usize, n_points: usize) -> Result<OutageValue> {
    AnalyticModel::new(cfg)?.noma(k, n_points, NomaCaseChoice::Auto)
}

/// CoMP outage in the dense-road, sparse-BS limit at fixed `lambda_l * lambda_b`.
pub fn outage_comp_asymptotic(cfg: &SystemConfig) -> Result<OutageValue> {
    AnalyticModel::new(cfg)?.comp_asymptotic(CompBranchChoice::Auto)
}

/// NOMA outage in the dense-road, sparse-BS limit.
pub fn outage_noma_asymptotic(
    cfg: &SystemConfig,
    k: usize,
    n_points: usize,
) -> Result<OutageValue> {
    AnalyticModel::new(cfg)?.noma_asymptotic(k, n_points, NomaCaseChoice::Auto)
}
