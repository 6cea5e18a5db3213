//! Laplace transforms of the normalized interference.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use num_complex::Complex64;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::numerics::{beta_fn, gauss_2f1_neg, integrate_semi_infinite_scaled, QuadratureSettings};
use crate::point_process::Side;

/// Distance used in place of a zero lower integration limit.
pub const ZERO_DISTANCE_FLOOR: f64 = 1e-9;

fn inner_settings() -> QuadratureSettings {
    QuadratureSettings {
        abs_tol: 1e-300,
        rel_tol: 1e-11,
        max_subdivisions: 2000,
    }
}

fn outer_settings() -> QuadratureSettings {
    QuadratureSettings {
        abs_tol: 1e-300,
        rel_tol: 1e-10,
        max_subdivisions: 2000,
    }
}

/// `∫_d^∞ s / (s + r^α) dr` in closed form.
pub fn intra_tail_integral(s: f64, d: f64, alpha0: f64) -> Result<f64> {
    if s == 0.0 {
        return Ok(0.0);
    }
    let d = d.max(ZERO_DISTANCE_FLOOR);
    let b = 1.0 - 1.0 / alpha0;
    let z = -s / d.powf(alpha0);
    let f = gauss_2f1_neg(1.0, b, 1.0 + b, z)?;
    Ok(s * d.powf(1.0 - alpha0) / (alpha0 - 1.0) * f)
}

/// `∫_0^r s / (s + x^α) dx` in closed form.
pub fn intra_head_integral(s: f64, r: f64, alpha0: f64) -> Result<f64> {
    if s == 0.0 || r <= 0.0 {
        return Ok(0.0);
    }
    let b = 1.0 / alpha0;
    let f = gauss_2f1_neg(1.0, b, 1.0 + b, -r.powf(alpha0) / s)?;
    Ok(r * f)
}

/// Laplace transform of the interference from the typical road, with the
/// nearest interferers beyond `d1` on one side and `d2` on the other.
pub fn laplace_intra(s: f64, d1: f64, d2: f64, lambda_b: f64, alpha0: f64) -> Result<f64> {
    check_s(s)?;
    if lambda_b == 0.0 || s == 0.0 {
        return Ok(1.0);
    }
    let e = intra_tail_integral(s, d1, alpha0)? + intra_tail_integral(s, d2, alpha0)?;
    Ok((-lambda_b * e).exp())
}

fn check_s(s: f64) -> Result<()> {
    if s >= 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "Laplace argument must be finite and non-negative, got {s}"
        )))
    }
}

/// `∫_0^∞ du / (1 + (x² + u²)^{α/2})`. The inner integral of the other-road
/// transform after scaling distances by `s^{1/α}`.
pub fn inter_inner(x: f64, alpha1: f64) -> Result<f64> {
    if alpha1 == 4.0 {
        // 1/(1 + w²) = Im 1/(w - i) and ∫_0^∞ du/(u² + c) = π / (2 sqrt c).
        let c = Complex64::new(x * x, -1.0);
        return Ok((PI / (2.0 * c.sqrt())).im);
    }
    inter_inner_quadrature(x, alpha1)
}

pub(crate) fn inter_inner_quadrature(x: f64, alpha1: f64) -> Result<f64> {
    let h = 0.5 * alpha1;
    let r = integrate_semi_infinite_scaled(
        |u| 1.0 / (1.0 + (x * x + u * u).powf(h)),
        x.max(1.0),
        &inner_settings(),
    )?;
    Ok(r.value)
}

/// Laplace transform of the interference from roads other than the typical
/// one.
pub fn laplace_inter(s: f64, lambda_l: f64, lambda_b: f64, alpha1: f64) -> Result<f64> {
    check_s(s)?;
    if alpha1 <= 2.0 {
        return Err(Error::Domain(format!("alpha1 must exceed 2, got {alpha1}")));
    }
    if s == 0.0 || lambda_l == 0.0 || lambda_b == 0.0 {
        return Ok(1.0);
    }
    // Distances in units of ell = s^{1/α}: G = exp(-kappa q(x)).
    let ell = s.powf(1.0 / alpha1);
    let kappa = 2.0 * lambda_b * ell;
    let mut failure = None;
    let scale = kappa.powf(1.0 / (alpha1 - 1.0)).max(1.0);
    let r = integrate_semi_infinite_scaled(
        |x| match inter_inner(x, alpha1) {
            Ok(q) => -(-kappa * q).exp_m1(),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        scale,
        &outer_settings(),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((-2.0 * PI * lambda_l * ell * r.value).exp())
}

/// Other-road transform for fixed densities, memoized per argument.
#[derive(Debug)]
pub struct InterLaplace {
    lambda_l: f64,
    lambda_b: f64,
    alpha1: f64,
    cache: Mutex<HashMap<u64, f64>>,
}

impl InterLaplace {
    pub fn new(lambda_l: f64, lambda_b: f64, alpha1: f64) -> Self {
        Self {
            lambda_l,
            lambda_b,
            alpha1,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        let key = s.to_bits();
        if let Some(&v) = self.cache.lock().unwrap().get(&key) {
            return Ok(v);
        }
        let v = laplace_inter(s, self.lambda_l, self.lambda_b, self.alpha1)?;
        self.cache.lock().unwrap().insert(key, v);
        Ok(v)
    }

    pub fn cached_len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

/// Asymptotic transform when the other-road BSs become a 2D HPPP with
/// per-road product density `lambda = lambda_l * lambda_b`.
pub fn laplace_asymptotic(s: f64, lambda: f64, alpha1: f64) -> Result<f64> {
    check_s(s)?;
    if alpha1 <= 2.0 {
        return Err(Error::Domain(format!("alpha1 must exceed 2, got {alpha1}")));
    }
    if s == 0.0 || lambda == 0.0 {
        return Ok(1.0);
    }
    let delta = 2.0 / alpha1;
    let b = beta_fn(delta, 1.0 - delta)?;
    Ok((-2.0 * PI * PI * lambda * s.powf(delta) / alpha1 * b).exp())
}

/// Which transform to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LaplaceSpec {
    Intra {
        d1: f64,
        d2: f64,
    },
    Inter,
    Total {
        d1: f64,
        d2: f64,
    },
    NomaTowardFarBs {
        d1: f64,
        d2: f64,
        r1: f64,
    },
    NomaAwayFromFarBs {
        d1: f64,
        d2: f64,
        r1: f64,
    },
    /// Uses `lambda_l * lambda_b` of the model's config.
    Asymptotic,
}

impl LaplaceSpec {
    pub fn noma(d1: f64, d2: f64, r1: f64, side: Side) -> Self {
        match side {
            Side::TowardFarBs => LaplaceSpec::NomaTowardFarBs { d1, d2, r1 },
            Side::AwayFromFarBs => LaplaceSpec::NomaAwayFromFarBs { d1, d2, r1 },
        }
    }
}

/// Evaluates Laplace transforms for one config, sharing the other-road cache.
#[derive(Debug)]
pub struct LaplaceModel {
    cfg: SystemConfig,
    inter: InterLaplace,
}

impl LaplaceModel {
    pub fn new(cfg: &SystemConfig) -> Self {
        Self {
            cfg: cfg.clone(),
            inter: InterLaplace::new(cfg.lambda_l, cfg.lambda_b, cfg.alpha1),
        }
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn inter_cache(&self) -> &InterLaplace {
        &self.inter
    }

    pub fn eval(&self, spec: LaplaceSpec, s: f64) -> Result<f64> {
        let c = &self.cfg;
        match spec {
            LaplaceSpec::Intra { d1, d2 } => laplace_intra(s, d1, d2, c.lambda_b, c.alpha0),
            LaplaceSpec::Inter => {
                check_s(s)?;
                self.inter.eval(s)
            }
            LaplaceSpec::Total { d1, d2 } => {
                Ok(laplace_intra(s, d1, d2, c.lambda_b, c.alpha0)? * self.inter.eval(s)?)
            }
            LaplaceSpec::NomaTowardFarBs { d1, d2, r1 } => {
                Ok(laplace_intra(s, r1, d1 + d2 - r1, c.lambda_b, c.alpha0)?
                    * self.inter.eval(s)?)
            }
            LaplaceSpec::NomaAwayFromFarBs { d1, d2, r1 } => {
                let head = (-2.0 * c.lambda_b * intra_head_integral(s, r1, c.alpha0)?).exp();
                Ok(head
                    * laplace_intra(s, r1, d1 + d2 + r1, c.lambda_b, c.alpha0)?
                    * self.inter.eval(s)?)
            }
            LaplaceSpec::Asymptotic => laplace_asymptotic(s, c.lambda_l * c.lambda_b, c.alpha1),
        }
    }
}

/// Product of the typical-road and other-road transforms.
pub fn laplace_total(s: f64, d1: f64, d2: f64, cfg: &SystemConfig) -> Result<f64> {
    LaplaceModel::new(cfg).eval(LaplaceSpec::Total { d1, d2 }, s)
}

/// Transform of the interference at a NOMA user a distance `r1` from its
/// serving BS.
pub fn laplace_noma(
    s: f64,
    d1: f64,
    d2: f64,
    r1: f64,
    side: Side,
    cfg: &SystemConfig,
) -> Result<f64> {
    LaplaceModel::new(cfg).eval(LaplaceSpec::noma(d1, d2, r1, side), s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, integrate_tail};
    use proptest::prelude::*;

    fn tight() -> QuadratureSettings {
        QuadratureSettings {
            abs_tol: 1e-300,
            rel_tol: 1e-12,
            max_subdivisions: 5000,
        }
    }

    /// Direct quadrature form `exp(-λ_b [∫_{d1}^∞ + ∫_{d2}^∞] s/(s + r^α) dr)`.
    fn intra_oracle(s: f64, d1: f64, d2: f64, lambda_b: f64, a: f64) -> f64 {
        let side = |d: f64| {
            integrate_tail(|r| s / (s + r.powf(a)), d, d, &tight())
                .unwrap()
                .value
        };
        (-lambda_b * (side(d1) + side(d2))).exp()
    }

    #[test]
    fn intra_trivial_cases() {
        assert_eq!(laplace_intra(0.0, 100.0, 100.0, 5e-3, 3.0).unwrap(), 1.0);
        assert_eq!(laplace_intra(1e6, 100.0, 100.0, 0.0, 3.0).unwrap(), 1.0);
        assert!(laplace_intra(-1.0, 100.0, 100.0, 5e-3, 3.0).is_err());
    }

    #[test]
    fn intra_matches_quadrature_example() {
        let got = laplace_intra(1e6, 100.0, 100.0, 5e-3, 3.0).unwrap();
        let want = intra_oracle(1e6, 100.0, 100.0, 5e-3, 3.0);
        assert!((got / want - 1.0).abs() < 1e-8, "{got} vs {want}");
    }

    #[test]
    fn intra_matches_quadrature_on_grid() {
        for &s in &[1e2, 1e4, 1e6, 1e8, 1e10] {
            for &(d1, d2) in &[(10.0, 10.0), (100.0, 150.0), (50.0, 300.0), (200.0, 200.0)] {
                for &a in &[2.5, 3.0, 4.0, 5.0] {
                    let got = laplace_intra(s, d1, d2, 5e-3, a).unwrap();
                    let want = intra_oracle(s, d1, d2, 5e-3, a);
                    assert!(
                        (got / want - 1.0).abs() < 1e-8,
                        "s {s} d ({d1},{d2}) a {a}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn head_integral_matches_quadrature() {
        for &(s, r, a) in &[
            (1e6, 10.0, 3.0),
            (1e3, 20.0, 4.0),
            (5.0, 0.5, 3.0),
            (1e9, 15.0, 2.5),
        ] {
            let got = intra_head_integral(s, r, a).unwrap();
            let want = integrate(|x| s / (s + x.powf(a)), 0.0, r, &tight())
                .unwrap()
                .value;
            assert!((got / want - 1.0).abs() < 1e-9);
        }
        assert_eq!(intra_head_integral(1e6, 0.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn inner_closed_form_matches_quadrature() {
        for &x in &[0.0, 0.1, 0.7, 1.0, 3.0, 25.0, 400.0] {
            let a = inter_inner(x, 4.0).unwrap();
            let b = inter_inner_quadrature(x, 4.0).unwrap();
            assert!((a / b - 1.0).abs() < 1e-9, "x {x}: {a} vs {b}");
        }
    }

    /// Unscaled double integral straight from the definition.
    fn inter_oracle(s: f64, lambda_l: f64, lambda_b: f64, a: f64) -> f64 {
        let loose = QuadratureSettings {
            rel_tol: 1e-10,
            ..tight()
        };
        let outer = integrate_tail(
            |x| {
                let q = integrate_tail(
                    |u| s / (s + (x * x + u * u).powf(0.5 * a)),
                    0.0,
                    x.max(10.0),
                    &loose,
                )
                .unwrap()
                .value;
                1.0 - (-2.0 * lambda_b * q).exp()
            },
            0.0,
            30.0,
            &loose,
        )
        .unwrap()
        .value;
        (-2.0 * PI * lambda_l * outer).exp()
    }

    #[test]
    fn inter_matches_unscaled_definition() {
        for &(s, a) in &[(1e6, 4.0), (1e6, 3.0), (1e4, 4.0), (1e8, 3.5)] {
            let got = laplace_inter(s, 5e-4, 5e-3, a).unwrap();
            let want = inter_oracle(s, 5e-4, 5e-3, a);
            assert!(
                (got / want - 1.0).abs() < 1e-7,
                "s {s} a {a}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn inter_trivial_cases() {
        assert_eq!(laplace_inter(0.0, 5e-4, 5e-3, 4.0).unwrap(), 1.0);
        assert_eq!(laplace_inter(1e6, 0.0, 5e-3, 4.0).unwrap(), 1.0);
        assert!(laplace_inter(1e6, 5e-4, 5e-3, 2.0).is_err());
    }

    #[test]
    fn total_is_product() {
        let cfg = SystemConfig::default();
        let s = 1e6;
        let t = laplace_total(s, 100.0, 100.0, &cfg).unwrap();
        let a = laplace_intra(s, 100.0, 100.0, cfg.lambda_b, cfg.alpha0).unwrap();
        let b = laplace_inter(s, cfg.lambda_l, cfg.lambda_b, cfg.alpha1).unwrap();
        assert!((t - a * b).abs() < 1e-15);
        assert!(t <= a.min(b));
        assert_eq!(laplace_total(0.0, 100.0, 100.0, &cfg).unwrap(), 1.0);
        let no_lines = SystemConfig {
            lambda_l: 0.0,
            ..cfg.clone()
        };
        assert_eq!(laplace_total(s, 100.0, 100.0, &no_lines).unwrap(), a);
    }

    #[test]
    fn noma_zero_offset_matches_quadrature() {
        let cfg = SystemConfig::default();
        let s = 1e6;
        let got = laplace_noma(s, 100.0, 100.0, 0.0, Side::TowardFarBs, &cfg).unwrap();
        let inter = laplace_inter(s, cfg.lambda_l, cfg.lambda_b, cfg.alpha1).unwrap();
        let side = |d: f64| {
            integrate_tail(|r| s / (s + r.powf(cfg.alpha0)), d, 1.0, &tight())
                .unwrap()
                .value
        };
        let want = (-cfg.lambda_b * (side(0.0) + side(200.0))).exp() * inter;
        assert!((got / want - 1.0).abs() < 1e-8, "{got} vs {want}");
        // With r1 = 0 both sides describe the same position.
        let away = laplace_noma(s, 100.0, 100.0, 0.0, Side::AwayFromFarBs, &cfg).unwrap();
        assert!((away / got - 1.0).abs() < 1e-9);
        assert_eq!(
            laplace_noma(0.0, 100.0, 100.0, 5.0, Side::AwayFromFarBs, &cfg).unwrap(),
            1.0
        );
    }

    #[test]
    fn asymptotic_examples() {
        assert_eq!(laplace_asymptotic(0.0, 2.5e-6, 4.0).unwrap(), 1.0);
        assert_eq!(laplace_asymptotic(1e6, 0.0, 4.0).unwrap(), 1.0);
        assert!(laplace_asymptotic(1e6, 2.5e-6, 2.0).is_err());
        let want = (-(2.0 * PI * PI * 2.5e-6 / 4.0) * 1e3 * PI).exp();
        assert!((laplace_asymptotic(1e6, 2.5e-6, 4.0).unwrap() / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_is_limit_of_inter() {
        let lambda = 2.5e-6;
        let want = laplace_asymptotic(1e6, lambda, 4.0).unwrap();
        let lambda_b = 1e-5;
        let got = laplace_inter(1e6, lambda / lambda_b, lambda_b, 4.0).unwrap();
        assert!((got / want - 1.0).abs() < 1e-2, "{got} vs {want}");
    }

    #[test]
    fn inter_cache_reuses_values() {
        let c = InterLaplace::new(5e-4, 5e-3, 4.0);
        let a = c.eval(1e6).unwrap();
        let b = c.eval(1e6).unwrap();
        assert_eq!(a, b);
        assert_eq!(c.cached_len(), 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn transforms_are_monotone(log_s in 2.0f64..9.0, ds in 0.05f64..1.0, lb in 1e-4f64..1e-2, ll in 1e-5f64..1e-3) {
            let s = 10f64.powf(log_s);
            let s2 = s * (1.0 + ds);
            let i1 = laplace_intra(s, 100.0, 140.0, lb, 3.0).unwrap();
            prop_assert!(i1 > 0.0 && i1 <= 1.0);
            prop_assert!(laplace_intra(s2, 100.0, 140.0, lb, 3.0).unwrap() <= i1);
            prop_assert!(laplace_intra(s, 100.0, 140.0, lb * (1.0 + ds), 3.0).unwrap() <= i1);
            let e1 = laplace_inter(s, ll, lb, 4.0).unwrap();
            prop_assert!(e1 > 0.0 && e1 <= 1.0);
            prop_assert!(laplace_inter(s2, ll, lb, 4.0).unwrap() <= e1);
            prop_assert!(laplace_inter(s, ll, lb * (1.0 + ds), 4.0).unwrap() <= e1);
            prop_assert!(laplace_inter(s, ll * (1.0 + ds), lb, 4.0).unwrap() <= e1);
            let a1 = laplace_asymptotic(s, ll * lb, 4.0).unwrap();
            prop_assert!(a1 > 0.0 && a1 <= 1.0);
            prop_assert!(laplace_asymptotic(s2, ll * lb, 4.0).unwrap() <= a1);
        }
    }
}
