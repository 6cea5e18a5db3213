//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-15,
            rel_tol: 1e-11,
            max_subdivisions: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod abscissas, plus the center.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut res_abs = kronrod.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let abs_half = half.abs();
    let value = kronrod * half;
    res_abs *= abs_half;
    res_asc *= abs_half;
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err)
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    settings: &QuadratureSettings,
) -> Result<Integral> {
    if !(settings.abs_tol > 0.0 && settings.rel_tol > 0.0) {
        return Err(Error::Domain(
            "quadrature tolerances must be positive".into(),
        ));
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            abs_error: 0.0,
        });
    }
    let (value, error) = gk15(&mut f, a, b);
    let mut total = value;
    let mut total_err = error;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut subdivisions = 0;
    while total_err > settings.abs_tol.max(settings.rel_tol * total.abs()) {
        if !total.is_finite() {
            return Err(Error::Numeric {
                routine: "integrate",
                detail: "non-finite integrand".into(),
                estimate: total,
            });
        }
        if subdivisions >= settings.max_subdivisions {
            return Err(Error::Numeric {
                routine: "integrate",
                detail: format!(
                    "tolerance not met after {subdivisions} subdivisions (error estimate {total_err:e})"
                ),
                estimate: total,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        subdivisions += 1;
    }
    // Re-sum to shed the drift of the running update.
    let value = heap.iter().map(|s| s.value).sum();
    let abs_error = heap.iter().map(|s| s.error).sum();
    Ok(Integral { value, abs_error })
}

/// Integrates `f` over `(0, ∞)` via `x = t / (1 - t)`.
pub fn integrate_semi_infinite<F: FnMut(f64) -> f64>(
    f: F,
    settings: &QuadratureSettings,
) -> Result<Integral> {
    integrate_tail(f, 0.0, 1.0, settings)
}

/// Integrates `f` over `(0, ∞)` via `x = scale * t / (1 - t)`. A scale near
/// the integrand's characteristic length keeps the mapped integrand smooth.
pub fn integrate_semi_infinite_scaled<F: FnMut(f64) -> f64>(
    f: F,
    scale: f64,
    settings: &QuadratureSettings,
) -> Result<Integral> {
    integrate_tail(f, 0.0, scale, settings)
}

/// Integrates `f` over `(start, ∞)` via `x = start + scale * t / (1 - t)`.
pub fn integrate_tail<F: FnMut(f64) -> f64>(
    mut f: F,
    start: f64,
    scale: f64,
    settings: &QuadratureSettings,
) -> Result<Integral> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Domain(format!(
            "integration scale must be positive, got {scale}"
        )));
    }
    integrate(
        |t| {
            let s = 1.0 - t;
            let v = f(start + scale * t / s);
            if v == 0.0 {
                0.0
            } else {
                v * scale / (s * s)
            }
        },
        0.0,
        1.0,
        settings,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn settings() -> QuadratureSettings {
        QuadratureSettings::default()
    }

    #[test]
    fn finite_interval() {
        let r = integrate(|x| x.sin(), 0.0, PI, &settings()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-13);
        assert_eq!(integrate(|x| x, 1.0, 1.0, &settings()).unwrap().value, 0.0);
    }

    #[test]
    fn exponential_tail() {
        let r = integrate_semi_infinite(|x| (-x).exp(), &settings()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
        assert!(r.abs_error >= (r.value - 1.0).abs());
    }

    #[test]
    fn lorentzian() {
        let r = integrate_semi_infinite(|x| 1.0 / (1.0 + x * x), &settings()).unwrap();
        assert!((r.value - PI / 2.0).abs() < 1e-10);
        assert!(r.abs_error >= (r.value - PI / 2.0).abs());
    }

    #[test]
    fn power_law_kernel_against_riemann_sum() {
        // ∫_0^∞ s/(s + x^4) dx with s = 1 equals (π/4)/sin(π/4).
        let f = |x: f64| 1.0 / (1.0 + x.powi(4));
        let r = integrate_semi_infinite(f, &settings()).unwrap();
        let exact = (PI / 4.0) / (PI / 4.0).sin();
        assert!((r.value - exact).abs() < 1e-10);
        assert!(r.abs_error >= (r.value - exact).abs());

        // Independent brute force: midpoint sum after t = x / (1 + x), 10^7 cells.
        let n = 10_000_000;
        let h = 1.0 / n as f64;
        let brute: f64 = (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) * h;
                let x = t / (1.0 - t);
                f(x) / ((1.0 - t) * (1.0 - t)) * h
            })
            .sum();
        assert!((r.value - brute).abs() < 1e-8, "{} vs {}", r.value, brute);
    }

    #[test]
    fn scaled_and_tail_forms() {
        let r = integrate_semi_infinite_scaled(|x| (-x / 50.0).exp(), 50.0, &settings()).unwrap();
        assert!((r.value - 50.0).abs() < 1e-9);
        let r = integrate_tail(|x| 1.0 / (x * x), 2.0, 2.0, &settings()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_reports_estimate() {
        let tight = QuadratureSettings {
            abs_tol: 1e-300,
            rel_tol: 1e-300,
            max_subdivisions: 3,
        };
        match integrate(|x| x.sqrt(), 0.0, 1.0, &tight) {
            Err(Error::Numeric { estimate, .. }) => assert!((estimate - 2.0 / 3.0).abs() < 1e-3),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }
}
