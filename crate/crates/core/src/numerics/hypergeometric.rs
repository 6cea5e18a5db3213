//! Gauss hypergeometric function `₂F₁(a, b; c; z)` on the negative real axis.

use super::recip_gamma;
use crate::error::{Error, Result};

const MAX_TERMS: usize = 20_000;

/// Power series `Σ (a)_n (b)_n / ((c)_n n!) w^n` for `0 <= w < 1`.
fn series(a: f64, b: f64, c: f64, w: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * w;
        sum += term;
        if term == 0.0 || (term.abs() <= 1e-17 * sum.abs() && n > 2) {
            return Ok(sum);
        }
    }
    Err(Error::Numeric {
        routine: "gauss_2f1_neg",
        detail: format!("series did not converge in {MAX_TERMS} terms at w = {w}"),
        estimate: sum,
    })
}

/// Connection formula in `w = 1 / (1 - z)`, valid when `a - b` is not an
/// integer.
fn large_negative(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let one_minus_z = 1.0 - z;
    let w = 1.0 / one_minus_z;
    let gc = super::gamma(c);
    let first = gc * super::gamma(b - a) * recip_gamma(b) * recip_gamma(c - a);
    let second = gc * super::gamma(a - b) * recip_gamma(a) * recip_gamma(c - b);
    let t1 = if first == 0.0 {
        0.0
    } else {
        first * one_minus_z.powf(-a) * series(a, c - b, a - b + 1.0, w)?
    };
    let t2 = if second == 0.0 {
        0.0
    } else {
        second * one_minus_z.powf(-b) * series(b, c - a, b - a + 1.0, w)?
    };
    Ok(t1 + t2)
}

/// `₂F₁(a, b; c; z)` for real parameters and `z <= 0`.
///
/// Uses the defining series for `-1/2 <= z <= 0`, the Pfaff transformation
/// `(1 - z)^{-a} ₂F₁(a, c - b; c; z / (z - 1))` for `-2 <= z < -1/2`, and the
/// `1 / (1 - z)` connection formula below that.
pub fn gauss_2f1_neg(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && c.is_finite() && z.is_finite()) {
        return Err(Error::Domain(format!(
            "2F1 arguments must be finite: ({a}, {b}; {c}; {z})"
        )));
    }
    if c <= 0.0 && c == c.round() {
        return Err(Error::Domain(format!("2F1 undefined for c = {c}")));
    }
    if z > 0.0 {
        return Err(Error::Domain(format!(
            "2F1 evaluator covers z <= 0 only, got {z}"
        )));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if z >= -0.5 {
        return series(a, b, c, z);
    }
    if z >= -2.0 {
        let w = z / (z - 1.0);
        return Ok((1.0 - z).powf(-a) * series(a, c - b, c, w)?);
    }
    let diff = a - b;
    if (diff - diff.round()).abs() > 1e-5 {
        return large_negative(a, b, c, z);
    }
    // a - b (nearly) an integer: both connection terms have poles. Evaluate
    // at b shifted to either side of the pole and interpolate.
    let delta = 1e-5;
    let target = b + (diff - diff.round());
    let lo = large_negative(a, target - delta, c, z)?;
    let hi = large_negative(a, target + delta, c, z)?;
    let b_lo = target - delta;
    let b_hi = target + delta;
    // Linear interpolation back to the requested b.
    Ok(lo + (hi - lo) * (b - b_lo) / (b_hi - b_lo))
}
