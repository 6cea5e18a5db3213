//! Special functions and quadrature kernels behind the analytic outage
//! expressions.

mod hypergeometric;
mod quadrature;

pub use hypergeometric::gauss_2f1_neg;
pub use quadrature::{
    integrate, integrate_semi_infinite, integrate_semi_infinite_scaled, integrate_tail, Integral,
    QuadratureSettings,
};

use crate::error::{Error, Result};

/// `Γ(x)` for real `x` away from the poles.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `1 / Γ(x)`, zero at the poles `x = 0, -1, -2, ...`.
pub(crate) fn recip_gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.round() {
        0.0
    } else {
        1.0 / libm::tgamma(x)
    }
}

/// Euler beta function `B(a, b) = Γ(a)Γ(b)/Γ(a+b)`.
pub fn beta_fn(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "beta function needs a, b > 0, got ({a}, {b})"
        )));
    }
    if a + b < 160.0 {
        Ok(libm::tgamma(a) * libm::tgamma(b) / libm::tgamma(a + b))
    } else {
        Ok((libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)).exp())
    }
}

/// Gauss–Chebyshev (first kind) abscissas `θ_n = cos((2n - 1)π / 2N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevNodes {
    thetas: Vec<f64>,
}

impl ChebyshevNodes {
    pub fn new(n_points: usize) -> Result<Self> {
        if n_points == 0 {
            return Err(Error::Domain(
                "Chebyshev rule needs at least one node".into(),
            ));
        }
        let n = n_points as f64;
        let thetas = (1..=n_points)
            .map(|k| ((2 * k - 1) as f64 * std::f64::consts::PI / (2.0 * n)).cos())
            .collect();
        Ok(Self { thetas })
    }

    pub fn n_points(&self) -> usize {
        self.thetas.len()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// `Σ (π/N) sqrt(1 - θ_n²) g(θ_n)`, approximating `∫_{-1}^{1} g(θ) dθ`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        let w = std::f64::consts::PI / self.thetas.len() as f64;
        self.thetas
            .iter()
            .map(|&t| w * (1.0 - t * t).sqrt() * g(t))
            .sum()
    }
}

/// Central difference with step `rel_step * x`, refined by one Richardson
/// extrapolation step.
pub fn numeric_derivative<F>(mut f: F, x: f64, rel_step: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(x.is_finite() && x > 0.0) || !(rel_step > 0.0) {
        return Err(Error::Domain(format!(
            "numeric derivative needs x > 0 and rel_step > 0, got x = {x}, rel_step = {rel_step}"
        )));
    }
    let h = rel_step * x;
    let mut central = |h: f64| -> Result<f64> {
        let up = f(x + h)?;
        let down = f(x - h)?;
        let d = (up - down) / (2.0 * h);
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::Numeric {
                routine: "numeric_derivative",
                detail: format!("non-finite evaluation near x = {x}"),
                estimate: d,
            })
        }
    };
    let coarse = central(h)?;
    let fine = central(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}
