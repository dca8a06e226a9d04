//! The Gaussian heat kernel of standard Brownian motion, its spatial
//! derivatives, the normal survival function and closed-form power-weight
//! moments used by the product-integration rules.
//!
//! Variance convention: `Var(B_t - B_s) = t - s`, so the kernel solves
//! `∂_t G = ½ ∂_xx G`.

use crate::{Error, Result};

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

// exp(x) is subnormal below this
const EXP_UNDERFLOW: f64 = -745.0;

/// Evaluation point `(x, t)` of a kernel sourced at `(r, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoint {
    pub x: f64,
    pub t: f64,
    pub r: f64,
    pub s: f64,
}

impl KernelPoint {
    pub fn new(x: f64, t: f64, r: f64, s: f64) -> Self {
        Self { x, t, r, s }
    }

    fn lag(&self) -> Result<f64> {
        let lag = self.t - self.s;
        if lag > 0.0 && lag.is_finite() {
            Ok(lag)
        } else {
            Err(Error::domain(format!(
                "kernel requires t > s, got t = {}, s = {}",
                self.t, self.s
            )))
        }
    }
}

/// `(2π lag)^(-1/2) exp(-d² / (2 lag))` for offset `d = x - r`; exactly 0
/// once the exponent drops below the double-precision underflow threshold.
#[inline]
pub(crate) fn heat(d: f64, lag: f64) -> f64 {
    let e = -d * d / (2.0 * lag);
    if e < EXP_UNDERFLOW {
        0.0
    } else {
        INV_SQRT_2PI / lag.sqrt() * e.exp()
    }
}

#[inline]
pub(crate) fn heat_dx(d: f64, lag: f64) -> f64 {
    -(d / lag) * heat(d, lag)
}

pub fn gaussian(p: KernelPoint) -> Result<f64> {
    let lag = p.lag()?;
    Ok(heat(p.x - p.r, lag))
}

/// `∂G/∂x = -((x - r)/(t - s)) G`.
pub fn gaussian_dx(p: KernelPoint) -> Result<f64> {
    let lag = p.lag()?;
    Ok(heat_dx(p.x - p.r, lag))
}

pub fn gaussian_dxx(p: KernelPoint) -> Result<f64> {
    let lag = p.lag()?;
    let d = p.x - p.r;
    Ok((d * d / (lag * lag) - 1.0 / lag) * heat(d, lag))
}

/// Standard normal survival function `Ψ(z) = P(Z > z)`.
///
/// Goes through `erfc`, which keeps full relative accuracy in the upper
/// tail (it factors out `exp(-z²)` internally) instead of forming `1 - Φ`.
pub fn psi(z: f64) -> f64 {
    0.5 * libm::erfc(z * std::f64::consts::FRAC_1_SQRT_2)
}

/// `∫_0^t τ^a1 (t - τ)^a2 dτ = Γ(1+a1)Γ(1+a2)/Γ(2+a1+a2) · t^(1+a1+a2)`.
pub fn beta_moment(a1: f64, a2: f64, t: f64) -> Result<f64> {
    if !(a1 > -1.0 && a2 > -1.0) {
        return Err(Error::domain(format!(
            "beta_moment needs exponents > -1, got ({a1}, {a2})"
        )));
    }
    if !(t > 0.0) {
        return Err(Error::domain(format!("beta_moment needs t > 0, got {t}")));
    }
    let log = libm::lgamma(1.0 + a1) + libm::lgamma(1.0 + a2) - libm::lgamma(2.0 + a1 + a2)
        + (1.0 + a1 + a2) * t.ln();
    Ok(log.exp())
}

/// `∫_a^b (t - τ)^beta dτ` for `a < b ≤ t`.
pub fn segment_weight(beta: f64, t: f64, a: f64, b: f64) -> Result<f64> {
    if !(beta > -1.0) {
        return Err(Error::domain(format!(
            "segment_weight needs beta > -1, got {beta}"
        )));
    }
    if !(a < b && b <= t) {
        return Err(Error::domain(format!(
            "segment_weight needs a < b <= t, got a = {a}, b = {b}, t = {t}"
        )));
    }
    Ok(power_moment(beta, t - a, b - a))
}

/// `∫_{d0-h}^{d0} u^beta du` with `0 < h ≤ d0`, written as
/// `d0^c (1 - (1 - h/d0)^c) / c` so that short, distant segments do not
/// lose digits to cancellation.
#[inline]
pub(crate) fn power_moment(beta: f64, d0: f64, h: f64) -> f64 {
    let c = beta + 1.0;
    let head = d0.powf(c) / c;
    if h >= d0 {
        head
    } else {
        -head * (c * (-h / d0).ln_1p()).exp_m1()
    }
}
