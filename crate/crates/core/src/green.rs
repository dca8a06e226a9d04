//! Dirichlet Green function of the heat equation below a moving boundary,
//! reconstructed from a computed first-passage density:
//!
//! ```text
//! G^X(x, t) = G(x, t; r0, 0) - ∫_0^t G(x, t; X_τ, τ) p(τ) dτ
//! ```
//!
//! For a smeared source the free term becomes `∫ h(ξ) G(x, t; ξ, 0) dξ`
//! and the same formula yields the smeared solution `u(x, t)`.

use rayon::prelude::*;

use crate::boundary::BoundaryCurve;
use crate::gauss_kernel::{heat, psi};
use crate::quad;
use crate::solver::{fingerprint, DensityEstimate, SourceSpec};
use crate::{Error, Result};

const SEGMENT_ABS_TOL: f64 = 1e-14;
const SEGMENT_REL_TOL: f64 = 1e-12;

const SURVIVAL_PANELS: usize = 256;
const SURVIVAL_WIDTH_SD: f64 = 12.0;

/// `∫_0^t f(τ, t - τ) p̃(τ) dτ` with `p̃` the piecewise-linear interpolant of
/// the density. Cells close to `t` are integrated in `u = √(t - τ)`, which
/// absorbs a `(t - τ)^(-1/2)` singularity of `f`; the lag is then passed as
/// `u²` rather than recomputed from `τ`.
pub(crate) fn layer_integral<F: Fn(f64, f64) -> f64>(density: &DensityEstimate, t: f64, f: F) -> f64 {
    let nodes = density.times();
    let p = density.values();
    let last = density.grid().locate(t);
    let mut total = 0.0;
    for j in 0..=last {
        let a = nodes[j];
        let (b, pb) = if j == last { (t, density.density_at(t)) } else { (nodes[j + 1], p[j + 1]) };
        let pa = p[j];
        if !(b > a) || (pa.abs() < 1e-300 && pb.abs() < 1e-300) {
            continue;
        }
        let slope = (pb - pa) / (b - a);
        let lin = |tau: f64| pa + slope * (tau - a);
        total += if t - b < 2.0 * (b - a) {
            let integrand = |u: f64| {
                let tau = t - u * u;
                2.0 * u * f(tau, u * u) * lin(tau)
            };
            quad::integrate(integrand, (t - b).sqrt(), (t - a).sqrt(), SEGMENT_ABS_TOL, SEGMENT_REL_TOL)
        } else {
            quad::integrate(|tau| f(tau, t - tau) * lin(tau), a, b, SEGMENT_ABS_TOL, SEGMENT_REL_TOL)
        };
    }
    total
}

/// Green function (or smeared solution) of one `(curve, source)` pair.
#[derive(Debug, Clone)]
pub struct GreenField {
    curve: BoundaryCurve,
    src: SourceSpec,
    density: DensityEstimate,
}

impl GreenField {
    /// The density must carry the fingerprint of exactly this pair.
    pub fn new(curve: BoundaryCurve, src: SourceSpec, density: DensityEstimate) -> Result<Self> {
        let expected = fingerprint(&curve, &src);
        match density.fingerprint() {
            Some(fp) if fp == expected => {}
            Some(fp) => {
                return Err(Error::Mismatch(format!(
                    "density fingerprint {fp} does not match boundary/source {expected}"
                )))
            }
            None => return Err(Error::Mismatch("density is not bound to a boundary/source pair".into())),
        }
        if density.horizon() > curve.horizon() {
            return Err(Error::Mismatch("density horizon exceeds boundary horizon".into()));
        }
        Ok(Self { curve, src, density })
    }

    pub fn curve(&self) -> &BoundaryCurve {
        &self.curve
    }

    pub fn source(&self) -> &SourceSpec {
        &self.src
    }

    pub fn density(&self) -> &DensityEstimate {
        &self.density
    }

    pub fn horizon(&self) -> f64 {
        self.density.horizon()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t > 0.0 && t <= self.horizon() {
            Ok(())
        } else {
            Err(Error::domain(format!("t = {t} outside (0, {}]", self.horizon())))
        }
    }

    /// `G^X(x, t)`. Points on or above the boundary return values close to 0.
    pub fn green_eval(&self, x: f64, t: f64) -> Result<f64> {
        self.check_time(t)?;
        if !x.is_finite() {
            return Err(Error::domain(format!("x must be finite, got {x}")));
        }
        Ok(self.eval_unchecked(x, t))
    }

    fn eval_unchecked(&self, x: f64, t: f64) -> f64 {
        let curve = &self.curve;
        let layer = layer_integral(&self.density, t, |tau, lag| heat(x - curve.at(tau), lag));
        self.src.free_solution(x, t) - layer
    }

    /// `P(τ > t) = ∫_{-∞}^{X_t} G^X(x, t) dx`: Gauss-Legendre panels clustered
    /// towards `X_t` plus a normal-tail bound for the far left.
    pub fn survival(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let top = self.curve.at(t);
        let sd = t.sqrt();
        let reach = (self.curve.start() - self.src.bottom()).abs();
        let lo = top - SURVIVAL_WIDTH_SD * sd - reach;
        let n = SURVIVAL_PANELS;
        let edge = |k: usize| {
            let s = (std::f64::consts::FRAC_PI_2 * k as f64 / n as f64).sin();
            if k == n {
                top
            } else {
                lo + (top - lo) * s
            }
        };
        let panels: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|k| quad::gauss_legendre8(|x| self.eval_unchecked(x, t), edge(k), edge(k + 1)))
            .collect();
        let tail = psi((self.src.bottom() - lo) / sd);
        Ok((panels.iter().sum::<f64>() + tail).clamp(0.0, 1.0))
    }

    /// `-½ ∂_x G^X(X_t^-, t)` by a one-sided second-order difference from
    /// inside the domain. `eps` defaults to `max(1e-4, 1e-3 √t)`.
    pub fn boundary_flux(&self, t: f64, eps: Option<f64>) -> Result<f64> {
        self.check_time(t)?;
        let eps = eps.unwrap_or_else(|| (1e-3 * t.sqrt()).max(1e-4));
        if !(eps > 0.0) {
            return Err(Error::domain(format!("flux step must be positive, got {eps}")));
        }
        let x0 = self.curve.at(t);
        let f0 = self.eval_unchecked(x0, t);
        let f1 = self.eval_unchecked(x0 - eps, t);
        let f2 = self.eval_unchecked(x0 - 2.0 * eps, t);
        let slope = (3.0 * f0 - 4.0 * f1 + f2) / (2.0 * eps);
        Ok(-0.5 * slope)
    }
}

/// `u(x, t) = ∫ h(ξ) G^X(ξ; x, t) dξ` for a smeared source `h` whose density
/// `density_h` was solved for exactly this `(curve, h)`.
pub fn smeared_solution(
    curve: &BoundaryCurve,
    h: &SourceSpec,
    density_h: &DensityEstimate,
    x: f64,
    t: f64,
) -> Result<f64> {
    if !matches!(h, SourceSpec::Smeared { .. }) {
        return Err(Error::invalid("smeared_solution needs a smeared source"));
    }
    GreenField::new(curve.clone(), h.clone(), density_h.clone())?.green_eval(x, t)
}
