use serde::Serialize;

use crate::boundary::BoundaryCurve;
use crate::gauss_kernel::{heat, heat_dx, psi, INV_SQRT_2PI};
use crate::{Error, Result};

const MASS_TOL: f64 = 1e-10;

/// One linear piece of a smeared initial density on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub h_lo: f64,
    pub h_hi: f64,
}

impl Piece {
    fn slope(&self) -> f64 {
        (self.h_hi - self.h_lo) / (self.hi - self.lo)
    }
}

/// Non-negative, piecewise-linear probability density with compact support.
/// Jumps are allowed between pieces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseDensity {
    pieces: Vec<Piece>,
}

impl PiecewiseDensity {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::invalid("smeared source needs at least one piece"));
        }
        let mut mass = 0.0;
        for (i, p) in pieces.iter().enumerate() {
            let finite = [p.lo, p.hi, p.h_lo, p.h_hi].iter().all(|v| v.is_finite());
            if !finite || !(p.hi > p.lo) {
                return Err(Error::invalid(format!("piece {i} is degenerate or non-finite")));
            }
            if p.h_lo < 0.0 || p.h_hi < 0.0 {
                return Err(Error::invalid(format!("piece {i} has negative density")));
            }
            if i > 0 && p.lo < pieces[i - 1].hi {
                return Err(Error::invalid(format!("piece {i} overlaps its predecessor")));
            }
            mass += 0.5 * (p.h_lo + p.h_hi) * (p.hi - p.lo);
        }
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::invalid(format!("smeared source must have unit mass, got {mass}")));
        }
        Ok(Self { pieces })
    }

    /// Uniform density on `[center - width/2, center + width/2]`.
    pub fn uniform(center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::invalid(format!("bump width must be positive, got {width}")));
        }
        let h = 1.0 / width;
        Self::new(vec![Piece {
            lo: center - 0.5 * width,
            hi: center + 0.5 * width,
            h_lo: h,
            h_hi: h,
        }])
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn support(&self) -> (f64, f64) {
        (self.pieces[0].lo, self.pieces[self.pieces.len() - 1].hi)
    }

    pub fn value(&self, xi: f64) -> f64 {
        self.pieces
            .iter()
            .find(|p| p.lo <= xi && xi <= p.hi)
            .map(|p| p.h_lo + p.slope() * (xi - p.lo))
            .unwrap_or(0.0)
    }
}

/// Initial distribution of the Brownian motion.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SourceSpec {
    Point { r0: f64 },
    Smeared { density: PiecewiseDensity },
}

/// `P(Z ∈ [zl, zh])` for standard normal `Z`, evaluated on the side where
/// both tails are small.
fn normal_mass(zl: f64, zh: f64) -> f64 {
    if zl >= 0.0 {
        psi(zl) - psi(zh)
    } else if zh <= 0.0 {
        psi(-zh) - psi(-zl)
    } else {
        1.0 - psi(-zl) - psi(zh)
    }
}

impl SourceSpec {
    pub fn point(r0: f64) -> Result<Self> {
        if !r0.is_finite() {
            return Err(Error::invalid(format!("r0 must be finite, got {r0}")));
        }
        Ok(SourceSpec::Point { r0 })
    }

    pub fn uniform_bump(center: f64, width: f64) -> Result<Self> {
        Ok(SourceSpec::Smeared { density: PiecewiseDensity::uniform(center, width)? })
    }

    /// Upper edge of the source support.
    pub fn top(&self) -> f64 {
        match self {
            SourceSpec::Point { r0 } => *r0,
            SourceSpec::Smeared { density } => density.support().1,
        }
    }

    pub fn bottom(&self) -> f64 {
        match self {
            SourceSpec::Point { r0 } => *r0,
            SourceSpec::Smeared { density } => density.support().0,
        }
    }

    /// The source must start strictly below the boundary.
    pub fn check_against(&self, curve: &BoundaryCurve) -> Result<()> {
        let x0 = curve.start();
        if self.top() < x0 {
            return Ok(());
        }
        Err(match self {
            SourceSpec::Point { r0 } => Error::invalid(format!(
                "starting point r0 = {r0} must lie strictly below the boundary start X_0 = {x0}"
            )),
            SourceSpec::Smeared { .. } => Error::invalid(format!(
                "smeared source support reaches {} but must stay strictly below X_0 = {x0}",
                self.top()
            )),
        })
    }

    pub fn shifted(&self, c: f64) -> Self {
        match self {
            SourceSpec::Point { r0 } => SourceSpec::Point { r0: r0 + c },
            SourceSpec::Smeared { density } => SourceSpec::Smeared {
                density: PiecewiseDensity {
                    pieces: density
                        .pieces
                        .iter()
                        .map(|p| Piece { lo: p.lo + c, hi: p.hi + c, ..*p })
                        .collect(),
                },
            },
        }
    }

    /// Free-space solution of the heat equation started from this source:
    /// `∫ h(ξ) G(x, t; ξ, 0) dξ`, or `G(x, t; r0, 0)` for a point.
    pub(crate) fn free_solution(&self, x: f64, t: f64) -> f64 {
        match self {
            SourceSpec::Point { r0 } => heat(x - r0, t),
            SourceSpec::Smeared { density } => {
                let sd = t.sqrt();
                density
                    .pieces
                    .iter()
                    .map(|p| {
                        let slope = p.slope();
                        let zl = (p.lo - x) / sd;
                        let zh = (p.hi - x) / sd;
                        let at_x = p.h_lo + slope * (x - p.lo);
                        let phi = |z: f64| INV_SQRT_2PI * (-0.5 * z * z).exp();
                        at_x * normal_mass(zl, zh) + slope * sd * (phi(zl) - phi(zh))
                    })
                    .sum()
            }
        }
    }

    /// `-∫ h(ξ) G_x(x, t; ξ, 0) dξ`, integrated by parts into closed form.
    pub(crate) fn free_flux(&self, x: f64, t: f64) -> f64 {
        match self {
            SourceSpec::Point { r0 } => -heat_dx(x - r0, t),
            SourceSpec::Smeared { density } => {
                let sd = t.sqrt();
                density
                    .pieces
                    .iter()
                    .map(|p| {
                        // G_x(x;ξ) = -∂_ξ G(x;ξ)
                        let ends = p.h_hi * heat(x - p.hi, t) - p.h_lo * heat(x - p.lo, t);
                        ends - p.slope() * normal_mass((p.lo - x) / sd, (p.hi - x) / sd)
                    })
                    .sum()
            }
        }
    }
}
