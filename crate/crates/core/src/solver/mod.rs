//! Volterra solvers for the first-passage density.
//!
//! The kernel `G_x(X_t, t; X_τ, τ)` is split as `κ(t, τ) (t - τ)^(γ - 3/2)`
//! with `κ` bounded. Both solvers share one product-integration rule: on
//! every cell `κ p` is interpolated linearly between nodes and integrated
//! exactly against the power weight.

mod density;
mod grid;
mod source;

pub use density::{fingerprint, DensityEstimate, Diagnostics, Method, WindowReport, NEGATIVE_TOL};
pub use grid::TimeGrid;
pub use source::{PiecewiseDensity, Piece, SourceSpec};

use crate::boundary::BoundaryCurve;
use crate::gauss_kernel::{power_moment, INV_SQRT_2PI};
use crate::{Error, Result};

/// Marching aborts when `1 - w_ii κ_ii` drops below this.
pub const MIN_DIAGONAL: f64 = 0.1;

const HOLDER_LEVELS: u32 = 12;

// cells further than this many widths from the diagonal use Gauss-Legendre weights
const FAR_CELL_RATIO: f64 = 64.0;

const GL4_NODES: [f64; 2] = [0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
const GL4_WEIGHTS: [f64; 2] = [0.652_145_154_862_546_1, 0.347_854_845_137_453_9];

/// Driving term `-G_x(X_t, t; r0, 0)` (point) or its `h`-average (smeared).
pub fn source_term(src: &SourceSpec, curve: &BoundaryCurve, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("source term needs t > 0, got {t}")));
    }
    let x = curve.eval(t)?;
    Ok(src.free_flux(x, t))
}

#[inline]
fn kappa(dx: f64, lag: f64, gamma: f64) -> f64 {
    let e = -dx * dx / (2.0 * lag);
    if e < -745.0 {
        return 0.0;
    }
    -INV_SQRT_2PI * dx / lag.powf(gamma) * e.exp()
}

/// Bounded co-factor `κ(t, τ) = G_x(X_t, t; X_τ, τ) (t - τ)^(3/2 - γ)`.
pub fn kernel_k(curve: &BoundaryCurve, t: f64, tau: f64) -> Result<f64> {
    if !(tau >= 0.0 && tau < t) {
        return Err(Error::domain(format!("kernel needs 0 <= tau < t, got tau = {tau}, t = {t}")));
    }
    let (xt, xtau) = (curve.eval(t)?, curve.eval(tau)?);
    Ok(kappa(xt - xtau, t - tau, curve.gamma()))
}

/// Diagonal value of `κ` on the cell `[t_prev, t]`: the boundary's
/// difference quotient `ΔX / Δt^γ` substituted into `-D / √(2π)`.
pub fn kernel_diagonal(curve: &BoundaryCurve, t_prev: f64, t: f64) -> Result<f64> {
    if !(t_prev >= 0.0 && t_prev < t) {
        return Err(Error::domain(format!("diagonal needs 0 <= t_prev < t, got {t_prev}, {t}")));
    }
    let dx = curve.eval(t)? - curve.eval(t_prev)?;
    Ok(-INV_SQRT_2PI * dx / (t - t_prev).powf(curve.gamma()))
}

/// Hat-function weights `(∫ φ_a w, ∫ φ_b w)` of the cell `[a, b]` against
/// `w(τ) = (t - τ)^beta`, where `φ_a, φ_b` are the linear interpolation basis.
#[inline]
fn hat_weights(beta: f64, t: f64, a: f64, b: f64) -> (f64, f64) {
    let h = b - a;
    let d0 = t - a;
    if d0 > FAR_CELL_RATIO * h {
        let half = 0.5 * h;
        let (mut wl, mut wr) = (0.0, 0.0);
        for (x, w) in GL4_NODES.iter().zip(GL4_WEIGHTS.iter()) {
            for s in [-x, *x] {
                let frac = 0.5 * (1.0 + s);
                let v = w * (d0 - h * frac).powf(beta);
                wl += v * (1.0 - frac);
                wr += v * frac;
            }
        }
        (wl * half, wr * half)
    } else {
        let w0 = power_moment(beta, d0, h);
        let w1 = power_moment(beta + 1.0, d0, h);
        let wr = (d0 * w0 - w1) / h;
        (w0 - wr, wr)
    }
}

/// Discretized equations `p_i = g_i + Σ_{j<=i} c_ij p_j` on a grid.
struct System<'a> {
    nodes: &'a [f64],
    xs: Vec<f64>,
    gamma: f64,
    source: Vec<f64>,
}

impl<'a> System<'a> {
    fn new(src: &SourceSpec, curve: &BoundaryCurve, grid: &'a TimeGrid) -> Result<Self> {
        let gamma = curve.gamma();
        if !(gamma > 0.5 && gamma <= 1.0) {
            return Err(Error::invalid(format!(
                "solver requires Hölder exponent gamma > 1/2, got {gamma}"
            )));
        }
        if grid.horizon() > curve.horizon() {
            return Err(Error::invalid(format!(
                "grid horizon {} exceeds boundary horizon {}",
                grid.horizon(),
                curve.horizon()
            )));
        }
        src.check_against(curve)?;
        let nodes = grid.nodes();
        let xs: Vec<f64> = nodes.iter().map(|&t| curve.at(t)).collect();
        let source = nodes
            .iter()
            .zip(&xs)
            .map(|(&t, &x)| if t > 0.0 { src.free_flux(x, t) } else { 0.0 })
            .collect();
        Ok(Self { nodes, xs, gamma, source })
    }

    /// Fill `row[j]`, `j = 0..=i`, with the coefficients of `p_j` in equation `i >= 1`.
    fn row(&self, i: usize, row: &mut Vec<f64>) {
        let beta = self.gamma - 1.5;
        let ti = self.nodes[i];
        let xi = self.xs[i];
        row.clear();
        row.resize(i + 1, 0.0);
        let mut k_left = kappa(xi - self.xs[0], ti, self.gamma);
        for j in 0..i {
            let (a, b) = (self.nodes[j], self.nodes[j + 1]);
            let (wl, wr) = hat_weights(beta, ti, a, b);
            let k_right = if j + 1 == i {
                -INV_SQRT_2PI * (xi - self.xs[j]) / (ti - a).powf(self.gamma)
            } else {
                kappa(xi - self.xs[j + 1], ti - b, self.gamma)
            };
            row[j] += wl * k_left;
            row[j + 1] += wr * k_right;
            k_left = k_right;
        }
    }
}

/// Time-marching product integration: each node solves a scalar equation
/// for the new value given the history.
pub fn solve_marching(
    src: &SourceSpec,
    curve: &BoundaryCurve,
    grid: &TimeGrid,
) -> Result<DensityEstimate> {
    let sys = System::new(src, curve, grid)?;
    let n = grid.nodes().len();
    let mut p = vec![0.0; n];
    let mut row = Vec::with_capacity(n);
    let mut min_diagonal = f64::INFINITY;
    for i in 1..n {
        sys.row(i, &mut row);
        let history: f64 = row[..i].iter().zip(&p[..i]).map(|(c, v)| c * v).sum();
        let diagonal = 1.0 - row[i];
        if diagonal < MIN_DIAGONAL {
            return Err(Error::DiagonalDominance { node: i, t: grid.nodes()[i], coefficient: diagonal });
        }
        min_diagonal = min_diagonal.min(diagonal);
        p[i] = (sys.source[i] + history) / diagonal;
    }
    let diagnostics = Diagnostics { min_diagonal: Some(min_diagonal), ..Default::default() };
    Ok(DensityEstimate::from_values(grid.clone(), p, Method::Marching, curve.gamma())?
        .with_diagnostics(diagnostics)
        .bind(curve, src))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    /// Target contraction factor used to size the windows.
    pub safety: f64,
    pub max_iter: usize,
    /// Sup-norm change between iterates that ends a window.
    pub tol: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { safety: 0.5, max_iter: 200, tol: 1e-10 }
    }
}

/// Length `L` of a window on which the sup-norm contraction bound
/// `C1 L^(γ - 1/2)` equals `safety`, with `C1 = m / (√(2π) (γ - 1/2))`.
pub fn window_length(m: f64, gamma: f64, safety: f64) -> f64 {
    let c1 = m * INV_SQRT_2PI / (gamma - 0.5);
    if c1 == 0.0 {
        f64::INFINITY
    } else {
        (safety / c1).powf(1.0 / (gamma - 0.5))
    }
}

/// Windowed Picard iteration. Each window's history integral over earlier
/// windows is frozen; inside the window the fixed-point map is iterated from
/// the source-plus-history term until successive iterates agree to `tol`.
pub fn solve_picard(
    src: &SourceSpec,
    curve: &BoundaryCurve,
    grid: &TimeGrid,
    opts: PicardOptions,
) -> Result<DensityEstimate> {
    if !(opts.safety > 0.0 && opts.safety < 1.0) {
        return Err(Error::invalid(format!("picard safety must lie in (0, 1), got {}", opts.safety)));
    }
    let sys = System::new(src, curve, grid)?;
    let nodes = grid.nodes();
    let n = nodes.len();
    let gamma = curve.gamma();
    let holder = curve.estimate_holder([0.0, grid.horizon()], HOLDER_LEVELS)?;
    let length = window_length(holder.m, gamma, opts.safety);
    let c1 = holder.m * INV_SQRT_2PI / (gamma - 0.5);

    let mut p = vec![0.0; n];
    let mut windows = Vec::new();
    let mut row = Vec::with_capacity(n);
    let mut start = 0;
    while start < n - 1 {
        let limit = nodes[start] + length;
        let end = (start + 1).max(nodes.partition_point(|&t| t <= limit) - 1).min(n - 1);
        let width = end - start;

        // frozen part b_i and in-window coefficients A_i
        let mut base = Vec::with_capacity(width);
        let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(width);
        for i in start + 1..=end {
            sys.row(i, &mut row);
            let frozen: f64 = row[..=start].iter().zip(&p[..=start]).map(|(c, v)| c * v).sum();
            base.push(sys.source[i] + frozen);
            coeffs.push(row[start + 1..=i].to_vec());
        }

        let mut q = base.clone();
        let mut next = vec![0.0; width];
        let mut prev_diff = f64::NAN;
        let mut max_ratio: f64 = 0.0;
        let mut last_ratio = f64::NAN;
        let mut iterations = 0;
        loop {
            iterations += 1;
            for (k, (b, c)) in base.iter().zip(&coeffs).enumerate() {
                next[k] = b + c.iter().zip(&q[..=k]).map(|(a, v)| a * v).sum::<f64>();
            }
            let diff = next.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if prev_diff > 0.0 {
                last_ratio = diff / prev_diff;
                max_ratio = max_ratio.max(last_ratio);
            }
            std::mem::swap(&mut q, &mut next);
            if diff <= opts.tol {
                break;
            }
            if iterations >= opts.max_iter {
                return Err(Error::NonConvergence { window: windows.len(), iterations, ratio: last_ratio });
            }
            prev_diff = diff;
        }
        p[start + 1..=end].copy_from_slice(&q);
        windows.push(WindowReport {
            start: nodes[start],
            end: nodes[end],
            nodes: width,
            iterations,
            max_ratio,
            bound: c1 * (nodes[end] - nodes[start]).powf(gamma - 0.5),
        });
        start = end;
    }

    let diagnostics = Diagnostics { holder_m: Some(holder.m), windows, ..Default::default() };
    Ok(DensityEstimate::from_values(grid.clone(), p, Method::Picard, gamma)?
        .with_diagnostics(diagnostics)
        .bind(curve, src))
}

#[cfg(test)]
mod tests;
