//! Residual and identity checks tying computed densities and Green
//! functions back to the equations they must satisfy.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::BoundaryCurve;
use crate::gauss_kernel::{psi, INV_SQRT_2PI};
use crate::green::{layer_integral, GreenField};
use crate::solver::{solve_marching, DensityEstimate, SourceSpec, TimeGrid};
use crate::{Error, Result};

pub const MASTER_TOL: f64 = 2e-3;
pub const HEAT_TOL: f64 = 1e-2;
pub const MASS_TOL: f64 = 2e-3;
pub const JUMP_TOL: f64 = 2e-2;
pub const DELTA_TOL: f64 = 1.0;

/// Absolute floor of the density used to scale flux residuals.
pub const JUMP_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub name: String,
    pub points: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub sup_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Auxiliary per-point quantities, keyed by name.
    pub measurements: BTreeMap<String, Vec<f64>>,
}

impl ResidualReport {
    pub fn new(name: &str, points: Vec<Vec<f64>>, residuals: Vec<f64>, tolerance: f64) -> Self {
        // NaN residuals propagate into the sup and fail the report
        let sup_residual = residuals
            .iter()
            .map(|r| r.abs())
            .fold(0.0, |m: f64, r| if r.is_nan() || m.is_nan() { f64::NAN } else { m.max(r) });
        Self {
            name: name.to_string(),
            points,
            residuals,
            sup_residual,
            tolerance,
            pass: sup_residual <= tolerance,
            measurements: BTreeMap::new(),
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.pass = self.sup_residual <= tolerance;
        self
    }

    pub fn with_measurement(mut self, key: &str, values: Vec<f64>) -> Self {
        self.measurements.insert(key.to_string(), values);
        self
    }
}

fn check_times(times: &[f64], horizon: f64) -> Result<()> {
    match times.iter().find(|&&t| !(t > 0.0 && t <= horizon)) {
        Some(t) => Err(Error::domain(format!("probe time {t} outside (0, {horizon}]"))),
        None => Ok(()),
    }
}

/// `Ψ((z - r0)/√t) - ∫_0^t Ψ((z - X_s)/√(t - s)) p(s) ds` at `z = X_t + offset`.
pub fn master_residual(
    est: &DensityEstimate,
    curve: &BoundaryCurve,
    src: &SourceSpec,
    z_offsets: &[f64],
    times: &[f64],
) -> Result<ResidualReport> {
    let r0 = match src {
        SourceSpec::Point { r0 } => *r0,
        SourceSpec::Smeared { .. } => return Err(Error::invalid("master residual needs a point source")),
    };
    if let Some(w) = z_offsets.iter().find(|&&w| !(w >= 0.0)) {
        return Err(Error::domain(format!("offset must be non-negative, got {w}")));
    }
    check_times(times, est.horizon().min(curve.horizon()))?;
    let points: Vec<Vec<f64>> = times
        .iter()
        .flat_map(|&t| z_offsets.iter().map(move |&w| vec![t, w]))
        .collect();
    let residuals: Vec<f64> = points
        .par_iter()
        .map(|pt| {
            let (t, w) = (pt[0], pt[1]);
            let z = curve.at(t) + w;
            let layer = layer_integral(est, t, |s, lag| {
                if lag > 0.0 {
                    psi((z - curve.at(s)) / lag.sqrt())
                } else if w == 0.0 {
                    0.5
                } else {
                    0.0
                }
            });
            psi((z - r0) / t.sqrt()) - layer
        })
        .collect();
    Ok(ResidualReport::new("master", points, residuals, MASTER_TOL))
}

/// Central-difference `v_t - ½ v_xx` at each `(x, t)`, divided by
/// `max(|v_xx|, 1)`. Evaluation errors of `field` (a stencil point outside
/// its domain) are returned as is.
pub fn heat_residual<F>(field: F, points: &[(f64, f64)], dx: f64, dt_fd: f64) -> Result<ResidualReport>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    if !(dx > 0.0 && dt_fd > 0.0) {
        return Err(Error::domain("finite-difference steps must be positive"));
    }
    let rows: Vec<(f64, f64)> = points
        .par_iter()
        .map(|&(x, t)| {
            let c = field(x, t)?;
            let vt = (field(x, t + dt_fd)? - field(x, t - dt_fd)?) / (2.0 * dt_fd);
            let vxx = (field(x + dx, t)? - 2.0 * c + field(x - dx, t)?) / (dx * dx);
            Ok(((vt - 0.5 * vxx) / vxx.abs().max(1.0), vxx))
        })
        .collect::<Result<_>>()?;
    let (residuals, curvature): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let pts = points.iter().map(|&(x, t)| vec![x, t]).collect();
    Ok(ResidualReport::new("heat", pts, residuals, HEAT_TOL).with_measurement("v_xx", curvature))
}

/// Heat residual of a Green field; the stencil must stay strictly below
/// the boundary and inside `(0, horizon]`.
pub fn green_heat_residual(
    field: &GreenField,
    points: &[(f64, f64)],
    dx: f64,
    dt_fd: f64,
) -> Result<ResidualReport> {
    let eval = |x: f64, t: f64| {
        let top = field.curve().eval(t)?;
        if x >= top {
            return Err(Error::domain(format!("stencil point ({x}, {t}) is not below the boundary")));
        }
        field.green_eval(x, t)
    };
    heat_residual(eval, points, dx, dt_fd)
}

/// `S(t) + F(t) - 1`.
pub fn mass_conservation(field: &GreenField, times: &[f64]) -> Result<ResidualReport> {
    check_times(times, field.horizon())?;
    let rows: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| Ok((field.survival(t)?, field.density().cdf_at(t)?)))
        .collect::<Result<_>>()?;
    let residuals = rows.iter().map(|(s, f)| s + f - 1.0).collect();
    let (s, f) = rows.into_iter().unzip();
    Ok(ResidualReport::new("mass", times.iter().map(|&t| vec![t]).collect(), residuals, MASS_TOL)
        .with_measurement("survival", s)
        .with_measurement("cdf", f))
}

/// `(flux - p) / max(p, JUMP_FLOOR)` with the flux taken from the Green field.
pub fn jump_check(field: &GreenField, times: &[f64]) -> Result<ResidualReport> {
    check_times(times, field.horizon())?;
    let rows: Vec<(f64, f64)> = times
        .par_iter()
        .map(|&t| Ok((field.boundary_flux(t, None)?, field.density().density(t)?)))
        .collect::<Result<_>>()?;
    let residuals = rows.iter().map(|(q, p)| (q - p) / p.max(JUMP_FLOOR)).collect();
    let absolute = rows.iter().map(|(q, p)| q - p).collect();
    let (flux, density) = rows.into_iter().unzip();
    Ok(ResidualReport::new("jump", times.iter().map(|&t| vec![t]).collect(), residuals, JUMP_TOL)
        .with_measurement("flux", flux)
        .with_measurement("density", density)
        .with_measurement("absolute", absolute))
}

/// Weighted distance `sup_i t_i^(1-η) |p_w(t_i) - p(t_i)|` between the
/// densities of uniform bumps of width `w` centred at `r0` and the point
/// source at `r0`. The residuals are the successive norm ratios followed by
/// `(last/first)/0.5`, so the report passes at tolerance 1 exactly when the
/// sequence does not increase and halves overall.
pub fn delta_convergence(
    curve: &BoundaryCurve,
    r0: f64,
    widths: &[f64],
    eta: f64,
    grid: &TimeGrid,
) -> Result<ResidualReport> {
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::domain(format!("eta must lie in (0, 1/2), got {eta}")));
    }
    if widths.len() < 2 {
        return Err(Error::invalid("need at least two widths"));
    }
    let point = SourceSpec::point(r0)?;
    point.check_against(curve)?;
    let x0 = curve.start();
    if let Some(w) = widths.iter().find(|&&w| !(w >= 0.0) || r0 + 0.5 * w >= x0) {
        return Err(Error::domain(format!("bump of width {w} at {r0} touches X_0 = {x0}")));
    }
    let base = solve_marching(&point, curve, grid)?;
    let nodes = grid.nodes();
    let norms: Vec<f64> = widths
        .par_iter()
        .map(|&w| {
            if w == 0.0 {
                return Ok(0.0);
            }
            let est = solve_marching(&SourceSpec::uniform_bump(r0, w)?, curve, grid)?;
            Ok(nodes
                .iter()
                .zip(est.values().iter().zip(base.values()))
                .map(|(&t, (a, b))| t.powf(1.0 - eta) * (a - b).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    let ratio = |num: f64, den: f64| if num == 0.0 { 0.0 } else if den == 0.0 { f64::INFINITY } else { num / den };
    let mut residuals: Vec<f64> = norms.windows(2).map(|w| ratio(w[1], w[0])).collect();
    residuals.push(ratio(norms[norms.len() - 1], norms[0]) / 0.5);
    let points = widths.iter().map(|&w| vec![w]).collect();
    Ok(ResidualReport::new("delta", points, residuals, DELTA_TOL).with_measurement("norms", norms))
}

/// Exact density of the hitting time of `a + b t` from `r < a`.
pub fn closed_form_linear(a: f64, b: f64, r: f64, t: f64) -> Result<f64> {
    if !(r < a) {
        return Err(Error::domain(format!("r = {r} must lie below a = {a}")));
    }
    if !(t > 0.0) {
        return Err(Error::domain(format!("t must be positive, got {t}")));
    }
    let d = a + b * t - r;
    Ok((a - r) * INV_SQRT_2PI / (t * t * t).sqrt() * (-d * d / (2.0 * t)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss_kernel::{gaussian, gaussian_dx, KernelPoint};
    use crate::solver::Method;

    fn linear_field(n: usize) -> (BoundaryCurve, SourceSpec, DensityEstimate) {
        let curve = BoundaryCurve::linear(1.0, 0.5).unwrap();
        let src = SourceSpec::point(0.0).unwrap();
        let grid = TimeGrid::graded(4.0, n, 2.0).unwrap();
        let est = solve_marching(&src, &curve, &grid).unwrap();
        (curve, src, est)
    }

    fn exact_linear(grid: TimeGrid, a: f64, b: f64) -> DensityEstimate {
        let p = grid
            .nodes()
            .iter()
            .map(|&t| if t > 0.0 { closed_form_linear(a, b, 0.0, t).unwrap() } else { 0.0 })
            .collect();
        DensityEstimate::from_values(grid, p, Method::Reference, 1.0).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let cases = [
            (0.0, 0.241_970_724_519_143_37),
            (1.0, 0.053_990_966_513_188_06),
            (0.5, 0.129_517_595_665_891_74),
        ];
        for (b, want) in cases {
            let v = closed_form_linear(1.0, b, 0.0, 1.0).unwrap();
            assert!((v - want).abs() < 1e-16, "b={b}: {v}");
        }
        assert!(closed_form_linear(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(closed_form_linear(1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn report_pass_rule() {
        let r = ResidualReport::new("x", vec![], vec![0.1, -0.3], 0.3);
        assert!(r.pass);
        assert_eq!(r.sup_residual, 0.3);
        assert!(!r.clone().with_tolerance(0.2).pass);
        assert!(!ResidualReport::new("x", vec![], vec![f64::NAN, 0.0], 1.0).pass);
        assert!(ResidualReport::new("x", vec![], vec![], 0.0).pass);
    }

    #[test]
    fn master_with_exact_density() {
        let curve = BoundaryCurve::constant(1.0).unwrap();
        let src = SourceSpec::point(0.0).unwrap();
        let est = exact_linear(TimeGrid::graded(4.0, 2048, 2.0).unwrap(), 1.0, 0.0);
        let r = master_residual(&est, &curve, &src, &[0.0], &[1.0]).unwrap();
        assert!(r.sup_residual <= 1e-6, "{:?}", r.residuals);
        let r = master_residual(&est, &curve, &src, &[0.0], &[1e-4]).unwrap();
        assert!(r.sup_residual <= 1e-12, "{:?}", r.residuals);

        let curve = BoundaryCurve::linear(1.0, 0.5).unwrap();
        let est = exact_linear(TimeGrid::graded(4.0, 2048, 2.0).unwrap(), 1.0, 0.5);
        let r = master_residual(&est, &curve, &src, &[0.0, 0.5, 1.0], &[0.5, 1.0, 2.0, 4.0]).unwrap();
        assert!(r.clone().with_tolerance(1e-5).pass, "{:?}", r.residuals);
        assert_eq!(r.points.len(), 12);
    }

    #[test]
    fn master_with_solver_density() {
        let (curve, src, est) = linear_field(2048);
        let r = master_residual(&est, &curve, &src, &[0.0, 0.5, 1.0], &[0.5, 1.0, 2.0, 4.0]).unwrap();
        assert!(r.pass, "{:?}", r.residuals);
        assert!(master_residual(&est, &curve, &src, &[-0.1], &[1.0]).is_err());
        assert!(master_residual(&est, &curve, &src, &[0.0], &[5.0]).is_err());
    }

    #[test]
    fn master_detects_scaled_density() {
        let (curve, src, est) = linear_field(1024);
        let p: Vec<f64> = est.values().iter().map(|v| 1.1 * v).collect();
        let bad = DensityEstimate::from_values(est.grid().clone(), p, Method::Imported, 1.0).unwrap();
        let r = master_residual(&bad, &curve, &src, &[0.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn heat_fixtures() {
        let kernel = |x: f64, t: f64| gaussian(KernelPoint::new(x, t, 0.0, 0.0));
        let rem = |x: f64, t: f64| gaussian_dx(KernelPoint::new(x, t, 0.0, 0.0));
        let points: Vec<(f64, f64)> = (0..10)
            .map(|i| (-2.0 + 0.41 * i as f64, 0.5 + 0.15 * i as f64))
            .collect();
        let r = heat_residual(kernel, &points, 1e-3, 1e-3).unwrap();
        assert!(r.sup_residual <= 1e-6, "{:?}", r.residuals);
        let r = heat_residual(rem, &[(-1.0, 1.0)], 1e-3, 1e-3).unwrap();
        assert!(r.sup_residual <= 1e-6, "{:?}", r.residuals);
        assert!(heat_residual(kernel, &[(0.0, 1e-4)], 1e-3, 1e-3).is_err());
    }

    #[test]
    fn green_heat_and_stencil_domain() {
        let (curve, src, est) = linear_field(1024);
        let field = GreenField::new(curve, src, est).unwrap();
        let points: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let t = 0.5 + 3.0 * ((i * 7) % 20) as f64 / 20.0;
                let x = 1.0 + 0.5 * t - 0.2 - 2.0 * (i % 5) as f64 / 5.0;
                (x, t)
            })
            .collect();
        let r = green_heat_residual(&field, &points, 1e-2, 1e-2).unwrap();
        assert!(r.pass, "{:?}", r.residuals);
        assert!(green_heat_residual(&field, &[(1.49, 1.0)], 2e-2, 1e-3).is_err());
        assert!(green_heat_residual(&field, &[(0.0, 3.999)], 1e-2, 1e-2).is_err());
    }

    #[test]
    fn mass_and_jump() {
        let curve = BoundaryCurve::constant(1.0).unwrap();
        let src = SourceSpec::point(0.0).unwrap();
        let grid = TimeGrid::graded(4.0, 1024, 2.0).unwrap();
        let est = solve_marching(&src, &curve, &grid).unwrap();
        let first = grid.nodes()[1];
        let field = GreenField::new(curve, src, est).unwrap();
        let r = mass_conservation(&field, &[1.0]).unwrap();
        assert!(r.pass, "{:?}", r.residuals);
        let r = mass_conservation(&field, &[1e-4]).unwrap();
        assert!(r.sup_residual <= 1e-6, "{:?}", r.residuals);
        let r = jump_check(&field, &[1.0]).unwrap();
        assert!(r.pass, "{:?}", r.residuals);
        let r = jump_check(&field, &[first]).unwrap();
        assert!(r.measurements["absolute"][0].abs() <= 1e-3);
        assert!(jump_check(&field, &[0.0]).is_err());

        let (curve, src, est) = linear_field(1024);
        let field = GreenField::new(curve, src, est).unwrap();
        let r = jump_check(&field, &[0.5, 1.0, 2.0]).unwrap();
        assert!(r.pass, "{:?}", r.residuals);
    }

    #[test]
    fn delta_sequence() {
        let curve = BoundaryCurve::linear(1.0, 0.5).unwrap();
        let grid = TimeGrid::graded(4.0, 512, 2.0).unwrap();
        let r = delta_convergence(&curve, 0.0, &[0.25, 0.125, 0.0625, 0.03125], 0.25, &grid).unwrap();
        assert!(r.pass, "{:?} {:?}", r.residuals, r.measurements);
        let norms = &r.measurements["norms"];
        assert!(norms.windows(2).all(|w| w[1] < w[0]));

        let r = delta_convergence(&curve, 0.0, &[0.25, 0.0], 0.25, &grid).unwrap();
        assert_eq!(r.measurements["norms"][1], 0.0);
        assert!(delta_convergence(&curve, 0.0, &[2.0, 0.1], 0.25, &grid).is_err());
        assert!(delta_convergence(&curve, 0.0, &[0.2, 0.1], 0.5, &grid).is_err());
    }
}
