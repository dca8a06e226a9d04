use super::*;
use crate::gauss_kernel::psi;

fn closed_form(a: f64, b: f64, r: f64, t: f64) -> f64 {
    (a - r) / (2.0 * std::f64::consts::PI * t.powi(3)).sqrt() * (-(a + b * t - r).powi(2) / (2.0 * t)).exp()
}

fn point(r0: f64) -> SourceSpec {
    SourceSpec::point(r0).unwrap()
}

fn at(est: &DensityEstimate, t: f64) -> f64 {
    let i = est.times().iter().position(|&s| s == t).expect("t is a grid node");
    est.values()[i]
}

#[test]
fn kernel_examples() {
    let c = BoundaryCurve::constant(3.0).unwrap();
    assert_eq!(kernel_k(&c, 1.0, 0.2).unwrap(), 0.0);
    assert_eq!(kernel_k(&c, 5.0, 0.0).unwrap(), 0.0);

    let l = BoundaryCurve::linear(0.0, 1.0).unwrap();
    // G_x(0.5 offset, lag 0.5) times lag^(1/2), written out from the heat kernel formula
    let lag: f64 = 0.5;
    let g = (2.0 * std::f64::consts::PI * lag).sqrt().recip() * (-(0.5f64).powi(2) / (2.0 * lag)).exp();
    let expected = -(0.5 / lag) * g * lag.sqrt();
    let k = kernel_k(&l, 1.0, 0.5).unwrap();
    assert!((k - expected).abs() < 1e-15);
    assert!((k + 0.310_696_560_376_927_7).abs() < 1e-12);

    let near = kernel_k(&l, 1.0, 1.0 - 1e-10).unwrap();
    assert!((near + 0.398_942_280_4).abs() < 1e-9);
    let diag = kernel_diagonal(&l, 0.75, 1.0).unwrap();
    assert!((diag + INV_SQRT_2PI).abs() < 1e-15);

    assert!(kernel_k(&l, 1.0, 1.0).is_err());
    assert!(kernel_k(&l, 1.0, -0.1).is_err());
}

#[test]
fn source_term_examples() {
    let c = BoundaryCurve::constant(1.0).unwrap();
    let v = source_term(&point(0.0), &c, 1.0).unwrap();
    assert!((v - 0.241_970_724_519_143_37).abs() < 1e-16);
    assert!(source_term(&point(0.0), &c, 1e-6).unwrap() < 1e-100);
    assert!(source_term(&point(0.0), &c, 0.0).is_err());

    for t in [0.3, 1.0, 2.5] {
        let narrow = SourceSpec::uniform_bump(0.0, 2e-3).unwrap();
        let s = source_term(&narrow, &c, t).unwrap();
        let p = source_term(&point(0.0), &c, t).unwrap();
        assert!(((s - p) / p).abs() < 1e-5, "t = {t}: {s} vs {p}");
    }
}

#[test]
fn hat_weights_sum_to_segment_moment() {
    for &(beta, t, a, b) in &[(-0.5, 1.0, 0.0, 0.01), (-0.75, 4.0, 0.5, 0.51), (-0.5, 1.0, 0.9, 1.0)] {
        let (wl, wr) = hat_weights(beta, t, a, b);
        let total = crate::gauss_kernel::segment_weight(beta, t, a, b).unwrap();
        assert!(((wl + wr) - total).abs() < 1e-14 * total);
        // first moment about a
        let first = crate::oracle::tanh_sinh(|from_a, from_b| from_a * (t - b + from_b).powf(beta), a, b, 1e-14);
        assert!((wr * (b - a) - first).abs() < 1e-10 * first, "{wr} {first}");
    }
    // the Gauss-Legendre branch agrees with the closed form just past the switch-over
    let (beta, t, a) = (-0.5, 1.0, 0.0);
    let h = (t - a) / (FAR_CELL_RATIO + 1.0);
    let (gl, gr) = hat_weights(beta, t, a, a + h);
    let w0 = power_moment(beta, t - a, h);
    let w1 = power_moment(beta + 1.0, t - a, h);
    let er = ((t - a) * w0 - w1) / h;
    assert!((gr - er).abs() < 1e-12 * er && (gl - (w0 - er)).abs() < 1e-12 * er);
}

#[test]
fn marching_golden_cases() {
    let grid = TimeGrid::graded(4.0, 2048, 2.0).unwrap();
    let c = BoundaryCurve::constant(1.0).unwrap();
    let est = solve_marching(&point(0.0), &c, &grid).unwrap();
    assert_eq!(est.values()[0], 0.0);
    assert!((at(&est, 1.0) - 0.241_97).abs() < 5e-4);

    let l = BoundaryCurve::linear(1.0, 0.5).unwrap();
    let est = solve_marching(&point(0.0), &l, &grid).unwrap();
    assert_eq!(est.values()[0], 0.0);
    assert!((at(&est, 1.0) - 0.129_52).abs() < 5e-4);
    assert!((at(&est, 1.0) - closed_form(1.0, 0.5, 0.0, 1.0)).abs() < 5e-5);
    assert_eq!(est.method(), Method::Marching);
}

#[test]
fn marching_rejects_bad_inputs() {
    let grid = TimeGrid::graded(4.0, 64, 2.0).unwrap();
    let c = BoundaryCurve::constant(1.0).unwrap();
    assert!(solve_marching(&point(1.0), &c, &grid).is_err());
    let short = BoundaryCurve::sampled(vec![0.0, 2.0], vec![1.0, 1.0], 1.0).unwrap();
    assert!(solve_marching(&point(0.0), &short, &grid).is_err());

    let coarse = TimeGrid::graded(4.0, 8, 1.0).unwrap();
    let steep = BoundaryCurve::linear(1.0, -10.0).unwrap();
    let err = solve_marching(&point(0.0), &steep, &coarse).unwrap_err();
    assert!(matches!(err, Error::DiagonalDominance { node: 1, .. }), "{err}");
    assert!(err.is_solver_failure());
}

#[test]
fn picard_constant_boundary_is_one_window() {
    let grid = TimeGrid::graded(2.0, 1024, 2.0).unwrap();
    let c = BoundaryCurve::constant(1.0).unwrap();
    let pic = solve_picard(&point(0.0), &c, &grid, PicardOptions::default()).unwrap();
    let windows = &pic.diagnostics().windows;
    assert_eq!(windows.len(), 1);
    assert_eq!(windows[0].iterations, 1);
    let march = solve_marching(&point(0.0), &c, &grid).unwrap();
    assert!(pic.sup_difference(&march).unwrap() <= 1e-3);
    for (t, v) in pic.times().iter().zip(pic.values()).skip(1) {
        assert_eq!(*v, source_term(&point(0.0), &c, *t).unwrap());
    }
}

#[test]
fn picard_windows_contract() {
    let grid = TimeGrid::graded(4.0, 1024, 2.0).unwrap();
    let l = BoundaryCurve::linear(1.0, 0.5).unwrap();
    let opts = PicardOptions::default();
    let pic = solve_picard(&point(0.0), &l, &grid, opts).unwrap();
    let windows = &pic.diagnostics().windows;
    assert!(!windows.is_empty() && windows.len() < 1024);
    for w in windows {
        assert!(w.max_ratio <= opts.safety + 0.1, "{w:?}");
        assert!(w.bound <= opts.safety + 1e-12 || w.nodes == 1);
    }
    assert_eq!(windows.first().unwrap().start, 0.0);
    assert_eq!(windows.last().unwrap().end, 4.0);

    let err = solve_picard(&point(0.0), &l, &grid, PicardOptions { max_iter: 1, ..opts }).unwrap_err();
    assert!(matches!(err, Error::NonConvergence { window: 0, .. }), "{err}");
}

#[test]
fn window_length_formula() {
    assert!(window_length(0.0, 1.0, 0.5).is_infinite());
    let m = 0.625;
    let l = window_length(m, 1.0, 0.5);
    let c1 = m * INV_SQRT_2PI / 0.5;
    assert!((c1 * l.sqrt() - 0.5).abs() < 1e-14);
}

#[test]
fn schemes_agree_for_builtin_families() {
    let grid = TimeGrid::graded(4.0, 1024, 2.0).unwrap();
    let curves = [
        BoundaryCurve::constant(1.0).unwrap(),
        BoundaryCurve::linear(1.0, 0.5).unwrap(),
        BoundaryCurve::power(1.0, 0.5, 0.75).unwrap(),
    ];
    for c in &curves {
        let m = solve_marching(&point(0.0), c, &grid).unwrap();
        let p = solve_picard(&point(0.0), c, &grid, PicardOptions::default()).unwrap();
        assert!(m.sup_difference(&p).unwrap() <= 1e-3, "{c:?}");
    }
}

#[test]
fn density_invariants() {
    let grid = TimeGrid::graded(4.0, 512, 2.0).unwrap();
    for c in [
        BoundaryCurve::constant(1.0).unwrap(),
        BoundaryCurve::linear(1.0, 0.5).unwrap(),
        BoundaryCurve::linear(1.0, -0.2).unwrap(),
        BoundaryCurve::power(1.0, 0.5, 0.75).unwrap(),
        BoundaryCurve::sampled(vec![0.0, 1.0, 2.5, 4.0], vec![1.0, 1.3, 0.9, 1.6], 1.0).unwrap(),
    ] {
        let est = solve_marching(&point(0.0), &c, &grid).unwrap();
        assert_eq!(est.values()[0], 0.0);
        assert!(est.values().iter().all(|&v| v >= -NEGATIVE_TOL), "{c:?}");
        assert!(est.cdf_values().windows(2).all(|w| w[1] >= w[0]));
        assert!(*est.cdf_values().last().unwrap() <= 1.0 + 1e-6);
    }
}

#[test]
fn translation_invariance() {
    let grid = TimeGrid::graded(4.0, 512, 2.0).unwrap();
    let c = BoundaryCurve::power(1.0, 0.5, 0.75).unwrap();
    let base = solve_marching(&point(0.0), &c, &grid).unwrap();
    let moved = solve_marching(&point(0.5), &c.shifted(0.5), &grid).unwrap();
    assert!(base.sup_difference(&moved).unwrap() <= 1e-12);
}

#[test]
fn brownian_scaling() {
    let lambda: f64 = 2.0;
    let (a, b) = (1.0, 0.5);
    let grid = TimeGrid::graded(4.0, 2048, 2.0).unwrap();
    let scaled_grid = TimeGrid::graded(lambda * lambda * 4.0, 2048, 2.0).unwrap();
    let base = solve_marching(&point(0.0), &BoundaryCurve::linear(a, b).unwrap(), &grid).unwrap();
    // λ X_{t/λ²} for X_t = a + b t
    let scaled_curve = BoundaryCurve::linear(lambda * a, b / lambda).unwrap();
    let scaled = solve_marching(&point(0.0), &scaled_curve, &scaled_grid).unwrap();
    for i in (64..2048).step_by(97) {
        let p = base.values()[i];
        let q = scaled.values()[i];
        assert!((scaled.times()[i] - lambda * lambda * base.times()[i]).abs() < 1e-12);
        assert!((q * lambda * lambda - p).abs() <= 2e-3 * p, "node {i}");
    }
}

#[test]
fn grid_refinement_reduces_error() {
    let l = BoundaryCurve::linear(1.0, 0.5).unwrap();
    let mut prev = f64::NAN;
    for n in [128, 256, 512] {
        let grid = TimeGrid::graded(4.0, n, 2.0).unwrap();
        let est = solve_marching(&point(0.0), &l, &grid).unwrap();
        let err = est
            .times()
            .iter()
            .zip(est.values())
            .skip(1)
            .map(|(&t, &v)| (v - closed_form(1.0, 0.5, 0.0, t)).abs())
            .fold(0.0, f64::max);
        if prev.is_finite() && prev > 1e-5 {
            assert!(prev / err >= 1.5, "N = {n}: {prev} -> {err}");
        }
        prev = err;
    }
}

#[test]
fn smeared_sources_converge_to_point() {
    let grid = TimeGrid::graded(4.0, 512, 2.0).unwrap();
    let l = BoundaryCurve::linear(1.0, 0.5).unwrap();
    let reference = solve_marching(&point(0.0), &l, &grid).unwrap();
    let eta = 0.25;
    let mut prev = f64::INFINITY;
    for n in [4.0, 8.0, 16.0, 32.0] {
        let src = SourceSpec::uniform_bump(0.0, 1.0 / n).unwrap();
        let est = solve_marching(&src, &l, &grid).unwrap();
        let norm = est
            .times()
            .iter()
            .zip(est.values().iter().zip(reference.values()))
            .skip(1)
            .map(|(&t, (a, b))| t.powf(1.0 - eta) * (a - b).abs())
            .fold(0.0, f64::max);
        assert!(norm < prev, "width 1/{n}: {norm} !< {prev}");
        prev = norm;
    }
}

#[test]
fn cdf_examples() {
    let grid = TimeGrid::graded(4.0, 2048, 2.0).unwrap();
    let est = solve_marching(&point(0.0), &BoundaryCurve::constant(1.0).unwrap(), &grid).unwrap();
    assert_eq!(est.cdf_at(0.0).unwrap(), 0.0);
    assert!((est.cdf_at(1.0).unwrap() - 2.0 * psi(1.0)).abs() < 1e-3);
    assert!((2.0 * psi(1.0) - 0.317_310_5).abs() < 1e-7);

    let grid = TimeGrid::graded(10.0, 2048, 2.0).unwrap();
    let est = solve_marching(&point(0.0), &BoundaryCurve::linear(1.0, 1.0).unwrap(), &grid).unwrap();
    assert!(est.cdf_at(10.0).unwrap() <= (-2.0f64).exp() + 1e-3);
    assert!(est.cdf_at(10.5).is_err());
}
