//! Fixed and adaptive Gauss rules on finite intervals.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// 7-point Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 8-point Gauss-Legendre abscissae on [-1, 1] (positive half).
pub const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];

pub const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

const MAX_DEPTH: u32 = 40;

/// One Gauss-Kronrod 7/15 evaluation on `[a, b]`: (kronrod estimate, |K - G|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss-Kronrod quadrature by recursive bisection. A subinterval
/// is accepted when its error estimate is below `max(abs_tol, rel_tol * |I|)`
/// scaled to its share of the interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (whole, err) = gk15(&f, a, b);
    if err <= abs_tol.max(rel_tol * whole.abs()) {
        return whole;
    }
    let scale = b - a;
    recurse(&f, a, b, whole, abs_tol, rel_tol, scale, 0)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    estimate: f64,
    abs_tol: f64,
    rel_tol: f64,
    scale: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (a + b);
    let (left, el) = gk15(f, a, mid);
    let (right, er) = gk15(f, mid, b);
    let total = left + right;
    let share = (b - a) / scale;
    let tol = (abs_tol * share).max(rel_tol * total.abs());
    if depth >= MAX_DEPTH || el + er <= tol || (total - estimate).abs() <= tol * 1e-3 {
        return total;
    }
    recurse(f, a, mid, left, abs_tol, rel_tol, scale, depth + 1)
        + recurse(f, mid, b, right, abs_tol, rel_tol, scale, depth + 1)
}

/// 8-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre8<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
        acc += w * (f(center - half * x) + f(center + half * x));
    }
    acc * half
}
