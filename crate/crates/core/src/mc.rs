//! Monte Carlo first-passage sampler with a Brownian-bridge crossing
//! correction. Every path owns a ChaCha stream selected by its index, so a
//! run depends only on its configuration and never on the thread schedule.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryCurve;
use crate::solver::{DensityEstimate, SourceSpec};
use crate::{Error, Result};

const BRIDGE_CUTOFF: f64 = 37.0;

fn default_bridge() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub seed: u64,
    #[serde(default = "default_bridge")]
    pub bridge_correction: bool,
}

impl McConfig {
    /// Bridge correction on.
    pub fn new(n_paths: usize, dt: f64, horizon: f64, seed: u64) -> Result<Self> {
        let cfg = Self { n_paths, dt, horizon, seed, bridge_correction: true };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_bridge(mut self, on: bool) -> Self {
        self.bridge_correction = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths must be at least 1"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid(format!("horizon T must be positive, got {}", self.horizon)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.dt > self.horizon / 10.0 {
            return Err(Error::invalid(format!(
                "dt = {} exceeds T/10 = {}",
                self.dt,
                self.horizon / 10.0
            )));
        }
        Ok(())
    }

    /// Step end times `t_1 < … < t_n = T`; the last step may be shorter.
    fn step_times(&self) -> Vec<f64> {
        let n = (self.horizon / self.dt * (1.0 - 1e-12)).ceil() as usize;
        let mut times: Vec<f64> = (1..=n).map(|k| k as f64 * self.dt).collect();
        times[n - 1] = self.horizon;
        times
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRun {
    pub config: McConfig,
    hit_times: Vec<f64>,
    n_censored: usize,
}

impl McRun {
    /// Sorted hitting times of the paths that hit by `T`.
    pub fn hit_times(&self) -> &[f64] {
        &self.hit_times
    }

    pub fn n_censored(&self) -> usize {
        self.n_censored
    }

    pub fn horizon(&self) -> f64 {
        self.config.horizon
    }

    /// Fraction of paths that hit by `t` (right-continuous).
    pub fn ecdf(&self, t: f64) -> f64 {
        let k = self.hit_times.partition_point(|&s| s <= t);
        k as f64 / self.config.n_paths as f64
    }

    /// One value per line under a `tau` header, 17 significant digits.
    pub fn hits_csv(&self) -> String {
        let mut out = String::with_capacity(24 * (self.hit_times.len() + 1));
        out.push_str("tau\n");
        for t in &self.hit_times {
            out.push_str(&format!("{t:.16e}\n"));
        }
        out
    }

    /// Censor count, ecdf at tenths of the horizon and empirical quantiles.
    pub fn summary(&self) -> serde_json::Value {
        let horizon = self.config.horizon;
        let ecdf: Vec<[f64; 2]> = (1..=10)
            .map(|k| {
                let t = horizon * k as f64 / 10.0;
                [t, self.ecdf(t)]
            })
            .collect();
        let n = self.config.n_paths as f64;
        let quantiles: Vec<serde_json::Value> = [0.1, 0.25, 0.5, 0.75, 0.9]
            .iter()
            .map(|&q| {
                let rank = (q * n).ceil() as usize;
                let value = (rank >= 1 && rank <= self.hit_times.len()).then(|| self.hit_times[rank - 1]);
                serde_json::json!({ "q": q, "t": value })
            })
            .collect();
        serde_json::json!({
            "config": self.config,
            "n_hits": self.hit_times.len(),
            "n_censored": self.n_censored,
            "ecdf": ecdf,
            "quantiles": quantiles,
        })
    }
}

/// Hitting time of path `index`, or `None` if it survives to `T`.
fn path_hit(cfg: &McConfig, r0: f64, x0: f64, times: &[f64], bound: &[f64], index: u64) -> Option<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let mut b = r0;
    let mut gap = x0 - r0;
    let mut prev = 0.0;
    for (&t, &x) in times.iter().zip(bound) {
        let h = t - prev;
        let z: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.random();
        b += h.sqrt() * z;
        let next_gap = x - b;
        if next_gap <= 0.0 {
            return Some(t);
        }
        if cfg.bridge_correction {
            let exponent = 2.0 * gap * next_gap / h;
            // exp(-37) is below the smallest positive uniform draw, 2^-53
            if exponent < BRIDGE_CUTOFF && u < (-exponent).exp() {
                return Some(t);
            }
        }
        gap = next_gap;
        prev = t;
    }
    None
}

/// Simulates `cfg.n_paths` paths started at a point source.
pub fn simulate(src: &SourceSpec, curve: &BoundaryCurve, cfg: &McConfig) -> Result<McRun> {
    cfg.validate()?;
    let r0 = match src {
        SourceSpec::Point { r0 } => *r0,
        SourceSpec::Smeared { .. } => return Err(Error::invalid("simulation needs a point source")),
    };
    let x0 = curve.start();
    if !(r0 < x0) {
        return Err(Error::domain(format!("r0 = {r0} must lie strictly below X_0 = {x0}")));
    }
    if cfg.horizon > curve.horizon() {
        return Err(Error::domain("simulation horizon exceeds the boundary horizon"));
    }
    let times = cfg.step_times();
    let bound: Vec<f64> = times.iter().map(|&t| curve.at(t)).collect();
    let hits: Vec<Option<f64>> = (0..cfg.n_paths)
        .into_par_iter()
        .with_min_len(256)
        .map(|i| path_hit(cfg, r0, x0, &times, &bound, i as u64))
        .collect();
    let mut hit_times: Vec<f64> = hits.into_iter().flatten().collect();
    hit_times.sort_by(f64::total_cmp);
    let n_censored = cfg.n_paths - hit_times.len();
    Ok(McRun { config: cfg.clone(), hit_times, n_censored })
}

fn same_horizon(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// `sup |ecdf - F|` over the hit-time samples and the extra `nodes`.
pub fn ks_distance_with<F: Fn(f64) -> f64>(run: &McRun, cdf: F, nodes: &[f64]) -> f64 {
    let n = run.config.n_paths as f64;
    let times = &run.hit_times;
    let mut sup: f64 = 0.0;
    let mut i = 0;
    while i < times.len() {
        let t = times[i];
        let mut j = i + 1;
        while j < times.len() && times[j] == t {
            j += 1;
        }
        sup = sup.max((j as f64 / n - cdf(t)).abs());
        i = j;
    }
    for &t in nodes {
        sup = sup.max((run.ecdf(t) - cdf(t)).abs());
    }
    sup
}

/// Kolmogorov-Smirnov distance between a run and a solver CDF.
pub fn ks_distance(run: &McRun, est: &DensityEstimate) -> Result<f64> {
    if !same_horizon(run.horizon(), est.horizon()) {
        return Err(Error::Mismatch(format!(
            "simulation horizon {} differs from density horizon {}",
            run.horizon(),
            est.horizon()
        )));
    }
    let cdf = |t: f64| if t <= 0.0 { 0.0 } else { est.cdf_at(t.min(est.horizon())).unwrap_or(1.0) };
    Ok(ks_distance_with(run, cdf, est.times()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss_kernel::psi;
    use crate::solver::{solve_marching, TimeGrid};
    use proptest::prelude::*;

    fn point() -> SourceSpec {
        SourceSpec::point(0.0).unwrap()
    }

    fn constant(a: f64) -> BoundaryCurve {
        BoundaryCurve::constant(a).unwrap()
    }

    fn sigma(p: f64, n: usize) -> f64 {
        (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn config_checks() {
        assert!(McConfig::new(0, 1e-3, 1.0, 1).is_err());
        assert!(McConfig::new(10, 0.2, 1.0, 1).is_err());
        assert!(McConfig::new(10, 0.0, 1.0, 1).is_err());
        assert!(McConfig::new(10, 0.1, 1.0, 1).is_ok());
        let cfg = McConfig::new(10, 0.3, 1.0, 1).map(|c| c.step_times());
        assert!(cfg.is_err());
        let steps = McConfig::new(10, 0.03, 1.0, 1).unwrap().step_times();
        assert_eq!(steps.len(), 34);
        assert_eq!(*steps.last().unwrap(), 1.0);
        let json: McConfig = serde_json::from_str(r#"{"n_paths":5,"dt":0.01,"T":1,"seed":3}"#).unwrap();
        assert!(json.bridge_correction);
    }

    #[test]
    fn rejects_bad_sources() {
        let cfg = McConfig::new(10, 1e-2, 1.0, 1).unwrap();
        assert!(simulate(&SourceSpec::point(1.0).unwrap(), &constant(1.0), &cfg).is_err());
        assert!(simulate(&SourceSpec::point(2.0).unwrap(), &constant(1.0), &cfg).is_err());
        let bump = SourceSpec::uniform_bump(0.0, 0.5).unwrap();
        assert!(simulate(&bump, &constant(1.0), &cfg).is_err());
    }

    #[test]
    fn reflection_principle() {
        let n = 20_000;
        let cfg = McConfig::new(n, 1e-3, 1.0, 42).unwrap();
        let run = simulate(&point(), &constant(1.0), &cfg).unwrap();
        assert_eq!(run.hit_times().len() + run.n_censored(), n);
        assert!(run.hit_times().windows(2).all(|w| w[0] <= w[1]));
        assert!(run.hit_times().iter().all(|&t| t > 0.0 && t <= 1.0));
        let exact = 2.0 * psi(1.0);
        assert!((run.ecdf(1.0) - exact).abs() < 4.0 * sigma(exact, n), "{}", run.ecdf(1.0));
    }

    #[test]
    fn discrete_monitoring_undercounts() {
        let n = 20_000;
        let cfg = McConfig::new(n, 1e-2, 1.0, 7).unwrap().with_bridge(false);
        let run = simulate(&point(), &constant(1.0), &cfg).unwrap();
        let exact = 2.0 * psi(1.0);
        assert!(run.ecdf(1.0) < exact - sigma(exact, n), "{}", run.ecdf(1.0));
    }

    #[test]
    fn thread_count_does_not_matter() {
        let cfg = McConfig::new(3000, 1e-3, 1.0, 99).unwrap();
        let curve = BoundaryCurve::linear(1.0, 0.5).unwrap();
        let run_with = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate(&point(), &curve, &cfg).unwrap())
        };
        let one = run_with(1);
        let four = run_with(4);
        assert_eq!(one.hits_csv(), four.hits_csv());
        assert_eq!(one, simulate(&point(), &curve, &cfg).unwrap());
    }

    #[test]
    fn raising_the_boundary_lowers_the_ecdf() {
        let cfg = McConfig::new(5000, 1e-3, 1.0, 5).unwrap();
        let low = simulate(&point(), &constant(1.0), &cfg).unwrap();
        let high = simulate(&point(), &constant(1.5), &cfg).unwrap();
        for t in [0.2, 0.4, 0.6, 0.8, 1.0] {
            assert!(high.ecdf(t) < low.ecdf(t), "t={t}");
        }
    }

    #[test]
    fn step_refinement_with_bridge() {
        let n = 20_000;
        let exact = 2.0 * psi(1.0);
        let s = sigma(exact, n);
        let errors: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&dt| {
                let cfg = McConfig::new(n, dt, 1.0, 11).unwrap();
                (simulate(&point(), &constant(1.0), &cfg).unwrap().ecdf(1.0) - exact).abs()
            })
            .collect();
        for w in errors.windows(2) {
            assert!(w[1] <= w[0] + 2.0 * s, "{errors:?}");
        }
    }

    #[test]
    fn ks_self_and_against_solver() {
        let cfg = McConfig::new(20_000, 1e-3, 1.0, 3).unwrap();
        let run = simulate(&point(), &constant(1.0), &cfg).unwrap();
        assert_eq!(ks_distance_with(&run, |t| run.ecdf(t), &[0.1, 0.5]), 0.0);

        let grid = TimeGrid::graded(1.0, 512, 2.0).unwrap();
        let est = solve_marching(&point(), &constant(1.0), &grid).unwrap();
        let d = ks_distance(&run, &est).unwrap();
        assert!(d <= 0.015, "{d}");

        let wrong = solve_marching(&point(), &constant(1.2), &grid).unwrap();
        let d = ks_distance(&run, &wrong).unwrap();
        assert!(d >= 0.03, "{d}");

        let longer = TimeGrid::graded(2.0, 64, 2.0).unwrap();
        let est = solve_marching(&point(), &constant(1.0), &longer).unwrap();
        assert!(matches!(ks_distance(&run, &est), Err(Error::Mismatch(_))));
    }

    #[test]
    fn summary_and_csv() {
        let cfg = McConfig::new(200, 1e-2, 1.0, 1).unwrap();
        let run = simulate(&point(), &constant(0.5), &cfg).unwrap();
        let csv = run.hits_csv();
        assert_eq!(csv.lines().count(), run.hit_times().len() + 1);
        for (line, t) in csv.lines().skip(1).zip(run.hit_times()) {
            assert_eq!(line.parse::<f64>().unwrap(), *t);
        }
        let s = run.summary();
        assert_eq!(s["n_censored"].as_u64().unwrap() as usize, run.n_censored());
        assert_eq!(s["ecdf"].as_array().unwrap().len(), 10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn seeded_runs_repeat(seed in any::<u64>(), a in 0.3f64..2.0) {
            let cfg = McConfig::new(300, 1e-2, 1.0, seed).unwrap();
            let r1 = simulate(&point(), &constant(a), &cfg).unwrap();
            let r2 = simulate(&point(), &constant(a), &cfg).unwrap();
            prop_assert_eq!(r1, r2);
        }

        #[test]
        fn pathwise_monotone(seed in any::<u64>(), a in 0.3f64..1.5, lift in 0.01f64..1.0) {
            let cfg = McConfig::new(400, 1e-2, 1.0, seed).unwrap();
            let low = simulate(&point(), &constant(a), &cfg).unwrap();
            let high = simulate(&point(), &constant(a + lift), &cfg).unwrap();
            for k in 1..=10 {
                let t = k as f64 / 10.0;
                prop_assert!(high.ecdf(t) <= low.ecdf(t));
            }
        }
    }
}
