use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use fpt_core::config::{Format, GridSection, McSection, MethodChoice, OutputSection, Resolved, RunConfig};
use fpt_core::mc::{ks_distance, simulate as run_paths};
use fpt_core::solver::{fingerprint, solve_marching, solve_picard, PicardOptions};
use fpt_core::validator::{
    delta_convergence, green_heat_residual, jump_check, master_residual, mass_conservation, ResidualReport,
};
use fpt_core::{DensityEstimate, Error, GreenField, SourceSpec};
use rayon::prelude::*;
use serde_json::json;

pub const DEFAULT_INTERVALS: usize = 2048;
pub const DEFAULT_PATHS: usize = 100_000;
pub const DEFAULT_DT: f64 = 1e-4;

const SUITES: [&str; 5] = ["master", "heat", "mass", "jump", "delta"];

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(error: anyhow::Error) -> Self {
        Self { code: 2, error }
    }

    fn mismatch(error: anyhow::Error) -> Self {
        Self { code: 4, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            _ if e.is_solver_failure() => 3,
            Error::Mismatch(_) => 4,
            _ => 2,
        };
        Self { code, error: e.into() }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

/// Built-in defaults, then the config file, then the flags.
pub fn load(path: Option<&Path>, flags: RunConfig) -> Outcome<RunConfig> {
    let defaults = RunConfig {
        grid: GridSection { horizon: None, intervals: Some(DEFAULT_INTERVALS), q: Some(fpt_core::config::DEFAULT_GRADING) },
        method: Some(MethodChoice::Marching),
        output: OutputSection { directory: Some(PathBuf::from(".")), formats: Some(vec![Format::Csv, Format::Json]) },
        ..Default::default()
    };
    let file = match path {
        None => RunConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read config file {}", p.display()))
                .map_err(Failure::config)?;
            RunConfig::from_json_str(&text)?
        }
    };
    Ok(defaults.overlay(file).overlay(flags))
}

fn resolve(cfg: &RunConfig) -> Outcome<Resolved> {
    let r = cfg.resolve().context("invalid configuration").map_err(Failure::config)?;
    std::fs::create_dir_all(&r.directory)
        .with_context(|| format!("cannot create output directory {}", r.directory.display()))
        .map_err(Failure::config)?;
    Ok(r)
}

fn write(dir: &Path, name: &str, contents: &str) -> Outcome {
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::config)
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Outcome {
    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
    text.push('\n');
    write(dir, name, &text)
}

/// The merged configuration with every default made explicit.
fn resolved_config(cfg: &RunConfig, r: &Resolved) -> serde_json::Value {
    let mut full = cfg.clone();
    full.grid.q = r.grid.grading();
    full.method = Some(r.method);
    full.output.directory = Some(r.directory.clone());
    full.output.formats = Some(r.formats.clone());
    full.mc = r.mc.as_ref().map(|m| McSection {
        n_paths: Some(m.n_paths),
        dt: Some(m.dt),
        horizon: Some(m.horizon),
        seed: Some(m.seed),
        bridge_correction: Some(m.bridge_correction),
    });
    serde_json::to_value(full).expect("config serializes")
}

pub fn solve(cfg: &RunConfig) -> Outcome {
    let r = resolve(cfg)?;
    let marching = || solve_marching(&r.source, &r.curve, &r.grid);
    let picard = || solve_picard(&r.source, &r.curve, &r.grid, PicardOptions::default());
    let (primary, other) = match r.method {
        MethodChoice::Marching => (marching()?, None),
        MethodChoice::Picard => (picard()?, None),
        MethodChoice::Both => (marching()?, Some(picard()?)),
    };
    let dir = &r.directory;
    if r.formats.contains(&Format::Csv) {
        write(dir, "density.csv", &primary.to_csv())?;
    }
    if r.formats.contains(&Format::Json) {
        let mut diagnostics = serde_json::Map::new();
        for est in std::iter::once(&primary).chain(other.as_ref()) {
            diagnostics.insert(
                serde_json::to_value(est.method()).unwrap().as_str().unwrap().to_string(),
                serde_json::to_value(est.diagnostics()).unwrap(),
            );
        }
        write_json(
            dir,
            "run.json",
            &json!({
                "config": resolved_config(cfg, &r),
                "fingerprint": primary.fingerprint(),
                "method": primary.method(),
                "gamma": primary.gamma(),
                "diagnostics": diagnostics,
            }),
        )?;
        if let Some(picard) = &other {
            let diff = primary.sup_difference(picard)?;
            write_json(
                dir,
                "method_diff.json",
                &json!({
                    "sup_difference": diff,
                    "nodes": primary.times().len(),
                    "windows": picard.diagnostics().windows.len(),
                    "max_contraction": picard.diagnostics().windows.iter().map(|w| w.max_ratio).fold(0.0, f64::max),
                }),
            )?;
        }
    }
    eprintln!(
        "solved {} nodes ({:?}), F(T) = {:.6}",
        primary.times().len(),
        primary.method(),
        primary.cdf_values().last().unwrap()
    );
    Ok(())
}

/// The density stored in the output directory, if any, bound to this case.
/// A `run.json` written for another boundary or source is a mismatch.
fn stored_density(r: &Resolved) -> Outcome<Option<DensityEstimate>> {
    let path = r.directory.join("density.csv");
    if !path.exists() {
        return Ok(None);
    }
    let expected = fingerprint(&r.curve, &r.source);
    let run = r.directory.join("run.json");
    if run.exists() {
        let text = std::fs::read_to_string(&run).context("cannot read run.json").map_err(Failure::config)?;
        let doc: serde_json::Value =
            serde_json::from_str(&text).context("run.json is not valid JSON").map_err(Failure::config)?;
        if let Some(fp) = doc["fingerprint"].as_str() {
            if fp != expected {
                return Err(Failure::mismatch(anyhow!(
                    "{} was computed for another boundary/source (fingerprint {fp}, expected {expected})",
                    path.display()
                )));
            }
        }
    }
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::config)?;
    let est = DensityEstimate::from_csv_str(&text, r.curve.gamma())
        .with_context(|| format!("cannot parse {}", path.display()))
        .map_err(Failure::config)?;
    Ok(Some(est.bind(&r.curve, &r.source)))
}

fn density_for(r: &Resolved) -> Outcome<DensityEstimate> {
    match stored_density(r)? {
        Some(est) => Ok(est),
        None => Ok(solve_marching(&r.source, &r.curve, &r.grid)?),
    }
}

pub fn simulate(cfg: &RunConfig) -> Outcome {
    let defaults = RunConfig {
        mc: Some(McSection {
            n_paths: Some(DEFAULT_PATHS),
            dt: Some(DEFAULT_DT),
            seed: Some(0),
            ..Default::default()
        }),
        ..Default::default()
    };
    let cfg = defaults.overlay(cfg.clone());
    let r = resolve(&cfg)?;
    let mc = r.mc.clone().expect("simulate always has an mc section");
    let run = run_paths(&r.source, &r.curve, &mc)?;
    let dir = &r.directory;
    write(dir, "hits.csv", &run.hits_csv())?;
    let mut summary = run.summary();
    summary["fingerprint"] = json!(fingerprint(&r.curve, &r.source));
    write_json(dir, "mc.json", &summary)?;
    if let Some(est) = stored_density(&r)? {
        let d = ks_distance(&run, &est)?;
        write_json(
            dir,
            "ks.json",
            &json!({ "ks_distance": d, "n_paths": mc.n_paths, "dt": mc.dt, "T": mc.horizon, "nodes": est.times().len() }),
        )?;
        eprintln!("KS distance to density.csv: {d:.6}");
    }
    eprintln!("{} of {} paths hit by T = {}", run.hit_times().len(), mc.n_paths, mc.horizon);
    Ok(())
}

/// Probe times at fixed fractions of the horizon, skipping the first grid cells.
fn probe_times(r: &Resolved, fractions: &[f64]) -> Vec<f64> {
    let horizon = r.grid.horizon();
    let floor = r.grid.nodes()[5.min(r.grid.intervals())];
    fractions.iter().map(|f| f * horizon).filter(|&t| t >= floor).collect()
}

fn point_r0(src: &SourceSpec, suite: &str) -> Outcome<f64> {
    match src {
        SourceSpec::Point { r0 } => Ok(*r0),
        SourceSpec::Smeared { .. } => Err(Failure::config(anyhow!("suite `{suite}` needs a point source"))),
    }
}

fn heat_probes(r: &Resolved, step: f64) -> Vec<(f64, f64)> {
    let horizon = r.grid.horizon();
    let lo = horizon / 8.0;
    let hi = horizon - 2.0 * step;
    (0..20)
        .map(|i| {
            let t = lo + (hi - lo) * ((i * 7) % 20) as f64 / 19.0;
            let x = r.curve.eval(t).unwrap_or(0.0) - 0.2 - 1.8 * (i % 5) as f64 / 4.0;
            (x, t)
        })
        .collect()
}

fn run_suite(name: &str, r: &Resolved, est: &DensityEstimate) -> Outcome<ResidualReport> {
    let field = || GreenField::new(r.curve.clone(), r.source.clone(), est.clone());
    Ok(match name {
        "master" => {
            point_r0(&r.source, name)?;
            master_residual(est, &r.curve, &r.source, &[0.0, 0.5, 1.0], &probe_times(r, &[0.125, 0.25, 0.5, 1.0]))?
        }
        "heat" => {
            let step = (r.grid.horizon() / 400.0).min(1e-2);
            green_heat_residual(&field()?, &heat_probes(r, step), step, step)?
        }
        "mass" => mass_conservation(&field()?, &probe_times(r, &[0.25, 0.5, 1.0]))?,
        "jump" => jump_check(&field()?, &probe_times(r, &[0.125, 0.25, 0.5]))?,
        "delta" => {
            let r0 = point_r0(&r.source, name)?;
            let first = (r.curve.start() - r0).min(0.25);
            let widths: Vec<f64> = (0..4).map(|k| first / f64::powi(2.0, k)).collect();
            delta_convergence(&r.curve, r0, &widths, 0.25, &r.grid)?
        }
        _ => unreachable!("suite names are checked before running"),
    })
}

pub fn validate(cfg: &RunConfig, suite: &str) -> Outcome {
    let names: Vec<&str> = match suite {
        "all" => SUITES.to_vec(),
        s if SUITES.contains(&s) => vec![s],
        s => {
            return Err(Failure::config(anyhow!(
                "unknown suite `{s}`; expected one of {} or all",
                SUITES.join(", ")
            )))
        }
    };
    let r = resolve(cfg)?;
    let est = density_for(&r)?;
    let reports = names.iter().map(|n| run_suite(n, &r, &est)).collect::<Outcome<Vec<_>>>()?;
    let pass = reports.iter().all(|rep| rep.pass);
    for rep in &reports {
        eprintln!(
            "{:<7} {}  sup residual {:.3e} (tolerance {:.1e})",
            rep.name,
            if rep.pass { "PASS" } else { "FAIL" },
            rep.sup_residual,
            rep.tolerance
        );
    }
    let doc = json!({
        "suite": suite,
        "pass": pass,
        "fingerprint": est.fingerprint(),
        "density_method": est.method(),
        "reports": reports,
    });
    write_json(&r.directory, "validation.json", &doc)?;
    println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    if pass {
        Ok(())
    } else {
        let failed: Vec<&str> = reports.iter().filter(|rep| !rep.pass).map(|rep| rep.name.as_str()).collect();
        Err(Failure { code: 5, error: anyhow!("validation failed: {}", failed.join(", ")) })
    }
}

fn lattice(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn green(cfg: &RunConfig, x: [f64; 2], t: [Option<f64>; 2], resolution: [usize; 2]) -> Outcome {
    let r = resolve(cfg)?;
    let horizon = r.grid.horizon();
    let [nx, nt] = resolution;
    let t_min = t[0].unwrap_or(horizon / nt.max(1) as f64);
    let t_max = t[1].unwrap_or(horizon);
    let bad = |msg: String| Err(Failure::config(anyhow!(msg)));
    if nx == 0 || nt == 0 {
        return bad("lattice resolution must be at least 1".into());
    }
    if !(t_min > 0.0) {
        return bad(format!("t range must start above 0 (the Green function is defined for t > 0), got {t_min}"));
    }
    if !(t_max <= horizon) || t_min > t_max {
        return bad(format!("t range [{t_min}, {t_max}] must lie inside (0, T = {horizon}]"));
    }
    if !(x[0].is_finite() && x[1].is_finite() && x[0] <= x[1]) {
        return bad(format!("invalid x range [{}, {}]", x[0], x[1]));
    }
    let field = GreenField::new(r.curve.clone(), r.source.clone(), density_for(&r)?)?;
    let xs = lattice(x[0], x[1], nx);
    let points: Vec<(f64, f64)> =
        lattice(t_min, t_max, nt).into_iter().flat_map(|t| xs.iter().map(move |&x| (x, t))).collect();
    let values = points
        .par_iter()
        .map(|&(x, t)| field.green_eval(x, t))
        .collect::<Result<Vec<f64>, Error>>()?;
    let mut out = String::from("x,t,G\n");
    for ((x, t), g) in points.iter().zip(&values) {
        out.push_str(&format!("{x:.16e},{t:.16e},{g:.16e}\n"));
    }
    write(&r.directory, "green.csv", &out)?;
    eprintln!("wrote {} lattice points", values.len());
    Ok(())
}
