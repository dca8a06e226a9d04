//! Declarative run configuration. Every section is optional at parse time
//! so that a config file and command-line flags can be layered; `resolve`
//! then checks all preconditions before anything is computed.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryCurve;
use crate::mc::McConfig;
use crate::solver::{SourceSpec, TimeGrid};
use crate::{Error, Result};

pub const DEFAULT_GRADING: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Constant,
    Linear,
    Power,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Point,
    Bump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    #[default]
    Marching,
    Picard,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<BoundaryKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<SourceKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub intervals: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bridge_correction: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<Format>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub boundary: BoundarySection,
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodChoice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// A configuration whose every precondition has been checked.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub curve: BoundaryCurve,
    pub source: SourceSpec,
    pub grid: TimeGrid,
    pub method: MethodChoice,
    pub mc: Option<McConfig>,
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

fn pick<T>(top: Option<T>, base: Option<T>) -> Option<T> {
    top.or(base)
}

fn need<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::invalid(format!("missing required setting `{key}`")))
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Settings present in `top` win over those in `self`.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        let b = top.boundary;
        let s = top.source;
        let g = top.grid;
        let o = top.output;
        let mc = match (self.mc, top.mc) {
            (None, None) => None,
            (base, top) => {
                let base = base.unwrap_or_default();
                let top = top.unwrap_or_default();
                Some(McSection {
                    n_paths: pick(top.n_paths, base.n_paths),
                    dt: pick(top.dt, base.dt),
                    horizon: pick(top.horizon, base.horizon),
                    seed: pick(top.seed, base.seed),
                    bridge_correction: pick(top.bridge_correction, base.bridge_correction),
                })
            }
        };
        RunConfig {
            boundary: BoundarySection {
                kind: pick(b.kind, self.boundary.kind),
                a: pick(b.a, self.boundary.a),
                b: pick(b.b, self.boundary.b),
                theta: pick(b.theta, self.boundary.theta),
                gamma: pick(b.gamma, self.boundary.gamma),
                csv_path: pick(b.csv_path, self.boundary.csv_path),
            },
            source: SourceSection {
                kind: pick(s.kind, self.source.kind),
                r0: pick(s.r0, self.source.r0),
                center: pick(s.center, self.source.center),
                width: pick(s.width, self.source.width),
            },
            grid: GridSection {
                horizon: pick(g.horizon, self.grid.horizon),
                intervals: pick(g.intervals, self.grid.intervals),
                q: pick(g.q, self.grid.q),
            },
            method: pick(top.method, self.method),
            mc,
            output: OutputSection {
                directory: pick(o.directory, self.output.directory),
                formats: pick(o.formats, self.output.formats),
            },
        }
    }

    /// Builds the curve; a CSV boundary is read through `load`.
    pub fn curve_with<L>(&self, load: L) -> Result<BoundaryCurve>
    where
        L: FnOnce(&std::path::Path) -> Result<String>,
    {
        let b = &self.boundary;
        let curve = match need(b.kind, "boundary.kind")? {
            BoundaryKind::Constant => BoundaryCurve::constant(need(b.a, "boundary.a")?)?,
            BoundaryKind::Linear => BoundaryCurve::linear(need(b.a, "boundary.a")?, need(b.b, "boundary.b")?)?,
            BoundaryKind::Power => BoundaryCurve::power(
                need(b.a, "boundary.a")?,
                need(b.b, "boundary.b")?,
                need(b.theta, "boundary.theta")?,
            )?,
            BoundaryKind::Csv => {
                let path = need(b.csv_path.as_deref(), "boundary.csv_path")?;
                let text = load(path)?;
                return BoundaryCurve::from_csv_str(&text, need(b.gamma, "boundary.gamma")?);
            }
        };
        match b.gamma {
            Some(g) => curve.with_gamma(g),
            None => Ok(curve),
        }
    }

    pub fn source_spec(&self) -> Result<SourceSpec> {
        let s = &self.source;
        match s.kind.unwrap_or(SourceKind::Point) {
            SourceKind::Point => SourceSpec::point(need(s.r0, "source.r0")?),
            SourceKind::Bump => SourceSpec::uniform_bump(need(s.center, "source.center")?, need(s.width, "source.width")?),
        }
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        let g = &self.grid;
        TimeGrid::graded(
            need(g.horizon, "grid.T")?,
            need(g.intervals, "grid.N")?,
            g.q.unwrap_or(DEFAULT_GRADING),
        )
    }

    /// Checks every precondition, reading a CSV boundary from disk.
    pub fn resolve(&self) -> Result<Resolved> {
        self.resolve_with(|p| {
            std::fs::read_to_string(p)
                .map_err(|e| Error::invalid(format!("cannot read boundary file {}: {e}", p.display())))
        })
    }

    pub fn resolve_with<L>(&self, load: L) -> Result<Resolved>
    where
        L: FnOnce(&std::path::Path) -> Result<String>,
    {
        let curve = self.curve_with(load)?;
        let source = self.source_spec()?;
        source.check_against(&curve)?;
        let grid = self.time_grid()?;
        if grid.horizon() > curve.horizon() {
            return Err(Error::invalid(format!(
                "grid horizon T = {} exceeds the boundary horizon {}",
                grid.horizon(),
                curve.horizon()
            )));
        }
        let mc = match &self.mc {
            None => None,
            Some(m) => {
                let cfg = McConfig {
                    n_paths: need(m.n_paths, "mc.n_paths")?,
                    dt: need(m.dt, "mc.dt")?,
                    horizon: m.horizon.unwrap_or(grid.horizon()),
                    seed: m.seed.unwrap_or(0),
                    bridge_correction: m.bridge_correction.unwrap_or(true),
                };
                cfg.validate()?;
                if cfg.horizon > curve.horizon() {
                    return Err(Error::invalid("mc horizon exceeds the boundary horizon"));
                }
                Some(cfg)
            }
        };
        let formats = self.output.formats.clone().unwrap_or_else(|| vec![Format::Csv, Format::Json]);
        if formats.is_empty() {
            return Err(Error::invalid("output.formats must not be empty"));
        }
        Ok(Resolved {
            curve,
            source,
            grid,
            method: self.method.unwrap_or_default(),
            mc,
            directory: self.output.directory.clone().unwrap_or_else(|| PathBuf::from(".")),
            formats,
        })
    }
}
