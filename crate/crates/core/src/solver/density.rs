use std::fmt::Write as _;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{SourceSpec, TimeGrid};
use crate::boundary::BoundaryCurve;
use crate::{Error, Result};

/// Tolerated negative excursion of a density value (quadrature noise).
pub const NEGATIVE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Marching,
    Picard,
    /// Values supplied by the caller, e.g. a closed form.
    Reference,
    /// Read back from a density file.
    Imported,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowReport {
    pub start: f64,
    pub end: f64,
    pub nodes: usize,
    pub iterations: usize,
    /// Largest observed `|q_{k+1} - q_k| / |q_k - q_{k-1}|`.
    pub max_ratio: f64,
    /// A-priori contraction bound `C1 L^(gamma - 1/2)` for this window.
    pub bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_diagonal: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holder_m: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub windows: Vec<WindowReport>,
}

/// Nodal values of a first-passage density with its trapezoidal CDF.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityEstimate {
    grid: TimeGrid,
    t: Vec<f64>,
    p: Vec<f64>,
    #[serde(rename = "F")]
    cdf: Vec<f64>,
    method: Method,
    gamma: f64,
    diagnostics: Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    fingerprint: Option<String>,
}

/// Content hash identifying a (boundary, source) pair.
pub fn fingerprint(curve: &BoundaryCurve, src: &SourceSpec) -> String {
    // Debug formatting of f64 round-trips exactly
    let digest = Sha256::digest(format!("{curve:?}|{src:?}").as_bytes());
    digest.iter().take(16).fold(String::with_capacity(32), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn trapezoid_cdf(nodes: &[f64], p: &[f64]) -> Vec<f64> {
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    cdf.push(0.0);
    for i in 1..p.len() {
        acc += (0.5 * (p[i - 1] + p[i]) * (nodes[i] - nodes[i - 1])).max(0.0);
        cdf.push(acc);
    }
    cdf
}

impl DensityEstimate {
    /// Wrap nodal values; the CDF is accumulated by the trapezoid rule.
    pub fn from_values(grid: TimeGrid, p: Vec<f64>, method: Method, gamma: f64) -> Result<Self> {
        if p.len() != grid.nodes().len() {
            return Err(Error::invalid(format!(
                "{} density values for {} grid nodes",
                p.len(),
                grid.nodes().len()
            )));
        }
        if let Some(i) = p.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("density value at node {i} is not finite")));
        }
        let cdf = trapezoid_cdf(grid.nodes(), &p);
        Ok(Self {
            t: grid.nodes().to_vec(),
            grid,
            p,
            cdf,
            method,
            gamma,
            diagnostics: Diagnostics::default(),
            fingerprint: None,
        })
    }

    pub(crate) fn with_diagnostics(mut self, diagnostics: Diagnostics) -> Self {
        self.diagnostics = diagnostics;
        self
    }

    /// Tag the estimate as belonging to `(curve, src)`.
    pub fn bind(mut self, curve: &BoundaryCurve, src: &SourceSpec) -> Self {
        self.fingerprint = Some(fingerprint(curve, src));
        self
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    pub fn fingerprint(&self) -> Option<&str> {
        self.fingerprint.as_deref()
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    /// Piecewise-linear interpolant of the nodal density, for `0 <= t <= T`.
    pub(crate) fn density_at(&self, t: f64) -> f64 {
        let nodes = self.grid.nodes();
        let k = self.grid.locate(t);
        let w = (t - nodes[k]) / (nodes[k + 1] - nodes[k]);
        self.p[k] + w * (self.p[k + 1] - self.p[k])
    }

    pub fn density(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.density_at(t))
    }

    /// `P(τ <= t)` by linear interpolation of the accumulated CDF, clamped to `[0, 1]`.
    pub fn cdf_at(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let nodes = self.grid.nodes();
        let k = self.grid.locate(t);
        let w = (t - nodes[k]) / (nodes[k + 1] - nodes[k]);
        Ok((self.cdf[k] + w * (self.cdf[k + 1] - self.cdf[k])).clamp(0.0, 1.0))
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t >= 0.0 && t <= self.horizon() {
            Ok(())
        } else {
            Err(Error::domain(format!("t = {t} outside [0, {}]", self.horizon())))
        }
    }

    /// Largest `|p_i - other_i|` over shared nodes.
    pub fn sup_difference(&self, other: &DensityEstimate) -> Result<f64> {
        if self.times() != other.times() {
            return Err(Error::Mismatch("density estimates live on different grids".into()));
        }
        Ok(self
            .p
            .iter()
            .zip(&other.p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// CSV with header `t,p,F`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * self.p.len());
        out.push_str("t,p,F\n");
        for ((t, p), f) in self.times().iter().zip(&self.p).zip(&self.cdf) {
            let _ = writeln!(out, "{t:.16e},{p:.16e},{f:.16e}");
        }
        out
    }

    /// Parse a `t,p,F` file. The result is unbound; see [`DensityEstimate::bind`].
    pub fn from_csv_str(text: &str, gamma: f64) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "p", "F"] {
            return Err(Error::Parse { line: 1, msg: "expected header row `t,p,F`".into() });
        }
        let (mut t, mut p, mut cdf) = (Vec::new(), Vec::new(), Vec::new());
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
            if record.len() != 3 {
                return Err(Error::Parse { line, msg: "expected three columns".into() });
            }
            let mut cols = [0.0; 3];
            for (c, field) in cols.iter_mut().zip(record.iter()) {
                *c = field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse { line, msg: format!("bad number {field:?}") })?;
            }
            t.push(cols[0]);
            p.push(cols[1]);
            cdf.push(cols[2]);
        }
        let grid = TimeGrid::from_nodes(t.clone())?;
        Ok(Self {
            t,
            grid,
            p,
            cdf,
            method: Method::Imported,
            gamma,
            diagnostics: Diagnostics::default(),
            fingerprint: None,
        })
    }

    /// JSON document with grid metadata, method, gamma, diagnostics and columns.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("density estimate serializes")
    }
}
