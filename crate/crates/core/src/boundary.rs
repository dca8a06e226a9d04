//! Moving boundaries `t ↦ X_t` together with their declared Hölder exponent.

use serde::Serialize;

use crate::{Error, Result};

const HOLDER_SAFETY: f64 = 1.25;
const MAX_HOLDER_LEVELS: u32 = 24;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CurveKind {
    Constant { a: f64 },
    Linear { a: f64, b: f64 },
    /// `a + b t^theta`
    Power { a: f64, b: f64, theta: f64 },
    /// Piecewise-linear interpolation of knots starting at `t = 0`.
    Sampled { times: Vec<f64>, values: Vec<f64> },
}

/// A boundary curve with its declared Hölder exponent `gamma ∈ (1/2, 1]`.
///
/// Values are immutable once built; all constructors validate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryCurve {
    #[serde(flatten)]
    kind: CurveKind,
    gamma: f64,
    #[serde(skip_serializing_if = "is_unbounded")]
    horizon: f64,
}

/// Local Hölder constant `m` of a curve on `interval`, such that
/// `|X_t2 - X_t1| ≤ m |t2 - t1|^gamma` there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderEstimate {
    pub gamma: f64,
    pub m: f64,
    pub interval: [f64; 2],
}

fn is_unbounded(h: &f64) -> bool {
    h.is_infinite()
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.5 && gamma <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "Hölder exponent gamma must satisfy 1/2 < gamma <= 1, got {gamma}"
        )))
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {v}")))
    }
}

impl BoundaryCurve {
    pub fn constant(a: f64) -> Result<Self> {
        check_finite("a", a)?;
        Ok(Self {
            kind: CurveKind::Constant { a },
            gamma: 1.0,
            horizon: f64::INFINITY,
        })
    }

    pub fn linear(a: f64, b: f64) -> Result<Self> {
        check_finite("a", a)?;
        check_finite("b", b)?;
        Ok(Self {
            kind: CurveKind::Linear { a, b },
            gamma: 1.0,
            horizon: f64::INFINITY,
        })
    }

    /// `a + b t^theta`; the declared exponent defaults to `theta`.
    pub fn power(a: f64, b: f64, theta: f64) -> Result<Self> {
        check_finite("a", a)?;
        check_finite("b", b)?;
        if !(theta > 0.5 && theta <= 1.0) {
            return Err(Error::invalid(format!(
                "power boundary needs 1/2 < theta <= 1, got {theta}"
            )));
        }
        Ok(Self {
            kind: CurveKind::Power { a, b, theta },
            gamma: theta,
            horizon: f64::INFINITY,
        })
    }

    pub fn sampled(times: Vec<f64>, values: Vec<f64>, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if times.len() != values.len() {
            return Err(Error::invalid("sampled boundary: times and values differ in length"));
        }
        if times.len() < 2 {
            return Err(Error::invalid("sampled boundary needs at least two knots"));
        }
        if times[0] != 0.0 {
            return Err(Error::invalid(format!(
                "sampled boundary must start at t = 0, got {}",
                times[0]
            )));
        }
        for (i, (&t, &x)) in times.iter().zip(&values).enumerate() {
            check_finite("knot time", t)?;
            check_finite("knot value", x)?;
            if i > 0 && t <= times[i - 1] {
                return Err(Error::invalid(format!(
                    "sampled boundary knots must be strictly increasing (knot {i})"
                )));
            }
        }
        let horizon = *times.last().unwrap();
        Ok(Self {
            kind: CurveKind::Sampled { times, values },
            gamma,
            horizon,
        })
    }

    /// Parse a two-column `t,x` CSV with a mandatory header row.
    pub fn from_csv_str(text: &str, gamma: f64) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
            .clone();
        if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "x" {
            return Err(Error::Parse {
                line: 1,
                msg: "expected header row `t,x`".into(),
            });
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
            if record.len() != 2 {
                return Err(Error::Parse { line, msg: "expected two columns".into() });
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse { line, msg: format!("{s:?}: {e}") })
            };
            times.push(parse(&record[0])?);
            values.push(parse(&record[1])?);
        }
        Self::sampled(times, values, gamma)
    }

    /// Replace the declared Hölder exponent.
    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        if let CurveKind::Power { theta, .. } = self.kind {
            if gamma > theta {
                return Err(Error::invalid(format!(
                    "declared gamma {gamma} exceeds the power-curve exponent {theta}"
                )));
            }
        }
        self.gamma = gamma;
        Ok(self)
    }

    /// Restrict the curve to `[0, horizon]`.
    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) || horizon > self.horizon {
            return Err(Error::invalid(format!(
                "horizon {horizon} must lie in (0, {}]",
                self.horizon
            )));
        }
        self.horizon = horizon;
        Ok(self)
    }

    /// The same curve moved up by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        let kind = match &self.kind {
            CurveKind::Constant { a } => CurveKind::Constant { a: a + c },
            CurveKind::Linear { a, b } => CurveKind::Linear { a: a + c, b: *b },
            CurveKind::Power { a, b, theta } => CurveKind::Power { a: a + c, b: *b, theta: *theta },
            CurveKind::Sampled { times, values } => CurveKind::Sampled {
                times: times.clone(),
                values: values.iter().map(|v| v + c).collect(),
            },
        };
        Self { kind, ..self.clone() }
    }

    pub fn kind(&self) -> &CurveKind {
        &self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `X_0`.
    pub fn start(&self) -> f64 {
        self.at(0.0)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if t >= 0.0 && t <= self.horizon {
            Ok(self.at(t))
        } else {
            Err(Error::domain(format!(
                "boundary evaluated at t = {t} outside [0, {}]",
                self.horizon
            )))
        }
    }

    /// Unchecked evaluation for hot loops; callers guarantee `0 <= t <= horizon`.
    #[inline]
    pub(crate) fn at(&self, t: f64) -> f64 {
        match &self.kind {
            CurveKind::Constant { a } => *a,
            CurveKind::Linear { a, b } => a + b * t,
            CurveKind::Power { a, b, theta } => a + b * t.powf(*theta),
            CurveKind::Sampled { times, values } => {
                let k = times.partition_point(|&s| s <= t);
                if k == 0 {
                    return values[0];
                }
                if k == times.len() {
                    return values[k - 1];
                }
                let (t0, t1) = (times[k - 1], times[k]);
                let w = (t - t0) / (t1 - t0);
                values[k - 1] + w * (values[k] - values[k - 1])
            }
        }
    }

    /// Dyadic scan of the Hölder difference quotient over `interval`,
    /// inflated by a fixed safety factor.
    pub fn estimate_holder(&self, interval: [f64; 2], levels: u32) -> Result<HolderEstimate> {
        let [lo, hi] = interval;
        if !(hi > lo) {
            return Err(Error::domain(format!("empty interval [{lo}, {hi}]")));
        }
        if lo < 0.0 || hi > self.horizon {
            return Err(Error::domain(format!(
                "interval [{lo}, {hi}] outside [0, {}]",
                self.horizon
            )));
        }
        if levels == 0 || levels > MAX_HOLDER_LEVELS {
            return Err(Error::domain(format!(
                "levels must lie in 1..={MAX_HOLDER_LEVELS}, got {levels}"
            )));
        }
        let n = 1usize << levels;
        let len = hi - lo;
        let values: Vec<f64> = (0..=n)
            .map(|i| self.at(if i == n { hi } else { lo + len * i as f64 / n as f64 }))
            .collect();
        let mut m: f64 = 0.0;
        for k in 0..=levels {
            let stride = n >> k;
            let dt = len / (1usize << k) as f64;
            let denom = dt.powf(self.gamma);
            for i in 0..=(n - stride) {
                m = m.max((values[i + stride] - values[i]).abs() / denom);
            }
        }
        Ok(HolderEstimate {
            gamma: self.gamma,
            m: HOLDER_SAFETY * m,
            interval,
        })
    }
}
