use serde::Serialize;

use crate::{Error, Result};

/// Partition `0 = t_0 < t_1 < ... < t_N = T`, by default graded as
/// `t_i = T (i/N)^q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    #[serde(rename = "T")]
    horizon: f64,
    #[serde(rename = "N")]
    intervals: usize,
    /// `None` when the nodes were supplied explicitly.
    q: Option<f64>,
    #[serde(skip)]
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub const MIN_INTERVALS: usize = 8;

    pub fn graded(horizon: f64, intervals: usize, q: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("grid horizon T must be positive, got {horizon}")));
        }
        if intervals < Self::MIN_INTERVALS {
            return Err(Error::invalid(format!(
                "grid needs N >= {}, got {intervals}",
                Self::MIN_INTERVALS
            )));
        }
        if !(q >= 1.0 && q.is_finite()) {
            return Err(Error::invalid(format!("grading power q must be >= 1, got {q}")));
        }
        let n = intervals as f64;
        let mut nodes: Vec<f64> = (0..=intervals)
            .map(|i| horizon * (i as f64 / n).powf(q))
            .collect();
        nodes[intervals] = horizon;
        Ok(Self { horizon, intervals, q: Some(q), nodes })
    }

    /// Grid from explicit nodes, e.g. read back from a density file.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::invalid("grid needs at least two nodes"));
        }
        if nodes[0] != 0.0 {
            return Err(Error::invalid(format!("grid must start at t = 0, got {}", nodes[0])));
        }
        for (i, w) in nodes.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::invalid(format!(
                    "grid nodes must be finite and strictly increasing (node {})",
                    i + 1
                )));
            }
        }
        let horizon = *nodes.last().unwrap();
        Ok(Self { horizon, intervals: nodes.len() - 1, q: None, nodes })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn grading(&self) -> Option<f64> {
        self.q
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Index `k` of the cell `[t_k, t_{k+1}]` containing `t`, for `t` in `[0, T]`.
    pub(crate) fn locate(&self, t: f64) -> usize {
        let k = self.nodes.partition_point(|&s| s <= t);
        k.saturating_sub(1).min(self.intervals - 1)
    }
}
