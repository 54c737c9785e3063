//! Run diagnostics: data discrepancy, reconstruction error, and the
//! cumulative acceptance count with its fitted slope.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BoundaryVector, ConductivityField};

/// Unweighted `sum (d - d_state)^2`.
pub fn delta_at(d: &BoundaryVector, d_state: &BoundaryVector) -> Result<f64> {
    if d.len() != d_state.len() {
        return Err(Error::DimensionMismatch { expected: format!("{} values", d.len()), got: format!("{}", d_state.len()) });
    }
    Ok(d.as_slice().iter().zip(d_state.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// `sum (K_correct - K_n)^2` over all cells.
pub fn beta_at(k_correct: &ConductivityField, k_n: &ConductivityField) -> Result<f64> {
    if k_correct.shape() != k_n.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", k_correct.shape()),
            got: format!("{:?}", k_n.shape()),
        });
    }
    Ok(k_correct
        .field()
        .as_slice()
        .iter()
        .zip(k_n.field().as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Least-squares slope of `gamma[i]` against `i`.
pub fn gamma_slope(gamma: &[u64]) -> Result<f64> {
    let n = gamma.len();
    if n < 2 {
        return Err(Error::SeriesTooShort { need: 2, got: n });
    }
    let x_mean = (n - 1) as f64 / 2.0;
    let y_mean = gamma.iter().map(|&g| g as f64).sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &g) in gamma.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (g as f64 - y_mean);
        sxx += dx * dx;
    }
    Ok(sxy / sxx)
}

/// Recorded diagnostic series of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub iteration: Vec<u64>,
    pub delta: Vec<f64>,
    /// Empty unless a ground-truth field was supplied.
    pub beta: Vec<f64>,
    pub gamma: Vec<u64>,
}

impl MetricSeries {
    pub fn push(&mut self, iteration: u64, delta: f64, beta: Option<f64>, gamma: u64) {
        self.iteration.push(iteration);
        self.delta.push(delta);
        if let Some(b) = beta {
            self.beta.push(b);
        }
        self.gamma.push(gamma);
    }

    pub fn len(&self) -> usize {
        self.iteration.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iteration.is_empty()
    }
}
