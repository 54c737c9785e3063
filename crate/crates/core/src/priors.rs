//! Smoothness functionals used as soft priors on the conductivity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ConductivityField, Field};

/// Roughness `T` and mixed-partial roughness `M` of one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorValues {
    pub t_value: f64,
    pub m_value: f64,
}

impl PriorValues {
    pub fn of(k: &ConductivityField, hx: f64, hy: f64) -> Result<Self> {
        Ok(Self { t_value: roughness(k.field()), m_value: mixed_roughness(k.field(), hx, hy)? })
    }
}

/// Sum of squared differences over all vertically and horizontally adjacent
/// pairs, in index space.
pub fn roughness(k: &Field) -> f64 {
    let (n, m) = k.shape();
    let v = k.as_slice();
    let mut sum = 0.0;
    for i in 0..n {
        let row = &v[i * m..(i + 1) * m];
        for j in 1..m {
            let d = row[j] - row[j - 1];
            sum += d * d;
        }
        if i > 0 {
            let above = &v[(i - 1) * m..i * m];
            for (a, b) in row.iter().zip(above) {
                let d = a - b;
                sum += d * d;
            }
        }
    }
    sum
}

/// Cross-difference estimate of `d2K/dxdy` at every node.
///
/// Interior nodes use the 4-point central stencil over `(4 hx hy)`. On the
/// boundary the missing neighbour index is replaced by the node itself, which
/// turns that direction into a one-sided difference with half the span. The
/// estimate is exact for bilinear fields everywhere.
pub fn mixed_partial(k: &Field, hx: f64, hy: f64) -> Result<Field> {
    let (n, m) = k.shape();
    if n < 3 || m < 3 {
        return Err(Error::InvalidGrid(format!("mixed partial needs at least 3x3, got {n}x{m}")));
    }
    Ok(Field::from_fn(n, m, |i, j| {
        let (im, ip) = (i.saturating_sub(1), (i + 1).min(n - 1));
        let (jm, jp) = (j.saturating_sub(1), (j + 1).min(m - 1));
        let span = (ip - im) as f64 * hy * (jp - jm) as f64 * hx;
        (k.get(ip, jp) - k.get(ip, jm) - k.get(im, jp) + k.get(im, jm)) / span
    }))
}

pub fn mixed_roughness(k: &Field, hx: f64, hy: f64) -> Result<f64> {
    Ok(roughness(&mixed_partial(k, hx, hy)?))
}
