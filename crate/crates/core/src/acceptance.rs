//! Data and prior difference terms, and the acceptance probabilities built
//! from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BoundaryVector, ConductivityField};
use crate::normalizers::NormalizerOutput;
use crate::priors::PriorValues;

/// Exponents are clamped to `[-MAX_EXPONENT, MAX_EXPONENT]` before `exp`, so
/// `alpha_h` is always finite and strictly positive.
pub const MAX_EXPONENT: f64 = 700.0;

/// Candidate-minus-current differences of the data misfit and both priors.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiffTerms {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl DiffTerms {
    #[inline]
    pub fn as_array(&self) -> [f64; 3] {
        [self.d1, self.d2, self.d3]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sensitivities {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Noise scale of the Gaussian likelihood.
    pub sigma: f64,
    /// Permit `lambda1 <= lambda2` or `lambda1 <= lambda3` (logged as a warning).
    pub allow_lambda_order_violation: bool,
}

impl Default for Sensitivities {
    fn default() -> Self {
        Self { lambda1: 0.5, lambda2: 0.15, lambda3: 0.45, sigma: 0.1, allow_lambda_order_violation: false }
    }
}

impl Sensitivities {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Self {
        Self { lambda1, lambda2, lambda3, ..Self::default() }
    }

    #[inline]
    pub fn lambdas(&self) -> [f64; 3] {
        [self.lambda1, self.lambda2, self.lambda3]
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in ["lambda1", "lambda2", "lambda3"].iter().zip(self.lambdas()) {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("sensitivities.{key}"), format!("must be >= 0, got {v}")));
            }
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("sensitivities.sigma", format!("must be > 0, got {}", self.sigma)));
        }
        let ordered = self.lambda1 > self.lambda2 && self.lambda1 > self.lambda3;
        if !ordered {
            let msg = format!(
                "lambda1 must exceed lambda2 and lambda3, got ({}, {}, {})",
                self.lambda1, self.lambda2, self.lambda3
            );
            if self.allow_lambda_order_violation {
                log::warn!("{msg}; continuing because allow_lambda_order_violation is set");
            } else {
                return Err(Error::config("sensitivities", format!("{msg} (set allow_lambda_order_violation to override)")));
            }
        }
        Ok(())
    }
}

/// `(1/sigma^2) * sum_k (d_k - d_sim_k)^2`.
pub fn misfit(d: &BoundaryVector, d_sim: &BoundaryVector, sigma: f64) -> Result<f64> {
    if d.len() != d_sim.len() {
        return Err(Error::DimensionMismatch { expected: format!("{} data values", d.len()), got: format!("{}", d_sim.len()) });
    }
    let ss: f64 = d.as_slice().iter().zip(d_sim.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(ss / (sigma * sigma))
}

/// Difference terms from already-evaluated misfits and prior values.
pub fn diff_terms_from_parts(
    misfit_cand: f64,
    misfit_curr: f64,
    prior_cand: &PriorValues,
    prior_curr: &PriorValues,
) -> DiffTerms {
    DiffTerms {
        d1: 0.5 * (misfit_cand - misfit_curr),
        d2: prior_cand.t_value - prior_curr.t_value,
        d3: prior_cand.m_value - prior_curr.m_value,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn diff_terms(
    d: &BoundaryVector,
    d_cand: &BoundaryVector,
    d_curr: &BoundaryVector,
    k_cand: &ConductivityField,
    k_curr: &ConductivityField,
    s: &Sensitivities,
    hx: f64,
    hy: f64,
) -> Result<DiffTerms> {
    if k_cand.shape() != k_curr.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", k_curr.shape()),
            got: format!("{:?}", k_cand.shape()),
        });
    }
    let f_cand = misfit(d, d_cand, s.sigma)?;
    let f_curr = misfit(d, d_curr, s.sigma)?;
    let p_cand = PriorValues::of(k_cand, hx, hy)?;
    let p_curr = PriorValues::of(k_curr, hx, hy)?;
    Ok(diff_terms_from_parts(f_cand, f_curr, &p_cand, &p_curr))
}

#[inline]
fn capped_exp(exponent: f64) -> f64 {
    exponent.clamp(-MAX_EXPONENT, MAX_EXPONENT).exp()
}

/// `min{1, exp(-d1)}`.
pub fn alpha_baseline(t: &DiffTerms) -> f64 {
    if t.d1 <= 0.0 {
        1.0
    } else {
        (-t.d1).exp()
    }
}

/// Better of the smoothness branch and the mixed-partial branch:
/// `max(min{1, e^(-l1 d1 - l2 d2)}, min{1, e^(-l1 d1 - l3 d3)})`.
pub fn alpha_dual(t: &DiffTerms, s: &Sensitivities) -> f64 {
    let smooth = -s.lambda1 * t.d1 - s.lambda2 * t.d2;
    let mixed = -s.lambda1 * t.d1 - s.lambda3 * t.d3;
    let best = smooth.max(mixed);
    if best >= 0.0 {
        1.0
    } else {
        best.exp()
    }
}

/// Unnormalized combined likelihood `alpha_h = exp(-sum_i l_i z_i d_i)`.
pub fn alpha_h(t: &DiffTerms, z: &[f64; 3], s: &Sensitivities) -> f64 {
    let exponent: f64 = s.lambdas().iter().zip(z).zip(t.as_array()).map(|((l, zi), d)| l * zi * d).sum();
    capped_exp(-exponent)
}

/// Normalized acceptance value and the `alpha_h` it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedAlpha {
    /// `min{cutoff, z0 * alpha_h}`.
    pub alpha: f64,
    /// `z0 * alpha_h` before the cutoff.
    pub scaled: f64,
    pub alpha_h: f64,
}

pub fn alpha_normalized(t: &DiffTerms, z: &NormalizerOutput, s: &Sensitivities, cutoff: f64) -> NormalizedAlpha {
    let ah = alpha_h(t, &z.z, s);
    let scaled = z.z0 * ah;
    let alpha = if scaled.is_nan() { cutoff } else { scaled.min(cutoff) };
    NormalizedAlpha { alpha, scaled, alpha_h: ah }
}
