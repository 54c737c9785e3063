//! Normalization weights `(z0, z1, z2, z3)` for the combined acceptance rule,
//! and the restricted interval for the uniform accept draw.
//!
//! Schemes:
//! - `none`: all weights 1.
//! - `z1`: inertia between the current magnitude and the running maximum
//!   over the whole run (global memory, so the chain is no longer Markov).
//! - `z2`: inertia between the current and the previous iteration's values.
//! - `hybrid`: like `z2`, but the `(1 - w)` term of each `z_i` uses the
//!   magnitudes from the most recent accepted step.
//!
//! The first evaluated step has no memory and always uses `none`; its values
//! seed the state.

use serde::{Deserialize, Serialize};

use crate::acceptance::{alpha_h, DiffTerms, Sensitivities};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    None,
    Z1,
    #[default]
    Z2,
    Hybrid,
}

impl Scheme {
    pub const NAMES: [&'static str; 4] = ["none", "z1", "z2", "hybrid"];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::None => "none",
            Scheme::Z1 => "z1",
            Scheme::Z2 => "z2",
            Scheme::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalizerConfig {
    pub scheme: Scheme,
    /// Weight on the current `alpha_h` in `z0`.
    pub w0: f64,
    /// Weight on the current `|D_i|` in `z_i`.
    pub w: f64,
    pub cutoff: f64,
    pub zeta: f64,
    pub eps: f64,
    /// Draw `u` from the restricted interval. Unset means on for `z1`, off otherwise.
    pub restricted_interval: Option<bool>,
}

impl Default for NormalizerConfig {
    fn default() -> Self {
        Self { scheme: Scheme::Z2, w0: 0.1, w: 0.75, cutoff: 1.5, zeta: 0.01, eps: 1e-12, restricted_interval: None }
    }
}

impl NormalizerConfig {
    pub fn for_scheme(scheme: Scheme) -> Self {
        Self { scheme, ..Self::default() }
    }

    pub fn restricted(&self) -> bool {
        self.restricted_interval.unwrap_or(self.scheme == Scheme::Z1)
    }

    /// Fills in scheme-dependent defaults.
    pub fn resolved(mut self) -> Self {
        self.restricted_interval = Some(self.restricted());
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("w0", self.w0), ("w", self.w)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("normalizer.{key}"), format!("must lie in [0, 1], got {v}")));
            }
        }
        if !(self.cutoff > 0.0) {
            return Err(Error::config("normalizer.cutoff", format!("must be > 0, got {}", self.cutoff)));
        }
        if !(self.zeta >= 0.0 && self.zeta.is_finite()) {
            return Err(Error::config("normalizer.zeta", format!("must be >= 0, got {}", self.zeta)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::config("normalizer.eps", format!("must be > 0, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Weights for one evaluation, plus the `alpha_h` they imply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizerOutput {
    pub z0: f64,
    pub z: [f64; 3],
    pub alpha_h: f64,
}

impl NormalizerOutput {
    pub fn identity() -> Self {
        Self { z0: 1.0, z: [1.0; 3], alpha_h: f64::NAN }
    }
}

/// Per-chain normalization memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct NormalizerState {
    /// False until the first evaluated step has seeded the memory.
    pub seeded: bool,
    pub alpha_h_prev: f64,
    pub alpha_h_max: f64,
    pub d_prev: [f64; 3],
    pub d_max: [f64; 3],
    pub d_last_accepted: [f64; 3],
    /// Extremes of every emitted acceptance value, for the restricted interval.
    pub alpha_history_min: Option<f64>,
    pub alpha_history_max: Option<f64>,
}

fn inertia(w: f64, current: f64, remembered: f64, eps: f64) -> f64 {
    w / current.max(eps) + (1.0 - w) / remembered.max(eps)
}

impl NormalizerState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Weights for the terms `t` given the memory so far.
    pub fn z_terms(&self, t: &DiffTerms, s: &Sensitivities, cfg: &NormalizerConfig) -> NormalizerOutput {
        let scheme = if self.seeded { cfg.scheme } else { Scheme::None };
        let mag = t.as_array().map(f64::abs);
        let (z, remembered_alpha) = match scheme {
            Scheme::None => {
                let z = [1.0; 3];
                return NormalizerOutput { z0: 1.0, z, alpha_h: alpha_h(t, &z, s) };
            }
            Scheme::Z1 => {
                let z = std::array::from_fn(|i| inertia(cfg.w, mag[i], self.d_max[i].max(mag[i]), cfg.eps));
                (z, None)
            }
            Scheme::Z2 => {
                let z = std::array::from_fn(|i| inertia(cfg.w, mag[i], self.d_prev[i], cfg.eps));
                (z, Some(self.alpha_h_prev))
            }
            Scheme::Hybrid => {
                let z = std::array::from_fn(|i| inertia(cfg.w, mag[i], self.d_last_accepted[i], cfg.eps));
                (z, Some(self.alpha_h_prev))
            }
        };
        let ah = alpha_h(t, &z, s);
        // alpha_h > 0 is guaranteed by the exponent clamp, so no floor is
        // applied to it; flooring would break z0 * alpha_h in [w0, 1] under z1.
        let remembered = remembered_alpha.unwrap_or_else(|| self.alpha_h_max.max(ah));
        let z0 = cfg.w0 / ah + (1.0 - cfg.w0) / remembered;
        NormalizerOutput { z0, z, alpha_h: ah }
    }

    /// Folds one evaluated step into the memory.
    pub fn update(&mut self, alpha_h: f64, t: &DiffTerms, accepted: bool, alpha: f64, cfg: &NormalizerConfig) {
        let mag = t.as_array().map(|v| v.abs().max(cfg.eps));
        if !self.seeded {
            self.seeded = true;
            self.alpha_h_prev = alpha_h;
            self.alpha_h_max = alpha_h;
            self.d_prev = mag;
            self.d_max = mag;
            self.d_last_accepted = mag;
        } else {
            self.alpha_h_prev = alpha_h;
            self.alpha_h_max = self.alpha_h_max.max(alpha_h);
            self.d_prev = mag;
            for (m, v) in self.d_max.iter_mut().zip(mag) {
                *m = m.max(v);
            }
            if accepted {
                self.d_last_accepted = mag;
            }
        }
        self.record_alpha(alpha);
    }

    /// Adds an emitted acceptance value to the restricted-interval history.
    pub fn record_alpha(&mut self, alpha: f64) {
        self.alpha_history_min = Some(self.alpha_history_min.map_or(alpha, |v| v.min(alpha)));
        self.alpha_history_max = Some(self.alpha_history_max.map_or(alpha, |v| v.max(alpha)));
    }

    pub fn updated(mut self, alpha_h: f64, t: &DiffTerms, accepted: bool, alpha: f64, cfg: &NormalizerConfig) -> Self {
        self.update(alpha_h, t, accepted, alpha, cfg);
        self
    }

    /// Interval for the uniform accept draw: `(0, 1)` before any value has been
    /// emitted, then `(min alpha - zeta, max alpha + zeta)`, widened by `eps`
    /// on each side if that collapses.
    pub fn restricted_bounds(&self, cfg: &NormalizerConfig) -> (f64, f64) {
        match (self.alpha_history_min, self.alpha_history_max) {
            (Some(lo), Some(hi)) => {
                let (u_min, u_max) = (lo - cfg.zeta, hi + cfg.zeta);
                if u_min < u_max {
                    (u_min, u_max)
                } else {
                    let mid = 0.5 * (lo + hi);
                    (mid - cfg.eps, mid + cfg.eps)
                }
            }
            _ => (0.0, 1.0),
        }
    }

    /// The part of the memory a Markov chain may legitimately carry: the
    /// previous step's values and the last accepted magnitudes. Running
    /// maxima and the emitted-alpha history collapse to the previous step.
    pub fn markov_snapshot(&self) -> Self {
        let mut out = self.clone();
        out.alpha_h_max = self.alpha_h_prev;
        out.d_max = self.d_prev;
        out.alpha_history_min = None;
        out.alpha_history_max = None;
        out
    }
}
