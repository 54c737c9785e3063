//! Symmetric 2x2 block random-walk proposals.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ConductivityField, DEFAULT_K_MIN};

/// Shifts are truncated toward zero onto multiples of this value so that
/// `k + omega - omega == k` holds exactly for conductivities on the same
/// lattice with magnitude below 2^12.
pub const OMEGA_QUANTUM: f64 = 1.0 / (1u64 << 40) as f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProposalConfig {
    pub omega_max: f64,
    pub block_size: usize,
    pub k_min: f64,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        Self { omega_max: 0.005, block_size: 2, k_min: DEFAULT_K_MIN }
    }
}

impl ProposalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_max > 0.0 && self.omega_max.is_finite()) {
            return Err(Error::config("proposal.omega_max", format!("must be > 0, got {}", self.omega_max)));
        }
        if self.block_size != 2 {
            return Err(Error::config("proposal.block_size", format!("only 2 is supported, got {}", self.block_size)));
        }
        if !(self.k_min >= 0.0 && self.k_min.is_finite()) {
            return Err(Error::config("proposal.k_min", format!("must be >= 0, got {}", self.k_min)));
        }
        Ok(())
    }
}

/// Top-left corner `(row, col)` of the perturbed block.
pub type Anchor = (usize, usize);

#[derive(Debug, Clone)]
pub struct Proposal {
    pub anchor: Anchor,
    pub omega: f64,
    /// `None` when a perturbed cell would drop to or below `k_min`.
    pub candidate: Option<ConductivityField>,
}

/// Draws an anchor uniformly from the `(n-1) x (m-1)` block positions and a
/// shift `omega ~ U[-omega_max, omega_max]`, and adds `omega` to all four
/// cells of the block.
pub fn propose<R: Rng + ?Sized>(k: &ConductivityField, rng: &mut R, cfg: &ProposalConfig) -> Proposal {
    let (n, m) = k.shape();
    assert!(n >= 2 && m >= 2, "proposal needs at least a 2x2 mesh");
    let slot = rng.random_range(0..(n - 1) * (m - 1));
    let anchor = (slot / (m - 1), slot % (m - 1));
    let u: f64 = rng.random();
    let omega = quantize(cfg.omega_max * (2.0 * u - 1.0));
    let candidate = shift_block(k, anchor, omega, cfg.k_min);
    Proposal { anchor, omega, candidate }
}

fn quantize(omega: f64) -> f64 {
    (omega / OMEGA_QUANTUM).trunc() * OMEGA_QUANTUM
}

/// Returns `k` with `omega` added to the 2x2 block at `anchor`, or `None` if
/// the result violates the positivity floor.
pub fn shift_block(k: &ConductivityField, anchor: Anchor, omega: f64, k_min: f64) -> Option<ConductivityField> {
    let (r, c) = anchor;
    let mut out = k.clone();
    let f = out.field_mut();
    for (i, j) in [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)] {
        let v = f.get(i, j) + omega;
        if !(v > k_min) {
            return None;
        }
        f.set(i, j, v);
    }
    Some(out)
}
