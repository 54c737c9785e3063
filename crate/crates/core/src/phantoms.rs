//! Ground-truth conductivity fields for synthetic experiments.
//!
//! Relative coordinates are `x = j / (m - 1)` and `y = i / (n - 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ConductivityField, Field};

pub fn constant(value: f64, n: usize, m: usize) -> Result<ConductivityField> {
    ConductivityField::constant(n, m, value)
}

/// `base + gx * x + gy * y`.
pub fn tilted_plane(base: f64, gx: f64, gy: f64, n: usize, m: usize) -> Result<ConductivityField> {
    check_size(n, m)?;
    ConductivityField::new(Field::from_fn(n, m, |i, j| base + gx * rel(j, m) + gy * rel(i, n)))
}

/// `base - depth * exp(-((x - cx)^2 + (y - cy)^2) / (2 s^2))`.
pub fn gaussian_well(base: f64, depth: f64, cx: f64, cy: f64, s: f64, n: usize, m: usize) -> Result<ConductivityField> {
    check_size(n, m)?;
    if !(base - depth > 0.0) {
        return Err(Error::config("phantom", format!("base - depth must be > 0, got {base} - {depth}")));
    }
    if !(s > 0.0) {
        return Err(Error::config("phantom.width", format!("must be > 0, got {s}")));
    }
    ConductivityField::new(Field::from_fn(n, m, |i, j| {
        let (x, y) = (rel(j, m), rel(i, n));
        let r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        base - depth * (-r2 / (2.0 * s * s)).exp()
    }))
}

#[inline]
fn rel(index: usize, count: usize) -> f64 {
    index as f64 / (count - 1) as f64
}

fn check_size(n: usize, m: usize) -> Result<()> {
    if n < 2 || m < 2 {
        return Err(Error::InvalidGrid(format!("phantom needs at least 2x2, got {n}x{m}")));
    }
    Ok(())
}

/// A phantom and its parameters, as it appears in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhantomSpec {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    TiltedPlane {
        #[serde(default = "one")]
        base: f64,
        #[serde(default = "half")]
        gx: f64,
        #[serde(default = "half")]
        gy: f64,
    },
    GaussianWell {
        #[serde(default = "one")]
        base: f64,
        #[serde(default = "half")]
        depth: f64,
        #[serde(default = "half")]
        cx: f64,
        #[serde(default = "half")]
        cy: f64,
        #[serde(default = "default_width")]
        width: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn default_width() -> f64 {
    0.2
}

impl PhantomSpec {
    pub fn default_tilted_plane() -> Self {
        PhantomSpec::TiltedPlane { base: 1.0, gx: 0.5, gy: 0.5 }
    }

    pub fn default_gaussian_well() -> Self {
        PhantomSpec::GaussianWell { base: 1.0, depth: 0.5, cx: 0.5, cy: 0.5, width: 0.2 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PhantomSpec::Constant { .. } => "constant",
            PhantomSpec::TiltedPlane { .. } => "tilted_plane",
            PhantomSpec::GaussianWell { .. } => "gaussian_well",
        }
    }

    pub fn build(&self, n: usize, m: usize) -> Result<ConductivityField> {
        match *self {
            PhantomSpec::Constant { value } => constant(value, n, m),
            PhantomSpec::TiltedPlane { base, gx, gy } => tilted_plane(base, gx, gy, n, m),
            PhantomSpec::GaussianWell { base, depth, cx, cy, width } => gaussian_well(base, depth, cx, cy, width, n, m),
        }
    }
}
