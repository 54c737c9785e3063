use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mesh geometry and the physical constants of the fin.
///
/// Lengths are in cm, `h_conv` in W/(cm^2 C), `power` in W. The CPU is
/// attached along the left edge from `y = 0` up to `cpu_segment_fraction * ly`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Node count along y (rows).
    pub n: usize,
    /// Node count along x (columns).
    pub m: usize,
    pub lx: f64,
    pub ly: f64,
    pub h_conv: f64,
    pub thickness: f64,
    pub power: f64,
    pub cpu_segment_fraction: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n: 20,
            m: 20,
            lx: 2.0,
            ly: 2.0,
            h_conv: 0.005,
            thickness: 0.1,
            power: 5.0,
            cpu_segment_fraction: 0.5,
        }
    }
}

impl GridSpec {
    pub fn with_size(n: usize, m: usize) -> Self {
        Self { n, m, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGrid(msg));
        if self.n < 3 || self.m < 3 {
            return bad(format!("mesh must be at least 3x3, got {}x{}", self.n, self.m));
        }
        if !(self.lx > 0.0 && self.lx.is_finite()) || !(self.ly > 0.0 && self.ly.is_finite()) {
            return bad(format!("side lengths must be positive, got lx={} ly={}", self.lx, self.ly));
        }
        if !(self.h_conv >= 0.0 && self.h_conv.is_finite()) {
            return bad(format!("h_conv must be >= 0, got {}", self.h_conv));
        }
        if !(self.thickness > 0.0 && self.thickness.is_finite()) {
            return bad(format!("thickness must be > 0, got {}", self.thickness));
        }
        if !(self.power >= 0.0 && self.power.is_finite()) {
            return bad(format!("power must be >= 0, got {}", self.power));
        }
        if !(0.0..=0.5).contains(&self.cpu_segment_fraction) {
            return bad(format!(
                "cpu_segment_fraction must lie in [0, 0.5], got {}",
                self.cpu_segment_fraction
            ));
        }
        if self.power > 0.0 && self.cpu_segment_nodes() == 0 {
            return Err(Error::EmptyCpuSegment { power: self.power });
        }
        Ok(())
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        self.lx / (self.m - 1) as f64
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        self.ly / (self.n - 1) as f64
    }

    /// Number of left-edge nodes (rows `0..count`) that receive the CPU flux.
    pub fn cpu_segment_nodes(&self) -> usize {
        if self.cpu_segment_fraction <= 0.0 {
            return 0;
        }
        let top = self.cpu_segment_fraction * self.ly;
        let hy = self.hy();
        (0..self.n).take_while(|&i| i as f64 * hy <= top * (1.0 + 1e-12)).count()
    }

    #[inline]
    pub fn in_cpu_segment(&self, i: usize, j: usize) -> bool {
        j == 0 && i < self.cpu_segment_nodes()
    }

    /// Physical length of the CPU contact.
    pub fn cpu_segment_length(&self) -> f64 {
        self.cpu_segment_fraction * self.ly
    }

    /// Inward heat flux density through the CPU contact, `P / (length * thickness)`.
    pub fn inflow_flux(&self) -> f64 {
        let len = self.cpu_segment_length();
        if self.power == 0.0 || len == 0.0 {
            0.0
        } else {
            self.power / (len * self.thickness)
        }
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.n * self.m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_segment_is_lower_half_of_left_edge() {
        let g = GridSpec::default();
        g.validate().unwrap();
        // hy = 2/19, nodes with y <= 1.0 are i = 0..=9
        assert_eq!(g.cpu_segment_nodes(), 10);
        assert!(g.in_cpu_segment(9, 0));
        assert!(!g.in_cpu_segment(10, 0));
        assert!(!g.in_cpu_segment(0, 1));
        assert!((g.inflow_flux() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn odd_mesh_includes_midpoint() {
        let g = GridSpec::with_size(3, 3);
        assert_eq!(g.cpu_segment_nodes(), 2);
    }

    #[test]
    fn validation_errors() {
        assert!(GridSpec::with_size(2, 5).validate().is_err());
        let g = GridSpec { cpu_segment_fraction: 0.0, ..GridSpec::default() };
        assert!(matches!(g.validate(), Err(Error::EmptyCpuSegment { .. })));
        let g = GridSpec { cpu_segment_fraction: 0.0, power: 0.0, ..GridSpec::default() };
        g.validate().unwrap();
        let g = GridSpec { cpu_segment_fraction: 0.7, ..GridSpec::default() };
        assert!(g.validate().is_err());
    }
}
