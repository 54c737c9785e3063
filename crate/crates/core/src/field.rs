//! Dense row-major grids and the boundary data vector.
//!
//! Row `i` of a field is the mesh row at `y = i * hy`, so row 0 is the bottom
//! edge of the fin and column 0 is the left edge.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default positivity floor for conductivity values.
pub const DEFAULT_K_MIN: f64 = 1e-6;

/// A dense `rows x cols` grid of reals stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{rows}x{cols} = {} values", rows * cols),
                got: format!("{} values", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn check_shape(&self, rows: usize, cols: usize) -> Result<()> {
        if self.shape() != (rows, cols) {
            return Err(Error::DimensionMismatch {
                expected: format!("{rows}x{cols}"),
                got: format!("{}x{}", self.rows, self.cols),
            });
        }
        Ok(())
    }
}

/// Conductivity K on the mesh; every entry exceeds the positivity floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Field", into = "Field")]
pub struct ConductivityField(Field);

impl ConductivityField {
    pub fn new(field: Field) -> Result<Self> {
        Self::with_floor(field, DEFAULT_K_MIN)
    }

    pub fn with_floor(field: Field, k_min: f64) -> Result<Self> {
        for i in 0..field.rows() {
            for j in 0..field.cols() {
                let value = field.get(i, j);
                if !(value > k_min) {
                    return Err(Error::NonPositiveConductivity { row: i, col: j, value, floor: k_min });
                }
            }
        }
        Ok(Self(field))
    }

    pub fn constant(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(Field::filled(rows, cols, value))
    }

    #[inline]
    pub fn field(&self) -> &Field {
        &self.0
    }

    pub(crate) fn field_mut(&mut self) -> &mut Field {
        &mut self.0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn into_field(self) -> Field {
        self.0
    }
}

impl TryFrom<Field> for ConductivityField {
    type Error = Error;

    fn try_from(field: Field) -> Result<Self> {
        Self::new(field)
    }
}

impl From<ConductivityField> for Field {
    fn from(k: ConductivityField) -> Field {
        k.0
    }
}

/// Temperature u on the mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureField(pub Field);

impl TemperatureField {
    #[inline]
    pub fn field(&self) -> &Field {
        &self.0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }
}

/// Observed or simulated temperatures at the data nodes, in row-major scan order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoundaryVector(pub Vec<f64>);

impl BoundaryVector {
    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Number of boundary nodes on an `n x m` mesh.
pub fn boundary_len(n: usize, m: usize) -> usize {
    if n == 0 || m == 0 {
        0
    } else if n == 1 || m == 1 {
        n * m
    } else {
        2 * (n + m) - 4
    }
}

#[inline]
pub(crate) fn is_boundary(i: usize, j: usize, n: usize, m: usize) -> bool {
    i == 0 || j == 0 || i + 1 == n || j + 1 == m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_entries() {
        let f = Field::from_vec(2, 2, vec![1.0, 2.0, 0.0, 1.0]).unwrap();
        let err = ConductivityField::new(f).unwrap_err();
        assert!(matches!(err, Error::NonPositiveConductivity { row: 1, col: 0, .. }));
        assert!(ConductivityField::constant(3, 3, f64::NAN).is_err());
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(Field::from_vec(2, 3, vec![0.0; 5]).is_err());
    }

    #[test]
    fn boundary_counts() {
        assert_eq!(boundary_len(20, 20), 76);
        assert_eq!(boundary_len(3, 3), 8);
        assert_eq!(boundary_len(3, 5), 12);
    }
}
