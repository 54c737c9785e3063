//! Square band matrices with equal lower and upper half-bandwidth, and an
//! in-place LU factorization without pivoting.
//!
//! The fin operator is strictly row diagonally dominant whenever `h_conv > 0`,
//! and elimination without row exchanges preserves that property in every
//! Schur complement, so fill-in stays inside the band.

use crate::error::{Error, Result};

/// Pivots smaller than this fraction of the largest diagonal entry are
/// reported as a singular system.
const PIVOT_RTOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    size: usize,
    half_bw: usize,
    // row r stores columns r - half_bw ..= r + half_bw
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(size: usize, half_bw: usize) -> Self {
        Self { size, half_bw, data: vec![0.0; size * (2 * half_bw + 1)] }
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn half_bandwidth(&self) -> usize {
        self.half_bw
    }

    #[inline]
    fn in_band(&self, r: usize, c: usize) -> bool {
        r.abs_diff(c) <= self.half_bw
    }

    #[inline]
    fn offset(&self, r: usize, c: usize) -> usize {
        r * (2 * self.half_bw + 1) + (c + self.half_bw - r)
    }

    /// Entry `(r, c)`; zero outside the band.
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        if self.in_band(r, c) {
            self.data[self.offset(r, c)]
        } else {
            0.0
        }
    }

    /// Panics if `(r, c)` lies outside the band.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, value: f64) {
        assert!(self.in_band(r, c), "({r}, {c}) outside half-bandwidth {}", self.half_bw);
        let k = self.offset(r, c);
        self.data[k] += value;
    }

    fn col_range(&self, r: usize) -> std::ops::Range<usize> {
        r.saturating_sub(self.half_bw)..(r + self.half_bw + 1).min(self.size)
    }

    /// Nonzero entries of row `r` as `(column, value)`.
    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.col_range(r).map(move |c| (c, self.get(r, c))).filter(|&(_, v)| v != 0.0)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.size);
        (0..self.size)
            .map(|r| self.col_range(r).map(|c| self.data[self.offset(r, c)] * x[c]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.size).map(|r| (0..self.size).map(|c| self.get(r, c)).collect()).collect()
    }

    /// Factorizes `self` into unit-lower `L` and upper `U`, both stored in the band.
    pub fn factorize(mut self) -> Result<BandLu> {
        let n = self.size;
        let p = self.half_bw;
        let w = 2 * p + 1;
        let scale = (0..n).map(|r| self.get(r, r).abs()).fold(0.0, f64::max);
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot: f64 = 0.0;
        for k in 0..n {
            let pivot = self.data[k * w + p];
            let mag = pivot.abs();
            min_pivot = min_pivot.min(mag);
            max_pivot = max_pivot.max(mag);
            if !(mag > PIVOT_RTOL * scale) || !pivot.is_finite() {
                return Err(Error::Singular {
                    row: k,
                    pivot,
                    condition: if mag > 0.0 { max_pivot / mag } else { f64::INFINITY },
                });
            }
            let last = (k + p).min(n - 1);
            for i in k + 1..=last {
                let ik = i * w + (k + p - i);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l == 0.0 {
                    continue;
                }
                // row k precedes row i in storage, so the pivot row sits in `head`
                let len = last - k;
                let src = k * w + p + 1;
                let dst = i * w + (k + 1 + p - i);
                let (head, tail) = self.data.split_at_mut(dst);
                for (d, s) in tail[..len].iter_mut().zip(&head[src..src + len]) {
                    *d -= l * s;
                }
            }
        }
        Ok(BandLu { lu: self, pivot_ratio: max_pivot / min_pivot })
    }
}

/// LU factors of a [`BandMatrix`].
#[derive(Debug, Clone)]
pub struct BandLu {
    lu: BandMatrix,
    pivot_ratio: f64,
}

impl BandLu {
    /// Ratio of largest to smallest pivot magnitude, a cheap conditioning hint.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let a = &self.lu;
        let n = a.size;
        let p = a.half_bw;
        let w = 2 * p + 1;
        assert_eq!(x.len(), n);
        for i in 0..n {
            let lo = i.saturating_sub(p);
            let mut s = x[i];
            for c in lo..i {
                s -= a.data[i * w + (c + p - i)] * x[c];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + p).min(n - 1);
            let mut s = x[i];
            for c in i + 1..=hi {
                s -= a.data[i * w + (c + p - i)] * x[c];
            }
            x[i] = s / a.data[i * w + p];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
