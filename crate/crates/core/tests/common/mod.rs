#![allow(dead_code)]

use heatmc::{ConductivityField, Field, GridSpec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Dense system built straight from the boundary conditions: every missing
/// neighbour is a ghost value `u_opp + 2 h du/dn_out`, with
/// `K du/dn_out = -H u` on exposed faces and `K du/dn_out = q` on the CPU contact.
pub fn oracle_system(k: &ConductivityField, g: &GridSpec) -> (DMatrix<f64>, DVector<f64>) {
    let (n, m) = (g.n, g.m);
    let (hx, hy) = (g.lx / (m - 1) as f64, g.ly / (n - 1) as f64);
    let q = g.power / (g.cpu_segment_fraction * g.ly * g.thickness);
    let cpu_top = g.cpu_segment_fraction * g.ly;
    let idx = |i: usize, j: usize| i * m + j;
    let mut a = DMatrix::zeros(n * m, n * m);
    let mut b = DVector::zeros(n * m);
    for i in 0..n {
        for j in 0..m {
            let r = idx(i, j);
            let kij = k.get(i, j);
            a[(r, r)] -= 2.0 * g.h_conv / (kij * g.thickness);
            let dirs: [(isize, isize, f64); 4] = [(0, 1, hx), (0, -1, hx), (1, 0, hy), (-1, 0, hy)];
            for (di, dj, h) in dirs {
                let c = 1.0 / (h * h);
                a[(r, r)] -= c;
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if ni >= 0 && nj >= 0 && (ni as usize) < n && (nj as usize) < m {
                    a[(r, idx(ni as usize, nj as usize))] += c;
                    continue;
                }
                let (oi, oj) = ((i as isize - di) as usize, (j as isize - dj) as usize);
                a[(r, idx(oi, oj))] += c;
                let on_cpu = dj == -1 && (i as f64) * hy <= cpu_top * (1.0 + 1e-12) && g.power > 0.0;
                if on_cpu {
                    b[r] -= c * 2.0 * h * q / kij;
                } else {
                    a[(r, r)] -= c * 2.0 * h * g.h_conv / kij;
                }
            }
        }
    }
    (a, b)
}

pub fn dense_solve(k: &ConductivityField, g: &GridSpec) -> DVector<f64> {
    let (a, b) = oracle_system(k, g);
    a.lu().solve(&b).expect("oracle system is nonsingular")
}

pub fn random_k(rng: &mut impl Rng, n: usize, m: usize) -> ConductivityField {
    ConductivityField::new(Field::from_fn(n, m, |_, _| rng.random_range(0.3..3.0))).unwrap()
}

pub fn max_rel_diff(u: &[f64], v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(f64::MIN_POSITIVE);
    u.iter().zip(v).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / scale
}
