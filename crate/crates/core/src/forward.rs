//! Steady fin equation `u_xx + u_yy = 2H/(K thickness) u` on the rectangular
//! mesh, with convective loss `-K du/dn_out = H u` on the exposed boundary and
//! a prescribed inward flux `K du/dn_out = q_in` on the CPU contact.
//!
//! Boundary conditions are folded into the 5-point stencil by eliminating
//! the ghost node behind each boundary face with a central difference. A
//! corner eliminates one ghost per direction, each with its own edge's
//! condition.

use serde::{Deserialize, Serialize};

use crate::banded::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::field::{boundary_len, is_boundary, BoundaryVector, ConductivityField, Field, TemperatureField};
use crate::grid::GridSpec;

/// Discretized system `A vec(u) = b`, with `vec` the row-major flattening.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: BandMatrix,
    pub rhs: Vec<f64>,
}

impl LinearSystem {
    pub fn residual_inf(&self, u: &[f64]) -> f64 {
        self.matrix
            .matvec(u)
            .iter()
            .zip(&self.rhs)
            .map(|(au, b)| (au - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_inputs(k: &ConductivityField, grid: &GridSpec) -> Result<()> {
    grid.validate()?;
    k.field().check_shape(grid.n, grid.m)?;
    Ok(())
}

pub fn assemble_system(k: &ConductivityField, grid: &GridSpec) -> Result<LinearSystem> {
    check_inputs(k, grid)?;
    Ok(assemble_unchecked(k, grid))
}

pub(crate) fn assemble_unchecked(k: &ConductivityField, grid: &GridSpec) -> LinearSystem {
    let (n, m) = (grid.n, grid.m);
    let (hx, hy) = (grid.hx(), grid.hy());
    let (cx, cy) = (1.0 / (hx * hx), 1.0 / (hy * hy));
    let h = grid.h_conv;
    let q = grid.inflow_flux();
    let mut a = BandMatrix::zeros(n * m, m);
    let mut b = vec![0.0; n * m];

    for i in 0..n {
        for j in 0..m {
            let r = i * m + j;
            let kij = k.get(i, j);
            let mut diag = -(2.0 * cx + 2.0 * cy + 2.0 * h / (kij * grid.thickness));

            // x direction
            if j == 0 {
                a.add(r, r + 1, 2.0 * cx);
                if grid.in_cpu_segment(i, j) {
                    b[r] -= 2.0 * q / (kij * hx);
                } else {
                    diag -= 2.0 * h / (kij * hx);
                }
            } else if j + 1 == m {
                a.add(r, r - 1, 2.0 * cx);
                diag -= 2.0 * h / (kij * hx);
            } else {
                a.add(r, r - 1, cx);
                a.add(r, r + 1, cx);
            }

            // y direction
            if i == 0 {
                a.add(r, r + m, 2.0 * cy);
                diag -= 2.0 * h / (kij * hy);
            } else if i + 1 == n {
                a.add(r, r - m, 2.0 * cy);
                diag -= 2.0 * h / (kij * hy);
            } else {
                a.add(r, r - m, cy);
                a.add(r, r + m, cy);
            }

            a.add(r, r, diag);
        }
    }
    LinearSystem { matrix: a, rhs: b }
}

pub fn solve_forward(k: &ConductivityField, grid: &GridSpec) -> Result<TemperatureField> {
    check_inputs(k, grid)?;
    solve_unchecked(k, grid)
}

pub(crate) fn solve_unchecked(k: &ConductivityField, grid: &GridSpec) -> Result<TemperatureField> {
    let LinearSystem { matrix, rhs } = assemble_unchecked(k, grid);
    let lu = matrix.factorize()?;
    let mut u = rhs;
    lu.solve_in_place(&mut u);
    Ok(TemperatureField(Field::from_vec(grid.n, grid.m, u)?))
}

/// Step cap for [`pseudo_transient_solve`].
pub const PSEUDO_TRANSIENT_MAX_STEPS: usize = 2_000_000;

/// Marches `u_t = A u - b` to steady state with the trapezoidal rule, from `u = 0`.
///
/// Stops once the max-norm change between iterates is at most `tol` and the
/// geometric tail estimate `change * rho / (1 - rho)` (with `rho` the observed
/// contraction of successive changes) is at most `tol` too, so the returned
/// field is within a small multiple of `tol` of the steady solution.
pub fn pseudo_transient_solve(
    k: &ConductivityField,
    grid: &GridSpec,
    dt: f64,
    tol: f64,
) -> Result<TemperatureField> {
    pseudo_transient_solve_capped(k, grid, dt, tol, PSEUDO_TRANSIENT_MAX_STEPS)
}

pub fn pseudo_transient_solve_capped(
    k: &ConductivityField,
    grid: &GridSpec,
    dt: f64,
    tol: f64,
    max_steps: usize,
) -> Result<TemperatureField> {
    if !(dt > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidGrid(format!("dt and tol must be positive, got dt={dt} tol={tol}")));
    }
    check_inputs(k, grid)?;
    let LinearSystem { matrix: a, rhs: b } = assemble_unchecked(k, grid);
    let size = a.size();

    // (I - dt/2 A) u_next = (I + dt/2 A) u - dt b
    let mut implicit = BandMatrix::zeros(size, a.half_bandwidth());
    for r in 0..size {
        implicit.add(r, r, 1.0);
        for (c, v) in a.row_entries(r) {
            implicit.add(r, c, -0.5 * dt * v);
        }
    }
    let lu: BandLu = implicit.factorize()?;

    let mut u = vec![0.0; size];
    let mut prev_change = f64::INFINITY;
    let mut change = f64::INFINITY;
    for _ in 0..max_steps {
        let au = a.matvec(&u);
        let mut next: Vec<f64> = (0..size).map(|r| u[r] + 0.5 * dt * au[r] - dt * b[r]).collect();
        lu.solve_in_place(&mut next);
        change = next.iter().zip(&u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        u = next;
        if change <= tol {
            let rho = change / prev_change;
            let tail = if rho < 1.0 { change * rho / (1.0 - rho) } else { f64::INFINITY };
            if change == 0.0 || tail <= tol {
                return Ok(TemperatureField(Field::from_vec(grid.n, grid.m, u)?));
            }
        }
        prev_change = change;
    }
    Err(Error::NotConverged { iterations: max_steps, change })
}

/// Temperatures at boundary nodes in row-major scan order.
pub fn boundary_trace(u: &TemperatureField) -> BoundaryVector {
    let f = u.field();
    let (n, m) = f.shape();
    let mut out = Vec::with_capacity(boundary_len(n, m));
    for i in 0..n {
        if i == 0 || i + 1 == n {
            out.extend_from_slice(&f.as_slice()[i * m..(i + 1) * m]);
        } else {
            out.push(f.get(i, 0));
            if m > 1 {
                out.push(f.get(i, m - 1));
            }
        }
    }
    BoundaryVector(out)
}

/// Writes a boundary vector onto the boundary of an `n x m` field of `fill`.
pub fn embed_boundary(d: &BoundaryVector, n: usize, m: usize, fill: f64) -> Result<TemperatureField> {
    if d.len() != boundary_len(n, m) {
        return Err(Error::DimensionMismatch {
            expected: format!("{} boundary values for {n}x{m}", boundary_len(n, m)),
            got: format!("{}", d.len()),
        });
    }
    let mut values = d.as_slice().iter();
    let field = Field::from_fn(n, m, |i, j| {
        if is_boundary(i, j, n, m) {
            *values.next().expect("length checked")
        } else {
            fill
        }
    });
    Ok(TemperatureField(field))
}

/// Which nodes enter the data misfit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MisfitDomain {
    #[default]
    Boundary,
    Full,
}

/// Extracts the data vector the chain compares against: the boundary trace,
/// or every node in row-major order.
pub fn observe(u: &TemperatureField, domain: MisfitDomain) -> BoundaryVector {
    match domain {
        MisfitDomain::Boundary => boundary_trace(u),
        MisfitDomain::Full => BoundaryVector(u.field().as_slice().to_vec()),
    }
}

pub fn observation_len(n: usize, m: usize, domain: MisfitDomain) -> usize {
    match domain {
        MisfitDomain::Boundary => boundary_len(n, m),
        MisfitDomain::Full => n * m,
    }
}
