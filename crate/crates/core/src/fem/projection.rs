//! L₂ and Ritz projections onto the finite element space, plus the Gauss
//! load assembly they share with the nonlinear terms.

use nalgebra::DVector;

use super::{FemFunction, FemOperators, Mesh1D, GAUSS_POINTS, GAUSS_WEIGHTS};
use crate::error::{Error, Result};

/// `bᵢ = ∫ u φᵢ dx` with three Gauss points per cell.
pub fn load_vector(mesh: &Mesh1D, u: impl Fn(f64) -> f64) -> DVector<f64> {
    let h = mesh.h();
    let mut b = DVector::zeros(mesh.n_dofs());
    for cell in 0..mesh.n_cells() {
        let x0 = cell as f64 * h;
        let (mut to_left, mut to_right) = (0.0, 0.0);
        for (t, w) in GAUSS_POINTS.iter().zip(GAUSS_WEIGHTS) {
            let val = w * h * u(x0 + t * h);
            to_left += val * (1.0 - t);
            to_right += val * t;
        }
        scatter(&mut b, mesh.n_cells(), cell, to_left, to_right);
    }
    b
}

/// Load of `f(v(x))` for a piecewise-linear `v` given by its values at all
/// nodes, boundary included.
pub fn composed_load(mesh: &Mesh1D, nodal: &[f64], f: impl Fn(f64) -> f64) -> DVector<f64> {
    debug_assert_eq!(nodal.len(), mesh.n_cells() + 1);
    let h = mesh.h();
    let mut b = DVector::zeros(mesh.n_dofs());
    for cell in 0..mesh.n_cells() {
        let (vl, vr) = (nodal[cell], nodal[cell + 1]);
        let (mut to_left, mut to_right) = (0.0, 0.0);
        for (t, w) in GAUSS_POINTS.iter().zip(GAUSS_WEIGHTS) {
            let val = w * h * f((1.0 - t) * vl + t * vr);
            to_left += val * (1.0 - t);
            to_right += val * t;
        }
        scatter(&mut b, mesh.n_cells(), cell, to_left, to_right);
    }
    b
}

/// `∫ V(v(x)) dx` for piecewise-linear `v` given with boundary values.
pub fn composed_integral(mesh: &Mesh1D, nodal: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let h = mesh.h();
    (0..mesh.n_cells())
        .map(|cell| {
            let (vl, vr) = (nodal[cell], nodal[cell + 1]);
            GAUSS_POINTS
                .iter()
                .zip(GAUSS_WEIGHTS)
                .map(|(t, w)| w * f((1.0 - t) * vl + t * vr))
                .sum::<f64>()
                * h
        })
        .sum()
}

#[inline]
fn scatter(b: &mut DVector<f64>, n_cells: usize, cell: usize, to_left: f64, to_right: f64) {
    // Cell `c` spans global nodes c and c+1; interior node i has dof index i-1.
    if cell > 0 {
        b[cell - 1] += to_left;
    }
    if cell + 1 < n_cells {
        b[cell] += to_right;
    }
}

/// L₂ projection `Pₕ u`: solves `M c = b`, `bᵢ = ∫ u φᵢ`.
pub fn l2_project(mesh: &Mesh1D, ops: &FemOperators, u: impl Fn(f64) -> f64) -> FemFunction {
    ops.mass_solve(&load_vector(mesh, u))
}

/// Ritz projection `Rₕ u`: solves `S c = b`, `bᵢ = ∫ u′ φᵢ′`.
///
/// Only the derivative enters; without it the caller has to choose
/// [`l2_project`] explicitly.
pub fn ritz_project(
    mesh: &Mesh1D,
    ops: &FemOperators,
    derivative: Option<&dyn Fn(f64) -> f64>,
) -> Result<FemFunction> {
    let du = derivative.ok_or_else(|| {
        Error::invalid("Ritz projection needs the derivative of the projected function")
    })?;
    let h = mesh.h();
    let mut b = DVector::zeros(mesh.n_dofs());
    for cell in 0..mesh.n_cells() {
        let x0 = cell as f64 * h;
        let mean_slope: f64 = GAUSS_POINTS
            .iter()
            .zip(GAUSS_WEIGHTS)
            .map(|(t, w)| w * du(x0 + t * h))
            .sum();
        // ∫_cell u′ φ′ with φ′ = -1/h on the left node, +1/h on the right node.
        scatter(&mut b, mesh.n_cells(), cell, -mean_slope, mean_slope);
    }
    let factor = ops.stiffness().factor()?;
    Ok(factor.solve(&b).into())
}
