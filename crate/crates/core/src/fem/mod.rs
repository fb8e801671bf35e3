//! Piecewise-linear finite elements on a uniform grid of (0, 1) with
//! homogeneous Dirichlet conditions.
//!
//! Unknowns are the values at the interior nodes `x_i = i·h`, `i = 1..n-1`.
//! The discrete Laplacian is the pencil `(S, M)` of stiffness and mass
//! matrices; [`SpectralDecomp`] diagonalises it once so that `cos`, `sin`
//! and fractional powers of it can be applied exactly.

mod projection;
mod spectral;
mod tridiag;

use std::ops::{Deref, DerefMut};

use nalgebra::DVector;

use crate::error::{Error, Result};

pub use projection::{composed_integral, composed_load, l2_project, load_vector, ritz_project};
pub use spectral::SpectralDecomp;
pub use tridiag::{SymTridiagonal, TridiagFactor};

/// Three-point Gauss-Legendre rule on the reference cell [0, 1].
pub const GAUSS_POINTS: [f64; 3] = [
    0.5 - 0.387_298_334_620_741_7,
    0.5,
    0.5 + 0.387_298_334_620_741_7,
];
pub const GAUSS_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Uniform mesh of (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    n_cells: usize,
    h: f64,
    nodes: Vec<f64>,
}

impl Mesh1D {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::invalid(format!(
                "a mesh needs at least 2 cells, got {n_cells}"
            )));
        }
        let h = 1.0 / n_cells as f64;
        let nodes = (1..n_cells).map(|i| i as f64 * h).collect();
        Ok(Self { n_cells, h, nodes })
    }

    /// Mesh whose width is `h`; `1/h` must be an integer.
    pub fn with_width(h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!("mesh width must be positive, got {h}")));
        }
        let n = (1.0 / h).round();
        if (n * h - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("1/h must be an integer, got h = {h}")));
        }
        Self::new(n as usize)
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Number of interior nodes (degrees of freedom).
    pub fn n_dofs(&self) -> usize {
        self.n_cells - 1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Interior node coordinates.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Value of the piecewise-linear function with interior values `v` at `x`.
    pub fn evaluate(&self, v: &FemFunction, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let s = x * self.n_cells as f64;
        let cell = (s.floor() as usize).min(self.n_cells - 1);
        let t = s - cell as f64;
        let left = if cell == 0 { 0.0 } else { v[cell - 1] };
        let right = if cell + 1 == self.n_cells { 0.0 } else { v[cell] };
        (1.0 - t) * left + t * right
    }

    /// Nodal values including the two boundary zeros; entry `i` is node `i·h`.
    pub fn with_boundary(&self, v: &FemFunction) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_cells + 1);
        out.push(0.0);
        out.extend(v.iter().copied());
        out.push(0.0);
        out
    }

    /// Linear interpolation of `v` onto a dyadically nested finer mesh.
    /// Exact, since the coarse space is a subspace of the fine one.
    pub fn prolongate(&self, v: &FemFunction, fine: &Mesh1D) -> Result<FemFunction> {
        if v.len() != self.n_dofs() {
            return Err(Error::invalid("prolongation: coefficient length mismatch"));
        }
        if fine.n_cells % self.n_cells != 0 || !(fine.n_cells / self.n_cells).is_power_of_two() {
            return Err(Error::invalid(format!(
                "meshes with {} and {} cells are not dyadically nested",
                self.n_cells, fine.n_cells
            )));
        }
        let coarse = self.with_boundary(v);
        let ratio = fine.n_cells / self.n_cells;
        let out = (1..fine.n_cells).map(|i| {
            let cell = i / ratio;
            let t = (i % ratio) as f64 / ratio as f64;
            if t == 0.0 {
                coarse[cell]
            } else {
                (1.0 - t) * coarse[cell] + t * coarse[cell + 1]
            }
        });
        Ok(FemFunction::from_iterator(fine.n_dofs(), out))
    }
}

/// Coefficients of a function in the hat basis of the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FemFunction {
    pub coeffs: DVector<f64>,
}

impl FemFunction {
    pub fn zeros(n: usize) -> Self {
        Self {
            coeffs: DVector::zeros(n),
        }
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        Self {
            coeffs: DVector::from_vec(v),
        }
    }

    pub fn from_iterator(n: usize, it: impl IntoIterator<Item = f64>) -> Self {
        Self {
            coeffs: DVector::from_iterator(n, it),
        }
    }

    /// The hat function of interior node `k` (0-based).
    pub fn unit(n: usize, k: usize) -> Self {
        let mut v = Self::zeros(n);
        v.coeffs[k] = 1.0;
        v
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|x| x.is_finite())
    }
}

impl From<DVector<f64>> for FemFunction {
    fn from(coeffs: DVector<f64>) -> Self {
        Self { coeffs }
    }
}

impl Deref for FemFunction {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.coeffs
    }
}

impl DerefMut for FemFunction {
    fn deref_mut(&mut self) -> &mut DVector<f64> {
        &mut self.coeffs
    }
}

/// Consistent mass and stiffness matrices of a [`Mesh1D`].
#[derive(Debug, Clone)]
pub struct FemOperators {
    mass: SymTridiagonal,
    stiffness: SymTridiagonal,
    mass_factor: TridiagFactor,
}

impl FemOperators {
    pub fn assemble(mesh: &Mesh1D) -> Self {
        let n = mesh.n_dofs();
        let h = mesh.h();
        let mass = SymTridiagonal::new(vec![2.0 * h / 3.0; n], vec![h / 6.0; n - 1])
            .expect("consistent shape");
        let stiffness = SymTridiagonal::new(vec![2.0 / h; n], vec![-1.0 / h; n - 1])
            .expect("consistent shape");
        let mass_factor = mass.factor().expect("the mass matrix is SPD");
        Self {
            mass,
            stiffness,
            mass_factor,
        }
    }

    pub fn mass(&self) -> &SymTridiagonal {
        &self.mass
    }

    pub fn stiffness(&self) -> &SymTridiagonal {
        &self.stiffness
    }

    pub fn order(&self) -> usize {
        self.mass.order()
    }

    /// Solves `M c = b`, i.e. turns a load vector into the coefficients of
    /// its L₂ projection.
    pub fn mass_solve(&self, b: &DVector<f64>) -> FemFunction {
        self.mass_factor.solve(b).into()
    }

    pub fn mass_solve_in_place(&self, b: &mut DVector<f64>) {
        self.mass_factor.solve_in_place(b);
    }

    /// `Λₕ v`, computed as `M⁻¹ S v`.
    pub fn discrete_laplacian(&self, v: &FemFunction) -> FemFunction {
        let mut w = self.stiffness.mul(v);
        self.mass_factor.solve_in_place(&mut w);
        w.into()
    }

    /// `‖v‖_{L₂} = sqrt(vᵀ M v)`.
    pub fn l2_norm(&self, v: &FemFunction) -> f64 {
        self.mass.quadratic_form(v).max(0.0).sqrt()
    }

    /// `‖∇v‖ = sqrt(vᵀ S v)`.
    pub fn energy_seminorm(&self, v: &FemFunction) -> f64 {
        self.stiffness.quadratic_form(v).max(0.0).sqrt()
    }
}

/// A mesh together with its operators and the spectral decomposition of the
/// discrete Laplacian. Immutable once built and cheap to share behind an `Arc`.
#[derive(Debug, Clone)]
pub struct FemSpace {
    pub mesh: Mesh1D,
    pub ops: FemOperators,
    pub decomp: SpectralDecomp,
}

impl FemSpace {
    pub fn new(n_cells: usize) -> Result<Self> {
        let mesh = Mesh1D::new(n_cells)?;
        let ops = FemOperators::assemble(&mesh);
        let decomp = SpectralDecomp::from_pencil(&ops)?;
        Ok(Self { mesh, ops, decomp })
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_dofs()
    }
}
