//! Closed-form integrals of the sine basis `e_j(x) = √2 sin(jπx)` against
//! hat functions and products of linear shape functions.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::fem::Mesh1D;

/// `∫ e_j φᵢ dx` for interior node `xᵢ` and mode `j ≥ 1`.
///
/// For a hat of half-width h centred at xᵢ,
/// `∫ φᵢ sin(ωx) dx = sin(ωxᵢ)·2(1 − cos ωh)/(ω²h)`.
pub fn sine_hat_integral(j: usize, x_i: f64, h: f64) -> f64 {
    let omega = j as f64 * PI;
    let wh = omega * h;
    // 1 - cos(wh) = 2 sin²(wh/2) avoids cancellation for small wh.
    let half = (0.5 * wh).sin();
    SQRT_2 * (omega * x_i).sin() * 4.0 * half * half / (omega * omega * h)
}

/// Load vectors of the first `modes` sine modes, one per column: `B[i, j-1] = ∫ e_j φᵢ`.
pub fn sine_hat_matrix(mesh: &Mesh1D, modes: usize) -> DMatrix<f64> {
    let h = mesh.h();
    DMatrix::from_fn(mesh.n_dofs(), modes, |i, j| {
        sine_hat_integral(j + 1, mesh.nodes()[i], h)
    })
}

/// `∫₀¹ tᵐ e^{iwt} dt` for m = 0, 1, 2.
fn oscillatory_moments(w: f64) -> [Complex64; 3] {
    let iw = Complex64::new(0.0, w);
    if w.abs() < 1.0 {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        let mut term = Complex64::new(1.0, 0.0); // (iw)^n / n!
        for n in 0..30 {
            for (m, o) in out.iter_mut().enumerate() {
                *o += term / (n + m + 1) as f64;
            }
            term = term * iw / (n + 1) as f64;
        }
        out
    } else {
        let e = iw.exp();
        let i0 = (e - 1.0) / iw;
        let i1 = (e - i0) / iw;
        let i2 = (e - 2.0 * i1) / iw;
        [i0, i1, i2]
    }
}

/// `out = Aᵀx` for column-major `A`, one contiguous dot product per column.
pub(crate) fn mul_transpose(a: &DMatrix<f64>, x: &DVector<f64>, out: &mut DVector<f64>) {
    debug_assert_eq!(a.nrows(), x.len());
    debug_assert_eq!(a.ncols(), out.len());
    let x = x.as_slice();
    for (o, col) in out.iter_mut().zip(a.as_slice().chunks_exact(a.nrows().max(1))) {
        *o = dot(col, x);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (p, q) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += p[l] * q[l];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(p, q)| p * q).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Per-cell moments `∫_K ψ_a ψ_b e_j dx` of the linear shape functions
/// ψ_l = 1 − t and ψ_r = t, stored as three `modes × n_cells` matrices.
#[derive(Debug, Clone)]
pub struct CellMoments {
    pub ll: DMatrix<f64>,
    pub lr: DMatrix<f64>,
    pub rr: DMatrix<f64>,
}

impl CellMoments {
    pub fn new(mesh: &Mesh1D, modes: usize) -> Self {
        let n = mesh.n_cells();
        let h = mesh.h();
        let mut ll = DMatrix::zeros(modes, n);
        let mut lr = DMatrix::zeros(modes, n);
        let mut rr = DMatrix::zeros(modes, n);
        for j in 0..modes {
            let omega = (j + 1) as f64 * PI;
            let [i0, i1, i2] = oscillatory_moments(omega * h);
            for cell in 0..n {
                let phase = Complex64::from_polar(SQRT_2 * h, omega * cell as f64 * h);
                ll[(j, cell)] = (phase * (i0 - 2.0 * i1 + i2)).im;
                lr[(j, cell)] = (phase * (i1 - i2)).im;
                rr[(j, cell)] = (phase * i2).im;
            }
        }
        Self { ll, lr, rr }
    }

    /// `bᵢ = ∫ gI(x) W(x) φᵢ(x) dx` where `W = Σ_j coeffs_j e_j` and `gI` is the
    /// piecewise-linear function with the given values at all mesh nodes.
    pub fn weighted_load(
        &self,
        coeffs: &DVector<f64>,
        g_nodal: &[f64],
        scratch: &mut [DVector<f64>; 3],
        out: &mut DVector<f64>,
    ) {
        let [wll, wlr, wrr] = scratch;
        mul_transpose(&self.ll, coeffs, wll);
        mul_transpose(&self.lr, coeffs, wlr);
        mul_transpose(&self.rr, coeffs, wrr);
        let n = self.ll.ncols();
        out.fill(0.0);
        for cell in 0..n {
            let (gl, gr) = (g_nodal[cell], g_nodal[cell + 1]);
            if cell > 0 {
                out[cell - 1] += gl * wll[cell] + gr * wlr[cell];
            }
            if cell + 1 < n {
                out[cell] += gl * wlr[cell] + gr * wrr[cell];
            }
        }
    }
}
