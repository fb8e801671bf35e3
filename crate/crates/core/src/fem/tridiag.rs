//! Symmetric tridiagonal matrices and their LDLᵀ factorisation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix stored by its diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::invalid(format!(
                "tridiagonal shape mismatch: {} diagonal and {} off-diagonal entries",
                diag.len(),
                off.len()
            )));
        }
        Ok(Self { diag, off })
    }

    pub fn order(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_diag(&self) -> &[f64] {
        &self.off
    }

    /// `a·self + b·other`, entrywise.
    pub fn combine(&self, a: f64, other: &SymTridiagonal, b: f64) -> SymTridiagonal {
        assert_eq!(self.order(), other.order());
        let diag = self
            .diag
            .iter()
            .zip(&other.diag)
            .map(|(x, y)| a * x + b * y)
            .collect();
        let off = self
            .off
            .iter()
            .zip(&other.off)
            .map(|(x, y)| a * x + b * y)
            .collect();
        SymTridiagonal { diag, off }
    }

    /// `out = self · x`.
    pub fn mul_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        let n = self.order();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(out.len(), n);
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            out[i] = acc;
        }
    }

    pub fn mul(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.order());
        self.mul_into(x, &mut out);
        out
    }

    /// `xᵀ · self · x`.
    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        let n = self.order();
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.diag[i] * x[i] * x[i];
            if i + 1 < n {
                acc += 2.0 * self.off[i] * x[i] * x[i + 1];
            }
        }
        acc
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.order();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }

    /// LDLᵀ factorisation without pivoting; fails on a non-positive pivot.
    pub fn factor(&self) -> Result<TridiagFactor> {
        let n = self.order();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        d[0] = self.diag[0];
        for i in 1..n {
            if !(d[i - 1] > 0.0) {
                return Err(Error::numerical(
                    format!("tridiagonal factorisation: pivot {} is {}", i - 1, d[i - 1]),
                    None,
                ));
            }
            l[i - 1] = self.off[i - 1] / d[i - 1];
            d[i] = self.diag[i] - l[i - 1] * self.off[i - 1];
        }
        if !(d[n - 1] > 0.0) {
            return Err(Error::numerical(
                format!("tridiagonal factorisation: pivot {} is {}", n - 1, d[n - 1]),
                None,
            ));
        }
        Ok(TridiagFactor { d, l })
    }
}

/// Cached LDLᵀ factors of an SPD tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct TridiagFactor {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl TridiagFactor {
    pub fn solve_in_place(&self, b: &mut DVector<f64>) {
        let n = self.d.len();
        debug_assert_eq!(b.len(), n);
        for i in 1..n {
            b[i] -= self.l[i - 1] * b[i - 1];
        }
        for i in 0..n {
            b[i] /= self.d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            b[i] -= self.l[i] * b[i + 1];
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }
}
