use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{FemFunction, FemOperators};
use crate::error::{Error, Result};

/// Generalised eigenpairs of the pencil `S φ = λ M φ`.
///
/// Columns of `eigenvectors` are M-orthonormal, so the coordinates of `v` in
/// the eigenbasis are `Φᵀ M v` and any function of the discrete Laplacian acts
/// as `φ(Λₕ) v = Φ diag(φ(λ)) Φᵀ M v`.
#[derive(Debug, Clone)]
pub struct SpectralDecomp {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralDecomp {
    /// Dense reduction to a standard symmetric problem through the Cholesky
    /// factor of `M`: `L⁻¹ S L⁻ᵀ y = λ y`, `φ = L⁻ᵀ y`.
    pub fn from_pencil(ops: &FemOperators) -> Result<Self> {
        let n = ops.order();
        let mass = ops.mass().to_dense();
        let stiffness = ops.stiffness().to_dense();
        let chol = mass
            .cholesky()
            .ok_or_else(|| Error::numerical("mass matrix is not positive definite", None))?;
        let l = chol.l();
        let half = l
            .solve_lower_triangular(&stiffness)
            .ok_or_else(|| Error::numerical("singular Cholesky factor", None))?;
        let mut reduced = l
            .solve_lower_triangular(&half.transpose())
            .ok_or_else(|| Error::numerical("singular Cholesky factor", None))?;
        // Symmetrise away rounding so the symmetric solver sees a symmetric input.
        reduced = (&reduced + reduced.transpose()) * 0.5;

        let eig = SymmetricEigen::try_new(reduced, f64::EPSILON, 0).ok_or_else(|| {
            Error::numerical(
                format!("symmetric eigensolver did not converge for order {n}"),
                None,
            )
        })?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&j| eig.eigenvalues[j]));
        let mut y = DMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            y.set_column(dst, &eig.eigenvectors.column(src));
        }
        let eigenvectors = l
            .transpose()
            .solve_upper_triangular(&y)
            .ok_or_else(|| Error::numerical("singular Cholesky factor", None))?;

        if let Some(bad) = eigenvalues.iter().find(|l| !(**l > 0.0)) {
            return Err(Error::numerical(
                format!("non-positive pencil eigenvalue {bad}"),
                None,
            ));
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    /// Ascending eigenvalues `λ_{h,1} ≤ … ≤ λ_{h,N}`.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Φ, one M-orthonormal eigenvector per column.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `Φᵀ M v`.
    pub fn to_modal(&self, ops: &FemOperators, v: &FemFunction) -> Result<DVector<f64>> {
        self.check(v.len())?;
        let mv = ops.mass().mul(v);
        Ok(self.eigenvectors.tr_mul(&mv))
    }

    /// Modal coordinates of the L₂ projection of a load vector `b`
    /// (`Φᵀ M M⁻¹ b = Φᵀ b`).
    pub fn load_to_modal(&self, b: &DVector<f64>, out: &mut DVector<f64>) {
        out.gemv_tr(1.0, &self.eigenvectors, b, 0.0);
    }

    /// `Φ a`.
    pub fn from_modal(&self, a: &DVector<f64>) -> FemFunction {
        (&self.eigenvectors * a).into()
    }

    pub fn from_modal_into(&self, a: &DVector<f64>, out: &mut DVector<f64>) {
        out.gemv(1.0, &self.eigenvectors, a, 0.0);
    }

    /// `φ(Λₕ) v`.
    pub fn apply(
        &self,
        ops: &FemOperators,
        phi: impl Fn(f64) -> f64,
        v: &FemFunction,
    ) -> Result<FemFunction> {
        let mut a = self.to_modal(ops, v)?;
        for (aj, lj) in a.iter_mut().zip(self.eigenvalues.iter()) {
            *aj *= phi(*lj);
        }
        Ok(self.from_modal(&a))
    }

    /// `‖v‖_{h,α} = ‖Λₕ^{α/2} v‖`.
    pub fn norm(&self, ops: &FemOperators, v: &FemFunction, alpha: f64) -> Result<f64> {
        let a = self.to_modal(ops, v)?;
        Ok(a.iter()
            .zip(self.eigenvalues.iter())
            .map(|(aj, lj)| lj.powf(alpha) * aj * aj)
            .sum::<f64>()
            .sqrt())
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::invalid(format!(
                "dimension mismatch: function has {n} coefficients, decomposition has order {}",
                self.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::fem::{FemSpace, Mesh1D};

    fn random_vec(n: usize, seed: u64) -> FemFunction {
        // Small LCG; the tests only need deterministic, non-trivial data.
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        FemFunction::from_iterator(
            n,
            (0..n).map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            }),
        )
    }

    /// Closed-form spectrum of the uniform P1 pencil, used as an oracle.
    fn analytic_discrete_eigenvalue(j: usize, h: f64) -> f64 {
        let c = (j as f64 * PI * h).cos();
        6.0 / (h * h) * (1.0 - c) / (2.0 + c)
    }

    #[test]
    fn single_dof_pencil() {
        let sp = FemSpace::new(2).unwrap();
        assert!((sp.decomp.eigenvalues()[0] - 12.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_near_continuous_one() {
        let sp = FemSpace::new(64).unwrap();
        let l = sp.decomp.eigenvalues();
        assert!(l[0] >= PI * PI && l[0] <= PI * PI * 1.01);
        for j in 1..=8 {
            let exact = (j as f64 * PI).powi(2);
            assert!((l[j - 1] - exact).abs() / exact < 0.05, "mode {j}");
        }
    }

    #[test]
    fn spectrum_matches_closed_form_and_dominates() {
        for n in [2usize, 5, 16, 64, 128] {
            let sp = FemSpace::new(n).unwrap();
            let h = sp.mesh.h();
            for (j, lam) in sp.decomp.eigenvalues().iter().enumerate() {
                let exact = analytic_discrete_eigenvalue(j + 1, h);
                assert!((lam - exact).abs() <= 1e-9 * exact, "n={n} j={j}");
                assert!(*lam >= ((j + 1) as f64 * PI).powi(2) * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn eigenvectors_are_m_orthonormal_and_solve_the_pencil() {
        let sp = FemSpace::new(40).unwrap();
        let phi = sp.decomp.eigenvectors();
        let m = sp.ops.mass().to_dense();
        let s = sp.ops.stiffness().to_dense();
        let gram = phi.transpose() * &m * phi;
        let id = DMatrix::<f64>::identity(phi.ncols(), phi.ncols());
        assert!((gram - id).amax() < 1e-10);
        let lhs = &s * phi;
        let rhs = &m * phi * DMatrix::from_diagonal(sp.decomp.eigenvalues());
        assert!((lhs - rhs).amax() < 1e-8 * sp.decomp.eigenvalues().max());
    }

    #[test]
    fn identity_function_and_laplacian() {
        let sp = FemSpace::new(32).unwrap();
        let v = random_vec(sp.n_dofs(), 3);
        let same = sp.decomp.apply(&sp.ops, |_| 1.0, &v).unwrap();
        assert!((&same.coeffs - &v.coeffs).amax() < 1e-12);
        let cos0 = sp.decomp.apply(&sp.ops, |l| (0.0 * l.sqrt()).cos(), &v).unwrap();
        assert!((&cos0.coeffs - &v.coeffs).amax() < 1e-12);

        let lap = sp.decomp.apply(&sp.ops, |l| l, &v).unwrap();
        let direct = sp.ops.discrete_laplacian(&v);
        let scale = direct.amax();
        assert!((&lap.coeffs - &direct.coeffs).amax() < 1e-10 * scale);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let sp = FemSpace::new(8).unwrap();
        let v = FemFunction::zeros(3);
        assert!(matches!(
            sp.decomp.apply(&sp.ops, |_| 1.0, &v),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn discrete_norms() {
        let sp = FemSpace::new(24).unwrap();
        let v = random_vec(sp.n_dofs(), 11);
        let n0 = sp.decomp.norm(&sp.ops, &v, 0.0).unwrap();
        let n1 = sp.decomp.norm(&sp.ops, &v, 1.0).unwrap();
        assert!((n0 - sp.ops.l2_norm(&v)).abs() < 1e-10 * n0);
        assert!((n1 - sp.ops.energy_seminorm(&v)).abs() < 1e-10 * n1);
        let z = FemFunction::zeros(sp.n_dofs());
        assert_eq!(sp.decomp.norm(&sp.ops, &z, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn trig_identity_recombines() {
        let sp = FemSpace::new(20).unwrap();
        let v = random_vec(sp.n_dofs(), 5);
        let t = 0.37;
        let c = sp.decomp.apply(&sp.ops, |l| (t * l.sqrt()).cos(), &v).unwrap();
        let s = sp.decomp.apply(&sp.ops, |l| (t * l.sqrt()).sin(), &v).unwrap();
        let cc = sp.decomp.apply(&sp.ops, |l| (t * l.sqrt()).cos(), &c).unwrap();
        let ss = sp.decomp.apply(&sp.ops, |l| (t * l.sqrt()).sin(), &s).unwrap();
        let back = &cc.coeffs + &ss.coeffs;
        assert!((back - &v.coeffs).amax() < 1e-10);
    }

    #[test]
    fn mesh_without_decomposition_helper() {
        // from_pencil works directly from assembled operators as well.
        let mesh = Mesh1D::new(6).unwrap();
        let ops = FemOperators::assemble(&mesh);
        let d = SpectralDecomp::from_pencil(&ops).unwrap();
        assert_eq!(d.len(), 5);
    }

    mod props {
        use proptest::prelude::*;

        use super::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn parseval(seed in any::<u64>(), n in 2usize..40) {
                let sp = FemSpace::new(n).unwrap();
                let v = random_vec(sp.n_dofs(), seed);
                let a = sp.decomp.to_modal(&sp.ops, &v).unwrap();
                let mass = sp.ops.mass().quadratic_form(&v);
                prop_assert!((a.norm_squared() - mass).abs() <= 1e-10 * mass.max(1e-300));
            }

            #[test]
            fn composition(seed in any::<u64>(), t in 0.0f64..2.0) {
                let sp = FemSpace::new(16).unwrap();
                let v = random_vec(sp.n_dofs(), seed);
                let f1 = |l: f64| (t * l.sqrt()).cos();
                let f2 = |l: f64| 1.0 / (1.0 + l);
                let two = sp.decomp.apply(&sp.ops, f1, &sp.decomp.apply(&sp.ops, f2, &v).unwrap()).unwrap();
                let one = sp.decomp.apply(&sp.ops, |l| f1(l) * f2(l), &v).unwrap();
                prop_assert!((&two.coeffs - &one.coeffs).amax() < 1e-10);
            }
        }
    }
}
