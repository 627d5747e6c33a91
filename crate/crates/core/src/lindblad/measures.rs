use nalgebra::DMatrix;

use super::ops::{annihilation, embed, quadratures, Operator, C64};
use super::state::{expectation, hermitian_eigenvalues, partial_trace, DensityOperator};
use crate::error::{Error, Result};
use crate::gaussian::GaussianObservables;

/// `−Σ λ log₂ λ` over the eigenvalues of ρ, in bits.
pub fn von_neumann_entropy_dm(rho: &DensityOperator) -> f64 {
    rho.eigenvalues()
        .into_iter()
        .filter(|l| *l > 0.0)
        .map(|l| -l * l.log2())
        .sum()
}

fn two_mode_dims(rho2: &DensityOperator) -> Result<(usize, usize)> {
    match rho2.dims.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::DimensionMismatch {
            expected: 2,
            found: rho2.dims.len(),
        }),
    }
}

/// `I = S(A) + S(B) − S(AB)` for a two-mode state.
pub fn mutual_information_dm(rho2: &DensityOperator) -> Result<f64> {
    two_mode_dims(rho2)?;
    let a = partial_trace(rho2, &[0])?;
    let b = partial_trace(rho2, &[1])?;
    Ok(von_neumann_entropy_dm(&a) + von_neumann_entropy_dm(&b) - von_neumann_entropy_dm(rho2))
}

/// Transpose on the first tensor factor of a two-mode state.
pub fn partial_transpose_dm(rho2: &DensityOperator) -> Result<DMatrix<C64>> {
    let (da, db) = two_mode_dims(rho2)?;
    let m = &rho2.matrix;
    Ok(DMatrix::from_fn(da * db, da * db, |r, c| {
        let (a, b) = (r / db, r % db);
        let (a2, b2) = (c / db, c % db);
        m[(a2 * db + b, a * db + b2)]
    }))
}

/// `log₂ ‖ρ^{T_A}‖₁`, the trace norm taken from the Hermitian spectrum.
pub fn log_negativity_dm(rho2: &DensityOperator) -> Result<f64> {
    let pt = partial_transpose_dm(rho2)?;
    let norm: f64 = hermitian_eigenvalues(&pt).iter().map(|l| l.abs()).sum();
    Ok(norm.log2().max(0.0))
}

/// Quadrature operators of the two mirrors on their joint space.
#[derive(Debug, Clone)]
pub struct MirrorOperators {
    dims: Vec<usize>,
    q1: Operator,
    p1: Operator,
    q2: Operator,
    p2: Operator,
}

impl MirrorOperators {
    pub fn new(n_m1: usize, n_m2: usize) -> Self {
        let dims = vec![n_m1, n_m2];
        let (q1, p1) = quadratures(&embed(&annihilation(n_m1), 0, &dims));
        let (q2, p2) = quadratures(&embed(&annihilation(n_m2), 1, &dims));
        Self {
            dims,
            q1,
            p1,
            q2,
            p2,
        }
    }

    /// Observables from the mirrors' reduced state, in the same record as
    /// the Gaussian solver. `sync_means` keeps the first-moment part of
    /// `⟨q₋² + p₋²⟩`.
    pub fn observables(&self, rho2: &DensityOperator, sync_means: bool) -> Result<GaussianObservables> {
        if rho2.dims != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims.iter().product(),
                found: rho2.dim(),
            });
        }
        let ops = [&self.q1, &self.p1, &self.q2, &self.p2];
        let mean: Vec<f64> = ops
            .iter()
            .map(|o| expectation(rho2, o).map(|v| v.re))
            .collect::<Result<_>>()?;
        let second = |x: &Operator, y: &Operator| -> Result<f64> {
            let xy = x * y;
            let yx = y * x;
            Ok(0.5 * (expectation(rho2, &xy)?.re + expectation(rho2, &yx)?.re))
        };
        let cov = |i: usize, j: usize| -> Result<f64> {
            Ok(second(ops[i], ops[j])? - mean[i] * mean[j])
        };
        let (v_q1, v_p1, v_q2, v_p2) = (cov(0, 0)?, cov(1, 1)?, cov(2, 2)?, cov(3, 3)?);
        let mut minus = 0.5 * (v_q1 + v_q2 - 2.0 * cov(0, 2)?) + 0.5 * (v_p1 + v_p2 - 2.0 * cov(1, 3)?);
        if sync_means {
            minus += 0.5 * (mean[0] - mean[2]).powi(2) + 0.5 * (mean[1] - mean[3]).powi(2);
        }
        Ok(GaussianObservables {
            var_q1: v_q1,
            var_q2: v_q2,
            var_p1: v_p1,
            var_p2: v_p2,
            sync: 1.0 / minus,
            log_neg: log_negativity_dm(rho2)?,
            mutual_info: mutual_information_dm(rho2)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::state::{coherent_state, fock_state, thermal_state};
    use super::*;
    use crate::gaussian::{entropy_term, gaussian_entropy, logarithmic_negativity, CovarianceMatrix};
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    const ZERO: C64 = C64::new(0.0, 0.0);

    /// Two-mode squeezed vacuum `√(1−λ²) Σ λⁿ |n,n⟩`, λ = tanh r, truncated.
    fn tmsv(r: f64, n: usize) -> DensityOperator {
        let lam = r.tanh();
        let mut psi = DVector::from_element(n * n, ZERO);
        for k in 0..n {
            psi[k * n + k] = C64::new(lam.powi(k as i32), 0.0);
        }
        DensityOperator::pure(&psi, vec![n, n]).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let pure = DensityOperator::pure(&coherent_state(C64::new(0.3, -0.2), 6), vec![6]).unwrap();
        assert!(von_neumann_entropy_dm(&pure).abs() < 1e-12);
        let mixed = DensityOperator::maximally_mixed(vec![2, 3]);
        assert_relative_eq!(von_neumann_entropy_dm(&mixed), 6f64.log2(), epsilon = 1e-12);
        let th = thermal_state(1.0, 60);
        let gauss = gaussian_entropy(&CovarianceMatrix::thermal(&[1.0])).unwrap();
        assert_relative_eq!(von_neumann_entropy_dm(&th), gauss, epsilon = 1e-12);
        assert_relative_eq!(von_neumann_entropy_dm(&thermal_state(1.0, 30)), 2.0, epsilon = 1e-6);
    }

    #[test]
    fn log_negativity_examples() {
        let prod = DensityOperator::product(&[thermal_state(0.4, 3), thermal_state(1.0, 4)]).unwrap();
        assert!(log_negativity_dm(&prod).unwrap().abs() < 1e-12);
        let mut psi = DVector::from_element(9, ZERO);
        psi[0] = C64::new(1.0, 0.0);
        psi[4] = C64::new(1.0, 0.0);
        let bell = DensityOperator::pure(&psi, vec![3, 3]).unwrap();
        assert_relative_eq!(log_negativity_dm(&bell).unwrap(), 1.0, epsilon = 1e-12);
        assert!(log_negativity_dm(&thermal_state(1.0, 3)).is_err());
    }

    #[test]
    fn truncated_two_mode_squeezing_matches_gaussian_formula() {
        for r in [0.1, 0.3] {
            let rho = tmsv(r, 14);
            let en = log_negativity_dm(&rho).unwrap();
            let want = logarithmic_negativity(&CovarianceMatrix::two_mode_squeezed(r)).unwrap();
            assert_relative_eq!(en, want, max_relative = 1e-6);
            let mi = mutual_information_dm(&rho).unwrap();
            assert_relative_eq!(mi, 2.0 * entropy_term((2.0 * r).cosh() / 2.0), max_relative = 1e-6);
        }
    }

    #[test]
    fn mirror_observables_of_vacuum_and_thermal() {
        let ops = MirrorOperators::new(12, 12);
        let vac = DensityOperator::product(&[
            DensityOperator::pure(&fock_state(0, 12), vec![12]).unwrap(),
            DensityOperator::pure(&fock_state(0, 12), vec![12]).unwrap(),
        ])
        .unwrap();
        let o = ops.observables(&vac, true).unwrap();
        assert_relative_eq!(o.var_q1_ratio(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(o.sync, 1.0, epsilon = 1e-12);
        assert!(o.log_neg.abs() < 1e-12 && o.mutual_info.abs() < 1e-12);

        let th = DensityOperator::product(&[thermal_state(1.0, 12), thermal_state(1.0, 12)]).unwrap();
        let o = ops.observables(&th, true).unwrap();
        // truncation at 12 levels trims the geometric tail (q¹² ≈ 2.4e-4)
        assert_relative_eq!(o.var_q1_ratio(), 3.0, max_relative = 1e-2);
        assert_relative_eq!(o.sync, 1.0 / 3.0, max_relative = 1e-2);
        assert!(ops.observables(&thermal_state(1.0, 12), true).is_err());
    }

    #[test]
    fn displaced_mirrors_lower_sync_only_with_means() {
        let ops = MirrorOperators::new(20, 20);
        let a = DensityOperator::pure(&coherent_state(C64::new(1.0, 0.0), 20), vec![20]).unwrap();
        let b = DensityOperator::pure(&fock_state(0, 20), vec![20]).unwrap();
        let rho = DensityOperator::product(&[a, b]).unwrap();
        // ⟨q₁⟩ = √2, so the first-moment part adds (√2)²/2 = 1
        assert_relative_eq!(ops.observables(&rho, true).unwrap().sync, 0.5, epsilon = 1e-9);
        assert_relative_eq!(ops.observables(&rho, false).unwrap().sync, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn partial_transpose_swaps_first_factor() {
        let mut m = DMatrix::from_element(4, 4, ZERO);
        // |0,0⟩⟨1,1| → |1,0⟩⟨0,1|
        m[(0, 3)] = C64::new(1.0, 0.0);
        let rho = DensityOperator::new(m, vec![2, 2]).unwrap();
        let pt = partial_transpose_dm(&rho).unwrap();
        assert_eq!(pt[(2, 1)], C64::new(1.0, 0.0));
        assert_eq!(pt.iter().filter(|v| v.norm() > 0.0).count(), 1);
    }
}
