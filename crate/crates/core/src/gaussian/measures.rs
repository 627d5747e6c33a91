use nalgebra::DMatrix;

use super::covariance::{symplectic_eigenvalues, CovarianceMatrix};
use crate::error::Result;
use crate::meanfield::MeanFieldState;
use crate::model::{P1, P2, Q1, Q2};

/// `σ_ii / ½`: variance in units of the zero-point level.
pub fn quadrature_variance_ratio(sigma: &CovarianceMatrix, index: usize) -> f64 {
    sigma.get(index, index) / 0.5
}

/// `S = 1/⟨q₋² + p₋²⟩` with `q₋ = (q₁ − q₂)/√2`, `p₋ = (p₁ − p₂)/√2`.
///
/// Second moments include the squared means of `q₋` and `p₋`; pass
/// `None` for central moments only.
pub fn synchronization_measure(sigma: &CovarianceMatrix, means: Option<&MeanFieldState>) -> f64 {
    let var = |a: usize, b: usize| {
        0.5 * (sigma.get(a, a) + sigma.get(b, b) - 2.0 * sigma.get(a, b))
    };
    let mut total = var(Q1, Q2) + var(P1, P2);
    if let Some(m) = means {
        total += 0.5 * (m.q1 - m.q2).powi(2) + 0.5 * (m.p1 - m.p2).powi(2);
    }
    1.0 / total
}

/// Rows and columns of the two mirrors, `(q₁, p₁, q₂, p₂)`.
pub fn reduced_mirror_block(sigma: &CovarianceMatrix) -> CovarianceMatrix {
    sigma.select(&[Q1, P1, Q2, P2])
}

/// Partial transpose of the second mode of a two-mode state (`p₂ → −p₂`).
pub fn partial_transpose(sigma2: &CovarianceMatrix) -> CovarianceMatrix {
    let flip = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 1.0, -1.0]));
    sigma2.transformed(&flip)
}

/// `max(0, −log₂ 2ν̃₋)` from the smallest symplectic eigenvalue of the
/// partially transposed state.
pub fn logarithmic_negativity(sigma2: &CovarianceMatrix) -> Result<f64> {
    let nu = symplectic_eigenvalues(&partial_transpose(sigma2))?[0];
    Ok((-(2.0 * nu).log2()).max(0.0))
}

/// `f(ν) = (ν+½)log₂(ν+½) − (ν−½)log₂(ν−½)`, taken as 0 at or below ½
/// (and within 1e-12 above it, the eigen-solver's noise level).
pub fn entropy_term(nu: f64) -> f64 {
    if nu <= 0.5 + 1e-12 {
        return 0.0;
    }
    let (a, b) = (nu + 0.5, nu - 0.5);
    a * a.log2() - b * b.log2()
}

/// Von Neumann entropy in bits.
pub fn gaussian_entropy(sigma: &CovarianceMatrix) -> Result<f64> {
    Ok(symplectic_eigenvalues(sigma)?.into_iter().map(entropy_term).sum())
}

/// `I = S(A) + S(B) − S(AB)` for a two-mode state. Not clipped at zero: a
/// negative value flags a state outside the physical set.
pub fn mutual_information(sigma2: &CovarianceMatrix) -> Result<f64> {
    let a = gaussian_entropy(&sigma2.select(&[0, 1]))?;
    let b = gaussian_entropy(&sigma2.select(&[2, 3]))?;
    let ab = gaussian_entropy(sigma2)?;
    Ok(a + b - ab)
}
