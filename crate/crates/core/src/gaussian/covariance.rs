use nalgebra::{Complex, DMatrix, Matrix6, SymmetricEigen};

use crate::error::{Error, Result};

/// Symmetric covariance matrix of `n` bosonic modes, ordered
/// `(q₁, p₁, …, q_n, p_n)` with `σ_ij = ⟨{U_i, U_j}⟩/2 − ⟨U_i⟩⟨U_j⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix(DMatrix<f64>);

const SYMMETRY_TOL: f64 = 1e-10;
const PAIRING_TOL: f64 = 1e-8;

impl CovarianceMatrix {
    /// Wraps `m` after checking shape and symmetry, then symmetrizes exactly.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 || m.nrows() % 2 != 0 {
            return Err(Error::InvalidParams(format!(
                "covariance dimension must be even and positive (got {})",
                m.nrows()
            )));
        }
        let scale = m.amax().max(1.0);
        if (&m - m.transpose()).amax() > SYMMETRY_TOL * scale {
            return Err(Error::InvalidParams("covariance matrix is not symmetric".into()));
        }
        Ok(Self::symmetrized(m))
    }

    fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        Self((m + t) * 0.5)
    }

    pub fn from_matrix6(m: &Matrix6<f64>) -> Self {
        Self::symmetrized(DMatrix::from_column_slice(6, 6, m.as_slice()))
    }

    pub fn to_matrix6(&self) -> Result<Matrix6<f64>> {
        if self.dim() != 6 {
            return Err(Error::DimensionMismatch {
                expected: 6,
                found: self.dim(),
            });
        }
        Ok(Matrix6::from_column_slice(self.0.as_slice()))
    }

    /// ½·identity over `modes` modes.
    pub fn vacuum(modes: usize) -> Self {
        Self(DMatrix::identity(2 * modes, 2 * modes) * 0.5)
    }

    /// Product of thermal states with the given mean occupancies.
    pub fn thermal(occupancies: &[f64]) -> Self {
        let diag: Vec<f64> = occupancies
            .iter()
            .flat_map(|n| [n + 0.5, n + 0.5])
            .collect();
        Self(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
    }

    /// Two-mode squeezed vacuum with squeezing `r` in standard form.
    pub fn two_mode_squeezed(r: f64) -> Self {
        let a = (2.0 * r).cosh() / 2.0;
        let c = (2.0 * r).sinh() / 2.0;
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            a, 0.0, c, 0.0,
            0.0, a, 0.0, -c,
            c, 0.0, a, 0.0,
            0.0, -c, 0.0, a,
        ]);
        Self(m)
    }

    pub fn modes(&self) -> usize {
        self.0.nrows() / 2
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Block on the given rows and columns, e.g. the modes kept by a partial trace.
    pub fn select(&self, indices: &[usize]) -> Self {
        let k = indices.len();
        Self(DMatrix::from_fn(k, k, |i, j| self.0[(indices[i], indices[j])]))
    }

    /// Congruence `S σ Sᵀ`, e.g. a symplectic transformation.
    pub fn transformed(&self, s: &DMatrix<f64>) -> Self {
        Self::symmetrized(s * &self.0 * s.transpose())
    }

    /// Smallest symplectic eigenvalue.
    pub fn nu_min(&self) -> Result<f64> {
        Ok(symplectic_eigenvalues(self)?[0])
    }

    /// `σ_qq·σ_pp − σ_qp²` for mode `k`.
    pub fn uncertainty_product(&self, k: usize) -> f64 {
        let (q, p) = (2 * k, 2 * k + 1);
        self.0[(q, q)] * self.0[(p, p)] - self.0[(q, p)].powi(2)
    }

    /// Whitespace-delimited rows, one per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|j| format!("{:.15e}", self.0[(i, j)]))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Block-diagonal symplectic form with `[[0, 1], [−1, 0]]` per mode.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        w[(2 * k, 2 * k + 1)] = 1.0;
        w[(2 * k + 1, 2 * k)] = -1.0;
    }
    w
}

/// Symplectic spectrum `ν₁ ≤ … ≤ ν_n`.
///
/// The eigenvalues `±ν_k` of `iΩσ` are obtained from the Hermitian matrix
/// `i·σ^{1/2} Ω σ^{1/2}`, which shares them.
pub fn symplectic_eigenvalues(sigma: &CovarianceMatrix) -> Result<Vec<f64>> {
    let n = sigma.modes();
    if n == 1 {
        let det = sigma.0[(0, 0)] * sigma.0[(1, 1)] - sigma.0[(0, 1)] * sigma.0[(1, 0)];
        if !(det > 0.0) || !(sigma.0[(0, 0)] > 0.0) {
            return Err(Error::NumericalDegeneracy(format!(
                "single-mode covariance is not positive definite (det = {det:.3e})"
            )));
        }
        return Ok(vec![det.sqrt()]);
    }

    let eig = SymmetricEigen::new(sigma.0.clone());
    let lmin = eig.eigenvalues.min();
    if !(lmin > 0.0) {
        return Err(Error::NumericalDegeneracy(format!(
            "covariance is not positive definite (min eigenvalue {lmin:.3e})"
        )));
    }
    let root = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
        * eig.eigenvectors.transpose();
    let m = &root * symplectic_form(n) * &root;
    let h: DMatrix<Complex<f64>> = m.map(|v| Complex::new(0.0, v));
    let mut lam: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    lam.sort_by(|a, b| a.total_cmp(b));

    let d = lam.len();
    let mut nus = Vec::with_capacity(n);
    for k in 0..n {
        let (neg, pos) = (lam[k], lam[d - 1 - k]);
        if (neg + pos).abs() > PAIRING_TOL * pos.abs().max(1.0) || pos <= 0.0 {
            return Err(Error::NumericalDegeneracy(format!(
                "symplectic eigenvalues failed to pair: {neg:.12} vs {pos:.12}"
            )));
        }
        nus.push(0.5 * (pos - neg));
    }
    nus.sort_by(|a, b| a.total_cmp(b));
    Ok(nus)
}
