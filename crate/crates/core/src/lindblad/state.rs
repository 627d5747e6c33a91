use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::ops::{Operator, C64};
use crate::error::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Density operator on a product of truncated Fock spaces; `dims` gives the
/// per-mode truncations in tensor order.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    pub matrix: DMatrix<C64>,
    pub dims: Vec<usize>,
}

impl DensityOperator {
    pub fn new(matrix: DMatrix<C64>, dims: Vec<usize>) -> Result<Self> {
        let d: usize = dims.iter().product();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self { matrix, dims })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `|ψ⟩⟨ψ|` for a normalized copy of `psi`.
    pub fn pure(psi: &DVector<C64>, dims: Vec<usize>) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidParams("state vector has zero norm".into()));
        }
        let v = psi / C64::new(norm, 0.0);
        Self::new(&v * v.adjoint(), dims)
    }

    /// Tensor product in the given order.
    pub fn product(parts: &[DensityOperator]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParams("empty product".into()))?;
        let mut m = first.matrix.clone();
        let mut dims = first.dims.clone();
        for p in &parts[1..] {
            m = m.kronecker(&p.matrix);
            dims.extend_from_slice(&p.dims);
        }
        Self::new(m, dims)
    }

    /// Maximally mixed state on the given dims.
    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        Self {
            matrix: DMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0),
            dims,
        }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Largest entry of `ρ − ρ†`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let d = self.dim();
        for j in 0..d {
            for i in 0..=j {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// Checks Hermiticity (1e-10), unit trace (1e-8) and eigenvalues ≥ −1e-8.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-10 {
            return Err(Error::InvalidParams(format!("density operator not Hermitian ({herm:.3e})")));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-8 {
            return Err(Error::InvalidParams(format!("trace {tr} differs from 1")));
        }
        let lmin = self.eigenvalues()[0];
        if lmin < -1e-8 {
            return Err(Error::InvalidParams(format!("negative eigenvalue {lmin:.3e}")));
        }
        Ok(())
    }

    /// Replaces ρ by `(ρ + ρ†)/2` divided by its trace.
    pub fn normalize(&mut self) {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let tr = h.trace().re;
        self.matrix = h / C64::new(tr, 0.0);
    }

    /// Population of the top Fock level of each mode.
    pub fn top_level_populations(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dims.len()];
        for i in 0..self.dim() {
            let p = self.matrix[(i, i)].re;
            for (k, (digit, n)) in digits(i, &self.dims).zip(&self.dims).enumerate() {
                if digit == n - 1 {
                    out[k] += p;
                }
            }
        }
        out
    }

    /// Rows of `(re,im)` pairs separated by spaces.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let v = self.matrix[(i, j)];
                if j > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "({:.12e},{:.12e})", v.re, v.im);
            }
            s.push('\n');
        }
        s
    }
}

/// Mixed-radix digits of a product-space index, most significant first.
pub(crate) fn digits(index: usize, dims: &[usize]) -> impl Iterator<Item = usize> + '_ {
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    (0..dims.len()).map(move |k| (index / strides[k]) % dims[k])
}

/// Coherent state `|α⟩` truncated to `n` levels and renormalized.
pub fn coherent_state(alpha: C64, n: usize) -> DVector<C64> {
    let mut v = DVector::from_element(n, ZERO);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for k in 0..n {
        if k > 0 {
            c *= alpha / (k as f64).sqrt();
        }
        v[k] = c;
    }
    let norm = v.norm();
    v / C64::new(norm, 0.0)
}

/// Number state `|k⟩` in `n` levels.
pub fn fock_state(k: usize, n: usize) -> DVector<C64> {
    let mut v = DVector::from_element(n, ZERO);
    v[k.min(n - 1)] = C64::new(1.0, 0.0);
    v
}

/// Thermal state with mean occupation `nbar`, truncated and renormalized.
pub fn thermal_state(nbar: f64, n: usize) -> DensityOperator {
    let q = if nbar > 0.0 { nbar / (nbar + 1.0) } else { 0.0 };
    let w: Vec<f64> = (0..n).map(|k| q.powi(k as i32)).collect();
    let z: f64 = w.iter().sum();
    let diag = DVector::from_iterator(n, w.iter().map(|x| C64::new(x / z, 0.0)));
    DensityOperator {
        matrix: DMatrix::from_diagonal(&diag),
        dims: vec![n],
    }
}

/// `tr(ρ·op)`.
pub fn expectation(rho: &DensityOperator, op: &Operator) -> Result<C64> {
    if op.nrows() != rho.dim() || op.ncols() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: op.nrows(),
        });
    }
    let mut acc = ZERO;
    for (i, j, v) in op.triplet_iter() {
        acc += rho.matrix[(j, i)] * v;
    }
    Ok(acc)
}

/// Reduced state on the modes listed in `keep` (in their original order).
pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DensityOperator> {
    let m = rho.dims.len();
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() || keep.iter().any(|&k| k >= m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: keep.iter().copied().max().unwrap_or(0) + 1,
        });
    }
    let kept_dims: Vec<usize> = keep.iter().map(|&k| rho.dims[k]).collect();
    let dk: usize = kept_dims.iter().product();

    // split each index into (kept index, traced index)
    let mut groups: std::collections::BTreeMap<usize, Vec<(usize, usize)>> = Default::default();
    for i in 0..rho.dim() {
        let (mut ki, mut ri) = (0usize, 0usize);
        for (k, digit) in digits(i, &rho.dims).enumerate() {
            if keep.contains(&k) {
                ki = ki * rho.dims[k] + digit;
            } else {
                ri = ri * rho.dims[k] + digit;
            }
        }
        groups.entry(ri).or_default().push((i, ki));
    }
    let mut out = DMatrix::from_element(dk, dk, ZERO);
    for members in groups.values() {
        for &(i, ki) in members {
            for &(j, kj) in members {
                out[(ki, kj)] += rho.matrix[(i, j)];
            }
        }
    }
    DensityOperator::new(out, kept_dims)
}


/// Sorted spectrum of the Hermitian part of `m`.
///
/// Rows that are exactly zero are split off as zero eigenvalues, and the
/// rest goes through the real symmetric form `[[A, −B], [B, A]]` of
/// `A + iB`, whose spectrum is that of `A + iB` with every value doubled.
/// The eigensolver returns NaN on low-rank matrices with zero rows.
pub(crate) fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let n = m.nrows();
    let h = |i: usize, j: usize| (m[(i, j)] + m[(j, i)].conj()) * 0.5;
    let keep: Vec<usize> = (0..n)
        .filter(|&i| (0..n).any(|j| h(i, j) != C64::new(0.0, 0.0)))
        .collect();
    let k = keep.len();
    let real = DMatrix::from_fn(2 * k, 2 * k, |r, c| {
        let v = h(keep[r % k], keep[c % k]);
        match (r < k, c < k) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    });
    let mut ev: Vec<f64> = SymmetricEigen::new(real).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    let mut ev: Vec<f64> = ev.into_iter().step_by(2).collect();
    ev.resize(n, 0.0);
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}
