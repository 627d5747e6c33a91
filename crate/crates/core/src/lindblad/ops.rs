use nalgebra::Complex;
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::SystemParams;

pub type C64 = Complex<f64>;

/// Sparse operator on a truncated Fock space.
pub type Operator = CsrMatrix<C64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Truncations of the cavity and the two mirrors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct FockConfig {
    pub n_cav: usize,
    pub n_m1: usize,
    pub n_m2: usize,
    /// Upper bound on the product dimension.
    pub budget: usize,
}

impl FockConfig {
    pub const DEFAULT_BUDGET: usize = 20_000;

    pub fn new(n_cav: usize, n_m1: usize, n_m2: usize) -> Result<Self> {
        let cfg = Self {
            n_cav,
            n_m1,
            n_m2,
            budget: Self::DEFAULT_BUDGET,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_budget(mut self, budget: usize) -> Result<Self> {
        self.budget = budget;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("n_cav", self.n_cav), ("n_m1", self.n_m1), ("n_m2", self.n_m2)] {
            if n < 2 {
                return Err(Error::InvalidParams(format!("{name} must be >= 2 (got {n})")));
            }
        }
        let dim = self.n_cav.saturating_mul(self.n_m1).saturating_mul(self.n_m2);
        if dim > self.budget {
            return Err(Error::InvalidParams(format!(
                "Fock dimension {dim} exceeds the budget of {}",
                self.budget
            )));
        }
        Ok(())
    }

    /// Per-mode truncations in tensor order (cavity, mirror 1, mirror 2).
    pub fn dims(&self) -> Vec<usize> {
        vec![self.n_cav, self.n_m1, self.n_m2]
    }

    pub fn dim(&self) -> usize {
        self.n_cav * self.n_m1 * self.n_m2
    }
}

/// Truncated annihilation operator, `⟨n−1|b|n⟩ = √n`.
pub fn annihilation(n: usize) -> Operator {
    let mut coo = CooMatrix::new(n, n);
    for k in 1..n {
        coo.push(k - 1, k, C64::new((k as f64).sqrt(), 0.0));
    }
    CsrMatrix::from(&coo)
}

pub fn identity(n: usize) -> Operator {
    CsrMatrix::identity(n)
}

pub fn zero(n: usize) -> Operator {
    CsrMatrix::zeros(n, n)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    let (br, bc) = (b.nrows(), b.ncols());
    let mut coo = CooMatrix::new(a.nrows() * br, a.ncols() * bc);
    for (i, j, va) in a.triplet_iter() {
        for (k, l, vb) in b.triplet_iter() {
            coo.push(i * br + k, j * bc + l, va * vb);
        }
    }
    CsrMatrix::from(&coo)
}

pub fn adjoint(a: &Operator) -> Operator {
    let mut t = a.transpose();
    for v in t.values_mut() {
        *v = v.conj();
    }
    t
}

pub fn scaled(a: &Operator, c: C64) -> Operator {
    let mut m = a.clone();
    for v in m.values_mut() {
        *v *= c;
    }
    m
}

/// Sum of scaled operators.
pub fn combine(terms: &[(C64, &Operator)], n: usize) -> Operator {
    let mut acc = zero(n);
    for (c, op) in terms {
        if *c != ZERO {
            acc = &acc + &scaled(op, *c);
        }
    }
    prune(&acc)
}

/// Drops stored entries that are exactly zero, e.g. the cancelled
/// off-diagonals of `q² + p²`.
fn prune(op: &Operator) -> Operator {
    let mut coo = CooMatrix::new(op.nrows(), op.ncols());
    for (i, j, v) in op.triplet_iter() {
        if *v != ZERO {
            coo.push(i, j, *v);
        }
    }
    CsrMatrix::from(&coo)
}

/// Places a single-mode operator at position `mode` of the product space.
pub fn embed(op: &Operator, mode: usize, dims: &[usize]) -> Operator {
    let mut out = if mode == 0 { op.clone() } else { identity(dims[0]) };
    for (k, &d) in dims.iter().enumerate().skip(1) {
        out = if k == mode { kron(&out, op) } else { kron(&out, &identity(d)) };
    }
    out
}

/// Position and momentum from an annihilation operator:
/// `q = (b + b†)/√2`, `p = (b − b†)/(i√2)`.
pub fn quadratures(b: &Operator) -> (Operator, Operator) {
    let bd = adjoint(b);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let q = &scaled(b, C64::new(s, 0.0)) + &scaled(&bd, C64::new(s, 0.0));
    let p = &scaled(b, C64::new(0.0, -s)) + &scaled(&bd, C64::new(0.0, s));
    (q, p)
}

/// Ladder and quadrature operators of the three modes on the product space.
#[derive(Debug, Clone)]
pub struct Operators {
    pub cfg: FockConfig,
    pub a: Operator,
    pub b1: Operator,
    pub b2: Operator,
    pub q1: Operator,
    pub p1: Operator,
    pub q2: Operator,
    pub p2: Operator,
    pub n_cav: Operator,
}

pub fn build_operators(cfg: &FockConfig) -> Operators {
    let dims = cfg.dims();
    let a = embed(&annihilation(cfg.n_cav), 0, &dims);
    let b1 = embed(&annihilation(cfg.n_m1), 1, &dims);
    let b2 = embed(&annihilation(cfg.n_m2), 2, &dims);
    let (q1, p1) = quadratures(&b1);
    let (q2, p2) = quadratures(&b2);
    let n_cav = &adjoint(&a) * &a;
    Operators {
        cfg: *cfg,
        a,
        b1,
        b2,
        q1,
        p1,
        q2,
        p2,
        n_cav,
    }
}

/// Time-independent part of H and the modulated `(ω/2)q₁²` piece, so that
/// `H(t) = static + ε sin²(Ωt)·modulated`.
pub(crate) fn hamiltonian_parts(params: &SystemParams, ops: &Operators) -> (Operator, Operator) {
    let d = ops.cfg.dim();
    let half = |x: f64| C64::new(0.5 * x, 0.0);
    let q1sq = &ops.q1 * &ops.q1;
    let p1sq = &ops.p1 * &ops.p1;
    let q2sq = &ops.q2 * &ops.q2;
    let p2sq = &ops.p2 * &ops.p2;
    let pressure = &ops.n_cav * &(&ops.q1 + &ops.q2);
    let drive = &adjoint(&ops.a) - &ops.a;
    let w2 = params.omega_m2();
    let static_part = combine(
        &[
            (C64::new(params.delta, 0.0), &ops.n_cav),
            (half(params.omega_m), &p1sq),
            (half(params.omega_m), &q1sq),
            (half(w2), &p2sq),
            (half(w2), &q2sq),
            (C64::new(-params.g, 0.0), &pressure),
            (C64::new(0.0, params.drive_e), &drive),
        ],
        d,
    );
    let modulated = scaled(&q1sq, half(params.omega_m));
    (static_part, modulated)
}

/// `H(t) = Δa†a + (ω/2)(p₁² + q₁²(1 + ε sin²Ωt)) + (ω₂/2)(p₂² + q₂²)
///        − g a†a(q₁ + q₂) + iE(a† − a)`.
pub fn build_hamiltonian(params: &SystemParams, cfg: &FockConfig, t: f64) -> Operator {
    let ops = build_operators(cfg);
    let (h0, hm) = hamiltonian_parts(params, &ops);
    let s = (params.mod_omega * t).sin();
    let c = params.mod_eps * s * s;
    combine(&[(ONE, &h0), (C64::new(c, 0.0), &hm)], cfg.dim())
}

/// `out = a · x` for a row-major `d × d` dense `x`, accumulated as one
/// contiguous row update per stored entry; rows of `out` in parallel.
pub(crate) fn spmm(a: &Operator, x: &[C64], out: &mut [C64]) {
    let d = a.nrows();
    let offsets = a.row_offsets();
    let cols = a.col_indices();
    let vals = a.values();
    out.par_chunks_mut(d).enumerate().for_each(|(i, yr)| {
        yr.fill(ZERO);
        for k in offsets[i]..offsets[i + 1] {
            let v = vals[k];
            let xr = &x[cols[k] * d..(cols[k] + 1) * d];
            for (y, xv) in yr.iter_mut().zip(xr) {
                *y += v * xv;
            }
        }
    });
}

/// Two operators stored on their joint sparsity pattern, so that
/// `(a + c·b)·x` costs one pass.
#[derive(Debug, Clone)]
pub(crate) struct PairedOperator {
    dim: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    a: Vec<C64>,
    b: Vec<C64>,
}

impl PairedOperator {
    pub(crate) fn new(a: &Operator, b: &Operator) -> Self {
        let mut entries: std::collections::BTreeMap<(usize, usize), (C64, C64)> = Default::default();
        for (i, j, v) in a.triplet_iter() {
            entries.entry((i, j)).or_insert((ZERO, ZERO)).0 += *v;
        }
        for (i, j, v) in b.triplet_iter() {
            entries.entry((i, j)).or_insert((ZERO, ZERO)).1 += *v;
        }
        let dim = a.nrows();
        let mut offsets = vec![0; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let (mut va, mut vb) = (Vec::with_capacity(entries.len()), Vec::with_capacity(entries.len()));
        for ((i, j), (x, y)) in entries {
            offsets[i + 1] += 1;
            cols.push(j);
            va.push(x);
            vb.push(y);
        }
        for i in 0..dim {
            offsets[i + 1] += offsets[i];
        }
        Self {
            dim,
            offsets,
            cols,
            a: va,
            b: vb,
        }
    }

    /// `out = (a + c·b)·x` for row-major `x`.
    pub(crate) fn apply(&self, c: C64, x: &[C64], out: &mut [C64]) {
        let d = self.dim;
        out.par_chunks_mut(d).enumerate().for_each(|(i, yr)| {
            yr.fill(ZERO);
            for k in self.offsets[i]..self.offsets[i + 1] {
                let v = self.a[k] + c * self.b[k];
                let xr = &x[self.cols[k] * d..(self.cols[k] + 1) * d];
                for (y, xv) in yr.iter_mut().zip(xr) {
                    *y += v * xv;
                }
            }
        });
    }
}

/// Operator with at most one stored entry per row, such as a shifted
/// annihilation operator; `L ρ L†` is then a single gather.
#[derive(Debug, Clone)]
pub(crate) struct Monomial {
    /// `(row, column, value)` for every non-empty row.
    entries: Vec<(usize, usize, C64)>,
}

impl Monomial {
    pub(crate) fn new(op: &Operator) -> Option<Self> {
        let offsets = op.row_offsets();
        let mut entries = Vec::new();
        for i in 0..op.nrows() {
            match offsets[i + 1] - offsets[i] {
                0 => {}
                1 => entries.push((i, op.col_indices()[offsets[i]], op.values()[offsets[i]])),
                _ => return None,
            }
        }
        Some(Self { entries })
    }

    /// `out += w · L x L†` for row-major `x` of side `d`.
    pub(crate) fn add_sandwich(&self, x: &[C64], w: f64, d: usize, out: &mut [C64]) {
        let rows: Vec<Option<(usize, C64)>> = {
            let mut r = vec![None; d];
            for &(i, c, v) in &self.entries {
                r[i] = Some((c, v));
            }
            r
        };
        out.par_chunks_mut(d).enumerate().for_each(|(i, zr)| {
            let Some((ci, vi)) = rows[i] else { return };
            let xr = &x[ci * d..(ci + 1) * d];
            let vi = vi * w;
            for &(j, cj, vj) in &self.entries {
                zr[j] += vi * xr[cj] * vj.conj();
            }
        });
    }
}

/// `out += w · y · l†` for row-major `y`.
pub(crate) fn add_times_adjoint(l: &Operator, y: &[C64], w: f64, out: &mut [C64]) {
    let d = l.nrows();
    let offsets = l.row_offsets();
    let cols = l.col_indices();
    let vals = l.values();
    out.par_chunks_mut(d)
        .zip(y.par_chunks(d))
        .for_each(|(zr, yr)| {
            for (j, z) in zr.iter_mut().enumerate() {
                let mut acc = ZERO;
                for k in offsets[j]..offsets[j + 1] {
                    acc += yr[cols[k]] * vals[k].conj();
                }
                *z += acc * w;
            }
        });
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dense(op: &Operator) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(op.nrows(), op.ncols(), ZERO);
        for (i, j, v) in op.triplet_iter() {
            m[(i, j)] += *v;
        }
        m
    }

    #[test]
    fn two_level_annihilation() {
        let a = dense(&annihilation(2));
        assert_eq!(a[(0, 1)], ONE);
        assert_eq!(a[(0, 0)], ZERO);
        assert_eq!(a[(1, 0)], ZERO);
        assert_eq!(a[(1, 1)], ZERO);
    }

    #[test]
    fn commutator_is_identity_below_cutoff() {
        let n = 6;
        let a = annihilation(n);
        let ad = adjoint(&a);
        let comm = dense(&(&(&a * &ad) - &(&ad * &a)));
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let want = if i == j { ONE } else { ZERO };
                assert!((comm[(i, j)] - want).norm() < 1e-14);
            }
        }
        assert!((comm[(n - 1, n - 1)] - C64::new(1.0 - n as f64, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn q_squared_plus_p_squared_is_number_plus_half() {
        // q² + p² = 2b†b + 1 away from the cutoff edge
        let n = 7;
        let b = annihilation(n);
        let (q, p) = quadratures(&b);
        let lhs = dense(&(&(&q * &q) + &(&p * &p)));
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let want = if i == j { C64::new(2.0 * i as f64 + 1.0, 0.0) } else { ZERO };
                assert!((lhs[(i, j)] - want).norm() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn kron_and_embed_layout() {
        let a = annihilation(2);
        let k = dense(&kron(&a, &identity(3)));
        assert_eq!(k.nrows(), 6);
        // |1,j⟩ → |0,j⟩
        for j in 0..3 {
            assert_eq!(k[(j, 3 + j)], ONE);
        }
        let dims = [2, 3, 4];
        let e = embed(&annihilation(3), 1, &dims);
        assert_eq!(e.nrows(), 24);
        // index = i0*12 + i1*4 + i2; lowers the middle digit
        let m = dense(&e);
        assert!((m[(4, 8)] - C64::new(2f64.sqrt(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn hamiltonian_examples() {
        let cfg = FockConfig::new(3, 3, 2).unwrap();
        let h = build_hamiltonian(&SystemParams::zeroed(), &cfg, 0.7);
        assert!(h.values().iter().all(|v| v.norm() == 0.0));

        let p = SystemParams {
            delta: 1.0,
            ..SystemParams::zeroed()
        };
        let h = dense(&build_hamiltonian(&p, &cfg, 0.0));
        let n = dense(&build_operators(&cfg).n_cav);
        assert!((h - n).iter().all(|v| v.norm() < 1e-15));

        let p = SystemParams::default();
        let t = 0.37;
        let h1 = dense(&build_hamiltonian(&p, &cfg, t));
        let h2 = dense(&build_hamiltonian(&p, &cfg, t + p.modulation_period()));
        assert!((&h1 - &h2).iter().all(|v| v.norm() < 1e-12));
        assert!((&h1 - h1.adjoint()).iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn fock_config_validation() {
        assert!(FockConfig::new(1, 3, 3).is_err());
        assert!(FockConfig::new(30, 30, 30).is_err());
        assert!(FockConfig::new(30, 30, 30).is_err());
        let c = FockConfig::new(4, 4, 4).unwrap();
        assert!(c.with_budget(63).is_err());
        assert_eq!(c.dim(), 64);
    }

    #[test]
    fn paired_and_adjoint_kernels_match_dense() {
        let cfg = FockConfig::new(3, 3, 2).unwrap();
        let ops = build_operators(&cfg);
        let (h0, hm) = hamiltonian_parts(&SystemParams::default(), &ops);
        let d = cfg.dim();
        let x = DMatrix::from_fn(d, d, |i, j| C64::new((i * 5 + j) as f64 * 0.01, (j as f64) - 0.3 * i as f64));
        let c = C64::new(0.37, 0.0);
        let mut out = vec![ZERO; d * d];
        PairedOperator::new(&h0, &hm).apply(c, x.transpose().as_slice(), &mut out);
        let want = ((dense(&h0) + dense(&hm) * c) * &x).transpose();
        assert!(out.iter().zip(want.as_slice()).all(|(a, b)| (a - b).norm() < 1e-12));

        let mut acc = vec![ONE; d * d];
        Monomial::new(&ops.b1).unwrap().add_sandwich(x.transpose().as_slice(), 0.5, d, &mut acc);
        let b1 = dense(&ops.b1);
        let want = (&b1 * &x * b1.adjoint() * C64::new(0.5, 0.0)).add_scalar(ONE).transpose();
        assert!(acc.iter().zip(want.as_slice()).all(|(a, b)| (a - b).norm() < 1e-12));
        assert!(Monomial::new(&ops.q1).is_none());

        let mut acc = vec![ONE; d * d];
        add_times_adjoint(&ops.b1, x.transpose().as_slice(), 0.5, &mut acc);
        let want = (&x * dense(&ops.b1).adjoint() * C64::new(0.5, 0.0)).add_scalar(ONE).transpose();
        assert!(acc.iter().zip(want.as_slice()).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn spmm_matches_dense_product() {
        let cfg = FockConfig::new(3, 2, 2).unwrap();
        let h = build_hamiltonian(&SystemParams::default(), &cfg, 0.2);
        let d = cfg.dim();
        let x = DMatrix::from_fn(d, d, |i, j| C64::new((i * 7 + j) as f64 * 0.1, (i as f64) - 0.5 * j as f64));
        let mut out = vec![ZERO; d * d];
        spmm(&h, x.transpose().as_slice(), &mut out);
        let want = (dense(&h) * &x).transpose();
        for (a, b) in out.iter().zip(want.as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
