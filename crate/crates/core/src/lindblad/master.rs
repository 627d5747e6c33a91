use nalgebra::DMatrix;

use std::cell::RefCell;

use super::ops::{
    add_times_adjoint, adjoint, build_operators, combine, hamiltonian_parts, spmm, FockConfig,
    Monomial, Operator, PairedOperator, C64,
};
use super::state::DensityOperator;
use crate::error::{Error, Result};
use crate::model::{modulation_factor, SystemParams};
use crate::ode::{Control, Dopri5, IntegrationStats, OdeSystem, Tolerances};
use crate::trajectory::{TimeGrid, Trajectory};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// What to do when a top Fock level fills beyond the leak threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum LeakPolicy {
    /// Record the first leak and keep integrating.
    Warn,
    /// Stop with [`Error::TruncationLeak`].
    Abort,
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct MasterOptions {
    pub tol: Tolerances,
    pub leak_threshold: f64,
    pub leak_policy: LeakPolicy,
}

impl Default for MasterOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::new(1e-8, 1e-10),
            leak_threshold: 1e-3,
            leak_policy: LeakPolicy::Warn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LeakEvent {
    pub t: f64,
    /// 0 = cavity, 1 = mirror 1, 2 = mirror 2.
    pub mode: usize,
    pub population: f64,
}

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct MasterReport {
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub rhs_evals: usize,
    /// First sample at which a top level exceeded the threshold.
    pub first_leak: Option<LeakEvent>,
    /// Largest top-level population seen per mode.
    pub max_top_population: Vec<f64>,
    /// Largest `|tr ρ − 1|` at a sample, before renormalization.
    pub max_trace_drift: f64,
    /// Largest Hermiticity error at a sample, before symmetrization.
    pub max_hermiticity_error: f64,
}

impl MasterReport {
    fn absorb(&mut self, s: &IntegrationStats) {
        self.steps_accepted = s.accepted;
        self.steps_rejected = s.rejected;
        self.rhs_evals = s.rhs_evals;
    }
}

/// Right-hand side of the master equation, stored as
/// `dρ = −i(H_eff ρ − ρ H_eff†) + Σ 2γ LρL†` with `H_eff = H − iΣγL†L`.
enum Jump {
    Monomial(Monomial),
    General(Operator),
}

pub struct LindbladSystem {
    dim: usize,
    /// `H_eff` without the modulation, paired with the modulated part.
    hamiltonian: PairedOperator,
    jumps: Vec<(f64, Jump)>,
    params: SystemParams,
    scratch: RefCell<Vec<C64>>,
}

impl LindbladSystem {
    pub fn new(params: &SystemParams, cfg: &FockConfig) -> Result<Self> {
        cfg.validate()?;
        let ops = build_operators(cfg);
        let (h0, hm) = hamiltonian_parts(params, &ops);
        let jumps = vec![
            (params.kappa, ops.a.clone()),
            (params.gamma_m1, ops.b1.clone()),
            (params.gamma_m2, ops.b2.clone()),
        ];
        let d = cfg.dim();
        let decay: Vec<(C64, Operator)> = jumps
            .iter()
            .map(|(g, l)| (C64::new(0.0, -g), &adjoint(l) * l))
            .collect();
        let mut terms: Vec<(C64, &Operator)> = vec![(ONE, &h0)];
        terms.extend(decay.iter().map(|(c, op)| (*c, op)));
        Ok(Self {
            dim: d,
            hamiltonian: PairedOperator::new(&combine(&terms, d), &hm),
            jumps: jumps
                .into_iter()
                .filter(|(g, _)| *g != 0.0)
                .map(|(g, l)| (g, Monomial::new(&l).map_or(Jump::General(l), Jump::Monomial)))
                .collect(),
            params: *params,
            scratch: RefCell::new(vec![ZERO; d * d]),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evaluates dρ/dt for a Hermitian ρ stored row-major.
    pub fn apply(&self, t: f64, rho: &[C64], out: &mut [C64]) {
        let d = self.dim;
        let mut x = self.scratch.borrow_mut();
        let c = C64::new(modulation_factor(&self.params, t) - 1.0, 0.0);
        self.hamiltonian.apply(c, rho, &mut x);
        let mi = C64::new(0.0, -1.0);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = mi * (x[i * d + j] - x[j * d + i].conj());
            }
        }
        for (g, l) in &self.jumps {
            match l {
                Jump::Monomial(m) => m.add_sandwich(rho, 2.0 * g, d, out),
                Jump::General(l) => {
                    spmm(l, rho, &mut x);
                    add_times_adjoint(l, &x, 2.0 * g, out);
                }
            }
        }
    }
}

impl OdeSystem for LindbladSystem {
    type Scalar = C64;
    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        self.apply(t, y, dy);
    }
}

fn check_dims(rho: &DensityOperator, cfg: &FockConfig) -> Result<()> {
    if rho.dims != cfg.dims() {
        return Err(Error::DimensionMismatch {
            expected: cfg.dim(),
            found: rho.dim(),
        });
    }
    Ok(())
}

/// `dρ/dt` as a dense matrix; builds the operators on every call.
pub fn lindblad_rhs(
    rho: &DensityOperator,
    t: f64,
    params: &SystemParams,
    cfg: &FockConfig,
) -> Result<DMatrix<C64>> {
    check_dims(rho, cfg)?;
    let sys = LindbladSystem::new(params, cfg)?;
    let d = rho.dim();
    let mut out = vec![ZERO; d * d];
    sys.apply(t, rho.matrix.transpose().as_slice(), &mut out);
    Ok(DMatrix::from_row_slice(d, d, &out))
}

/// Integrates the master equation and hands each sample to `on_sample`.
/// At every sample ρ is made exactly Hermitian with unit trace and the
/// top-level populations are checked against the leak threshold.
pub fn simulate_master_equation<F>(
    rho0: &DensityOperator,
    times: &[f64],
    params: &SystemParams,
    cfg: &FockConfig,
    opts: &MasterOptions,
    mut on_sample: F,
) -> Result<MasterReport>
where
    F: FnMut(f64, &DensityOperator) -> Result<Control>,
{
    check_dims(rho0, cfg)?;
    rho0.validate()?;
    let sys = LindbladSystem::new(params, cfg)?;
    let mut y: Vec<C64> = rho0.matrix.transpose().as_slice().to_vec();
    let d = rho0.dim();
    let dims = cfg.dims();
    let mut report = MasterReport {
        max_top_population: vec![0.0; 3],
        ..Default::default()
    };
    let stats = Dopri5::new(opts.tol).integrate(&sys, &mut y, times, |_, t, y| {
        let mut rho = DensityOperator {
            matrix: DMatrix::from_row_slice(d, d, y),
            dims: dims.clone(),
        };
        report.max_trace_drift = report.max_trace_drift.max((rho.trace() - ONE).norm());
        report.max_hermiticity_error = report.max_hermiticity_error.max(rho.hermiticity_error());
        rho.normalize();
        y.copy_from_slice(rho.matrix.transpose().as_slice());
        for (mode, pop) in rho.top_level_populations().into_iter().enumerate() {
            report.max_top_population[mode] = report.max_top_population[mode].max(pop);
            if pop > opts.leak_threshold {
                if opts.leak_policy == LeakPolicy::Abort {
                    return Err(Error::TruncationLeak {
                        t,
                        mode,
                        population: pop,
                    });
                }
                if report.first_leak.is_none() {
                    report.first_leak = Some(LeakEvent {
                        t,
                        mode,
                        population: pop,
                    });
                }
            }
        }
        on_sample(t, &rho)
    })?;
    report.absorb(&stats);
    Ok(report)
}

/// Collects every sample; memory grows as `samples × dim²`.
pub fn integrate_master_equation(
    rho0: &DensityOperator,
    grid: &TimeGrid,
    params: &SystemParams,
    cfg: &FockConfig,
    opts: &MasterOptions,
) -> Result<(Trajectory<DensityOperator>, MasterReport)> {
    let times = grid.times();
    let mut out = Trajectory::with_capacity(times.len());
    let report = simulate_master_equation(rho0, &times, params, cfg, opts, |t, rho| {
        out.push(t, rho.clone());
        Ok(Control::Continue)
    })?;
    Ok((out, report))
}
