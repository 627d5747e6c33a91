use std::collections::VecDeque;

use nalgebra::{Complex, DMatrix, DVector, Matrix6};

use super::covariance::{symplectic_eigenvalues, CovarianceMatrix};
use crate::error::{Error, Result};
use crate::meanfield::{classical_rhs, MeanFieldState};
use crate::model::{build_diffusion_matrix, build_drift_matrix, SystemParams};
use crate::ode::{Control, Dopri5, OdeSystem, Tolerances};
use crate::trajectory::{TimeGrid, Trajectory};

/// Integrator settings for covariance propagation.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct PropagationOptions {
    pub tol: Tolerances,
    /// Allowed dip of the smallest symplectic eigenvalue below ½ before a
    /// sample is rejected as unphysical. Momentum-only mechanical damping
    /// is not a completely positive map, so small dips are part of the
    /// model; the default sits above them and still catches blow-ups.
    pub physicality_tol: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::new(1e-8, 1e-10),
            physicality_tol: 1e-2,
        }
    }
}

/// First and second moments of the linearized fluctuations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub means: MeanFieldState,
    pub sigma: Matrix6<f64>,
}

impl GaussianState {
    pub fn covariance(&self) -> CovarianceMatrix {
        CovarianceMatrix::from_matrix6(&self.sigma)
    }
}

/// Fails with `UnphysicalState` when `ν_min < ½ − tol`; returns `ν_min` otherwise.
/// An infinite `tol` skips the check and returns NaN.
pub fn check_physical(sigma: &CovarianceMatrix, t: f64, tol: f64) -> Result<f64> {
    if tol == f64::INFINITY {
        return Ok(f64::NAN);
    }
    let nu_min = match symplectic_eigenvalues(sigma) {
        Ok(nu) => nu[0],
        Err(_) => return Err(Error::UnphysicalState { t, nu_min: f64::NAN }),
    };
    if nu_min < 0.5 - tol {
        return Err(Error::UnphysicalState { t, nu_min });
    }
    Ok(nu_min)
}

fn lyapunov_rhs(a: &Matrix6<f64>, sigma: &Matrix6<f64>, d: &Matrix6<f64>) -> Matrix6<f64> {
    let x = a * sigma;
    x + x.transpose() + d
}

fn symmetrize(m: &mut Matrix6<f64>) {
    *m = (*m + m.transpose()) * 0.5;
}

struct CovarianceSystem<'a> {
    params: &'a SystemParams,
    g_eff: f64,
    d: Matrix6<f64>,
}

impl OdeSystem for CovarianceSystem<'_> {
    type Scalar = f64;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let a = build_drift_matrix(self.params, self.g_eff, t);
        let sigma = Matrix6::from_column_slice(y);
        dy.copy_from_slice(lyapunov_rhs(a.as_matrix(), &sigma, &self.d).as_slice());
    }
}

/// Solves `σ̇ = A(t)σ + σA(t)ᵀ + D` and samples on `grid`. Every emitted σ is
/// symmetrized and checked for physicality.
pub fn propagate_covariance(
    sigma0: &CovarianceMatrix,
    grid: &TimeGrid,
    params: &SystemParams,
    g_eff: f64,
    opts: &PropagationOptions,
) -> Result<Trajectory<CovarianceMatrix>> {
    let mut y = sigma0.to_matrix6()?;
    check_physical(sigma0, grid.t0, opts.physicality_tol)?;
    let sys = CovarianceSystem {
        params,
        g_eff,
        d: build_diffusion_matrix(params).to_matrix(),
    };
    let times = grid.times();
    let mut out = Trajectory::with_capacity(times.len());
    Dopri5::new(opts.tol).integrate(&sys, y.as_mut_slice(), &times, |_, t, y| {
        let mut m = Matrix6::from_column_slice(y);
        symmetrize(&mut m);
        y.copy_from_slice(m.as_slice());
        let cov = CovarianceMatrix::from_matrix6(&m);
        check_physical(&cov, t, opts.physicality_tol)?;
        out.push(t, cov);
        Ok(Control::Continue)
    })?;
    Ok(out)
}

struct JointSystem<'a> {
    params: &'a SystemParams,
    g_eff: f64,
    d: Matrix6<f64>,
}

impl OdeSystem for JointSystem<'_> {
    type Scalar = f64;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let m = classical_rhs(&MeanFieldState::from_slice(&y[..6]), t, self.params);
        dy[..6].copy_from_slice(&m.to_array());
        let a = build_drift_matrix(self.params, self.g_eff, t);
        let sigma = Matrix6::from_column_slice(&y[6..]);
        dy[6..].copy_from_slice(lyapunov_rhs(a.as_matrix(), &sigma, &self.d).as_slice());
    }
}

/// Integrates the classical means together with the covariance at the fixed
/// coupling `g_eff`, calling `on_sample` at each requested time.
pub fn simulate_gaussian<F>(
    initial: &GaussianState,
    times: &[f64],
    params: &SystemParams,
    g_eff: f64,
    opts: &PropagationOptions,
    mut on_sample: F,
) -> Result<GaussianState>
where
    F: FnMut(f64, &GaussianState) -> Result<Control>,
{
    let mut y = [0.0; 42];
    y[..6].copy_from_slice(&initial.means.to_array());
    y[6..].copy_from_slice(initial.sigma.as_slice());
    let sys = JointSystem {
        params,
        g_eff,
        d: build_diffusion_matrix(params).to_matrix(),
    };
    Dopri5::new(opts.tol).integrate(&sys, &mut y, times, |_, t, y| {
        let mut sigma = Matrix6::from_column_slice(&y[6..]);
        symmetrize(&mut sigma);
        y[6..].copy_from_slice(sigma.as_slice());
        let state = GaussianState {
            means: MeanFieldState::from_slice(&y[..6]),
            sigma,
        };
        if !state.means.is_finite() {
            return Err(Error::StepFailure {
                t,
                h: 0.0,
                reason: "non-finite mean-field state".into(),
            });
        }
        check_physical(&state.covariance(), t, opts.physicality_tol)?;
        on_sample(t, &state)
    })?;
    Ok(GaussianState {
        means: MeanFieldState::from_slice(&y[..6]),
        sigma: Matrix6::from_column_slice(&y[6..]),
    })
}

/// Settings for running to the late-time periodic state.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SettleGaussianOptions {
    /// Samples per τ = 2π/Ω; rounded up to an even count.
    pub samples_per_tau: usize,
    /// Entrywise bound on `|σ(t) − σ(t − π/Ω)|` over a full period.
    pub sigma_tol: f64,
    /// Bound on the mean-orbit mismatch over τ, relative to its peak-to-peak size.
    pub means_rel_tol: f64,
    pub max_time: f64,
    pub propagation: PropagationOptions,
}

impl SettleGaussianOptions {
    pub fn for_params(params: &SystemParams) -> Self {
        let slowest = params.gamma_m1.min(params.gamma_m2);
        let max_time = if slowest > 0.0 {
            (50.0 / slowest).min(1e5)
        } else {
            1e5
        };
        Self {
            samples_per_tau: 256,
            sigma_tol: 1e-5,
            means_rel_tol: 1e-3,
            max_time,
            propagation: PropagationOptions::default(),
        }
    }
}

/// Late-time periodic state: the final τ of samples and the convergence record.
#[derive(Debug, Clone)]
pub struct SettledGaussian {
    /// One τ = 2π/Ω of samples, endpoints included.
    pub last_period: Trajectory<GaussianState>,
    pub settled_at: Option<f64>,
    pub sigma_residual: f64,
    pub means_residual: f64,
    pub means_scale: f64,
}

impl SettledGaussian {
    pub fn is_settled(&self) -> bool {
        self.settled_at.is_some()
    }
}

/// Runs until σ repeats with period π/Ω and the means repeat with period
/// 2π/Ω, or until `max_time`.
pub fn settle_gaussian(
    initial: &GaussianState,
    params: &SystemParams,
    g_eff: f64,
    opts: &SettleGaussianOptions,
) -> Result<SettledGaussian> {
    if !(params.mod_omega > 0.0) {
        return Err(Error::InvalidParams(
            "a periodic state needs a positive modulation frequency".into(),
        ));
    }
    let n = (opts.samples_per_tau.max(8) + 1) / 2 * 2;
    let tau = params.tau();
    let dt = tau / n as f64;
    let total = ((opts.max_time / tau).ceil() as usize).max(2) * n;
    let times: Vec<f64> = (0..=total).map(|k| k as f64 * dt).collect();

    let mut window: VecDeque<(f64, GaussianState)> = VecDeque::with_capacity(2 * n + 2);
    let mut res = (f64::INFINITY, f64::INFINITY, 0.0);
    let mut settled_at = None;
    let mut k = 0usize;
    simulate_gaussian(initial, &times, params, g_eff, &opts.propagation, |t, s| {
        if window.len() == 2 * n + 1 {
            window.pop_front();
        }
        window.push_back((t, *s));
        k += 1;
        if window.len() == 2 * n + 1 && k % (n / 2) == 1 {
            res = residuals(&window, n);
            if res.0 <= opts.sigma_tol && res.1 <= opts.means_rel_tol * res.2 {
                settled_at = Some(t);
                return Ok(Control::Stop);
            }
        }
        Ok(Control::Continue)
    })?;

    let mut last_period = Trajectory::with_capacity(n + 1);
    for (t, s) in window.iter().skip(window.len().saturating_sub(n + 1)) {
        last_period.push(*t, *s);
    }
    Ok(SettledGaussian {
        last_period,
        settled_at,
        sigma_residual: res.0,
        means_residual: res.1,
        means_scale: res.2,
    })
}

/// (σ mismatch at lag π/Ω, means mismatch at lag 2π/Ω, means peak-to-peak),
/// all over the latest τ.
fn residuals(window: &VecDeque<(f64, GaussianState)>, n: usize) -> (f64, f64, f64) {
    let latest: Vec<&GaussianState> = window.iter().skip(n).map(|(_, s)| s).collect();
    let mut sigma_res: f64 = 0.0;
    for i in n / 2..=n {
        let d = (latest[i].sigma - latest[i - n / 2].sigma).amax();
        sigma_res = sigma_res.max(d);
    }
    let mut means_res: f64 = 0.0;
    for i in 0..=n {
        let a = window[i].1.means.to_array();
        let b = window[i + n].1.means.to_array();
        for c in 0..6 {
            means_res = means_res.max((a[c] - b[c]).abs());
        }
    }
    let mut scale: f64 = 0.0;
    let mut magnitude: f64 = 0.0;
    for c in 0..6 {
        let (lo, hi) = latest.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            let v = s.means.to_array()[c];
            (lo.min(v), hi.max(v))
        });
        scale = scale.max(hi - lo);
        magnitude = magnitude.max(lo.abs()).max(hi.abs());
    }
    (
        sigma_res,
        means_res,
        scale.max(1e-9 * magnitude).max(f64::MIN_POSITIVE),
    )
}

/// Stationary solution of `Aσ + σAᵀ + D = 0` by a direct solve of the
/// vectorized 36×36 system.
pub fn solve_lyapunov(a: &Matrix6<f64>, d: &Matrix6<f64>) -> Result<Matrix6<f64>> {
    let id = DMatrix::<f64>::identity(6, 6);
    let ad = DMatrix::from_column_slice(6, 6, a.as_slice());
    // column-major vec: vec(Aσ) = (I⊗A) vec σ, vec(σAᵀ) = (A⊗I) vec σ
    let k = id.kronecker(&ad) + ad.kronecker(&id);
    let rhs = -DVector::from_column_slice(d.as_slice());
    let x = k.lu().solve(&rhs).ok_or_else(|| {
        Error::NumericalDegeneracy("Lyapunov operator is singular (A has λᵢ + λⱼ = 0)".into())
    })?;
    let mut s = Matrix6::from_column_slice(x.as_slice());
    symmetrize(&mut s);
    Ok(s)
}

/// Eigenvalues of the one-period monodromy matrix of `U̇ = A(t)U`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FloquetReport {
    pub period: f64,
    /// Moduli of the Floquet multipliers, largest first.
    pub moduli: Vec<f64>,
    pub multipliers_re: Vec<f64>,
    pub multipliers_im: Vec<f64>,
    pub stable: bool,
}

impl FloquetReport {
    pub fn max_modulus(&self) -> f64 {
        self.moduli[0]
    }

    /// `ln(max modulus)/period`: the slowest decay rate (negative when stable).
    pub fn slowest_rate(&self) -> f64 {
        self.max_modulus().ln() / self.period
    }
}

struct Homogeneous<'a> {
    params: &'a SystemParams,
    g_eff: f64,
}

impl OdeSystem for Homogeneous<'_> {
    type Scalar = f64;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let a = build_drift_matrix(self.params, self.g_eff, t);
        let u = Matrix6::from_column_slice(y);
        dy.copy_from_slice((a.as_matrix() * u).as_slice());
    }
}

/// Integrates the six basis columns over one modulation period π/Ω and
/// returns the monodromy spectrum; stable iff every modulus is below one
/// by more than rounding (1e-9).
pub fn floquet_stability(params: &SystemParams, g_eff: f64) -> Result<FloquetReport> {
    if !(params.mod_omega > 0.0) {
        return Err(Error::InvalidParams(
            "Floquet analysis needs a positive modulation frequency".into(),
        ));
    }
    let period = params.modulation_period();
    let mut u = Matrix6::<f64>::identity();
    Dopri5::new(Tolerances::new(1e-11, 1e-13)).integrate(
        &Homogeneous { params, g_eff },
        u.as_mut_slice(),
        &[0.0, period],
        |_, _, _| Ok(Control::Continue),
    )?;
    let mut mult: Vec<Complex<f64>> = u.complex_eigenvalues().iter().copied().collect();
    mult.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
    let moduli: Vec<f64> = mult.iter().map(|z| z.norm()).collect();
    Ok(FloquetReport {
        period,
        stable: moduli.iter().all(|m| *m < 1.0 - 1e-9),
        multipliers_re: mult.iter().map(|z| z.re).collect(),
        multipliers_im: mult.iter().map(|z| z.im).collect(),
        moduli,
    })
}
