//! Deterministic (noise-free) classical amplitudes of the cavity field and
//! the two mirrors, and the stationary operating point that fixes the
//! linearized coupling.

use std::collections::VecDeque;
use std::io::Write;

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::model::{build_drift_matrix, modulation_factor, SystemParams};
use crate::ode::{Control, Dopri5, OdeSystem, Tolerances};
use crate::trajectory::{TimeGrid, Trajectory};

/// Classical amplitudes: cavity field α = `alpha_re + i alpha_im` and mirror
/// means `(q₁, p₁, q₂, p₂)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanFieldState {
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub q1: f64,
    pub p1: f64,
    pub q2: f64,
    pub p2: f64,
}

impl MeanFieldState {
    pub fn to_array(&self) -> [f64; 6] {
        [self.alpha_re, self.alpha_im, self.q1, self.p1, self.q2, self.p2]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            alpha_re: v[0],
            alpha_im: v[1],
            q1: v[2],
            p1: v[3],
            q2: v[4],
            p2: v[5],
        }
    }

    pub fn alpha(&self) -> Complex<f64> {
        Complex::new(self.alpha_re, self.alpha_im)
    }

    pub fn photon_number(&self) -> f64 {
        self.alpha_re * self.alpha_re + self.alpha_im * self.alpha_im
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Euclidean norm over all six components.
    pub fn norm(&self) -> f64 {
        self.to_array().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Right-hand side of the classical equations with all noise inputs set to
/// zero; the cavity equation is split into real and imaginary parts.
pub fn classical_rhs(state: &MeanFieldState, t: f64, params: &SystemParams) -> MeanFieldState {
    let s = state.q1 + state.q2;
    let det = params.delta - params.g * s;
    let pressure = params.g * state.photon_number();
    let w2 = params.omega_m2();
    MeanFieldState {
        alpha_re: -params.kappa * state.alpha_re + det * state.alpha_im + params.drive_e,
        alpha_im: -det * state.alpha_re - params.kappa * state.alpha_im,
        q1: params.omega_m * state.p1,
        p1: -params.omega_m * modulation_factor(params, t) * state.q1 + pressure
            - params.gamma_m1 * state.p1,
        q2: w2 * state.p2,
        p2: -w2 * state.q2 + pressure - params.gamma_m2 * state.p2,
    }
}

const MAX_FIXED_POINT_ITERATIONS: usize = 100_000;

/// Stationary operating point with the modulation frozen out.
///
/// Solves `n = E² / (κ² + Δ_eff²)` for the intracavity photon number by
/// fixed-point iteration from an empty cavity, with
/// `Δ_eff = Δ − g(Q₁ + Q₂)` and `Q_i = g·n/ω_i`. The returned α keeps the
/// phase set by the real drive; [`effective_coupling`] uses only `|α|`.
pub fn steady_state(params: &SystemParams) -> Result<MeanFieldState> {
    let w1 = params.omega_m;
    let w2 = params.omega_m2();
    if w1 <= 0.0 || w2 <= 0.0 {
        return Err(Error::InvalidParams(
            "mechanical frequencies must be positive for a steady state".into(),
        ));
    }
    let e2 = params.drive_e * params.drive_e;
    let shift_per_photon = params.g * params.g * (1.0 / w1 + 1.0 / w2);
    let map = |n: f64| {
        let det = params.delta - shift_per_photon * n;
        e2 / (params.kappa * params.kappa + det * det)
    };

    let mut n = 0.0_f64;
    let mut converged = e2 == 0.0;
    for _ in 0..MAX_FIXED_POINT_ITERATIONS {
        if converged {
            break;
        }
        let next = map(n);
        if !next.is_finite() {
            return Err(Error::NoConvergence(format!(
                "photon number diverged (κ = {}, Δ = {})",
                params.kappa, params.delta
            )));
        }
        converged = (next - n).abs() <= 1e-15 * next.max(1.0);
        n = next;
    }
    if !converged {
        return Err(Error::NoConvergence(format!(
            "fixed-point iteration on |α|² did not settle in {MAX_FIXED_POINT_ITERATIONS} steps \
             (last value {n:.6}); the drive may sit in a multistable window"
        )));
    }

    let q1 = params.g * n / w1;
    let q2 = params.g * n / w2;
    let det = params.delta - params.g * (q1 + q2);
    let alpha = Complex::new(params.drive_e, 0.0) / Complex::new(params.kappa, det);
    let state = MeanFieldState {
        alpha_re: alpha.re,
        alpha_im: alpha.im,
        q1,
        p1: 0.0,
        q2,
        p2: 0.0,
    };

    let residual = classical_rhs(&state, 0.0, &params.unmodulated()).norm();
    if residual > 1e-12 * (1.0 + params.drive_e.abs()) {
        return Err(Error::NoConvergence(format!(
            "stationary residual {residual:.3e} above 1e-12"
        )));
    }

    let drift = build_drift_matrix(&params.unmodulated(), effective_coupling(&state, params), 0.0);
    let max_real = drift
        .as_matrix()
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_real > 0.0 {
        return Err(Error::Unstable { max_real });
    }
    Ok(state)
}

/// Linearized coupling G = √2·g·|α|, in the frame where α is real and positive.
pub fn effective_coupling(state: &MeanFieldState, params: &SystemParams) -> f64 {
    std::f64::consts::SQRT_2 * params.g * state.photon_number().sqrt()
}

struct ClassicalSystem<'a>(&'a SystemParams);

impl OdeSystem for ClassicalSystem<'_> {
    type Scalar = f64;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let d = classical_rhs(&MeanFieldState::from_slice(y), t, self.0);
        dy.copy_from_slice(&d.to_array());
    }
}

pub const DEFAULT_TOLERANCES: Tolerances = Tolerances::new(1e-9, 1e-12);

/// Integrates the classical equations and samples on `grid`.
pub fn integrate_meanfield(
    initial: &MeanFieldState,
    grid: &TimeGrid,
    params: &SystemParams,
    tol: Tolerances,
) -> Result<Trajectory<MeanFieldState>> {
    let times = grid.times();
    let mut out = Trajectory::with_capacity(times.len());
    integrate_meanfield_with(initial, &times, params, tol, |t, s| {
        out.push(t, *s);
        Ok(Control::Continue)
    })?;
    Ok(out)
}

/// Streaming variant of [`integrate_meanfield`] over arbitrary sample times.
pub fn integrate_meanfield_with<F>(
    initial: &MeanFieldState,
    times: &[f64],
    params: &SystemParams,
    tol: Tolerances,
    mut on_sample: F,
) -> Result<()>
where
    F: FnMut(f64, &MeanFieldState) -> Result<Control>,
{
    let mut y = initial.to_array();
    Dopri5::new(tol).integrate(&ClassicalSystem(params), &mut y, times, |_, t, y| {
        let s = MeanFieldState::from_slice(y);
        if !s.is_finite() {
            return Err(Error::StepFailure {
                t,
                h: 0.0,
                reason: "non-finite mean-field state".into(),
            });
        }
        on_sample(t, &s)
    })?;
    Ok(())
}

/// Settings for running the classical dynamics onto its late-time orbit.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SettleOptions {
    /// Orbit period to test against, 2π/Ω by default.
    pub period: f64,
    pub samples_per_period: usize,
    /// Periodicity residual relative to the orbit's peak-to-peak size.
    pub rel_tol: f64,
    /// Hard stop, in the same time units as the parameters.
    pub max_time: f64,
    pub tol: Tolerances,
}

impl SettleOptions {
    /// 2π/Ω period, 1e-3 relative residual, capped at 50 mechanical damping times.
    pub fn for_params(params: &SystemParams) -> Self {
        let slowest = params.gamma_m1.min(params.gamma_m2);
        let max_time = if slowest > 0.0 {
            (50.0 / slowest).min(1e5)
        } else {
            1e5
        };
        Self {
            period: params.tau(),
            samples_per_period: 400,
            rel_tol: 1e-3,
            max_time,
            tol: DEFAULT_TOLERANCES,
        }
    }
}

/// Late-time result: the final orbit period and when periodicity was reached.
#[derive(Debug, Clone)]
pub struct SettledOrbit {
    /// One full period of samples, endpoints included.
    pub last_period: Trajectory<MeanFieldState>,
    /// Time at which the periodicity test first passed, if it did.
    pub settled_at: Option<f64>,
    /// Final max |s(t) − s(t − period)| over the last period.
    pub residual: f64,
    /// Peak-to-peak scale used to judge `residual`.
    pub scale: f64,
}

/// Integrates period by period until `max |s(t) − s(t−T)| < rel_tol·scale`
/// over a full period, or `max_time` is reached.
pub fn settle_meanfield(
    initial: &MeanFieldState,
    params: &SystemParams,
    opts: &SettleOptions,
) -> Result<SettledOrbit> {
    let n = opts.samples_per_period.max(8);
    let dt = opts.period / n as f64;
    let total = ((opts.max_time / opts.period).ceil() as usize).max(2) * n;
    let times: Vec<f64> = (0..=total).map(|k| k as f64 * dt).collect();

    // two periods of samples: the current one and the one before it
    let mut window: VecDeque<(f64, MeanFieldState)> = VecDeque::with_capacity(2 * n + 2);
    let mut residual = f64::INFINITY;
    let mut scale = 0.0;
    let mut settled_at = None;
    let mut k = 0usize;
    integrate_meanfield_with(initial, &times, params, opts.tol, |t, s| {
        if window.len() == 2 * n + 1 {
            window.pop_front();
        }
        window.push_back((t, *s));
        k += 1;
        if window.len() == 2 * n + 1 && k % n == 1 {
            let (r, sc) = periodicity(&window, n);
            residual = r;
            scale = sc;
            if residual <= opts.rel_tol * scale {
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
    Ok(SettledOrbit {
        last_period,
        settled_at,
        residual,
        scale,
    })
}

/// Max one-period mismatch and peak-to-peak size of the latest period.
fn periodicity(window: &VecDeque<(f64, MeanFieldState)>, n: usize) -> (f64, f64) {
    let v: Vec<[f64; 6]> = window.iter().map(|(_, s)| s.to_array()).collect();
    let mut residual: f64 = 0.0;
    for i in 0..=n {
        for c in 0..6 {
            residual = residual.max((v[i + n][c] - v[i][c]).abs());
        }
    }
    let latest = &v[n..];
    let mut scale: f64 = 0.0;
    let mut magnitude: f64 = 0.0;
    for c in 0..6 {
        let (lo, hi) = latest
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x[c]), hi.max(x[c])));
        scale = scale.max(hi - lo);
        magnitude = magnitude.max(lo.abs()).max(hi.abs());
    }
    // a fixed point has no peak-to-peak size; fall back to the state magnitude
    (residual, scale.max(1e-9 * magnitude).max(f64::MIN_POSITIVE))
}

/// Enclosed area of a sampled closed curve (shoelace formula, absolute value).
pub fn orbit_area(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        acc += xs[i] * ys[j] - xs[j] * ys[i];
    }
    0.5 * acc.abs()
}

/// CSV with columns `t, alpha_re, alpha_im, q1, p1, q2, p2`.
pub fn write_meanfield_csv<W: Write>(traj: &Trajectory<MeanFieldState>, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "alpha_re", "alpha_im", "q1", "p1", "q2", "p2"])?;
    for (t, s) in traj.iter() {
        let row: Vec<String> = std::iter::once(t)
            .chain(s.to_array())
            .map(|v| v.to_string())
            .collect();
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}
