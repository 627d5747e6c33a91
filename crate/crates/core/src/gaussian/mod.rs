//! Linearized quantum fluctuations around the classical orbit.
//!
//! Fluctuations are Gaussian, so the state is fully described by the mean
//! amplitudes and the 6×6 covariance matrix over
//! `(δx, δy, δq₁, δp₁, δq₂, δp₂)`.

mod covariance;
mod measures;
mod propagate;

use std::io::Write;

use nalgebra::Matrix6;

pub use covariance::{symplectic_eigenvalues, symplectic_form, CovarianceMatrix};
pub use measures::{
    entropy_term, gaussian_entropy, logarithmic_negativity, mutual_information,
    partial_transpose, quadrature_variance_ratio, reduced_mirror_block, synchronization_measure,
};
pub use propagate::{
    check_physical, floquet_stability, propagate_covariance, settle_gaussian, simulate_gaussian,
    solve_lyapunov, FloquetReport, GaussianState, PropagationOptions, SettleGaussianOptions,
    SettledGaussian,
};

use crate::error::Result;
use crate::meanfield::{effective_coupling, steady_state, MeanFieldState};
use crate::model::{SystemParams, P1, P2, Q1, Q2};
use crate::trajectory::Trajectory;

/// Mirror observables derived from one Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GaussianObservables {
    pub var_q1: f64,
    pub var_q2: f64,
    pub var_p1: f64,
    pub var_p2: f64,
    pub sync: f64,
    pub log_neg: f64,
    pub mutual_info: f64,
}

impl GaussianObservables {
    /// `sync_means` selects whether S includes the squared means of q₋, p₋.
    pub fn from_state(state: &GaussianState, sync_means: bool) -> Result<Self> {
        let cov = state.covariance();
        let mirrors = reduced_mirror_block(&cov);
        Ok(Self {
            var_q1: cov.get(Q1, Q1),
            var_q2: cov.get(Q2, Q2),
            var_p1: cov.get(P1, P1),
            var_p2: cov.get(P2, P2),
            sync: synchronization_measure(&cov, sync_means.then_some(&state.means)),
            log_neg: logarithmic_negativity(&mirrors)?,
            mutual_info: mutual_information(&mirrors)?,
        })
    }

    pub fn var_q1_ratio(&self) -> f64 {
        self.var_q1 / 0.5
    }

    pub fn var_q2_ratio(&self) -> f64 {
        self.var_q2 / 0.5
    }
}

/// Parameters plus the linearization point they imply.
#[derive(Debug, Clone, Copy)]
pub struct LinearizedModel {
    pub params: SystemParams,
    pub stationary: MeanFieldState,
    pub g_eff: f64,
}

impl LinearizedModel {
    /// Solves for the stationary point with the modulation frozen.
    pub fn new(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        let stationary = steady_state(params)?;
        Ok(Self {
            params: *params,
            stationary,
            g_eff: effective_coupling(&stationary, params),
        })
    }

    /// Means at the stationary point; fluctuations thermal at the bath
    /// occupancies (vacuum when they are zero).
    pub fn default_initial_state(&self) -> GaussianState {
        let p = &self.params;
        let cov = CovarianceMatrix::thermal(&[p.n_ph, p.n_m1, p.n_m2]);
        GaussianState {
            means: self.stationary,
            sigma: cov.to_matrix6().unwrap_or_else(|_| Matrix6::identity() * 0.5),
        }
    }
}

/// CSV with columns `t, var_q1_ratio, var_q2_ratio, sync, log_neg, mutual_info`.
pub fn write_observables_csv<W: Write>(traj: &Trajectory<GaussianObservables>, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "var_q1_ratio", "var_q2_ratio", "sync", "log_neg", "mutual_info"])?;
    for (t, o) in traj.iter() {
        wr.write_record(
            [t, o.var_q1_ratio(), o.var_q2_ratio(), o.sync, o.log_neg, o.mutual_info]
                .map(|v| v.to_string()),
        )?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;
