//! Physical parameters of the two-mirror cavity and the linear generators
//! of its fluctuation dynamics.
//!
//! All quantities are dimensionless, with frequencies and rates measured in
//! units of the first mirror's mechanical frequency. Quadratures follow
//! `x = (a + a†)/√2`, `y = (a − a†)/(i√2)`, so each has vacuum variance ½.
//!
//! The fluctuation vector is ordered `(δx, δy, δq₁, δp₁, δq₂, δp₂)`; the
//! [`X`], [`Y`], [`Q1`], [`P1`], [`Q2`], [`P2`] constants name the positions.

use std::f64::consts::PI;
use std::ops::Index;

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const X: usize = 0;
pub const Y: usize = 1;
pub const Q1: usize = 2;
pub const P1: usize = 3;
pub const Q2: usize = 4;
pub const P2: usize = 5;

/// Rates, drive and modulation settings of the device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Mechanical frequency of mirror 1.
    pub omega_m: f64,
    /// Frequency offset of mirror 2 relative to mirror 1.
    pub delta_m: f64,
    /// Cavity–laser detuning ω_c − ω_L.
    pub delta: f64,
    /// Cavity amplitude decay rate.
    pub kappa: f64,
    pub gamma_m1: f64,
    pub gamma_m2: f64,
    /// Single-photon optomechanical coupling.
    pub g: f64,
    /// Laser drive strength E.
    pub drive_e: f64,
    /// Modulation frequency Ω.
    pub mod_omega: f64,
    /// Modulation depth ε.
    pub mod_eps: f64,
    pub n_ph: f64,
    pub n_m1: f64,
    pub n_m2: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            omega_m: 1.0,
            delta_m: 0.0,
            delta: 1.0,
            kappa: 0.1,
            gamma_m1: 0.001,
            gamma_m2: 0.001,
            g: 0.05,
            drive_e: 2.1,
            mod_omega: 0.5,
            mod_eps: 0.5,
            n_ph: 0.0,
            n_m1: 0.0,
            n_m2: 0.0,
        }
    }
}

impl SystemParams {
    /// Every field zero. Starting point for limit cases; fails [`validate`](Self::validate).
    pub fn zeroed() -> Self {
        Self {
            omega_m: 0.0,
            delta_m: 0.0,
            delta: 0.0,
            kappa: 0.0,
            gamma_m1: 0.0,
            gamma_m2: 0.0,
            g: 0.0,
            drive_e: 0.0,
            mod_omega: 0.0,
            mod_eps: 0.0,
            n_ph: 0.0,
            n_m1: 0.0,
            n_m2: 0.0,
        }
    }

    /// Mechanical frequency of mirror 2.
    pub fn omega_m2(&self) -> f64 {
        self.omega_m + self.delta_m
    }

    /// Same device with the modulation switched off.
    pub fn unmodulated(&self) -> Self {
        Self {
            mod_eps: 0.0,
            ..*self
        }
    }

    /// Period of the stiffness modulation, π/Ω.
    pub fn modulation_period(&self) -> f64 {
        PI / self.mod_omega
    }

    /// Time unit of the reported axes, τ = 2π/Ω.
    pub fn tau(&self) -> f64 {
        2.0 * PI / self.mod_omega
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.omega_m,
            self.delta_m,
            self.delta,
            self.kappa,
            self.gamma_m1,
            self.gamma_m2,
            self.g,
            self.drive_e,
            self.mod_omega,
            self.mod_eps,
            self.n_ph,
            self.n_m1,
            self.n_m2,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("all parameters must be finite".into()));
        }
        let positive = [
            ("kappa", self.kappa),
            ("gamma_m1", self.gamma_m1),
            ("gamma_m2", self.gamma_m2),
            ("omega_m", self.omega_m),
            ("omega_m + delta_m", self.omega_m2()),
        ];
        for (name, v) in positive {
            if v <= 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be > 0 (got {v})")));
            }
        }
        let non_negative = [
            ("mod_eps", self.mod_eps),
            ("mod_omega", self.mod_omega),
            ("n_ph", self.n_ph),
            ("n_m1", self.n_m1),
            ("n_m2", self.n_m2),
        ];
        for (name, v) in non_negative {
            if v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be >= 0 (got {v})")));
            }
        }
        Ok(())
    }

    /// Set one field by name. Returns `Ok(false)` if the key is not a parameter.
    pub fn set(&mut self, key: &str, value: f64) -> Result<bool> {
        let slot = match key {
            "omega_m" => &mut self.omega_m,
            "delta_m" => &mut self.delta_m,
            "delta" => &mut self.delta,
            "kappa" => &mut self.kappa,
            "gamma_m1" => &mut self.gamma_m1,
            "gamma_m2" => &mut self.gamma_m2,
            "g" => &mut self.g,
            "drive_e" => &mut self.drive_e,
            "mod_omega" => &mut self.mod_omega,
            "mod_eps" => &mut self.mod_eps,
            "n_ph" => &mut self.n_ph,
            "n_m1" => &mut self.n_m1,
            "n_m2" => &mut self.n_m2,
            _ => return Ok(false),
        };
        if !value.is_finite() {
            return Err(Error::Config(format!("{key}: value must be finite")));
        }
        *slot = value;
        Ok(true)
    }
}

/// Stiffness multiplier of mirror 1: `1 + ε sin²(Ωt)`.
pub fn modulation_factor(params: &SystemParams, t: f64) -> f64 {
    let s = (params.mod_omega * t).sin();
    1.0 + params.mod_eps * s * s
}

/// Linear generator of the fluctuation dynamics at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftMatrix(pub Matrix6<f64>);

impl DriftMatrix {
    pub fn as_matrix(&self) -> &Matrix6<f64> {
        &self.0
    }
}

impl Index<(usize, usize)> for DriftMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Builds A(t) for the ordered basis `(δx, δy, δq₁, δp₁, δq₂, δp₂)`.
///
/// `coupling_g_eff` is G = √2·g·|α_s| in the frame where the stationary
/// cavity amplitude is real, so the cavity couples to the mirrors through
/// δx only (radiation pressure) and δy picks up the mirror positions.
pub fn build_drift_matrix(params: &SystemParams, coupling_g_eff: f64, t: f64) -> DriftMatrix {
    let w1 = params.omega_m;
    let w2 = params.omega_m2();
    let gc = coupling_g_eff;
    let mut a = Matrix6::zeros();

    a[(X, X)] = -params.kappa;
    a[(X, Y)] = params.delta;
    a[(Y, X)] = -params.delta;
    a[(Y, Y)] = -params.kappa;
    a[(Y, Q1)] = gc;
    a[(Y, Q2)] = gc;

    a[(Q1, P1)] = w1;
    a[(P1, X)] = gc;
    a[(P1, Q1)] = -w1 * modulation_factor(params, t);
    a[(P1, P1)] = -params.gamma_m1;

    a[(Q2, P2)] = w2;
    a[(P2, X)] = gc;
    a[(P2, Q2)] = -w2;
    a[(P2, P2)] = -params.gamma_m2;

    DriftMatrix(a)
}

/// Noise injection of the vacuum input field and the Brownian baths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionMatrix(Vector6<f64>);

impl DiffusionMatrix {
    pub fn diagonal(&self) -> &Vector6<f64> {
        &self.0
    }

    pub fn to_matrix(&self) -> Matrix6<f64> {
        Matrix6::from_diagonal(&self.0)
    }
}

impl Index<(usize, usize)> for DiffusionMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        const ZERO: f64 = 0.0;
        if i == j {
            &self.0[i]
        } else {
            &ZERO
        }
    }
}

/// `diag{κ(2n_ph+1), κ(2n_ph+1), 0, γ₁(2n₁+1), 0, γ₂(2n₂+1)}`.
pub fn build_diffusion_matrix(params: &SystemParams) -> DiffusionMatrix {
    let cav = params.kappa * (2.0 * params.n_ph + 1.0);
    DiffusionMatrix(Vector6::new(
        cav,
        cav,
        0.0,
        params.gamma_m1 * (2.0 * params.n_m1 + 1.0),
        0.0,
        params.gamma_m2 * (2.0 * params.n_m2 + 1.0),
    ))
}
