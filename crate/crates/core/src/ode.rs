//! Adaptive Dormand–Prince 5(4) integration with output on a fixed grid.
//!
//! Steps are clipped so that every requested sample time is hit exactly;
//! the sample callback may rewrite the state in place (symmetrization,
//! trace renormalization) and may stop the run early.

use std::ops::{Add, Mul};

use nalgebra::Complex;

use crate::error::{Error, Result};

/// Element type of an integrated state vector.
pub trait OdeScalar:
    Copy + Send + Sync + Add<Output = Self> + Mul<f64, Output = Self> + 'static
{
    fn zero() -> Self;
    fn modulus(self) -> f64;
    fn is_finite(self) -> bool;
}

impl OdeScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl OdeScalar for Complex<f64> {
    fn zero() -> Self {
        Complex::new(0.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// A first-order system `dy/dt = f(t, y)`.
pub trait OdeSystem {
    type Scalar: OdeScalar;
    fn rhs(&self, t: f64, y: &[Self::Scalar], dy: &mut [Self::Scalar]);
}

/// Mixed absolute/relative local error tolerance.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerances {
    pub const fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol }
    }
}

/// What the sample callback wants the integrator to do next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub tol: Tolerances,
    /// Largest step ever attempted; `None` leaves it unbounded.
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Dopri5 {
    pub fn new(tol: Tolerances) -> Self {
        Self {
            tol,
            h_max: None,
            max_steps: 50_000_000,
        }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = Some(h_max);
        self
    }

    /// Integrates from `times[0]` through every later entry of `times`.
    ///
    /// `on_sample(k, t, y)` runs at each `times[k]`, including the initial
    /// time. `times` must be strictly increasing.
    pub fn integrate<S, F>(
        &self,
        sys: &S,
        y: &mut [S::Scalar],
        times: &[f64],
        mut on_sample: F,
    ) -> Result<IntegrationStats>
    where
        S: OdeSystem,
        F: FnMut(usize, f64, &mut [S::Scalar]) -> Result<Control>,
    {
        let mut stats = IntegrationStats::default();
        let Some(&t0) = times.first() else {
            return Ok(stats);
        };
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams("sample times must be strictly increasing".into()));
        }
        if on_sample(0, t0, y)? == Control::Stop {
            return Ok(stats);
        }
        if times.len() == 1 {
            return Ok(stats);
        }

        let n = y.len();
        let zero = S::Scalar::zero();
        let mut k = [(); 7].map(|_| vec![zero; n]);
        let mut ytmp = vec![zero; n];
        let mut ynew = vec![zero; n];

        let mut t = t0;
        sys.rhs(t, y, &mut k[0]);
        stats.rhs_evals += 1;
        let mut h = self.initial_step(sys, t, y, &k[0], times[1] - t0, &mut ytmp, &mut ynew);
        stats.rhs_evals += 1;
        let mut last_rejected = false;

        for (idx, &target) in times.iter().enumerate().skip(1) {
            while t < target {
                if stats.accepted + stats.rejected >= self.max_steps {
                    return Err(Error::StepFailure {
                        t,
                        h,
                        reason: format!("exceeded {} steps", self.max_steps),
                    });
                }
                let remaining = target - t;
                let clipped = h >= remaining * (1.0 - 1e-12);
                let h_try = if clipped { remaining } else { h };
                if h_try < 1e-13 * t.abs().max(1.0) {
                    return Err(Error::StepFailure {
                        t,
                        h: h_try,
                        reason: "step size underflow".into(),
                    });
                }

                self.stage_step(sys, t, h_try, y, &mut k, &mut ytmp, &mut ynew);
                stats.rhs_evals += 6;
                let err = self.error_norm(y, &ynew, &k, h_try);

                if err.is_finite() && err <= 1.0 {
                    let fac = if err == 0.0 {
                        10.0
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 10.0)
                    };
                    let fac = if last_rejected { fac.min(1.0) } else { fac };
                    let proposed = h_try * fac;
                    t = if clipped { target } else { t + h_try };
                    y.copy_from_slice(&ynew);
                    k.swap(0, 6);
                    stats.accepted += 1;
                    last_rejected = false;
                    h = if clipped { proposed.max(h) } else { proposed };
                    if let Some(hm) = self.h_max {
                        h = h.min(hm);
                    }
                } else {
                    let fac = if err.is_finite() {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)
                    } else {
                        0.2
                    };
                    h = h_try * fac;
                    stats.rejected += 1;
                    last_rejected = true;
                }
            }
            if on_sample(idx, target, y)? == Control::Stop {
                break;
            }
            // The callback may have rewritten y; refresh the FSAL derivative.
            sys.rhs(t, y, &mut k[0]);
            stats.rhs_evals += 1;
        }
        Ok(stats)
    }

    fn initial_step<S: OdeSystem>(
        &self,
        sys: &S,
        t: f64,
        y: &[S::Scalar],
        f0: &[S::Scalar],
        span: f64,
        ytmp: &mut [S::Scalar],
        f1: &mut [S::Scalar],
    ) -> f64 {
        let tol = self.tol;
        let n = y.len().max(1) as f64;
        let scaled = |v: &[S::Scalar]| -> f64 {
            let s: f64 = v
                .iter()
                .zip(y)
                .map(|(vi, yi)| {
                    let sc = tol.atol + tol.rtol * yi.modulus();
                    (vi.modulus() / sc).powi(2)
                })
                .sum();
            (s / n).sqrt()
        };
        let d0 = scaled(y);
        let d1 = scaled(f0);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0 = h0.min(span.abs());
        for ((yt, yi), fi) in ytmp.iter_mut().zip(y).zip(f0) {
            *yt = *yi + *fi * h0;
        }
        sys.rhs(t + h0, ytmp, f1);
        let diff: Vec<S::Scalar> = f1.iter().zip(f0).map(|(a, b)| *a + *b * -1.0).collect();
        let d2 = scaled(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        let mut h = (100.0 * h0).min(h1).min(span.abs());
        if let Some(hm) = self.h_max {
            h = h.min(hm);
        }
        h
    }

    #[allow(clippy::too_many_arguments)]
    fn stage_step<S: OdeSystem>(
        &self,
        sys: &S,
        t: f64,
        h: f64,
        y: &[S::Scalar],
        k: &mut [Vec<S::Scalar>; 7],
        ytmp: &mut [S::Scalar],
        ynew: &mut [S::Scalar],
    ) {
        combine(ytmp, y, h, &[(A21, &k[0])]);
        let (done, rest) = k.split_at_mut(1);
        sys.rhs(t + C2 * h, ytmp, &mut rest[0]);

        combine(ytmp, y, h, &[(A31, &done[0]), (A32, &rest[0])]);
        sys.rhs(t + C3 * h, ytmp, &mut rest[1]);

        combine(ytmp, y, h, &[(A41, &k[0]), (A42, &k[1]), (A43, &k[2])]);
        let (done, rest) = k.split_at_mut(3);
        sys.rhs(t + C4 * h, ytmp, &mut rest[0]);

        combine(
            ytmp,
            y,
            h,
            &[(A51, &done[0]), (A52, &done[1]), (A53, &done[2]), (A54, &rest[0])],
        );
        sys.rhs(t + C5 * h, ytmp, &mut rest[1]);

        combine(
            ytmp,
            y,
            h,
            &[
                (A61, &k[0]),
                (A62, &k[1]),
                (A63, &k[2]),
                (A64, &k[3]),
                (A65, &k[4]),
            ],
        );
        let (done, rest) = k.split_at_mut(5);
        sys.rhs(t + h, ytmp, &mut rest[0]);

        combine(
            ynew,
            y,
            h,
            &[
                (B1, &done[0]),
                (B3, &done[2]),
                (B4, &done[3]),
                (B5, &done[4]),
                (B6, &rest[0]),
            ],
        );
        sys.rhs(t + h, ynew, &mut rest[1]);
    }

    fn error_norm<T: OdeScalar>(&self, y: &[T], ynew: &[T], k: &[Vec<T>; 7], h: f64) -> f64 {
        let tol = self.tol;
        let n = y.len().max(1) as f64;
        let mut acc = 0.0;
        for i in 0..y.len() {
            let e = (k[0][i] * E1
                + k[2][i] * E3
                + k[3][i] * E4
                + k[4][i] * E5
                + k[5][i] * E6
                + k[6][i] * E7)
                * h;
            let sc = tol.atol + tol.rtol * y[i].modulus().max(ynew[i].modulus());
            let r = e.modulus() / sc;
            acc += r * r;
        }
        (acc / n).sqrt()
    }
}

fn combine<T: OdeScalar>(out: &mut [T], y: &[T], h: f64, terms: &[(f64, &Vec<T>)]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = T::zero();
        for (c, kv) in terms {
            s = s + kv[i] * *c;
        }
        *o = y[i] + s * h;
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
