use crate::error::{Error, Result};

/// Uniform output grid `t0, t0 + dt, …, t_final`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_final: f64,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(t0: f64, t_final: f64, dt: f64) -> Result<Self> {
        if !(t0.is_finite() && t_final.is_finite() && dt.is_finite()) {
            return Err(Error::InvalidParams("time grid must be finite".into()));
        }
        if t0 < 0.0 {
            return Err(Error::InvalidParams(format!("t0 must be >= 0 (got {t0})")));
        }
        if dt <= 0.0 {
            return Err(Error::InvalidParams(format!("sample dt must be > 0 (got {dt})")));
        }
        if t_final <= t0 {
            return Err(Error::InvalidParams(format!(
                "t_final ({t_final}) must exceed t0 ({t0})"
            )));
        }
        Ok(Self { t0, t_final, dt })
    }

    /// Grid starting at zero.
    pub fn span(t_final: f64, dt: f64) -> Result<Self> {
        Self::new(0.0, t_final, dt)
    }

    /// Sample times. The last sample is `t_final` when it lies within
    /// rounding of the grid; otherwise the grid stops at the last full step.
    pub fn times(&self) -> Vec<f64> {
        let steps = ((self.t_final - self.t0) / self.dt * (1.0 + 1e-12)).floor() as usize;
        (0..=steps).map(|k| self.t0 + k as f64 * self.dt).collect()
    }
}

/// Time-stamped series of states, the common output record of every solver.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
}

impl<S> Default for Trajectory<S> {
    fn default() -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
        }
    }
}

impl<S> Trajectory<S> {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, t: f64, state: S) {
        self.times.push(t);
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &S)> + '_ {
        self.times.iter().copied().zip(self.states.iter())
    }

    pub fn last(&self) -> Option<(f64, &S)> {
        Some((*self.times.last()?, self.states.last()?))
    }

    /// Samples with `t >= t_from`.
    pub fn since(&self, t_from: f64) -> impl Iterator<Item = (f64, &S)> + '_ {
        self.iter().filter(move |(t, _)| *t >= t_from)
    }

    pub fn map<U>(&self, f: impl FnMut(&S) -> U) -> Trajectory<U> {
        Trajectory {
            times: self.times.clone(),
            states: self.states.iter().map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_endpoint() {
        let g = TimeGrid::span(1.0, 0.1).unwrap();
        let t = g.times();
        assert_eq!(t.len(), 11);
        assert!((t[10] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(TimeGrid::span(1.0, 0.0).is_err());
        assert!(TimeGrid::span(0.0, 0.1).is_err());
        assert!(TimeGrid::new(-1.0, 1.0, 0.1).is_err());
        assert!(TimeGrid::span(f64::INFINITY, 0.1).is_err());
    }

    #[test]
    fn since_filters() {
        let mut tr = Trajectory::default();
        for k in 0..5 {
            tr.push(k as f64, k);
        }
        let late: Vec<_> = tr.since(2.5).map(|(_, s)| *s).collect();
        assert_eq!(late, vec![3, 4]);
    }
}
