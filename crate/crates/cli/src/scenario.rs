use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use optosync_core::config::ConfigMap;
use optosync_core::gaussian::PropagationOptions;
use optosync_core::lindblad::{FockConfig, LeakPolicy, MasterOptions};
use optosync_core::ode::Tolerances;
use optosync_core::{Error, Result, SystemParams};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    Squeeze,
    Oscillations,
    PhasePortrait,
    Sync,
    Correlations,
    DetuningSweep,
    Validate,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 7] = [
        Self::Squeeze,
        Self::Oscillations,
        Self::PhasePortrait,
        Self::Sync,
        Self::Correlations,
        Self::DetuningSweep,
        Self::Validate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Squeeze => "squeeze",
            Self::Oscillations => "oscillations",
            Self::PhasePortrait => "phase-portrait",
            Self::Sync => "sync",
            Self::Correlations => "correlations",
            Self::DetuningSweep => "detuning-sweep",
            Self::Validate => "validate",
        }
    }

    /// `(t_final, sample_dt)` in units of τ.
    fn default_grid(self) -> (f64, f64) {
        match self {
            Self::Validate => (4.0, 1.0 / 16.0),
            Self::Squeeze => (20.0, 1.0 / 64.0),
            _ => (40.0, 1.0 / 64.0),
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Gaussian,
    Lindblad,
    Both,
}

impl SolverChoice {
    pub fn gaussian(self) -> bool {
        matches!(self, Self::Gaussian | Self::Both)
    }

    pub fn lindblad(self) -> bool {
        matches!(self, Self::Lindblad | Self::Both)
    }
}

/// A fully resolved run request. Times are in units of τ = 2π/Ω.
#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub name: ScenarioName,
    pub params: SystemParams,
    pub solver: SolverChoice,
    pub t_final: f64,
    pub sample_dt: f64,
    pub output_dir: PathBuf,
    pub fock: Option<FockConfig>,
    /// Include the first-moment part in S(t).
    pub sync_means: bool,
    /// Δ_M values for `phase-portrait` and `detuning-sweep`.
    pub detunings: Vec<f64>,
    /// Periods of late-time signal written by `oscillations`.
    pub late_periods: usize,
    /// Length multiplier of the unmodulated baseline in `sync`.
    pub baseline_factor: f64,
    pub gaussian: PropagationOptions,
    pub master: MasterOptions,
}

impl Scenario {
    /// Scenario defaults with nothing overridden.
    pub fn new(name: ScenarioName, solver: SolverChoice, output_dir: PathBuf) -> Result<Self> {
        Self::from_config(name, solver, output_dir, ConfigMap::new())
    }

    /// Resolves defaults, then the config entries. Unknown keys are an error.
    pub fn from_config(
        name: ScenarioName,
        solver: SolverChoice,
        output_dir: PathBuf,
        mut cfg: ConfigMap,
    ) -> Result<Self> {
        let validate = name == ScenarioName::Validate;
        if validate && !cfg.contains("drive_e") {
            cfg.insert("drive_e", "0.9")?;
        }
        let params = cfg.system_params()?;
        let (t_def, dt_def) = name.default_grid();
        let t_final = cfg.get_f64("t_final")?.unwrap_or(t_def);
        let sample_dt = cfg.get_f64("sample_dt")?.unwrap_or(dt_def);

        let fock_keys = ["fock_cav", "fock_m1", "fock_m2", "fock_budget"];
        let wants_fock = solver.lindblad() || validate || fock_keys.iter().any(|k| cfg.contains(k));
        let fock = if wants_fock {
            let n_cav = cfg.get_usize("fock_cav")?.unwrap_or(8);
            let n_m1 = cfg.get_usize("fock_m1")?.unwrap_or(8);
            let n_m2 = cfg.get_usize("fock_m2")?.unwrap_or(5);
            let mut f = FockConfig::new(n_cav, n_m1, n_m2)?;
            if let Some(b) = cfg.get_usize("fock_budget")? {
                f = f.with_budget(b)?;
            }
            Some(f)
        } else {
            None
        };

        let detunings = cfg.get_f64_list("detunings")?.unwrap_or_else(|| match name {
            ScenarioName::DetuningSweep => (0..=10).map(|k| k as f64 * 0.01).collect(),
            _ => vec![0.0, 0.05, 0.1],
        });

        let mut gaussian = PropagationOptions::default();
        let mut master = MasterOptions::default();
        if let Some(r) = cfg.get_f64("rtol")? {
            gaussian.tol.rtol = r;
            master.tol.rtol = r;
        }
        if let Some(a) = cfg.get_f64("atol")? {
            gaussian.tol.atol = a;
            master.tol.atol = a;
        }
        if let Some(p) = cfg.get_f64("physicality_tol")? {
            gaussian.physicality_tol = p;
        }
        if let Some(l) = cfg.get_f64("leak_threshold")? {
            master.leak_threshold = l;
        }
        if let Some(p) = cfg.get_str("leak_policy") {
            master.leak_policy = match p.as_str() {
                "warn" => LeakPolicy::Warn,
                "abort" => LeakPolicy::Abort,
                _ => return Err(Error::Config(format!("leak_policy: `{p}` is not warn or abort"))),
            };
        }

        let s = Self {
            name,
            params,
            solver,
            t_final,
            sample_dt,
            output_dir,
            fock,
            sync_means: cfg.get_bool("sync_means")?.unwrap_or(true),
            detunings,
            late_periods: cfg.get_usize("late_periods")?.unwrap_or(3),
            baseline_factor: cfg.get_f64("baseline_factor")?.unwrap_or(80.0),
            gaussian,
            master,
        };
        cfg.finish()?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.sample_dt > 0.0) {
            return Err(Error::Config("sample_dt must be positive".into()));
        }
        if !(self.t_final > self.sample_dt) {
            return Err(Error::Config("t_final must exceed sample_dt".into()));
        }
        if !(self.params.mod_omega > 0.0) {
            return Err(Error::Config("mod_omega must be positive: times are in units of 2π/Ω".into()));
        }
        if self.solver.lindblad() || self.name == ScenarioName::Validate {
            let f = self.fock.ok_or_else(|| Error::Config("the master-equation solver needs a Fock truncation".into()))?;
            f.validate()?;
            let p = &self.params;
            if p.n_ph != 0.0 || p.n_m1 != 0.0 || p.n_m2 != 0.0 {
                return Err(Error::Config(
                    "the master-equation solver is zero-temperature; set n_ph = n_m1 = n_m2 = 0".into(),
                ));
            }
        }
        if self.detunings.is_empty() {
            return Err(Error::Config("detunings must not be empty".into()));
        }
        if self.late_periods == 0 {
            return Err(Error::Config("late_periods must be at least 1".into()));
        }
        if !(self.baseline_factor >= 1.0) {
            return Err(Error::Config("baseline_factor must be at least 1".into()));
        }
        Ok(())
    }

    /// Physical sample times `0, dt, …, t_final`, scaled by τ.
    pub fn times(&self) -> Vec<f64> {
        grid(self.t_final, self.sample_dt, self.params.tau())
    }

    pub fn tolerances(&self) -> (Tolerances, Tolerances) {
        (self.gaussian.tol, self.master.tol)
    }
}

/// `0, dt, …` up to `t_final` (all in τ), returned in physical time.
pub(crate) fn grid(t_final: f64, dt: f64, tau: f64) -> Vec<f64> {
    let n = (t_final / dt + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * dt * tau).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ConfigMap {
        ConfigMap::parse(text).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for n in ScenarioName::ALL {
            assert_eq!(n.as_str().parse::<ScenarioName>().unwrap(), n);
        }
        assert!("fig7".parse::<ScenarioName>().is_err());
    }

    #[test]
    fn defaults_and_overrides() {
        let s = Scenario::new(ScenarioName::Sync, SolverChoice::Gaussian, "out".into()).unwrap();
        assert_eq!(s.params, SystemParams::default());
        assert!(s.fock.is_none());
        assert_eq!(s.times().len(), 40 * 64 + 1);

        let s = Scenario::from_config(
            ScenarioName::Validate,
            SolverChoice::Both,
            "out".into(),
            cfg("fock_cav = 6\nt_final = 2\nsync_means = false"),
        )
        .unwrap();
        assert_eq!(s.params.drive_e, 0.9);
        assert_eq!(s.fock.unwrap().n_cav, 6);
        assert!(!s.sync_means);
    }

    #[test]
    fn rejects_bad_input() {
        let bad = |text: &str, solver| {
            Scenario::from_config(ScenarioName::Sync, solver, "o".into(), cfg(text)).is_err()
        };
        assert!(bad("colour = 3", SolverChoice::Gaussian));
        assert!(bad("t_final = 0.01\nsample_dt = 0.1", SolverChoice::Gaussian));
        assert!(bad("sample_dt = 0", SolverChoice::Gaussian));
        assert!(bad("kappa = -1", SolverChoice::Gaussian));
        assert!(bad("n_m1 = 1", SolverChoice::Lindblad));
        assert!(bad("leak_policy = maybe", SolverChoice::Lindblad));
        assert!(bad("fock_cav = 1", SolverChoice::Lindblad));
        assert!(bad("fock_cav = 100\nfock_m1 = 100", SolverChoice::Lindblad));
        assert!(!bad("n_m1 = 1", SolverChoice::Gaussian));
    }

    #[test]
    fn grid_includes_endpoint() {
        let g = grid(1.0, 0.25, 2.0);
        assert_eq!(g, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }
}
