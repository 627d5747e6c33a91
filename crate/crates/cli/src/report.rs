use std::collections::BTreeMap;
use std::path::Path;

use optosync_core::gaussian::PropagationOptions;
use optosync_core::lindblad::{FockConfig, MasterOptions};
use optosync_core::{Error, Result, SystemParams};
use serde::Serialize;

use crate::scenario::{Scenario, ScenarioName, SolverChoice};

/// `git describe`-style version baked in at build time.
pub const VERSION: &str = env!("OPTOSYNC_VERSION");

/// Everything needed to reproduce a run, plus its headline numbers.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: ScenarioName,
    pub version: String,
    pub solver: SolverChoice,
    pub params: SystemParams,
    /// In units of τ = 2π/Ω.
    pub t_final: f64,
    pub sample_dt: f64,
    pub tau: f64,
    pub fock: Option<FockConfig>,
    pub sync_means: bool,
    pub gaussian_options: PropagationOptions,
    pub master_options: MasterOptions,
    /// File names written into the output directory.
    pub outputs: Vec<String>,
    pub summary: BTreeMap<String, f64>,
    /// Warnings such as truncation leaks or runs that did not settle.
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn new(s: &Scenario) -> Self {
        Self {
            scenario: s.name,
            version: VERSION.to_string(),
            solver: s.solver,
            params: s.params,
            t_final: s.t_final,
            sample_dt: s.sample_dt,
            tau: s.params.tau(),
            fock: s.fock,
            sync_means: s.sync_means,
            gaussian_options: s.gaussian,
            master_options: s.master,
            outputs: Vec::new(),
            summary: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn set(&mut self, key: impl Into<String>, value: f64) {
        self.summary.insert(key.into(), value);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.summary.get(key).copied()
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn to_json(&self) -> String {
        // non-finite summary values become null
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("report.json");
        std::fs::write(&path, self.to_json() + "\n")
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}
