use rayon::prelude::*;

use optosync_core::gaussian::{
    settle_gaussian, simulate_gaussian, GaussianObservables, LinearizedModel, SettleGaussianOptions,
};
use optosync_core::lindblad::{
    coherent_product, mirror_observables, simulate_master_equation, MasterReport, MirrorOperators,
};
use optosync_core::meanfield::{
    integrate_meanfield_with, orbit_area, settle_meanfield, MeanFieldState, SettleOptions,
};
use optosync_core::ode::Control;
use optosync_core::{Error, Result, SystemParams};

use crate::analysis;
use crate::plot::{emit_plot, PlotKind, Table};
use crate::report::RunReport;
use crate::scenario::{grid, Scenario, ScenarioName, SolverChoice};

/// Observables sampled along one run.
#[derive(Debug, Clone, Default)]
pub struct Series {
    pub times: Vec<f64>,
    pub obs: Vec<GaussianObservables>,
    pub means: Vec<MeanFieldState>,
}

impl Series {
    pub fn column(&self, f: impl Fn(&GaussianObservables) -> f64) -> Vec<f64> {
        self.obs.iter().map(f).collect()
    }

    pub fn t_tau(&self, tau: f64) -> Vec<f64> {
        self.times.iter().map(|t| t / tau).collect()
    }

    /// Samples with `t >= t_from`.
    pub fn since(&self, t_from: f64) -> Series {
        let k = self.times.partition_point(|t| *t < t_from);
        Series {
            times: self.times[k..].to_vec(),
            obs: self.obs[k..].to_vec(),
            means: self.means[k..].to_vec(),
        }
    }
}

/// Gaussian run from the stationary means with bath-occupancy fluctuations.
pub fn gaussian_series(s: &Scenario, params: &SystemParams, times: &[f64]) -> Result<Series> {
    let model = LinearizedModel::new(params)?;
    let mut out = Series::default();
    simulate_gaussian(
        &model.default_initial_state(),
        times,
        params,
        model.g_eff,
        &s.gaussian,
        |t, st| {
            out.times.push(t);
            out.obs.push(GaussianObservables::from_state(st, s.sync_means)?);
            out.means.push(st.means);
            Ok(Control::Continue)
        },
    )?;
    Ok(out)
}

/// Master-equation run from a product of coherent states at the stationary means.
pub fn lindblad_series(
    s: &Scenario,
    params: &SystemParams,
    times: &[f64],
) -> Result<(Series, MasterReport)> {
    let fock = s
        .fock
        .ok_or_else(|| Error::Config("the master-equation solver needs a Fock truncation".into()))?;
    let model = LinearizedModel::new(params)?;
    let rho0 = coherent_product(&model.stationary, &fock)?;
    let mops = MirrorOperators::new(fock.n_m1, fock.n_m2);
    let mut out = Series::default();
    let report = simulate_master_equation(&rho0, times, params, &fock, &s.master, |t, rho| {
        out.times.push(t);
        out.obs.push(mirror_observables(rho, &mops, s.sync_means)?);
        Ok(Control::Continue)
    })?;
    Ok((out, report))
}

fn note_leak(report: &mut RunReport, m: &MasterReport, tau: f64) {
    report.set("lindblad_max_top_population", analysis::max(&m.max_top_population));
    if let Some(l) = m.first_leak {
        report.note(format!(
            "truncation leak: mode {} top-level population {:.3e} at t/τ = {:.3}",
            l.mode,
            l.population,
            l.t / tau
        ));
    }
}

struct Output<'a> {
    s: &'a Scenario,
    report: RunReport,
}

impl Output<'_> {
    fn table(&mut self, name: &str, table: &Table, plot: Option<PlotKind>) -> Result<()> {
        let csv = format!("{name}.csv");
        table.write_csv(&self.s.output_dir.join(&csv))?;
        self.report.outputs.push(csv);
        if let Some(kind) = plot {
            let svg = format!("{name}.svg");
            emit_plot(table, &kind, &self.s.output_dir.join(&svg))?;
            self.report.outputs.push(svg);
        }
        Ok(())
    }
}

/// Runs the scenario, writes its CSV, SVG and `report.json` into the output
/// directory, and returns the report.
pub fn run_scenario(s: &Scenario) -> Result<RunReport> {
    s.validate()?;
    std::fs::create_dir_all(&s.output_dir)
        .map_err(|e| Error::Io(format!("{}: {e}", s.output_dir.display())))?;
    let mut out = Output {
        s,
        report: RunReport::new(s),
    };
    let model = LinearizedModel::new(&s.params)?;
    out.report.set("photon_number", model.stationary.photon_number());
    out.report.set("g_eff", model.g_eff);
    match s.name {
        ScenarioName::Squeeze => squeeze(&mut out)?,
        ScenarioName::Oscillations => oscillations(&mut out)?,
        ScenarioName::PhasePortrait => phase_portrait(&mut out)?,
        ScenarioName::Sync => sync(&mut out)?,
        ScenarioName::Correlations => correlations(&mut out)?,
        ScenarioName::DetuningSweep => detuning_sweep(&mut out)?,
        ScenarioName::Validate => validate(&mut out)?,
    }
    out.report.write(&s.output_dir)?;
    out.report.outputs.push("report.json".into());
    Ok(out.report)
}

fn settle_options(s: &Scenario, params: &SystemParams) -> SettleGaussianOptions {
    SettleGaussianOptions {
        propagation: s.gaussian,
        ..SettleGaussianOptions::for_params(params)
    }
}

fn squeeze(out: &mut Output) -> Result<()> {
    let s = out.s;
    let tau = s.params.tau();
    if s.solver.gaussian() {
        let model = LinearizedModel::new(&s.params)?;
        let settled = settle_gaussian(
            &model.default_initial_state(),
            &s.params,
            model.g_eff,
            &settle_options(s, &s.params),
        )?;
        match settled.settled_at {
            Some(t) => out.report.set("gaussian_settled_at", t / tau),
            None => out.report.note("gaussian run reached max_time before settling"),
        }
        let mut t = Table::new(&["t_tau", "var_q1_ratio", "var_q2_ratio"]);
        let (mut v1, mut v2) = (Vec::new(), Vec::new());
        for (time, st) in settled.last_period.iter() {
            let o = GaussianObservables::from_state(st, s.sync_means)?;
            v1.push(o.var_q1_ratio());
            v2.push(o.var_q2_ratio());
            t.push(vec![time / tau, o.var_q1_ratio(), o.var_q2_ratio()]);
        }
        out.report.set("gaussian_min_var_q1_ratio", analysis::min(&v1));
        out.report.set("gaussian_min_var_q2_ratio", analysis::min(&v2));
        out.table(
            "squeeze_gaussian",
            &t,
            Some(PlotKind::lines("t_tau", &["var_q1_ratio", "var_q2_ratio"])),
        )?;
    }
    if s.solver.lindblad() {
        let (series, m) = lindblad_series(s, &s.params, &s.times())?;
        note_leak(&mut out.report, &m, tau);
        let late = series.since((s.t_final - 1.0) * tau);
        let mut t = Table::new(&["t_tau", "var_q1_ratio", "var_q2_ratio"]);
        for (time, o) in late.times.iter().zip(&late.obs) {
            t.push(vec![time / tau, o.var_q1_ratio(), o.var_q2_ratio()]);
        }
        out.report.set("lindblad_min_var_q1_ratio", analysis::min(&late.column(|o| o.var_q1_ratio())));
        out.report.set("lindblad_min_var_q2_ratio", analysis::min(&late.column(|o| o.var_q2_ratio())));
        out.table(
            "squeeze_lindblad",
            &t,
            Some(PlotKind::lines("t_tau", &["var_q1_ratio", "var_q2_ratio"])),
        )?;
    }
    Ok(())
}

/// Classical orbit after settling, extended to `periods` periods.
pub fn late_orbit(params: &SystemParams, periods: usize) -> Result<(Vec<f64>, Vec<MeanFieldState>, bool)> {
    let model = LinearizedModel::new(params)?;
    let opts = SettleOptions::for_params(params);
    let settled = settle_meanfield(&model.stationary, params, &opts)?;
    let (t0, s0) = settled
        .last_period
        .last()
        .map(|(t, s)| (t, *s))
        .ok_or_else(|| Error::NoConvergence("empty orbit".into()))?;
    let n = opts.samples_per_period * periods;
    let dt = opts.period / opts.samples_per_period as f64;
    let times: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * dt).collect();
    let mut ts = Vec::with_capacity(n + 1);
    let mut xs = Vec::with_capacity(n + 1);
    integrate_meanfield_with(&s0, &times, params, opts.tol, |t, x| {
        ts.push(t);
        xs.push(*x);
        Ok(Control::Continue)
    })?;
    Ok((ts, xs, settled.settled_at.is_some()))
}

fn oscillations(out: &mut Output) -> Result<()> {
    let s = out.s;
    let tau = s.params.tau();
    let (ts, xs, settled) = late_orbit(&s.params, s.late_periods)?;
    if !settled {
        out.report.note("mean-field orbit reached max_time before settling");
    }
    let mut t = Table::new(&["t_tau", "q1", "q2"]);
    for (time, x) in ts.iter().zip(&xs) {
        t.push(vec![time / tau, x.q1, x.q2]);
    }
    let q1: Vec<f64> = xs.iter().map(|x| x.q1).collect();
    let q2: Vec<f64> = xs.iter().map(|x| x.q2).collect();
    out.report.set("q1_q2_correlation", analysis::correlation(&q1, &q2));
    out.report.set("q1_peak_to_peak", analysis::max(&q1) - analysis::min(&q1));
    out.report.set("q2_peak_to_peak", analysis::max(&q2) - analysis::min(&q2));
    out.table("oscillations", &t, Some(PlotKind::lines("t_tau", &["q1", "q2"])))
}

/// Late-time orbit areas `(mirror 1, mirror 2)` over one period.
pub fn orbit_areas(params: &SystemParams) -> Result<(f64, f64, Vec<f64>, Vec<MeanFieldState>, bool)> {
    let (ts, xs, settled) = late_orbit(params, 1)?;
    let col = |f: fn(&MeanFieldState) -> f64| xs.iter().map(f).collect::<Vec<f64>>();
    let a1 = orbit_area(&col(|x| x.q1), &col(|x| x.p1));
    let a2 = orbit_area(&col(|x| x.q2), &col(|x| x.p2));
    Ok((a1, a2, ts, xs, settled))
}

fn phase_portrait(out: &mut Output) -> Result<()> {
    let s = out.s;
    let tau = s.params.tau();
    let runs: Vec<_> = s
        .detunings
        .par_iter()
        .map(|&dm| orbit_areas(&SystemParams { delta_m: dm, ..s.params }))
        .collect::<Result<_>>()?;
    let mut areas = Table::new(&["delta_m", "area_m1", "area_m2"]);
    for (k, (dm, (a1, a2, ts, xs, settled))) in s.detunings.iter().zip(runs).enumerate() {
        if !settled {
            out.report.note(format!("Δ_M = {dm}: orbit reached max_time before settling"));
        }
        areas.push(vec![*dm, a1, a2]);
        out.report.set(format!("area_m1[{k}]"), a1);
        out.report.set(format!("area_m2[{k}]"), a2);
        let mut t = Table::new(&["t_tau", "q1", "p1", "q2", "p2"]);
        for (time, x) in ts.iter().zip(&xs) {
            t.push(vec![time / tau, x.q1, x.p1, x.q2, x.p2]);
        }
        out.table(
            &format!("portrait_{k}"),
            &t,
            Some(PlotKind::portrait(&[("q1", "p1"), ("q2", "p2")])),
        )?;
    }
    out.table("portrait_areas", &areas, None)
}

fn sync(out: &mut Output) -> Result<()> {
    let s = out.s;
    let tau = s.params.tau();
    let times = s.times();
    let modulated = gaussian_series(s, &s.params, &times)?;
    let base_times = grid(s.t_final * s.baseline_factor, s.sample_dt * s.baseline_factor, tau);
    let baseline = gaussian_series(s, &s.params.unmodulated(), &base_times)?;

    let sm = modulated.column(|o| o.sync);
    let sb = baseline.column(|o| o.sync);
    let mut t = Table::new(&["t_tau", "sync", "sync_unmodulated"]);
    for (k, time) in times.iter().enumerate() {
        t.push(vec![time / tau, sm[k], sb.get(k).copied().unwrap_or(f64::NAN)]);
    }
    let late_from = (s.t_final - 1.0) * tau;
    out.report.set("max_sync", analysis::max(&sm));
    out.report.set("late_sync", analysis::mean_since(&times, &sm, late_from).unwrap_or(f64::NAN));
    out.report.set(
        "late_sync_unmodulated",
        analysis::mean_since(&base_times, &sb, (s.t_final - 1.0) * s.baseline_factor * tau)
            .unwrap_or(f64::NAN),
    );
    out.report.set("baseline_factor", s.baseline_factor);
    out.table("sync", &t, Some(PlotKind::lines("t_tau", &["sync", "sync_unmodulated"])))?;

    if s.solver.lindblad() {
        let (series, m) = lindblad_series(s, &s.params, &times)?;
        note_leak(&mut out.report, &m, tau);
        let sl = series.column(|o| o.sync);
        let mut t = Table::new(&["t_tau", "sync"]);
        for (time, v) in times.iter().zip(&sl) {
            t.push(vec![time / tau, *v]);
        }
        out.report.set("lindblad_max_sync", analysis::max(&sl));
        out.table("sync_lindblad", &t, Some(PlotKind::lines("t_tau", &["sync"])))?;
    }
    Ok(())
}

fn correlation_table(series: &Series, tau: f64) -> Table {
    let mut t = Table::new(&["t_tau", "log_neg", "mutual_info", "sync"]);
    for (time, o) in series.times.iter().zip(&series.obs) {
        t.push(vec![time / tau, o.log_neg, o.mutual_info, o.sync]);
    }
    t
}

/// Time at which `values` first exceeds `frac` of its mean over the final τ.
pub fn onset(series_t: &[f64], values: &[f64], frac: f64, tau: f64) -> Option<f64> {
    let t_end = *series_t.last()?;
    let late = analysis::mean_since(series_t, values, t_end - tau)?;
    analysis::first_crossing(series_t, values, frac * late)
}

fn correlations(out: &mut Output) -> Result<()> {
    let s = out.s;
    let tau = s.params.tau();
    let times = s.times();
    let late_from = (s.t_final - 1.0) * tau;
    let summarize = |out: &mut Output, prefix: &str, series: &Series| {
        let en = series.column(|o| o.log_neg);
        let mi = series.column(|o| o.mutual_info);
        let sy = series.column(|o| o.sync);
        let r = &mut out.report;
        r.set(format!("{prefix}late_log_neg"), analysis::mean_since(&times, &en, late_from).unwrap_or(f64::NAN));
        r.set(format!("{prefix}late_mutual_info"), analysis::mean_since(&times, &mi, late_from).unwrap_or(f64::NAN));
        r.set(format!("{prefix}max_log_neg"), analysis::max(&en));
        if let Some(t) = onset(&times, &en, 0.1, tau) {
            r.set(format!("{prefix}log_neg_onset"), t / tau);
        }
        if let Some(t) = onset(&times, &sy, 0.9, tau) {
            r.set(format!("{prefix}sync_onset"), t / tau);
        }
    };
    if s.solver.gaussian() {
        let series = gaussian_series(s, &s.params, &times)?;
        summarize(out, "", &series);
        out.table(
            "correlations",
            &correlation_table(&series, tau),
            Some(PlotKind::lines("t_tau", &["log_neg", "mutual_info"])),
        )?;
    }
    if s.solver.lindblad() {
        let (series, m) = lindblad_series(s, &s.params, &times)?;
        note_leak(&mut out.report, &m, tau);
        summarize(out, "lindblad_", &series);
        out.table(
            "correlations_lindblad",
            &correlation_table(&series, tau),
            Some(PlotKind::lines("t_tau", &["log_neg", "mutual_info"])),
        )?;
    }
    Ok(())
}

/// Late-time S over the final settled period: `(mean, min, max, settled)`.
pub fn late_sync(s: &Scenario, params: &SystemParams) -> Result<(f64, f64, f64, bool)> {
    let model = LinearizedModel::new(params)?;
    let settled = settle_gaussian(
        &model.default_initial_state(),
        params,
        model.g_eff,
        &settle_options(s, params),
    )?;
    let sy = settled
        .last_period
        .states
        .iter()
        .map(|st| GaussianObservables::from_state(st, s.sync_means).map(|o| o.sync))
        .collect::<Result<Vec<f64>>>()?;
    // the window includes both endpoints; drop one so each phase counts once
    let body = &sy[..sy.len().saturating_sub(1).max(1)];
    let mean = body.iter().sum::<f64>() / body.len() as f64;
    Ok((mean, analysis::min(body), analysis::max(body), settled.is_settled()))
}

fn detuning_sweep(out: &mut Output) -> Result<()> {
    let s = out.s;
    let points: Vec<_> = s
        .detunings
        .par_iter()
        .map(|&dm| late_sync(s, &SystemParams { delta_m: dm, ..s.params }))
        .collect::<Result<_>>()?;
    let mut t = Table::new(&["delta_m", "sync_mean", "sync_min", "sync_max"]);
    for (dm, (mean, lo, hi, settled)) in s.detunings.iter().zip(points) {
        if !settled {
            out.report.note(format!("Δ_M = {dm}: reached max_time before settling"));
        }
        t.push(vec![*dm, mean, lo, hi]);
    }
    let means = t.column("sync_mean").unwrap_or_default();
    out.report.set("sync_first", means[0]);
    out.report.set("sync_last", means[means.len() - 1]);
    out.table(
        "detuning_sweep",
        &t,
        Some(PlotKind::lines("delta_m", &["sync_mean", "sync_min", "sync_max"])),
    )
}

/// Observables compared by `validate`, with their CSV stems.
pub const COMPARED: [(&str, fn(&GaussianObservables) -> f64); 5] = [
    ("var_q1_ratio", |o| o.var_q1_ratio()),
    ("var_q2_ratio", |o| o.var_q2_ratio()),
    ("sync", |o| o.sync),
    ("log_neg", |o| o.log_neg),
    ("mutual_info", |o| o.mutual_info),
];

fn validate(out: &mut Output) -> Result<()> {
    let s = out.s;
    let tau = s.params.tau();
    let times = s.times();
    let g = gaussian_series(s, &s.params, &times)?;
    let (l, m) = lindblad_series(s, &s.params, &times)?;
    out.report.solver = SolverChoice::Both;
    note_leak(&mut out.report, &m, tau);
    let mut cols = vec!["t_tau".to_string()];
    for (name, _) in COMPARED {
        cols.push(format!("{name}_gaussian"));
        cols.push(format!("{name}_lindblad"));
    }
    let mut t = Table::new(&cols);
    for k in 0..times.len() {
        let mut row = vec![times[k] / tau];
        for (_, f) in COMPARED {
            row.push(f(&g.obs[k]));
            row.push(f(&l.obs[k]));
        }
        t.push(row);
    }
    for (name, f) in COMPARED {
        let (a, b) = (l.column(f), g.column(f));
        out.report.set(format!("error_{name}"), analysis::peak_normalized_error(&a, &b));
    }
    out.report.set("lindblad_steps", m.steps_accepted as f64);
    out.table(
        "validate",
        &t,
        Some(PlotKind::lines(
            "t_tau",
            &["sync_gaussian", "sync_lindblad", "var_q1_ratio_gaussian", "var_q1_ratio_lindblad"],
        )),
    )
}
