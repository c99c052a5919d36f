//! The five subcommands. Each writes CSV files under an output directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use condensate_fp::evolve::{run, Trajectory};
use condensate_fp::masscrit::{blowup_time_bound, energy_floor, mass_threshold, ThresholdReport};
use condensate_fp::quadrature::QuadratureError;
use condensate_fp::stationary::{
    beta_exponents, critical_mass, ln_c_bar, solve_c_for_mass, StationaryError, SteadyState,
};
use condensate_fp::{diffusion_weight, Grid, ModelParams};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Mode, SweepTask};
use crate::csv::{tag, Cell, Table};
use crate::{numerical, validate, CliError};

/// Runs `mode` with `config` (already resolved for that mode), writing into `out`.
pub fn run_command(mode: Mode, config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    match mode {
        Mode::Stationary => cmd_stationary(config, out),
        Mode::Evolve => cmd_evolve(config, out),
        Mode::Threshold => cmd_threshold(config, out),
        Mode::Sweep => cmd_sweep(config, out),
        Mode::Validate => cmd_validate(config, out),
    }
}

struct Writer<'a> {
    out: &'a Path,
    header: String,
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(config: &ExperimentConfig, out: &'a Path) -> Self {
        Self {
            out,
            header: config.header(),
            files: Vec::new(),
        }
    }

    fn write(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        let path = self.out.join(name);
        table.write(&path, &self.header)?;
        self.files.push(path);
        Ok(())
    }
}

/// `n` points from -1 to 1 inclusive, exactly antisymmetric.
fn closed_points(n: usize) -> Vec<f64> {
    let d = (n - 1) as f64;
    (0..n).map(|k| (2.0 * k as f64 - d) / d).collect()
}

/// Grid centres plus log-spaced points on both sides of `m`.
fn profile_points(grid_n: usize, log_points: usize, m: f64) -> Vec<f64> {
    let grid = Grid::new(grid_n).expect("grid_n validated");
    let mut w: Vec<f64> = grid.centers().to_vec();
    if log_points > 1 {
        let span = (log_points - 1) as f64;
        for k in 0..log_points {
            let u = 10f64.powf(-6.0 + 5.0 * k as f64 / span);
            w.extend([m - u, m + u].into_iter().filter(|x| x.abs() < 1.0));
        }
    }
    w.sort_by(f64::total_cmp);
    w.dedup();
    w
}

fn error_status(e: &StationaryError) -> String {
    match e {
        StationaryError::Quadrature(QuadratureError::NonConvergence { .. }) => "divergent".into(),
        other => other.to_string(),
    }
}

/// Diffusion profiles, steady-state profiles and a per-gamma summary of the critical quantities.
pub fn cmd_stationary(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let base = config.model.params()?;
    let s = &config.stationary;
    let mut writer = Writer::new(config, out);
    let points = profile_points(config.grid_n, s.log_points, base.m());
    let mut summary = Table::new(&["gamma", "a", "b", "ln_c_bar", "c_bar", "critical_mass", "status"]);
    for &gamma in &s.gammas {
        let params = base.with_gamma(gamma).map_err(|e| CliError::Config(e.to_string()))?;
        let mut h = Table::new(&["w", "H"]);
        for w in closed_points(s.h_points) {
            h.push(vec![w.into(), diffusion_weight(&params, w).map_err(numerical)?.into()]);
        }
        writer.write(&format!("stationary_h_gamma{}.csv", tag(gamma)), &h)?;

        let exps = beta_exponents(&params);
        if params.is_linear() {
            let mu = config.initial.mu;
            let mut row = vec![exps.a.into(), exps.b.into(), Cell::Empty, Cell::Empty, Cell::Empty];
            match solve_c_for_mass(&params, mu, 1e-12).and_then(|c| SteadyState::new(params, c)) {
                Ok(state) => {
                    let mut t = Table::new(&["w", "f"]);
                    t.comment(format!("linear steady state with mass {mu}"));
                    for &w in &points {
                        t.push(vec![w.into(), state.density(w).map_err(numerical)?.into()]);
                    }
                    writer.write(&format!("stationary_profile_gamma{}_linear.csv", tag(gamma)), &t)?;
                    row.push("linear model".into());
                }
                Err(e) => row.push(e.to_string().into()),
            }
            row.insert(0, gamma.into());
            summary.push(row);
            continue;
        }

        let ln_cb = match ln_c_bar(&params) {
            Ok(v) => v,
            Err(e) => {
                summary.push(vec![gamma.into(), exps.a.into(), exps.b.into(), Cell::Empty, Cell::Empty, Cell::Empty, e.to_string().into()]);
                continue;
            }
        };
        let mut status = String::from("ok");
        for &ratio in &s.ratios {
            let state = SteadyState::from_ln_constant(params, ln_cb + ratio.ln());
            let state = match state {
                Ok(st) => st,
                Err(e) => {
                    status = format!("ratio {ratio}: {e}");
                    continue;
                }
            };
            let mut t = Table::new(&["w", "f"]);
            t.comment(format!("C / C_bar = {ratio}{}", if state.is_critical() { " (critical)" } else { "" }));
            for &w in &points {
                match state.density(w) {
                    Ok(f) => t.push(vec![w.into(), f.into()]),
                    Err(StationaryError::Singular(_)) => {}
                    Err(e) => status = format!("ratio {ratio}, w {w}: {e}"),
                }
            }
            writer.write(&format!("stationary_profile_gamma{}_ratio{}.csv", tag(gamma), tag(ratio)), &t)?;
        }
        let mu_c: Cell = match critical_mass(&params, s.critical_mass_tol) {
            Ok(v) => v.into(),
            Err(e) => error_status(&e).into(),
        };
        summary.push(vec![
            gamma.into(),
            exps.a.into(),
            exps.b.into(),
            ln_cb.into(),
            ln_cb.exp().into(),
            mu_c,
            status.into(),
        ]);
    }
    writer.write("stationary_summary.csv", &summary)?;
    Ok(writer.files)
}

fn threshold_curve(
    x_name: &str,
    xs: &[f64],
    at: impl Fn(f64) -> Result<f64, CliError>,
) -> Result<Table, CliError> {
    let mut t = Table::new(&[x_name, "mu_threshold"]);
    for &x in xs {
        t.push(vec![x.into(), at(x)?.into()]);
    }
    Ok(t)
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// The four families of threshold curves, a summary at the configured point and optional reports.
pub fn cmd_threshold(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let base = config.model.params()?;
    let t = &config.threshold;
    let mut writer = Writer::new(config, out);
    let mu_at = |p: ModelParams, e0: f64| mass_threshold(&p, e0).map_err(numerical);
    for &g in &t.gammas {
        let p = base.with_gamma(g).map_err(config_err)?;
        let curve = threshold_curve("e0", &t.e0_axis, |e0| mu_at(p, e0))?;
        writer.write(&format!("threshold_energy_gamma{}.csv", tag(g)), &curve)?;
    }
    for &s2 in &t.sigma2s {
        let p = base.with_sigma2(s2).map_err(config_err)?;
        let curve = threshold_curve("gamma", &t.gamma_axis, |g| mu_at(p.with_gamma(g).map_err(config_err)?, t.e0))?;
        writer.write(&format!("threshold_gamma_sigma2{}.csv", tag(s2)), &curve)?;
    }
    for &a in &t.alphas {
        let p = base.with_alpha(a).map_err(config_err)?;
        let curve = threshold_curve("gamma", &t.gamma_axis, |g| mu_at(p.with_gamma(g).map_err(config_err)?, t.e0))?;
        writer.write(&format!("threshold_gamma_alpha{}.csv", tag(a)), &curve)?;
    }
    for &g in &t.gammas {
        let p = base.with_gamma(g).map_err(config_err)?;
        let curve = threshold_curve("alpha", &t.alpha_axis, |a| mu_at(p.with_alpha(a).map_err(config_err)?, t.e0))?;
        writer.write(&format!("threshold_alpha_gamma{}.csv", tag(g)), &curve)?;
    }

    let report = ThresholdReport::new(base, t.e0, None, Some(t.critical_mass_tol)).map_err(numerical)?;
    let mut summary = Table::new(&["quantity", "value"]);
    for (k, v) in [
        ("e0", report.e0),
        ("mu_threshold", report.mu_threshold),
        ("a", report.a),
        ("b", report.b),
        ("c_bar", report.c_bar),
        ("critical_mass", report.critical_mass.unwrap_or(f64::NAN)),
        ("c_alpha", report.c_alpha),
        ("d_alpha", report.d_alpha),
        ("eta", report.eta),
    ] {
        summary.push(vec![k.into(), v.into()]);
    }
    writer.write("threshold_summary.csv", &summary)?;

    if !t.points.is_empty() {
        let mut table = Table::new(&["mu", "e0", "mu_threshold", "lambda", "eta", "psi", "t_bar", "small_energy_ok"]);
        for &[mu, e0] in &t.points {
            let r = ThresholdReport::new(base, e0, Some(mu), None).map_err(numerical)?;
            table.push(vec![
                mu.into(),
                e0.into(),
                r.mu_threshold.into(),
                r.lambda.into(),
                r.eta.into(),
                r.psi.into(),
                r.t_bar.into(),
                r.small_energy_ok.map_or(Cell::Empty, Cell::from),
            ]);
        }
        writer.write("threshold_report.csv", &table)?;
    }
    Ok(writer.files)
}

/// Scalars describing one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolveSummary {
    pub mu: f64,
    pub initial_energy: f64,
    pub steps: u64,
    pub final_time: f64,
    pub reached_t_end: bool,
    pub blowup_time: Option<f64>,
    pub blowup_reason: Option<&'static str>,
    pub t_bar: Option<f64>,
    pub mass_drift: f64,
    pub final_energy: f64,
    pub peak_l2_growth: f64,
    /// Smallest `E / energy_floor(mu, l2sq)` over the recorded diagnostics.
    pub min_energy_floor_ratio: f64,
    /// L1 distance of the final state to the steady state of the same mass (linear model).
    pub l1_to_equilibrium: Option<f64>,
}

impl EvolveSummary {
    fn from_trajectory(tr: &Trajectory) -> Result<Self, CliError> {
        let params = tr.params;
        let first = tr.diagnostics[0];
        let last = *tr.diagnostics.last().expect("nonempty diagnostics");
        let t_bar = if params.beta() > 0.0 && params.alpha() > 2.0 {
            blowup_time_bound(&params, first.mass, first.energy).map_err(numerical)?
        } else {
            None
        };
        let l1 = if params.is_linear() {
            let c = solve_c_for_mass(&params, first.mass, 1e-12).map_err(numerical)?;
            let state = SteadyState::new(params, c).map_err(numerical)?;
            let f = &tr.final_field;
            let h = f.grid().cell_width();
            let mut sum = 0.0;
            for (&w, &v) in f.grid().centers().iter().zip(f.values()) {
                sum += (v - state.density(w).map_err(numerical)?).abs();
            }
            Some(sum * h)
        } else {
            None
        };
        Ok(Self {
            mu: first.mass,
            initial_energy: first.energy,
            steps: tr.steps,
            final_time: tr.final_time(),
            reached_t_end: tr.reached_t_end,
            blowup_time: tr.blowup.map(|b| b.time),
            blowup_reason: tr.blowup.map(|b| b.reason.as_str()),
            t_bar,
            mass_drift: tr.mass_drift(),
            final_energy: last.energy,
            peak_l2_growth: tr.diagnostics.iter().map(|d| d.l2sq).fold(0.0, f64::max) / first.l2sq,
            min_energy_floor_ratio: tr
                .diagnostics
                .iter()
                .map(|d| d.energy / energy_floor(d.mass, d.l2sq))
                .fold(f64::INFINITY, f64::min),
            l1_to_equilibrium: l1,
        })
    }

    fn rows(&self) -> Vec<(&'static str, Cell)> {
        vec![
            ("mu", self.mu.into()),
            ("initial_energy", self.initial_energy.into()),
            ("steps", self.steps.into()),
            ("final_time", self.final_time.into()),
            ("reached_t_end", self.reached_t_end.into()),
            ("blowup", self.blowup_time.is_some().into()),
            ("blowup_time", self.blowup_time.into()),
            ("blowup_reason", self.blowup_reason.map_or(Cell::Empty, Cell::from)),
            ("t_bar", self.t_bar.into()),
            (
                "blowup_before_t_bar",
                match (self.blowup_time, self.t_bar) {
                    (Some(t), Some(tb)) => (t < tb).into(),
                    _ => Cell::Empty,
                },
            ),
            ("mass_drift", self.mass_drift.into()),
            ("final_energy", self.final_energy.into()),
            ("peak_l2_growth", self.peak_l2_growth.into()),
            ("min_energy_floor_ratio", self.min_energy_floor_ratio.into()),
            ("l1_to_equilibrium", self.l1_to_equilibrium.into()),
        ]
    }
}

/// Runs one simulation and writes its diagnostics, snapshots and summary into `dir`.
fn evolve_into(config: &ExperimentConfig, dir: &Path) -> Result<(EvolveSummary, Vec<PathBuf>), CliError> {
    let params = config.model.params()?;
    let solver = config.solver.solver_config()?;
    let mu = config.initial.mass(&params)?;
    let grid = Arc::new(Grid::new(config.grid_n).map_err(config_err)?);
    let f0 = config.initial.data().build(grid, mu).map_err(config_err)?;
    let tr = run(&f0, &params, &solver).map_err(numerical)?;
    let summary = EvolveSummary::from_trajectory(&tr)?;

    let mut writer = Writer::new(config, dir);
    let mut diag = Table::new(&["time", "mass", "mean", "energy", "l2sq", "max_density"]);
    for d in &tr.diagnostics {
        diag.push(vec![d.time.into(), d.mass.into(), d.mean.into(), d.energy.into(), d.l2sq.into(), d.max_density.into()]);
    }
    writer.write("evolve_diagnostics.csv", &diag)?;
    for (k, (t, field)) in tr.snapshots.iter().enumerate() {
        let mut snap = Table::new(&["w", "f"]);
        snap.comment(format!("time = {}", crate::csv::fmt_num(*t)));
        for (&w, &v) in field.grid().centers().iter().zip(field.values()) {
            snap.push(vec![w.into(), v.into()]);
        }
        writer.write(&format!("snapshots/evolve_snapshot_{k:04}.csv"), &snap)?;
    }
    let mut table = Table::new(&["quantity", "value"]);
    for (k, v) in summary.rows() {
        table.push(vec![k.into(), v]);
    }
    writer.write("evolve_summary.csv", &table)?;
    Ok((summary, writer.files))
}

/// One simulation; a detected blow-up is an outcome, not an error.
pub fn cmd_evolve(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let (summary, files) = evolve_into(config, out)?;
    match (summary.blowup_time, summary.blowup_reason) {
        (Some(t), Some(r)) => eprintln!("blow-up ({r}) at t = {t:e}, t_bar = {:?}", summary.t_bar),
        _ => eprintln!("reached t = {:e} without blow-up", summary.final_time),
    }
    Ok(files)
}

/// Sweep points run concurrently on the current rayon pool; the summary is written last.
pub fn cmd_sweep(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep mode requires a [sweep] section".into()))?;
    let name = serde_json::to_value(sweep.parameter)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    let points: Vec<(usize, f64)> = sweep.values.iter().copied().enumerate().collect();
    let mut files = Vec::new();
    let mut summary;
    match sweep.task {
        SweepTask::Evolve => {
            let results: Vec<Result<(EvolveSummary, Vec<PathBuf>), CliError>> = points
                .par_iter()
                .map(|&(k, v)| {
                    let point = config.sweep_point(sweep.parameter, v)?;
                    evolve_into(&point, &out.join(format!("sweep_{k:03}_{name}{}", tag(v))))
                })
                .collect();
            summary = Table::new(&[
                &name,
                "mu",
                "blowup_time",
                "blowup_reason",
                "t_bar",
                "mass_drift",
                "final_energy",
                "peak_l2_growth",
                "min_energy_floor_ratio",
                "status",
            ]);
            for ((_, v), r) in points.iter().zip(results) {
                match r {
                    Ok((s, f)) => {
                        files.extend(f);
                        summary.push(vec![
                            (*v).into(),
                            s.mu.into(),
                            s.blowup_time.into(),
                            s.blowup_reason.map_or(Cell::Empty, Cell::from),
                            s.t_bar.into(),
                            s.mass_drift.into(),
                            s.final_energy.into(),
                            s.peak_l2_growth.into(),
                            s.min_energy_floor_ratio.into(),
                            "ok".into(),
                        ]);
                    }
                    Err(e) => {
                        let mut row = vec![Cell::from(*v)];
                        row.extend(std::iter::repeat(Cell::Empty).take(8));
                        row.push(e.to_string().into());
                        summary.push(row);
                    }
                }
            }
        }
        SweepTask::Threshold => {
            let results: Vec<Result<ThresholdReport, CliError>> = points
                .par_iter()
                .map(|&(_, v)| {
                    let point = config.sweep_point(sweep.parameter, v)?;
                    let p = point.model.params()?;
                    ThresholdReport::new(p, point.threshold.e0, None, Some(point.threshold.critical_mass_tol))
                        .map_err(numerical)
                })
                .collect();
            summary = Table::new(&[&name, "mu_threshold", "c_bar", "critical_mass", "status"]);
            for ((_, v), r) in points.iter().zip(results) {
                summary.push(match r {
                    Ok(r) => vec![(*v).into(), r.mu_threshold.into(), r.c_bar.into(), r.critical_mass.into(), "ok".into()],
                    Err(e) => vec![(*v).into(), Cell::Empty, Cell::Empty, Cell::Empty, e.to_string().into()],
                });
            }
        }
    }
    let mut writer = Writer::new(config, out);
    writer.write("sweep_summary.csv", &summary)?;
    files.extend(writer.files);
    Ok(files)
}

/// Runs the property suite, writes `validate_report.json` and fails if any property fails.
pub fn cmd_validate(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let report = validate::run_suite(&validate::SuiteOptions::from(config));
    for p in &report.properties {
        println!("{}", p.line());
    }
    std::fs::create_dir_all(out)?;
    let path = out.join("validate_report.json");
    let json = serde_json::to_string_pretty(&report).map_err(numerical)?;
    std::fs::write(&path, json + "\n")?;
    let failed: Vec<&str> = report.properties.iter().filter(|p| !p.passed).map(|p| p.name.as_str()).collect();
    if failed.is_empty() {
        Ok(vec![path])
    } else {
        Err(CliError::Validation(format!("{} properties failed: {}", failed.len(), failed.join(", "))))
    }
}
