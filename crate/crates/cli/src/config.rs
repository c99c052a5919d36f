//! TOML experiment configuration with explicit defaults.

use std::fmt;
use std::path::PathBuf;

use condensate_fp::evolve::SolverConfig;
use condensate_fp::initial::InitialData;
use condensate_fp::masscrit::{mass_threshold, NASH_CONSTANT};
use condensate_fp::ModelParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Stationary,
    Evolve,
    Threshold,
    Sweep,
    Validate,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Stationary => "stationary",
            Mode::Evolve => "evolve",
            Mode::Threshold => "threshold",
            Mode::Sweep => "sweep",
            Mode::Validate => "validate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub sigma2: f64,
    #[serde(default)]
    pub m: f64,
    pub beta: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            sigma2: 0.025,
            m: 0.0,
            beta: 1.0,
            alpha: 3.0,
            gamma: 1.0,
        }
    }
}

impl ModelSection {
    pub fn params(&self) -> Result<ModelParams, CliError> {
        ModelParams::new(self.sigma2, self.m, self.beta, self.alpha, self.gamma)
            .map_err(|e| CliError::Config(format!("model: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub diag_every: usize,
    pub blowup_l2_factor: f64,
    pub theta: f64,
    pub cfl: f64,
    pub overflow_threshold: f64,
    pub positivity_tol: f64,
    pub energy_slack: f64,
    /// 0 means unlimited.
    pub max_steps: u64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            dt: d.dt,
            t_end: d.t_end,
            snapshot_every: d.snapshot_every,
            diag_every: d.diag_every,
            blowup_l2_factor: d.blowup_l2_factor,
            theta: d.theta,
            cfl: d.cfl,
            overflow_threshold: d.overflow_threshold,
            positivity_tol: d.positivity_tol,
            energy_slack: d.energy_slack,
            max_steps: d.max_steps.unwrap_or(0),
        }
    }
}

impl SolverSection {
    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let c = SolverConfig {
            dt: self.dt,
            t_end: self.t_end,
            snapshot_every: self.snapshot_every,
            diag_every: self.diag_every,
            blowup_l2_factor: self.blowup_l2_factor,
            theta: self.theta,
            cfl: self.cfl,
            overflow_threshold: self.overflow_threshold,
            positivity_tol: self.positivity_tol,
            energy_slack: self.energy_slack,
            max_steps: (self.max_steps > 0).then_some(self.max_steps),
        };
        c.validate().map_err(|e| CliError::Config(format!("solver: {e}")))?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Uniform,
    Beta,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub shape: Shape,
    /// Absolute mass; ignored when `mu_threshold_factor` is positive.
    pub mu: f64,
    /// Mass as a multiple of the blow-up threshold at `energy`; 0 disables.
    pub mu_threshold_factor: f64,
    /// Target `E(0)` for the peaked shapes.
    pub energy: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            shape: Shape::Gaussian,
            mu: 1.0,
            mu_threshold_factor: 0.0,
            energy: 0.1,
        }
    }
}

impl InitialSection {
    pub fn data(&self) -> InitialData {
        match self.shape {
            Shape::Uniform => InitialData::Uniform,
            Shape::Beta => InitialData::Beta { energy: self.energy },
            Shape::Gaussian => InitialData::Gaussian { energy: self.energy },
        }
    }

    pub fn mass(&self, params: &ModelParams) -> Result<f64, CliError> {
        if self.mu_threshold_factor > 0.0 {
            let mu = mass_threshold(params, self.energy).map_err(|e| CliError::Config(format!("initial: {e}")))?;
            Ok(self.mu_threshold_factor * mu)
        } else {
            Ok(self.mu)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationarySection {
    pub gammas: Vec<f64>,
    /// Ratios `C / C_bar`; 1 gives the critical profile.
    pub ratios: Vec<f64>,
    /// Points of the `H(w)` curves, endpoints included.
    pub h_points: usize,
    /// Extra log-spaced points per side in `|w - m| in [1e-6, 1e-1]`.
    pub log_points: usize,
    pub critical_mass_tol: f64,
}

impl Default for StationarySection {
    fn default() -> Self {
        Self {
            gammas: vec![1.0, 10.0, 50.0, 100.0],
            ratios: vec![1.0, 0.9],
            h_points: 400,
            log_points: 100,
            critical_mass_tol: 1e-10,
        }
    }
}

fn range(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start + step * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdSection {
    pub e0: f64,
    /// x axis of the mass-versus-energy curves.
    pub e0_axis: Vec<f64>,
    /// x axis of the mass-versus-gamma curves.
    pub gamma_axis: Vec<f64>,
    /// x axis of the mass-versus-alpha curves.
    pub alpha_axis: Vec<f64>,
    /// One curve per value in each panel.
    pub gammas: Vec<f64>,
    pub sigma2s: Vec<f64>,
    pub alphas: Vec<f64>,
    /// `[mu, e0]` pairs for the full threshold report.
    pub points: Vec<[f64; 2]>,
    pub critical_mass_tol: f64,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        Self {
            e0: 0.1,
            e0_axis: range(0.02, 0.02, 49),
            gamma_axis: range(1.0, 1.0, 20),
            alpha_axis: range(2.1, 0.1, 40),
            gammas: vec![1.0, 5.0, 10.0, 20.0],
            sigma2s: vec![0.01, 0.025, 0.05, 0.1],
            alphas: vec![2.5, 3.0, 4.0, 5.0],
            points: Vec::new(),
            critical_mass_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Sigma2,
    M,
    Beta,
    Alpha,
    Gamma,
    Mu,
    MuThresholdFactor,
    Energy,
    GridN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepTask {
    Evolve,
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    #[serde(default = "default_task")]
    pub task: SweepTask,
}

fn default_task() -> SweepTask {
    SweepTask::Evolve
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    /// Constant used by the Nash-type check; lowering it injects a fault.
    pub nash_constant: f64,
    /// Multiplier on the stable time step; values above 1 inject a fault.
    pub cfl_factor: f64,
    /// Random densities per randomized property.
    pub samples: usize,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            nash_constant: NASH_CONSTANT,
            cfl_factor: 1.0,
            samples: 100,
        }
    }
}

fn default_grid_n() -> usize {
    condensate_fp::DEFAULT_CELLS
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub stationary: StationarySection,
    #[serde(default)]
    pub threshold: ThresholdSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub validate: ValidateSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty document uses defaults")
    }
}

/// Parses and validates a TOML document. `mode` is filled in from the document when present.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(format!("parse error: {e}")))?;
    if let Some(mode) = config.mode {
        config.validate(mode)?;
    } else {
        config.model.params()?;
        config.solver.solver_config()?;
    }
    Ok(config)
}

impl ExperimentConfig {
    /// Fixes the mode (rejecting a conflicting one from the document) and validates.
    pub fn resolve(mut self, mode: Mode) -> Result<Self, CliError> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(CliError::Config(format!("config declares mode {m} but command is {mode}")));
            }
        }
        self.mode = Some(mode);
        self.validate(mode)?;
        Ok(self)
    }

    pub fn validate(&self, mode: Mode) -> Result<(), CliError> {
        let params = self.model.params()?;
        if self.grid_n < 2 {
            return Err(CliError::Config(format!("grid_n must be at least 2 (got {})", self.grid_n)));
        }
        let finite_in = |name: &str, v: f64, lo: f64, hi: f64| {
            if v > lo && v < hi {
                Ok(())
            } else {
                Err(CliError::Config(format!("{name} must lie in ({lo}, {hi}) (got {v})")))
            }
        };
        match mode {
            Mode::Stationary => {
                let s = &self.stationary;
                if s.gammas.iter().any(|&g| !(g >= 1.0 && g.is_finite())) {
                    return Err(CliError::Config("stationary.gammas must be finite and >= 1".into()));
                }
                if s.ratios.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
                    return Err(CliError::Config("stationary.ratios must lie in (0, 1]".into()));
                }
                if s.h_points < 2 {
                    return Err(CliError::Config("stationary.h_points must be at least 2".into()));
                }
                finite_in("stationary.critical_mass_tol", s.critical_mass_tol, 0.0, 1.0)?;
            }
            Mode::Threshold => {
                if params.alpha() <= 2.0 {
                    return Err(CliError::Config(format!(
                        "threshold requires alpha > 2 (got {})",
                        params.alpha()
                    )));
                }
                if params.beta() == 0.0 {
                    return Err(CliError::Config("threshold requires beta > 0".into()));
                }
                let t = &self.threshold;
                finite_in("threshold.e0", t.e0, 0.0, 1.0)?;
                for &e in &t.e0_axis {
                    finite_in("threshold.e0_axis entries", e, 0.0, 1.0)?;
                }
                if t.alpha_axis.iter().chain(&t.alphas).any(|&a| a <= 2.0) {
                    return Err(CliError::Config("threshold requires alpha > 2 in every alpha axis".into()));
                }
                if t.gamma_axis.iter().chain(&t.gammas).any(|&g| g < 1.0) {
                    return Err(CliError::Config("threshold gammas must be >= 1".into()));
                }
                if t.sigma2s.iter().any(|&s| s <= 0.0) {
                    return Err(CliError::Config("threshold.sigma2s must be positive".into()));
                }
                for p in &t.points {
                    finite_in("threshold.points e0", p[1], 0.0, 1.0)?;
                    if !(p[0] >= 0.0) {
                        return Err(CliError::Config(format!("threshold.points mass must be nonnegative (got {})", p[0])));
                    }
                }
            }
            Mode::Evolve => self.validate_evolve(&params)?,
            Mode::Sweep => {
                let sweep = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| CliError::Config("sweep mode requires a [sweep] section".into()))?;
                if sweep.values.is_empty() {
                    return Err(CliError::Config("sweep.values must not be empty".into()));
                }
                for &v in &sweep.values {
                    let point = self.sweep_point(sweep.parameter, v)?;
                    match sweep.task {
                        SweepTask::Evolve => point.validate_evolve(&point.model.params()?)?,
                        SweepTask::Threshold => point.validate(Mode::Threshold)?,
                    }
                }
            }
            Mode::Validate => {
                let v = &self.validate;
                if !(v.nash_constant > 0.0) {
                    return Err(CliError::Config("validate.nash_constant must be positive".into()));
                }
                if !(v.cfl_factor > 0.0) {
                    return Err(CliError::Config("validate.cfl_factor must be positive".into()));
                }
                if v.samples == 0 {
                    return Err(CliError::Config("validate.samples must be positive".into()));
                }
            }
        }
        Ok(())
    }

    fn validate_evolve(&self, params: &ModelParams) -> Result<(), CliError> {
        self.solver.solver_config()?;
        let i = &self.initial;
        if i.shape != Shape::Uniform {
            finite_in_unit("initial.energy", i.energy)?;
        }
        if i.mu_threshold_factor < 0.0 {
            return Err(CliError::Config("initial.mu_threshold_factor must be nonnegative".into()));
        }
        let mu = i.mass(params)?;
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(CliError::Config(format!("initial mass must be positive (got {mu})")));
        }
        Ok(())
    }

    /// Copy of this config with one swept parameter replaced.
    pub fn sweep_point(&self, parameter: SweepParameter, value: f64) -> Result<Self, CliError> {
        let mut c = self.clone();
        c.sweep = None;
        match parameter {
            SweepParameter::Sigma2 => c.model.sigma2 = value,
            SweepParameter::M => c.model.m = value,
            SweepParameter::Beta => c.model.beta = value,
            SweepParameter::Alpha => c.model.alpha = value,
            SweepParameter::Gamma => c.model.gamma = value,
            SweepParameter::Mu => {
                c.initial.mu = value;
                c.initial.mu_threshold_factor = 0.0;
            }
            SweepParameter::MuThresholdFactor => c.initial.mu_threshold_factor = value,
            SweepParameter::Energy => {
                c.initial.energy = value;
                c.threshold.e0 = value;
            }
            SweepParameter::GridN => {
                if !(value >= 2.0 && value.fract() == 0.0) {
                    return Err(CliError::Config(format!("sweep grid_n values must be integers >= 2 (got {value})")));
                }
                c.grid_n = value as usize;
            }
        }
        c.model.params()?;
        Ok(c)
    }

    /// The resolved config as `#`-prefixed TOML lines.
    pub fn header(&self) -> String {
        let body = toml::to_string(self).expect("config serializes");
        let mut out = String::from("# condensate-fp resolved config\n");
        for line in body.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

fn finite_in_unit(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must lie in (0, 1) (got {v})")))
    }
}
