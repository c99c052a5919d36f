//! Conservative finite-volume time integration with no-flux boundaries.
//!
//! The semi-discrete update is `df_i/dt = (G_{i+1/2} - G_{i-1/2}) / h`, where the edge flux
//! `G ~ (w - m) f (1 + beta (H f)^alpha) + sigma2 (H f)'` vanishes on the two boundary edges.
//!
//! * Linear part: exponential fitting on `g = H f`,
//!   `G = (sigma2 / h) [B(-z) g_{i+1} - B(z) g_i]` with `z = (V_{i+1} - V_i) / sigma2` and
//!   `B(z) = z / (e^z - 1)`. It vanishes exactly on `g_i ~ e^{-V_i / sigma2}`, so the discrete
//!   linear equilibrium is a sampled Beta profile. Integrated with a theta scheme.
//! * Superlinear part: `(w_e - m) beta f_up hm(q_i, q_{i+1})` with `q = (H f)^alpha`, upwinded
//!   toward `m` and using the harmonic mean `hm`. Integrated explicitly under a CFL bound.

use std::sync::Arc;

use thiserror::Error;

use crate::diagnostics::{moments, DiagnosticsError, DiagnosticsRecord};
use crate::grid::{self, DensityField, Grid};
use crate::masscrit::energy_floor;
use crate::params::ModelParams;
use crate::quadrature::{self, QuadratureError, QuadratureOptions};
use crate::special::bernoulli;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Largest time step; the CFL bound may shorten individual steps.
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub diag_every: usize,
    pub blowup_l2_factor: f64,
    /// Implicitness of the linear part (1 = backward Euler).
    pub theta: f64,
    /// Safety factor on the explicit stability bound.
    pub cfl: f64,
    pub overflow_threshold: f64,
    /// Negative values below `-positivity_tol * max f` abort the step.
    pub positivity_tol: f64,
    /// Relative slack of the energy-floor consistency check.
    pub energy_slack: f64,
    pub max_steps: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            snapshot_every: 1000,
            diag_every: 100,
            blowup_l2_factor: 10.0,
            theta: 1.0,
            cfl: 0.9,
            overflow_threshold: 1e300,
            positivity_tol: 1e-13,
            energy_slack: 0.05,
            max_steps: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        let bad = |what: &'static str| Err(EvolveError::Config(what));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return bad("t_end must be finite and at least dt");
        }
        if self.snapshot_every == 0 || self.diag_every == 0 {
            return bad("snapshot_every and diag_every must be positive");
        }
        if !(self.blowup_l2_factor > 1.0) {
            return bad("blowup_l2_factor must exceed 1");
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad("theta must lie in [0, 1]");
        }
        if !(self.cfl > 0.0 && self.cfl.is_finite()) {
            return bad("cfl must be positive");
        }
        if !(self.overflow_threshold > 0.0) || !(self.positivity_tol >= 0.0) || !(self.energy_slack >= 0.0) {
            return bad("thresholds must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("positivity lost: min {min} against max {max}")]
    PositivityLost { min: f64, max: f64 },
    #[error("density overflow: max {max}")]
    Overflow { max: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolveError {
    #[error("invalid solver configuration: {0}")]
    Config(&'static str),
    #[error("initial field is on a different grid size ({got} cells, solver has {expected})")]
    GridMismatch { expected: usize, got: usize },
    #[error("potential difference across edge {0} is not finite")]
    Potential(usize),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Step(#[from] StepError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupReason {
    L2Growth,
    PositivityOrOverflow,
    EnergyCollapse,
}

impl BlowupReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            BlowupReason::L2Growth => "l2_growth",
            BlowupReason::PositivityOrOverflow => "positivity_or_overflow",
            BlowupReason::EnergyCollapse => "energy_collapse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupEvent {
    pub time: f64,
    pub reason: BlowupReason,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupCriteria {
    pub l2_factor: f64,
    pub energy_slack: f64,
    pub overflow_threshold: f64,
}

impl From<&SolverConfig> for BlowupCriteria {
    fn from(c: &SolverConfig) -> Self {
        Self {
            l2_factor: c.blowup_l2_factor,
            energy_slack: c.energy_slack,
            overflow_threshold: c.overflow_threshold,
        }
    }
}

fn check_record(rec: &DiagnosticsRecord, l2sq0: f64, criteria: &BlowupCriteria) -> Option<BlowupReason> {
    if !(rec.max_density.is_finite() && rec.l2sq.is_finite()) || rec.max_density > criteria.overflow_threshold {
        return Some(BlowupReason::PositivityOrOverflow);
    }
    if rec.l2sq >= criteria.l2_factor * l2sq0 {
        return Some(BlowupReason::L2Growth);
    }
    if rec.energy < energy_floor(rec.mass, rec.l2sq) * (1.0 - criteria.energy_slack) {
        return Some(BlowupReason::EnergyCollapse);
    }
    None
}

/// First record that trips a blow-up criterion, measuring L2 growth against the first record.
pub fn detect_blowup(records: &[DiagnosticsRecord], criteria: &BlowupCriteria) -> Option<BlowupEvent> {
    let l2sq0 = records.first()?.l2sq;
    records.iter().find_map(|r| {
        check_record(r, l2sq0, criteria).map(|reason| BlowupEvent { time: r.time, reason })
    })
}

/// Discretisation of one `(params, grid)` pair: the tridiagonal linear operator and edge data.
#[derive(Debug, Clone)]
pub struct Solver {
    params: ModelParams,
    grid: Arc<Grid>,
    weight: Vec<f64>,
    /// Per interior edge `e` (between cells `e`, `e + 1`): `G_e / h = up[e] f_{e+1} - down[e] f_e`.
    up: Vec<f64>,
    down: Vec<f64>,
    edge_drift: Vec<f64>,
    max_diag: f64,
    int_alpha: Option<i32>,
    q_buf: Vec<f64>,
    nl_flux: Vec<f64>,
    rhs: Vec<f64>,
    scratch: Vec<f64>,
}

/// `V(b) - V(a)` for `V' = (w - m) / (1 - w^2)^gamma`.
fn potential_step(params: &ModelParams, a: f64, b: f64) -> Result<f64, QuadratureError> {
    let m = params.m();
    if params.gamma() == 1.0 {
        return Ok(-0.5
            * ((1.0 + m) * ((b - a) / (1.0 + a)).ln_1p() + (1.0 - m) * ((a - b) / (1.0 - a)).ln_1p()));
    }
    let g = params.gamma();
    let opts = QuadratureOptions {
        tol: 1e-13,
        ..QuadratureOptions::default()
    };
    let r = quadrature::integrate(|s| (s - m) * (-grid::ln_weight(g, s)).exp(), a, b, &[], &opts)?;
    Ok(r.value)
}

impl Solver {
    pub fn new(params: ModelParams, grid: Arc<Grid>) -> Result<Self, EvolveError> {
        let n = grid.n_cells();
        let h = grid.cell_width();
        let s2 = params.sigma2();
        let c = grid.centers();
        let weight: Vec<f64> = c.iter().map(|&w| grid::weight(params.gamma(), w)).collect();
        let mut up = Vec::with_capacity(n.saturating_sub(1));
        let mut down = Vec::with_capacity(n.saturating_sub(1));
        for e in 0..n.saturating_sub(1) {
            let z = potential_step(&params, c[e], c[e + 1])? / s2;
            if !z.is_finite() {
                return Err(EvolveError::Potential(e));
            }
            up.push(s2 / (h * h) * bernoulli(-z) * weight[e + 1]);
            down.push(s2 / (h * h) * bernoulli(z) * weight[e]);
        }
        let edge_drift: Vec<f64> = grid.edges()[1..n].iter().map(|&w| w - params.m()).collect();
        let max_diag = (0..n)
            .map(|i| {
                let right = if i + 1 < n { down[i] } else { 0.0 };
                let left = if i > 0 { up[i - 1] } else { 0.0 };
                right + left
            })
            .fold(0.0f64, f64::max);
        Ok(Self {
            params,
            grid,
            weight,
            up,
            down,
            edge_drift,
            max_diag,
            int_alpha: (params.alpha().fract() == 0.0 && params.alpha() <= 16.0).then_some(params.alpha() as i32),
            q_buf: vec![0.0; n],
            nl_flux: vec![0.0; n.saturating_sub(1)],
            rhs: vec![0.0; n],
            scratch: vec![0.0; n],
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// `q_i = (H_i f_i)^alpha`.
    fn q(&self, i: usize, f: &[f64]) -> f64 {
        let x = self.weight[i] * f[i];
        match self.int_alpha {
            Some(k) => x.powi(k),
            None => x.powf(self.params.alpha()),
        }
    }

    fn nonlinear_edge_flux(&self, e: usize, f: &[f64], qa: f64, qb: f64) -> f64 {
        let beta = self.params.beta();
        if beta == 0.0 {
            return 0.0;
        }
        let hm = if qa + qb > 0.0 { 2.0 * qa * qb / (qa + qb) } else { 0.0 };
        let drift = self.edge_drift[e];
        let upwind = if drift > 0.0 { f[e + 1] } else { f[e] };
        drift * beta * upwind * hm
    }

    /// Numerical flux `G` on edge `k` (`0..=N`), in the convention `df_i/dt = (G_{i+1/2} - G_{i-1/2}) / h`.
    pub fn flux(&self, field: &DensityField, k: usize) -> f64 {
        let n = self.grid.n_cells();
        if k == 0 || k >= n {
            return 0.0;
        }
        let f = field.values();
        let e = k - 1;
        self.grid.cell_width() * (self.up[e] * f[e + 1] - self.down[e] * f[e])
            + self.nonlinear_edge_flux(e, f, self.q(e, f), self.q(e + 1, f))
    }

    /// Largest step allowed by the explicit parts, scaled by `cfl`.
    ///
    /// The explicit outflow rate of a cell is bounded by the nonlinear edge speed over `h`
    /// plus `(1 - theta)` times the diagonal of the linear operator.
    pub fn stable_dt(&self, f: &[f64], config: &SolverConfig) -> f64 {
        let mut rate = (1.0 - config.theta) * self.max_diag;
        let beta = self.params.beta();
        if beta > 0.0 && f.len() > 1 {
            let k = beta * (self.params.alpha() + 1.0);
            let mut q_prev = self.q(0, f);
            let mut speed = 0.0f64;
            for (e, drift) in self.edge_drift.iter().enumerate() {
                let q_next = self.q(e + 1, f);
                speed = speed.max(drift.abs() * (1.0 + k * q_prev.max(q_next)));
                q_prev = q_next;
            }
            rate += speed / self.grid.cell_width();
        }
        if rate > 0.0 {
            config.dt.min(config.cfl / rate)
        } else {
            config.dt
        }
    }

    /// Advances `f` in place by `dt`.
    pub fn advance(&mut self, f: &mut [f64], dt: f64, config: &SolverConfig) -> Result<(), StepError> {
        let n = f.len();
        let h = self.grid.cell_width();
        let theta = config.theta;
        if self.params.beta() > 0.0 {
            for i in 0..n {
                self.q_buf[i] = self.q(i, f);
            }
            for e in 0..n.saturating_sub(1) {
                self.nl_flux[e] = self.nonlinear_edge_flux(e, f, self.q_buf[e], self.q_buf[e + 1]);
            }
        }
        // Explicit right-hand side: f + (1 - theta) dt L f + dt div(G_nl) / h.
        for i in 0..n {
            let mut lin = 0.0;
            let mut nl = 0.0;
            if i + 1 < n {
                lin += self.up[i] * f[i + 1] - self.down[i] * f[i];
                nl += self.nl_flux[i];
            }
            if i > 0 {
                lin -= self.up[i - 1] * f[i] - self.down[i - 1] * f[i - 1];
                nl -= self.nl_flux[i - 1];
            }
            self.rhs[i] = f[i] + (1.0 - theta) * dt * lin + dt * nl / h;
        }
        if theta > 0.0 {
            self.solve_implicit(theta * dt, f);
        } else {
            f.copy_from_slice(&self.rhs);
        }
        let (mut min, mut max) = (f64::INFINITY, 0.0f64);
        for &v in f.iter() {
            if !v.is_finite() {
                return Err(StepError::Overflow { max: v });
            }
            min = min.min(v);
            max = max.max(v);
        }
        if max > config.overflow_threshold {
            return Err(StepError::Overflow { max });
        }
        if min < -config.positivity_tol * max {
            return Err(StepError::PositivityLost { min, max });
        }
        for v in f.iter_mut() {
            *v = v.max(0.0);
        }
        Ok(())
    }

    /// Solves `(I - k L) x = rhs` by the Thomas algorithm, writing `x` into `out`.
    fn solve_implicit(&mut self, k: f64, out: &mut [f64]) {
        let n = out.len();
        let sub = |i: usize| -k * self.down[i - 1];
        let sup = |i: usize| -k * self.up[i];
        let diag = |i: usize| {
            let right = if i + 1 < n { self.down[i] } else { 0.0 };
            let left = if i > 0 { self.up[i - 1] } else { 0.0 };
            1.0 + k * (right + left)
        };
        let c = &mut self.scratch;
        let mut denom = diag(0);
        c[0] = if n > 1 { sup(0) / denom } else { 0.0 };
        out[0] = self.rhs[0] / denom;
        for i in 1..n {
            denom = diag(i) - sub(i) * c[i - 1];
            c[i] = if i + 1 < n { sup(i) / denom } else { 0.0 };
            out[i] = (self.rhs[i] - sub(i) * out[i - 1]) / denom;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            out[i] -= c[i] * out[i + 1];
        }
    }
}

/// One step of length `min(config.dt, stable dt)`.
pub fn step(field: &DensityField, params: &ModelParams, config: &SolverConfig) -> Result<DensityField, EvolveError> {
    config.validate()?;
    let mut solver = Solver::new(*params, Arc::clone(field.grid()))?;
    let mut values = field.values().to_vec();
    let dt = solver.stable_dt(&values, config);
    solver.advance(&mut values, dt, config)?;
    Ok(DensityField::new(Arc::clone(field.grid()), values).expect("step keeps values finite and nonnegative"))
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: ModelParams,
    pub config: SolverConfig,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<(f64, DensityField)>,
    pub blowup: Option<BlowupEvent>,
    pub steps: u64,
    /// False when the run stopped early (blow-up or step budget).
    pub reached_t_end: bool,
    pub final_field: DensityField,
}

impl Trajectory {
    /// Largest relative deviation of the recorded mass from the initial mass.
    pub fn mass_drift(&self) -> f64 {
        let mu0 = self.diagnostics[0].mass;
        self.diagnostics
            .iter()
            .map(|d| (d.mass - mu0).abs() / mu0)
            .fold(0.0, f64::max)
    }

    pub fn final_time(&self) -> f64 {
        self.diagnostics.last().map_or(0.0, |d| d.time)
    }
}

/// Integrates to `t_end`, stopping at the first blow-up signal.
pub fn run(field0: &DensityField, params: &ModelParams, config: &SolverConfig) -> Result<Trajectory, EvolveError> {
    config.validate()?;
    let grid = Arc::clone(field0.grid());
    let mut solver = Solver::new(*params, Arc::clone(&grid))?;
    let criteria = BlowupCriteria::from(config);
    let mut values = field0.values().to_vec();
    let first = moments(field0, 0.0)?;
    let l2sq0 = first.l2sq;
    let mut diagnostics = vec![first];
    let mut snapshots = vec![(0.0, field0.clone())];
    let mut blowup = None;
    let (mut t, mut steps) = (0.0, 0u64);
    let snapshot = |t: f64, v: &[f64]| (t, DensityField::new(Arc::clone(&grid), v.to_vec()).expect("valid state"));

    while t < config.t_end * (1.0 - 1e-14) {
        if config.max_steps.is_some_and(|cap| steps >= cap) {
            break;
        }
        let dt = solver.stable_dt(&values, config).min(config.t_end - t);
        if let Err(_e) = solver.advance(&mut values, dt, config) {
            blowup = Some(BlowupEvent {
                time: t + dt,
                reason: BlowupReason::PositivityOrOverflow,
            });
            break;
        }
        t += dt;
        steps += 1;
        let field = DensityField::new(Arc::clone(&grid), values.clone()).expect("valid state");
        let rec = moments(&field, t)?;
        if let Some(reason) = check_record(&rec, l2sq0, &criteria) {
            diagnostics.push(rec);
            snapshots.push((t, field));
            blowup = Some(BlowupEvent { time: t, reason });
            break;
        }
        if steps % config.diag_every as u64 == 0 {
            diagnostics.push(rec);
        }
        if steps % config.snapshot_every as u64 == 0 {
            snapshots.push((t, field));
        }
    }
    if diagnostics.last().is_some_and(|d| d.time < t) {
        let field = DensityField::new(Arc::clone(&grid), values.clone()).expect("valid state");
        diagnostics.push(moments(&field, t)?);
    }
    if snapshots.last().is_some_and(|s| s.0 < t) {
        snapshots.push(snapshot(t, &values));
    }
    let reached_t_end = blowup.is_none() && t >= config.t_end * (1.0 - 1e-14);
    Ok(Trajectory {
        params: *params,
        config: config.clone(),
        diagnostics,
        snapshots,
        blowup,
        steps,
        reached_t_end,
        final_field: DensityField::new(grid, values).expect("valid state"),
    })
}
