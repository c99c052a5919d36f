//! Desk-scale property suite behind the `validate` command.
//!
//! Every property returns a measured value next to the value it is required to respect,
//! so a failure report says by how much it failed.

use std::sync::Arc;

use condensate_fp::diagnostics::{central_mass_fraction, superlinear_moment};
use condensate_fp::evolve::{run, BlowupReason, Solver, SolverConfig, Trajectory};
use condensate_fp::initial::InitialData;
use condensate_fp::masscrit::{
    blowup_time_bound, energy_floor, gronwall_bound, l2_uniform_bound, mass_threshold, nash_terms,
    nonlinear_lower_bound, psi, small_energy_check,
};
use condensate_fp::quadrature::{tanh_sinh, QuadratureError};
use condensate_fp::stationary::{beta_equilibrium, c_bar, critical_mass, StationaryError, SteadyState};
use condensate_fp::{adaptive_quadrature, moments, DensityField, Grid, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    pub nash_constant: f64,
    pub cfl_factor: f64,
    pub samples: usize,
}

impl From<&ExperimentConfig> for SuiteOptions {
    fn from(c: &ExperimentConfig) -> Self {
        Self {
            seed: c.seed,
            nash_constant: c.validate.nash_constant,
            cfl_factor: c.validate.cfl_factor,
            samples: c.validate.samples,
        }
    }
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self::from(&ExperimentConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub required: f64,
    pub detail: String,
}

impl PropertyResult {
    /// Passes when `measured <= required`.
    fn at_most(name: &str, measured: f64, required: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: measured <= required,
            measured,
            required,
            detail: detail.into(),
        }
    }

    fn check(name: &str, ok: bool, measured: f64, required: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: ok,
            measured,
            required,
            detail: detail.into(),
        }
    }

    fn error(name: &str, e: impl std::fmt::Display) -> Self {
        Self::check(name, false, f64::NAN, f64::NAN, format!("error: {e}"))
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<34} measured={:.6e} required={:.6e} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.required,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub nash_constant: f64,
    pub cfl_factor: f64,
    pub passed: bool,
    pub properties: Vec<PropertyResult>,
}

type Property = fn(&SuiteOptions) -> PropertyResult;

const PROPERTIES: &[Property] = &[
    moments_bounds,
    quadrature_cubics,
    critical_slope,
    critical_constant,
    critical_mass_agreement,
    critical_mass_divergence,
    threshold_root,
    threshold_monotonicity,
    mass_conservation,
    positivity,
    linear_equilibrium,
    linear_l2_bounds,
    nash_inequality,
    moment_lower_bound,
    supercritical_blowup,
    refinement_trend,
    concentration,
    energy_inequality,
    below_critical_mass_bounded,
];

/// Runs every property concurrently; results keep a fixed order.
pub fn run_suite(opts: &SuiteOptions) -> SuiteReport {
    let properties: Vec<PropertyResult> = PROPERTIES.par_iter().map(|p| p(opts)).collect();
    SuiteReport {
        seed: opts.seed,
        nash_constant: opts.nash_constant,
        cfl_factor: opts.cfl_factor,
        passed: properties.iter().all(|p| p.passed),
        properties,
    }
}

fn grid(n: usize) -> Arc<Grid> {
    Arc::new(Grid::new(n).expect("positive cell count"))
}

/// The reference superlinear parameter set (alpha = 3, beta = 1, sigma2 = 0.025, m = 0).
pub fn reference_params(gamma: f64) -> ModelParams {
    ModelParams::new(0.025, 0.0, 1.0, 3.0, gamma).expect("valid parameters")
}

fn rng(opts: &SuiteOptions, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(opts.seed);
    r.set_stream(stream);
    r
}

fn random_field(r: &mut ChaCha8Rng, n: usize) -> DensityField {
    let mut values: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..5.0)).collect();
    values[r.gen_range(0..n)] += 1.0;
    DensityField::new(grid(n), values).expect("nonnegative values")
}

/// Symmetric mixture `sum_k c_k (1 - w^2)^{a_k}` with `a_k` log-uniform in `[0.5, 20]`.
pub fn random_symmetric_mixture(r: &mut ChaCha8Rng, n: usize) -> DensityField {
    let terms: Vec<(f64, f64)> = (0..r.gen_range(1..=4))
        .map(|_| (r.gen_range(0.1..1.0), (r.gen_range(0.5f64.ln()..20f64.ln())).exp()))
        .collect();
    DensityField::from_fn(grid(n), |w| {
        terms.iter().map(|(c, a)| c * ((1.0 - w) * (1.0 + w)).powf(*a)).sum()
    })
    .expect("mixture is nonnegative")
}

fn moments_bounds(opts: &SuiteOptions) -> PropertyResult {
    let mut r = rng(opts, 1);
    let mut worst = 0.0f64;
    for _ in 0..opts.samples {
        let n = r.gen_range(2..300);
        let f = random_field(&mut r, n);
        let d = match moments(&f, 0.0) {
            Ok(d) => d,
            Err(e) => return PropertyResult::error("moments_bounds", e),
        };
        worst = worst
            .max(-d.energy)
            .max(d.energy - 1.0)
            .max(d.mean * d.mean - d.energy)
            .max(d.mass * d.mass / 2.0 - d.l2sq);
    }
    PropertyResult::at_most("moments_bounds", worst, 1e-15, "largest violation of 0<=E<=1, mean^2<=E, l2sq>=mu^2/2")
}

fn quadrature_cubics(opts: &SuiteOptions) -> PropertyResult {
    let mut r = rng(opts, 2);
    let mut worst = 0.0f64;
    for _ in 0..opts.samples {
        let c: [f64; 4] = [r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)];
        // Odd terms integrate to zero on [-1, 1].
        let exact = 2.0 * c[0] + 2.0 * c[2] / 3.0;
        match adaptive_quadrature(|w| c[0] + w * (c[1] + w * (c[2] + w * c[3])), 1e-10, &[]) {
            Ok(v) => worst = worst.max((v - exact).abs() / exact.abs().max(1.0)),
            Err(e) => return PropertyResult::error("quadrature_cubics", e),
        }
    }
    PropertyResult::at_most("quadrature_cubics", worst, 1e-10, "relative error on random cubics")
}

/// Least-squares slope of `ln f` against `ln w` on log-spaced points of `[lo, hi]`.
pub fn log_log_slope(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> f64 {
    let xs: Vec<f64> = (0..points)
        .map(|k| lo.ln() + (hi / lo).ln() * k as f64 / (points - 1) as f64)
        .collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x.exp()).ln()).collect();
    let n = points as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn critical_slope(_: &SuiteOptions) -> PropertyResult {
    let mut worst = 0.0f64;
    for gamma in [1.0, 10.0, 50.0, 100.0] {
        let p = reference_params(gamma);
        let state = match SteadyState::critical(p) {
            Ok(s) => s,
            Err(e) => return PropertyResult::error("critical_slope", e),
        };
        let slope = log_log_slope(|w| state.density(w).unwrap_or(f64::NAN), 1e-4, 1e-2, 41);
        let target = -2.0 / p.alpha();
        worst = worst.max(((slope - target) / target).abs());
    }
    PropertyResult::at_most("critical_slope", worst, 0.05, "relative deviation from -2/alpha, gamma in {1,10,50,100}")
}

fn critical_constant(_: &SuiteOptions) -> PropertyResult {
    match c_bar(&reference_params(10.0)) {
        Ok(c) => {
            let exact = (20.0f64 / 9.0).exp();
            PropertyResult::at_most("critical_constant", (c / exact - 1.0).abs(), 1e-12, "C_bar(gamma=10) vs exp(20/9)")
        }
        Err(e) => PropertyResult::error("critical_constant", e),
    }
}

/// Critical mass by tanh-sinh on each half-interval, whose nodes cluster at both the
/// singular centre and the boundary.
pub fn critical_mass_tanh_sinh(params: &ModelParams) -> Result<f64, QuadratureError> {
    let state = SteadyState::critical(*params).expect("critical state exists for beta > 0");
    let f = |w: f64| state.density(w).unwrap_or(0.0);
    let m = params.m();
    Ok(tanh_sinh(f, -1.0, m, 1e-12)? + tanh_sinh(f, m, 1.0, 1e-12)?)
}

fn critical_mass_agreement(_: &SuiteOptions) -> PropertyResult {
    let mut worst = 0.0f64;
    for gamma in [1.0, 10.0] {
        let p = reference_params(gamma);
        let a = critical_mass(&p, 1e-12);
        let b = critical_mass_tanh_sinh(&p);
        match (a, b) {
            (Ok(a), Ok(b)) => worst = worst.max((a / b - 1.0).abs()),
            (Err(e), _) => return PropertyResult::error("critical_mass_agreement", e),
            (_, Err(e)) => return PropertyResult::error("critical_mass_agreement", e),
        }
    }
    PropertyResult::at_most("critical_mass_agreement", worst, 1e-6, "adaptive vs tanh-sinh, gamma in {1,10}")
}

fn critical_mass_divergence(_: &SuiteOptions) -> PropertyResult {
    let p = reference_params(1.0).with_alpha(1.5).expect("valid alpha");
    let diverged = matches!(
        critical_mass(&p, 1e-10),
        Err(StationaryError::Quadrature(QuadratureError::NonConvergence { .. }))
    );
    PropertyResult::check("critical_mass_divergence", diverged, f64::from(u8::from(diverged)), 1.0, "alpha = 1.5 must signal non-convergence")
}

fn threshold_root(opts: &SuiteOptions) -> PropertyResult {
    let mut r = rng(opts, 3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let p = ModelParams::new(
            r.gen_range(0.005..0.5),
            0.0,
            r.gen_range(0.1..10.0),
            r.gen_range(2.05..8.0),
            r.gen_range(1.0..200.0),
        )
        .expect("valid parameters");
        let e0 = r.gen_range(0.01..0.9);
        match mass_threshold(&p, e0).and_then(|mu| psi(&p, mu, e0)) {
            Ok(v) => worst = worst.max(v.abs() / (2.0 * p.sigma2())),
            Err(e) => return PropertyResult::error("threshold_root", e),
        }
    }
    PropertyResult::at_most("threshold_root", worst, 1e-12, "|Psi(mu_threshold)| / (2 sigma2) over 50 random tuples")
}

fn threshold_monotonicity(_: &SuiteOptions) -> PropertyResult {
    let mu = |p: ModelParams, e0: f64| mass_threshold(&p, e0).unwrap_or(f64::NAN);
    let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    let gammas: Vec<f64> = (1..=20).map(f64::from).collect();
    let mut bad = 0u32;
    for g in [1.0, 5.0, 10.0, 20.0] {
        let p = reference_params(g);
        let e: Vec<f64> = (1..=49).map(|k| mu(p, 0.02 * f64::from(k))).collect();
        let a: Vec<f64> = (0..40).map(|k| -mu(p.with_alpha(2.1 + 0.1 * f64::from(k)).unwrap(), 0.1)).collect();
        bad += u32::from(!increasing(&e)) + u32::from(!increasing(&a));
    }
    for s2 in [0.01, 0.025, 0.05, 0.1] {
        let p = reference_params(1.0).with_sigma2(s2).unwrap();
        let v: Vec<f64> = gammas.iter().map(|&g| mu(p.with_gamma(g).unwrap(), 0.1)).collect();
        bad += u32::from(!increasing(&v));
    }
    for a in [2.5, 3.0, 4.0, 5.0] {
        let p = reference_params(1.0).with_alpha(a).unwrap();
        let v: Vec<f64> = gammas.iter().map(|&g| mu(p.with_gamma(g).unwrap(), 0.1)).collect();
        bad += u32::from(!increasing(&v));
    }
    PropertyResult::at_most("threshold_monotonicity", f64::from(bad), 0.0, "non-monotone curves across the four sweep families")
}

/// Supercritical run at `mu = factor * mu_threshold(e0 = 0.1)` from a Gaussian bump.
pub fn supercritical_run(n: usize, factor: f64, l2_factor: f64, t_end: f64, every: usize) -> Result<Trajectory, String> {
    let p = reference_params(1.0);
    let mu = factor * mass_threshold(&p, 0.1).map_err(|e| e.to_string())?;
    let f0 = InitialData::Gaussian { energy: 0.1 }.build(grid(n), mu).map_err(|e| e.to_string())?;
    let cfg = SolverConfig {
        t_end,
        blowup_l2_factor: l2_factor,
        diag_every: every,
        snapshot_every: every,
        ..SolverConfig::default()
    };
    run(&f0, &p, &cfg).map_err(|e| e.to_string())
}

/// Linear run (`beta = 0`, `gamma = 1`, `m = 0`) of unit mass.
pub fn linear_run(sigma2: f64, data: InitialData, n: usize, t_end: f64, snapshot_every: usize) -> Result<Trajectory, String> {
    let p = ModelParams::linear(sigma2, 0.0).map_err(|e| e.to_string())?;
    let f0 = data.build(grid(n), 1.0).map_err(|e| e.to_string())?;
    let cfg = SolverConfig {
        t_end,
        diag_every: 10,
        snapshot_every,
        ..SolverConfig::default()
    };
    run(&f0, &p, &cfg).map_err(|e| e.to_string())
}

fn mass_conservation(_: &SuiteOptions) -> PropertyResult {
    let runs = [
        supercritical_run(200, 2.0, 10.0, 1.0, 100),
        linear_run(0.1, InitialData::Beta { energy: 0.3 }, 200, 2.0, 1000),
    ];
    let mut worst = 0.0f64;
    for r in runs {
        match r {
            Ok(tr) => worst = worst.max(tr.mass_drift()),
            Err(e) => return PropertyResult::error("mass_conservation", e),
        }
    }
    PropertyResult::at_most("mass_conservation", worst, 1e-10, "relative mass drift, supercritical and linear runs")
}

fn positivity(opts: &SuiteOptions) -> PropertyResult {
    let mut r = rng(opts, 4);
    let cfg = SolverConfig {
        theta: 0.0,
        ..SolverConfig::default()
    };
    let mut worst = 0.0f64;
    for p in [ModelParams::linear(0.025, 0.0).unwrap(), reference_params(1.0), reference_params(4.0).with_m(0.3).unwrap()] {
        let f = random_field(&mut r, 200).with_mass(1.0);
        let mut solver = match Solver::new(p, Arc::clone(f.grid())) {
            Ok(s) => s,
            Err(e) => return PropertyResult::error("positivity", e),
        };
        let mut v = f.values().to_vec();
        for _ in 0..200 {
            let dt = opts.cfl_factor * solver.stable_dt(&v, &cfg);
            if let Err(e) = solver.advance(&mut v, dt, &cfg) {
                return PropertyResult::check("positivity", false, f64::NAN, 0.0, format!("explicit step failed: {e}"));
            }
            worst = worst.max(-v.iter().copied().fold(f64::INFINITY, f64::min));
        }
    }
    PropertyResult::at_most("positivity", worst, 0.0, format!("explicit steps from rough data at {}x the stable step", opts.cfl_factor))
}

fn linear_equilibrium(_: &SuiteOptions) -> PropertyResult {
    let tr = match linear_run(0.025, InitialData::Uniform, 400, 10.0, 100_000) {
        Ok(t) => t,
        Err(e) => return PropertyResult::error("linear_equilibrium", e),
    };
    let p = tr.params;
    let f = &tr.final_field;
    let h = f.grid().cell_width();
    let l1: f64 = f
        .grid()
        .centers()
        .iter()
        .zip(f.values())
        .map(|(&w, &v)| (v - beta_equilibrium(&p, 1.0, w).unwrap_or(f64::NAN)).abs())
        .sum::<f64>()
        * h;
    let monotone = tr.diagnostics.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-15);
    PropertyResult::check(
        "linear_equilibrium",
        l1 < 1e-3 && monotone && tr.mass_drift() <= 1e-10,
        l1,
        1e-3,
        format!("L1 distance at t=10, N=400; energy monotone: {monotone}"),
    )
}

fn linear_l2_bounds(_: &SuiteOptions) -> PropertyResult {
    let mut worst = 0.0f64;
    for (s2, e0) in [(0.025, 0.05), (0.025, 0.2), (0.1, 0.1), (0.4, 0.15)] {
        let tr = match linear_run(s2, InitialData::Gaussian { energy: e0 }, 200, 3.0, 100_000) {
            Ok(t) => t,
            Err(e) => return PropertyResult::error("linear_l2_bounds", e),
        };
        let l2sq0 = tr.diagnostics[0].l2sq;
        let uniform = l2_uniform_bound(&tr.params, 1.0, l2sq0).unwrap_or(f64::NAN);
        for d in &tr.diagnostics {
            let g = gronwall_bound(&tr.params, l2sq0, d.time).unwrap_or(f64::NAN);
            worst = worst.max(d.l2sq / g).max(d.l2sq / uniform);
        }
    }
    PropertyResult::at_most("linear_l2_bounds", worst, 1.05, "largest l2sq / bound (Gronwall and uniform-in-time)")
}

/// Snapshots of linear runs and random symmetric mixtures, `count` in total.
pub fn nash_population(seed: u64, count: usize) -> Result<Vec<DensityField>, String> {
    let mut fields = Vec::new();
    for (s2, e0) in [(0.025, 0.05), (0.1, 0.2)] {
        let tr = linear_run(s2, InitialData::Gaussian { energy: e0 }, 200, 2.0, 80)?;
        fields.extend(tr.snapshots.into_iter().map(|(_, f)| f));
    }
    fields.truncate(count / 2);
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(5);
    while fields.len() < count {
        fields.push(random_symmetric_mixture(&mut r, 200));
    }
    Ok(fields)
}

fn nash_inequality(opts: &SuiteOptions) -> PropertyResult {
    let fields = match nash_population(opts.seed, opts.samples) {
        Ok(f) => f,
        Err(e) => return PropertyResult::error("nash_inequality", e),
    };
    let need = fields.iter().map(|f| nash_terms(f).required_constant()).fold(0.0, f64::max);
    PropertyResult::at_most(
        "nash_inequality",
        need,
        1.05 * opts.nash_constant,
        format!("largest constant needed over {} densities vs 1.05 C_N", fields.len()),
    )
}

fn moment_lower_bound(opts: &SuiteOptions) -> PropertyResult {
    let p = reference_params(1.0);
    let tr = match supercritical_run(200, 2.0, 10.0, 1.0, 500) {
        Ok(t) => t,
        Err(e) => return PropertyResult::error("moment_lower_bound", e),
    };
    let mut fields: Vec<DensityField> = tr.snapshots.into_iter().map(|(_, f)| f).collect();
    let mut r = rng(opts, 6);
    for _ in 0..opts.samples {
        let n = r.gen_range(20..200);
        fields.push(random_field(&mut r, n));
    }
    let mut worst = 0.0f64;
    for f in &fields {
        let d = moments(f, 0.0).expect("positive mass");
        let bound = nonlinear_lower_bound(&p, d.mass, d.energy).unwrap_or(f64::NAN);
        worst = worst.max(bound / superlinear_moment(f, p.alpha(), p.gamma()));
    }
    PropertyResult::at_most("moment_lower_bound", worst, 1.0 / 0.98, "largest lower bound / integral over snapshots and random densities")
}

fn supercritical_blowup(_: &SuiteOptions) -> PropertyResult {
    let p = reference_params(1.0);
    let mu = 2.0 * mass_threshold(&p, 0.1).unwrap();
    let t_bar = blowup_time_bound(&p, mu, 0.1).ok().flatten().unwrap_or(f64::NAN);
    let small = small_energy_check(&p, mu, 0.1).unwrap_or(false);
    let tr = match supercritical_run(400, 2.0, 10.0, 1.0, 50) {
        Ok(t) => t,
        Err(e) => return PropertyResult::error("supercritical_blowup", e),
    };
    let decreasing = tr.diagnostics.windows(2).all(|w| w[1].energy < w[0].energy);
    let floor_ok = tr.diagnostics.iter().all(|d| d.energy >= 0.95 * energy_floor(d.mass, d.l2sq));
    let (time, reason_ok) = tr.blowup.map_or((f64::INFINITY, false), |b| (b.time, b.reason == BlowupReason::L2Growth));
    PropertyResult::check(
        "supercritical_blowup",
        small && decreasing && floor_ok && reason_ok && time < t_bar,
        time,
        t_bar,
        format!("blow-up time vs t_bar at N=400; E decreasing: {decreasing}; floor respected: {floor_ok}"),
    )
}

/// Peak `l2sq` growth up to the earliest blow-up time, for each grid size.
pub fn growth_at_common_horizon(sizes: &[usize]) -> Result<Vec<f64>, String> {
    let runs = sizes
        .par_iter()
        .map(|&n| supercritical_run(n, 2.0, 10.0, 1.0, 20))
        .collect::<Result<Vec<_>, _>>()?;
    let horizon = runs
        .iter()
        .map(|t| t.blowup.map_or(t.final_time(), |b| b.time))
        .fold(f64::INFINITY, f64::min);
    Ok(runs
        .iter()
        .map(|tr| {
            let l0 = tr.diagnostics[0].l2sq;
            tr.diagnostics.iter().filter(|d| d.time <= horizon).map(|d| d.l2sq / l0).fold(0.0, f64::max)
        })
        .collect())
}

fn refinement_trend(_: &SuiteOptions) -> PropertyResult {
    match growth_at_common_horizon(&[200, 400, 800]) {
        Ok(g) => {
            let worst = g.windows(2).map(|w| w[0] / w[1]).fold(0.0, f64::max);
            PropertyResult::check(
                "refinement_trend",
                worst < 1.0,
                worst,
                1.0,
                format!("growth by the earliest blow-up time at N=200,400,800: {g:?}"),
            )
        }
        Err(e) => PropertyResult::error("refinement_trend", e),
    }
}

fn concentration(_: &SuiteOptions) -> PropertyResult {
    let tr = match supercritical_run(100, 2.0, 1e12, 0.15, 2000) {
        Ok(t) => t,
        Err(e) => return PropertyResult::error("concentration", e),
    };
    let e0 = tr.diagnostics[0].energy;
    let late: Vec<f64> = tr
        .snapshots
        .iter()
        .filter(|(_, f)| moments(f, 0.0).map_or(false, |d| d.energy <= 0.5 * e0))
        .map(|(_, f)| central_mass_fraction(f, 5))
        .collect();
    let drops = late.windows(2).filter(|w| w[1] <= w[0]).count();
    PropertyResult::check(
        "concentration",
        late.len() >= 5 && drops == 0,
        drops as f64,
        0.0,
        format!("non-increasing steps of the central 5-cell mass fraction over {} late snapshots", late.len()),
    )
}

/// Largest relative excess of the measured `dE/dt` over the energy-identity bound while
/// `l2sq < l2_limit * l2sq(0)`, for the reference supercritical run on `n` cells.
pub fn energy_inequality_excess(n: usize, l2_limit: f64) -> Result<f64, String> {
    let p = reference_params(1.0);
    let mu = 2.0 * mass_threshold(&p, 0.1).map_err(|e| e.to_string())?;
    let f0 = InitialData::Gaussian { energy: 0.1 }.build(grid(n), mu).map_err(|e| e.to_string())?;
    let g = Arc::clone(f0.grid());
    let mut solver = Solver::new(p, Arc::clone(&g)).map_err(|e| e.to_string())?;
    let cfg = SolverConfig::default();
    let mut v = f0.values().to_vec();
    let rhs = |f: &DensityField| {
        let d = moments(f, 0.0).expect("positive mass");
        let s = superlinear_moment(f, p.alpha(), p.gamma());
        (d, 2.0 * p.sigma2() - 2.0 * (1.0 + p.sigma2()) * d.energy - 2.0 * p.beta() / mu * s)
    };
    let (mut d, mut r) = rhs(&f0);
    let l2sq0 = d.l2sq;
    let mut worst = f64::NEG_INFINITY;
    while d.l2sq < l2_limit * l2sq0 {
        let dt = solver.stable_dt(&v, &cfg);
        solver.advance(&mut v, dt, &cfg).map_err(|e| e.to_string())?;
        let f = DensityField::new(Arc::clone(&g), v.clone()).map_err(|e| e.to_string())?;
        let (d1, r1) = rhs(&f);
        let bound = 0.5 * (r + r1);
        worst = worst.max(((d1.energy - d.energy) / dt - bound) / bound.abs());
        (d, r) = (d1, r1);
    }
    Ok(worst)
}

fn energy_inequality(_: &SuiteOptions) -> PropertyResult {
    match energy_inequality_excess(400, 1.5) {
        Ok(x) => PropertyResult::at_most("energy_inequality", x, 0.05, "relative excess of dE/dt while l2sq <= 1.5 l2sq(0), N=400"),
        Err(e) => PropertyResult::error("energy_inequality", e),
    }
}

fn below_critical_mass_bounded(_: &SuiteOptions) -> PropertyResult {
    let p = reference_params(1.0);
    let mu_c = match critical_mass(&p, 1e-10) {
        Ok(v) => v,
        Err(e) => return PropertyResult::error("below_critical_mass_bounded", e),
    };
    let f0 = InitialData::Gaussian { energy: 0.1 }.build(grid(200), 0.5 * mu_c).expect("valid initial data");
    let cfg = SolverConfig {
        t_end: 5.0,
        diag_every: 100,
        snapshot_every: 100_000,
        ..SolverConfig::default()
    };
    match run(&f0, &p, &cfg) {
        Ok(tr) => {
            let l0 = tr.diagnostics[0].l2sq;
            let peak = tr.diagnostics.iter().map(|d| d.l2sq / l0).fold(0.0, f64::max);
            PropertyResult::check(
                "below_critical_mass_bounded",
                tr.reached_t_end && tr.blowup.is_none(),
                peak,
                cfg.blowup_l2_factor,
                "peak l2sq growth to t=5 at mu = mu_c / 2",
            )
        }
        Err(e) => PropertyResult::error("below_critical_mass_bounded", e),
    }
}
