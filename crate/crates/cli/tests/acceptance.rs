//! Acceptance suite: one PASS/FAIL line per criterion, each at its stated tolerance and
//! time budget.
//!
//! Two criteria cannot hold as stated and are expected to fail; they still run in full
//! and print their measured values. The process exits nonzero only on an unexpected
//! result.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use condensate_fp::diagnostics::superlinear_moment;
use condensate_fp::evolve::BlowupReason;
use condensate_fp::initial::InitialData;
use condensate_fp::masscrit::{
    blowup_time_bound, energy_floor, gronwall_bound, l2_uniform_bound, mass_threshold, nash_terms,
    nonlinear_lower_bound, psi,
};
use condensate_fp::stationary::{beta_equilibrium, c_bar, critical_mass, StationaryError, SteadyState};
use condensate_fp::quadrature::QuadratureError;
use condensate_fp::{moments, DensityField, Grid, ModelParams};
use condensate_fp_cli::config::{SweepParameter, SweepSection, SweepTask};
use condensate_fp_cli::validate::{
    critical_mass_tanh_sinh, linear_run, nash_population, random_symmetric_mixture, reference_params,
    supercritical_run,
};
use condensate_fp_cli::{run_command, ExperimentConfig, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria whose stated form contradicts the model; see the README.
const KNOWN_FAILURES: [u32; 2] = [3, 9];

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Self::new(false, format!("error: {e}"))
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn read_xy(path: &Path) -> Vec<(f64, f64)> {
    read_csv(path)
        .iter()
        .map(|r| (r[0].parse().expect("number"), r[1].parse().expect("number")))
        .collect()
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

const GAMMAS: [f64; 4] = [1.0, 10.0, 50.0, 100.0];

fn stationary_outputs(dir: &Path) -> Result<(), String> {
    let config = ExperimentConfig::default();
    run_command(Mode::Stationary, &config, dir).map(|_| ()).map_err(|e| e.to_string())
}

fn criterion_1(dir: &Path) -> Outcome {
    if let Err(e) = stationary_outputs(dir) {
        return Outcome::error(e);
    }
    let mut worst = 0.0f64;
    let mut count = 0;
    for gamma in GAMMAS {
        let rows = read_xy(&dir.join(format!("stationary_h_gamma{gamma}.csv")));
        count += rows.len();
        for (w, h) in rows {
            let direct = (1.0 - w * w).powf(gamma);
            worst = worst.max((h - direct).abs() / direct.max(1.0));
        }
    }
    Outcome::new(
        worst <= 1e-14 && count == 4 * 400,
        format!("max |H - (1-w^2)^gamma| = {worst:.2e} over {count} points (tol 1e-14)"),
    )
}

fn criterion_2(dir: &Path) -> Outcome {
    let mut nonfinite = 0;
    let mut worst = 0.0f64;
    let target = -2.0 / 3.0;
    for gamma in GAMMAS {
        let sub = read_csv(&dir.join(format!("stationary_profile_gamma{gamma}_ratio0p9.csv")));
        nonfinite += sub
            .iter()
            .filter(|r| r[1].parse::<f64>().map_or(true, |f| !f.is_finite() || f < 0.0))
            .count();
        let crit = read_xy(&dir.join(format!("stationary_profile_gamma{gamma}_ratio1.csv")));
        for side in [1.0, -1.0] {
            let pts: Vec<(f64, f64)> = crit
                .iter()
                .filter(|(w, _)| side * w >= 1e-4 * (1.0 - 1e-12) && side * w <= 1e-2 * (1.0 + 1e-12))
                .map(|(w, f)| ((side * w).ln(), f.ln()))
                .collect();
            if pts.len() < 10 {
                return Outcome::new(false, format!("only {} log points in [1e-4, 1e-2] for gamma={gamma}", pts.len()));
            }
            worst = worst.max(rel(slope(&pts), target));
        }
    }
    Outcome::new(
        nonfinite == 0 && worst <= 0.05,
        format!("non-finite subcritical values: {nonfinite}; worst critical slope deviation from -2/alpha: {:.3}%", 100.0 * worst),
    )
}

fn extrapolated_limit(q: impl Fn(f64) -> f64) -> f64 {
    let (u1, u2) = (1e-3, 1e-4);
    (q(u2) * u1 * u1 - q(u1) * u2 * u2) / (u1 * u1 - u2 * u2)
}

fn criterion_3() -> Outcome {
    let c = match c_bar(&reference_params(10.0)) {
        Ok(c) => c,
        Err(e) => return Outcome::error(e),
    };
    let c_err = rel(c, (20.0f64 / 9.0).exp());
    let mut worst_gamma1 = 0.0f64;
    for m in [0.0, 0.3, -0.6] {
        let p = reference_params(1.0).with_m(m).expect("valid m");
        let s = SteadyState::critical(p).expect("critical state");
        let limit = extrapolated_limit(|u| s.denominator_at_offset(u).unwrap_or(f64::NAN) / (u * u));
        worst_gamma1 = worst_gamma1.max(rel(limit, 3.0 / (2.0 * 0.025 * (1.0 - m * m))));
    }
    let mut worst_gamma = 0.0f64;
    let mut measured = Vec::new();
    for gamma in [10.0, 50.0, 100.0] {
        let s = SteadyState::critical(reference_params(gamma)).expect("critical state");
        let limit = extrapolated_limit(|u| s.denominator_at_offset(u).unwrap_or(f64::NAN) / (u * u));
        measured.push(limit);
        worst_gamma = worst_gamma.max(rel(limit, 3.0 / (2.0 * 0.025 * (gamma - 1.0))));
    }
    Outcome::new(
        c_err <= 1e-12 && worst_gamma1 <= 0.01 && worst_gamma <= 0.01,
        format!(
            "C_bar rel err {c_err:.1e}; gamma=1 limit err {:.2e}; gamma>1 limits {measured:.4?} vs alpha/(2 sigma2 (gamma-1)) err {:.1}",
            worst_gamma1, worst_gamma
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut worst = 0.0f64;
    for gamma in GAMMAS {
        let p = reference_params(gamma);
        match (critical_mass(&p, 1e-12), critical_mass_tanh_sinh(&p)) {
            (Ok(a), Ok(b)) => worst = worst.max(rel(a, b)),
            (Err(e), _) => return Outcome::error(e),
            (_, Err(e)) => return Outcome::error(e),
        }
    }
    let p = reference_params(1.0).with_alpha(1.5).expect("valid alpha");
    let diverged = matches!(
        critical_mass(&p, 1e-10),
        Err(StationaryError::Quadrature(QuadratureError::NonConvergence { .. }))
    );
    Outcome::new(
        worst <= 1e-6 && diverged,
        format!("adaptive vs tanh-sinh worst rel diff {worst:.2e} (tol 1e-6); alpha=1.5 divergence signalled: {diverged}"),
    )
}

/// Bisection in `ln mu` on the sign of `Psi`, which decreases in `mu`.
fn bisect_threshold(p: &ModelParams, e0: f64) -> f64 {
    let (mut lo, mut hi) = (1e-8f64.ln(), 1e8f64.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if psi(p, mid.exp(), e0).expect("valid arguments") > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

fn criterion_5(dir: &Path) -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let mut worst_root = 0.0f64;
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
            Ok(v) => worst_root = worst_root.max(v.abs() / (2.0 * p.sigma2())),
            Err(e) => return Outcome::error(e),
        }
    }
    let p = reference_params(1.0);
    let mu = mass_threshold(&p, 0.1).unwrap_or(f64::NAN);
    let bisected = bisect_threshold(&p, 0.1);
    let agree = rel(mu, bisected);

    let config = ExperimentConfig::default();
    if let Err(e) = run_command(Mode::Threshold, &config, dir) {
        return Outcome::error(e);
    }
    let t = &config.threshold;
    let curve = |name: String| read_xy(&dir.join(name)).into_iter().map(|(_, mu)| mu).collect::<Vec<_>>();
    let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    let mut bad = Vec::new();
    for g in &t.gammas {
        if !increasing(&curve(format!("threshold_energy_gamma{g}.csv"))) {
            bad.push(format!("e0 at gamma={g}"));
        }
        let mut a = curve(format!("threshold_alpha_gamma{g}.csv"));
        a.iter_mut().for_each(|v| *v = -*v);
        if !increasing(&a) {
            bad.push(format!("alpha at gamma={g}"));
        }
    }
    for s in &t.sigma2s {
        if !increasing(&curve(format!("threshold_gamma_sigma2{}.csv", tag(*s)))) {
            bad.push(format!("gamma at sigma2={s}"));
        }
    }
    for a in &t.alphas {
        if !increasing(&curve(format!("threshold_gamma_alpha{}.csv", tag(*a)))) {
            bad.push(format!("gamma at alpha={a}"));
        }
    }
    Outcome::new(
        worst_root <= 1e-12 && agree <= 1e-10 && bad.is_empty(),
        format!(
            "|Psi(mu_gamma)|/(2 sigma2) <= {worst_root:.1e} over 50 tuples; mu_gamma = {mu:.6} vs bisection {bisected:.6} (rel {agree:.1e}); non-monotone curves: {bad:?}"
        ),
    )
}

fn tag(v: f64) -> String {
    format!("{v}").replace('.', "p").replace('-', "m")
}

fn criterion_6() -> Outcome {
    let tr = match linear_run(0.025, InitialData::Gaussian { energy: 0.1 }, 400, 10.0, 1_000_000) {
        Ok(t) => t,
        Err(e) => return Outcome::error(e),
    };
    let p = tr.params;
    let f = &tr.final_field;
    let h = f.grid().cell_width();
    let l1 = f
        .grid()
        .centers()
        .iter()
        .zip(f.values())
        .map(|(&w, &v)| (v - beta_equilibrium(&p, 1.0, w).unwrap_or(f64::NAN)).abs())
        .sum::<f64>()
        * h;
    let l2sq0 = tr.diagnostics[0].l2sq;
    let uniform = l2_uniform_bound(&p, 1.0, l2sq0).unwrap_or(f64::NAN);
    let worst = tr
        .diagnostics
        .iter()
        .map(|d| (d.l2sq / gronwall_bound(&p, l2sq0, d.time).unwrap_or(f64::NAN)).max(d.l2sq / uniform))
        .fold(0.0, f64::max);
    let drift = tr.mass_drift();
    Outcome::new(
        tr.reached_t_end && l1 < 1e-3 && drift <= 1e-10 && worst <= 1.05,
        format!("L1 to equilibrium {l1:.2e} (tol 1e-3); mass drift {drift:.1e}; worst l2sq/bound {worst:.4} (tol 1.05)"),
    )
}

fn criterion_7() -> Outcome {
    let fields = match nash_population(7, 100) {
        Ok(f) => f,
        Err(e) => return Outcome::error(e),
    };
    let need = fields.iter().map(|f| nash_terms(f).required_constant()).fold(0.0, f64::max);
    let allowed = 1.05 * 27.0 / 32.0;
    Outcome::new(
        fields.len() == 100 && need <= allowed,
        format!("largest constant needed over {} densities {need:.4} vs 1.05 * 27/32 = {allowed:.4}", fields.len()),
    )
}

fn criterion_8() -> Outcome {
    let p = reference_params(1.0);
    let tr = match supercritical_run(200, 2.0, 10.0, 1.0, 50) {
        Ok(t) => t,
        Err(e) => return Outcome::error(e),
    };
    let snapshots = tr.snapshots.len();
    let mut fields: Vec<DensityField> = tr.snapshots.into_iter().map(|(_, f)| f).collect();
    let mut r = ChaCha8Rng::seed_from_u64(8);
    for k in 0..100 {
        let n = r.gen_range(20..300);
        let grid = std::sync::Arc::new(Grid::new(n).expect("positive size"));
        let f = if k % 2 == 0 {
            let values = (0..n).map(|_| r.gen_range(0.0..5.0) + 1e-3).collect();
            DensityField::new(grid, values).expect("nonnegative")
        } else {
            random_symmetric_mixture(&mut r, n)
        };
        fields.push(f.with_mass(r.gen_range(0.2..8.0)));
    }
    let mut worst = 0.0f64;
    for f in &fields {
        let d = moments(f, 0.0).expect("positive mass");
        let bound = nonlinear_lower_bound(&p, d.mass, d.energy).unwrap_or(f64::NAN);
        worst = worst.max(bound / superlinear_moment(f, p.alpha(), p.gamma()));
    }
    Outcome::new(
        worst <= 1.0 / 0.98,
        format!("largest lower bound / integral {worst:.4} (tol {:.4}) over {snapshots} snapshots and 100 random densities", 1.0 / 0.98),
    )
}

fn criterion_9() -> Outcome {
    let p = reference_params(1.0);
    let mu_gamma = mass_threshold(&p, 0.1).unwrap_or(f64::NAN);
    let t_bar = blowup_time_bound(&p, 2.0 * mu_gamma, 0.1).ok().flatten().unwrap_or(f64::NAN);
    let mut runs = Vec::new();
    for n in [200, 400, 800] {
        match supercritical_run(n, 2.0, 10.0, 1.0, 20) {
            Ok(t) => runs.push(t),
            Err(e) => return Outcome::error(e),
        }
    }
    let mut ok = true;
    let mut times = Vec::new();
    for tr in &runs {
        let decreasing = tr.diagnostics.windows(2).all(|w| w[1].energy < w[0].energy);
        let floor = tr.diagnostics.iter().all(|d| d.energy >= 0.95 * energy_floor(d.mass, d.l2sq));
        let fired = tr.blowup.is_some_and(|b| b.reason == BlowupReason::L2Growth && b.time < t_bar);
        ok &= decreasing && floor && fired;
        times.push(tr.blowup.map_or(f64::INFINITY, |b| b.time));
    }
    let horizon = times.iter().copied().fold(f64::INFINITY, f64::min);
    let growth: Vec<f64> = runs
        .iter()
        .map(|tr| {
            let l0 = tr.diagnostics[0].l2sq;
            tr.diagnostics.iter().filter(|d| d.time <= horizon).map(|d| d.l2sq / l0).fold(0.0, f64::max)
        })
        .collect();
    let refines = growth.windows(2).all(|w| w[1] > w[0]);

    let twin = InitialData::Gaussian { energy: 0.1 }
        .build(std::sync::Arc::new(Grid::new(400).expect("positive size")), 0.5 * mu_gamma)
        .map_err(|e| e.to_string())
        .and_then(|f0| {
            let cfg = condensate_fp::evolve::SolverConfig {
                t_end: 5.0,
                diag_every: 100,
                snapshot_every: 1_000_000,
                ..Default::default()
            };
            condensate_fp::evolve::run(&f0, &p, &cfg).map_err(|e| e.to_string())
        });
    let (twin_ok, twin_detail) = match twin {
        Ok(tr) => (
            tr.reached_t_end && tr.blowup.is_none(),
            match tr.blowup {
                Some(b) => format!("twin mu={:.4} flagged {} at t={:.4}", 0.5 * mu_gamma, b.reason.as_str(), b.time),
                None => format!("twin mu={:.4} bounded to t={:.2}", 0.5 * mu_gamma, tr.final_time()),
            },
        ),
        Err(e) => (false, format!("twin error: {e}")),
    };
    let mu_c = critical_mass(&p, 1e-10).unwrap_or(f64::NAN);
    Outcome::new(
        ok && refines && twin_ok,
        format!(
            "supercritical E decreasing, floor kept, flag before t_bar={t_bar:.4}: {ok} (times {times:.5?}); growth at common horizon {growth:.3?}; {twin_detail} (critical mass {mu_c:.4})"
        ),
    )
}

fn snapshot_dir(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).expect("readable directory") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = fs::read(&path).expect("readable file");
                files.insert(path.strip_prefix(root).expect("prefix").to_path_buf(), bytes);
            }
        }
    }
    files
}

fn determinism_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.grid_n = 200;
    c.seed = 11;
    c.initial.mu_threshold_factor = 2.0;
    c.solver.t_end = 0.01;
    c.solver.snapshot_every = 500;
    c.stationary.gammas = vec![1.0, 10.0];
    c.threshold.points = vec![[6.0, 0.1], [1.0, 0.3]];
    c.sweep = Some(SweepSection {
        parameter: SweepParameter::MuThresholdFactor,
        values: vec![0.5, 2.0],
        task: SweepTask::Evolve,
    });
    c
}

fn criterion_10(root: &Path) -> Outcome {
    let config = determinism_config();
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let dir = root.join(run);
        for mode in [Mode::Stationary, Mode::Threshold, Mode::Evolve, Mode::Sweep] {
            if let Err(e) = run_command(mode, &config, &dir) {
                return Outcome::error(e);
            }
        }
        trees.push(snapshot_dir(&dir));
    }
    let (a, b) = (&trees[0], &trees[1]);
    let differing: Vec<_> = a
        .iter()
        .filter(|(k, v)| b.get(*k) != Some(*v))
        .map(|(k, _)| k.display().to_string())
        .collect();
    let csvs = a.keys().filter(|k| k.extension().is_some_and(|e| e == "csv")).count();
    Outcome::new(
        a.len() == b.len() && differing.is_empty() && csvs > 0,
        format!("{csvs} CSV files compared across two runs; differing: {differing:?}"),
    )
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let stationary = tmp.path().join("stationary");
    let threshold = tmp.path().join("threshold");
    let determinism = tmp.path().join("determinism");
    let criteria: Vec<(u32, &str, Duration, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, "diffusion weight curves", Duration::from_secs(1), Box::new(|| criterion_1(&stationary))),
        (2, "stationary profiles", Duration::from_secs(10), Box::new(|| criterion_2(&stationary))),
        (3, "critical constants", Duration::from_secs(1), Box::new(criterion_3)),
        (4, "critical mass", Duration::from_secs(30), Box::new(criterion_4)),
        (5, "threshold machinery", Duration::from_secs(5), Box::new(|| criterion_5(&threshold))),
        (6, "linear solver", Duration::from_secs(60), Box::new(criterion_6)),
        (7, "Nash inequality", Duration::from_secs(10), Box::new(criterion_7)),
        (8, "superlinear moment bound", Duration::from_secs(20), Box::new(criterion_8)),
        (9, "supercritical blow-up", Duration::from_secs(300), Box::new(criterion_9)),
        (10, "determinism", Duration::from_secs(60), Box::new(|| criterion_10(&determinism))),
    ];
    let mut unexpected = Vec::new();
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let passed = outcome.passed && in_time;
        let known = KNOWN_FAILURES.contains(&id);
        println!(
            "{} criterion {id:>2} {name}: {} [{:.2} s of {} s]{}",
            if passed { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if known && !passed { " (known failure)" } else { "" },
        );
        if passed == known {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all results as expected (known failures: {KNOWN_FAILURES:?})");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected results for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
