use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use condensate_fp_cli::{parse_config, ExperimentConfig};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_condensate-fp"));
    c.env_remove("CONDENSATE_FP_OUT");
    c
}

fn run_with(mode: &str, toml: &str, dir: &Path) -> Output {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, toml).unwrap();
    bin()
        .args([mode, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(path: &Path) -> Vec<(String, String)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let (k, v) = l.split_once(',').unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

#[test]
fn invalid_model_exits_with_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with("evolve", "[model]\nsigma2 = 0.025\nm = 1.5\nbeta = 1.0\nalpha = 3.0\ngamma = 1.0\n", dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("m must lie in (-1,1)"), "{}", stderr(&o));
}

#[test]
fn threshold_needs_alpha_above_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with("threshold", "[model]\nsigma2 = 0.025\nbeta = 1.0\nalpha = 2.0\ngamma = 1.0\n", dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("alpha > 2"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_and_conflicting_modes_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with("stationary", "[model]\nsigma = 0.1\n", dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = run_with("stationary", "mode = \"evolve\"\n", dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(parse_config("grid_n = \"many\"").is_err());
}

#[test]
fn csv_header_round_trips_to_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with("stationary", "[stationary]\ngammas = [2.0]\nh_points = 11\n", dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("out/stationary_h_gamma2.csv")).unwrap();
    let header: String = text
        .lines()
        .skip(1)
        .take_while(|l| l.starts_with('#'))
        .map(|l| format!("{}\n", l.trim_start_matches('#').trim_start()))
        .collect();
    let echoed = parse_config(&header).unwrap();
    assert_eq!(echoed.stationary.gammas, vec![2.0]);
    assert_eq!(echoed.output_dir, dir.path().join("out"));
    let rows = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 11);
}

#[test]
fn evolve_conserves_mass_and_reports_blowup() {
    let dir = tempfile::tempdir().unwrap();
    let toml = "grid_n = 200\n[initial]\nmu_threshold_factor = 2.0\n[solver]\nt_end = 1.0\nsnapshot_every = 2000\n";
    let o = run_with("evolve", toml, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("blow-up"), "{}", stderr(&o));
    let s = summary(&dir.path().join("out/evolve_summary.csv"));
    let get = |k: &str| s.iter().find(|(q, _)| q == k).map(|(_, v)| v.clone()).unwrap();
    assert_eq!(get("blowup_reason"), "l2_growth");
    assert!(get("mass_drift").parse::<f64>().unwrap() < 1e-10);
    assert!(get("blowup_time").parse::<f64>().unwrap() < get("t_bar").parse::<f64>().unwrap());
    assert!(dir.path().join("out/snapshots/evolve_snapshot_0000.csv").exists());
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["threshold"])
        .env("CONDENSATE_FP_OUT", dir.path().join("env"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let s = summary(&dir.path().join("env/threshold_summary.csv"));
    let mu: f64 = s.iter().find(|(k, _)| k == "mu_threshold").unwrap().1.parse().unwrap();
    assert!((mu - 3.0188170002).abs() < 1e-8, "{mu}");
}

#[test]
fn sweep_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let toml = "grid_n = 100\n[solver]\nt_end = 0.02\nsnapshot_every = 100000\n[sweep]\nparameter = \"mu_threshold_factor\"\nvalues = [0.25, 1.0, 2.0]\n";
    let cfg = dir.path().join("sweep.toml");
    fs::write(&cfg, toml).unwrap();
    let out = dir.path().join("out");
    let mut seen = Vec::new();
    for workers in ["1", "3"] {
        let o = bin().args(["sweep", "--workers", workers, "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        seen.push(fs::read(out.join("sweep_summary.csv")).unwrap());
    }
    assert_eq!(seen[0], seen[1]);
    let rows = String::from_utf8(seen.remove(0)).unwrap();
    assert_eq!(rows.lines().filter(|l| !l.starts_with('#')).count(), 4);
}

#[test]
fn validate_reports_injected_faults() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_with("validate", "[validate]\nnash_constant = 0.5\ncfl_factor = 10.0\n", dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let failed: Vec<&str> = stdout.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert!(failed.iter().any(|l| l.contains("nash_inequality")), "{stdout}");
    assert!(failed.iter().any(|l| l.contains("positivity")), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/validate_report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
}

#[test]
fn defaults_match_an_empty_file() {
    assert_eq!(parse_config("").unwrap(), ExperimentConfig::default());
}
