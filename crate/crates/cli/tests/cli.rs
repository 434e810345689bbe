use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use iclv_cli::{run_estimate, run_simulate, run_validate, run_weights, Overrides, RunConfig};

mod support;

use support::{estimation_fixture, load, read_csv, reference_params_path};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_iclv"))
}

fn sim_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("sim.conf");
    std::fs::write(
        &path,
        format!("params={}\npopulation_size=150\n{body}", reference_params_path().display()),
    )
    .unwrap();
    path
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn estimate_writes_every_declared_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load(&estimation_fixture(dir.path(), 60, "seed=9\nmax_iter=60\n"), &dir.path().join("out"));
    let run = run_estimate(&cfg).unwrap();
    for name in ["estimates.csv", "fit.csv", "estimated_params.txt", "report.txt"] {
        let path = dir.path().join("out").join(name);
        assert!(path.exists(), "{name} missing");
        let head = first_line(&path);
        assert!(head.starts_with("# iclv "), "{head}");
        assert!(head.contains("config_hash=") && head.ends_with("seed=9"), "{head}");
    }
    assert_eq!(run.files.len(), 4);

    let rows = read_csv(&dir.path().join("out/estimates.csv"));
    let mut checked = 0;
    for r in &rows {
        if r[4] == "free" {
            let est: f64 = r[5].parse().unwrap();
            let se: f64 = r[6].parse().unwrap();
            let t: f64 = r[7].parse().unwrap();
            assert!((t - est / se).abs() <= 1e-10 * t.abs().max(1.0), "{r:?}");
            checked += 1;
        } else {
            assert!(r[6].is_empty() && r[7].is_empty());
        }
    }
    assert_eq!(checked, run.result.keys.len());

    let fit: BTreeMap<String, String> =
        read_csv(&dir.path().join("out/fit.csv")).into_iter().map(|r| (r[0].clone(), r[1].clone())).collect();
    let num = |k: &str| fit[k].parse::<f64>().unwrap();
    assert!((num("clic") - (num("cml_loglik") - num("penalty"))).abs() < 1e-10 * num("cml_loglik").abs());
    assert!(num("penalty") > 0.0);
    assert!((num("loglik_per_pair") - num("cml_loglik") / num("n_pairs")).abs() < 1e-12);
    assert_eq!(fit["metric"], "gower");

    let back = iclv_core::io::ParameterFile::read(&dir.path().join("out/estimated_params.txt")).unwrap();
    assert_eq!(back.params, run.result.params);
}

#[test]
fn repeated_estimation_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = estimation_fixture(dir.path(), 30, "max_iter=15\n");
    run_estimate(&load(&cfg_path, &dir.path().join("a"))).unwrap();
    run_estimate(&load(&cfg_path, &dir.path().join("b"))).unwrap();
    for name in ["estimates.csv", "fit.csv", "estimated_params.txt", "report.txt"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn single_scenario_single_seed_emits_one_row_per_year() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load(&sim_config(dir.path(), "horizon_years=12\nseeds=3\n"), &dir.path().join("out"));
    let run = run_simulate(&cfg).unwrap();
    assert_eq!(run.results.len(), 1);
    let traj = read_csv(&dir.path().join("out/trajectory.csv"));
    assert_eq!(traj.len(), 12);
    assert!(traj.iter().all(|r| r[1] == "3"));
    assert_eq!(read_csv(&dir.path().join("out/mean_trajectory.csv")).len(), 12);
    let adopters = read_csv(&dir.path().join("out/adopters.csv"));
    assert_eq!(adopters.len(), 150);
    let density = read_csv(&dir.path().join("out/density_by_zip.csv"));
    assert_eq!(density.len(), 10 * 12);
}

#[test]
fn discount_by_satisfaction_grid_emits_six_mean_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load(
        &sim_config(
            dir.path(),
            "name=price\nyearly_discount_rate=0.01,0.05,0.10\nproportion_satisfied=0.3,0.9\nhorizon_years=8\nseeds=1,2\n",
        ),
        &dir.path().join("out"),
    );
    run_simulate(&cfg).unwrap();
    let mean = read_csv(&dir.path().join("out/mean_trajectory.csv"));
    let names: std::collections::BTreeSet<&str> = mean.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names.len(), 6);
    assert_eq!(mean.len(), 6 * 8);
    let summary = read_csv(&dir.path().join("out/summary.csv"));
    assert_eq!(summary.len(), 6);
    assert_eq!(read_csv(&dir.path().join("out/trajectory.csv")).len(), 6 * 2 * 8);
}

#[test]
fn independent_flag_adds_the_comparison_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::load(
        Some(&sim_config(dir.path(), "horizon_years=5\nseeds=1\n")),
        &Overrides {
            out: Some(dir.path().join("out")),
            independent: true,
            ..Overrides::default()
        },
    )
    .unwrap();
    let run = run_simulate(&cfg).unwrap();
    let flags: Vec<bool> = run.results.iter().map(|r| r.config.independent).collect();
    assert_eq!(flags, [false, true]);
    assert_eq!(run.results[1].config.name, "baseline/independent");
    let summary = read_csv(&dir.path().join("out/summary.csv"));
    assert_eq!(summary[1][1], "true");
}

#[test]
fn seeds_default_to_ten_consecutive_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::load(
        Some(&sim_config(dir.path(), "")),
        &Overrides { seed: Some(100), ..Overrides::default() },
    )
    .unwrap();
    let grid = iclv_cli::commands::scenarios(&cfg).unwrap();
    assert_eq!(grid[0].seeds, (100..=109).collect::<Vec<u64>>());
}

#[test]
fn config_hash_tracks_inputs_and_settings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = estimation_fixture(dir.path(), 20, "");
    let out = dir.path().join("out");
    let h0 = load(&cfg_path, &out).hash("estimate").unwrap();
    assert_eq!(h0, load(&cfg_path, &dir.path().join("elsewhere")).hash("estimate").unwrap());
    assert_ne!(h0, load(&cfg_path, &out).hash("weights").unwrap());
    let seeded = RunConfig::load(Some(&cfg_path), &Overrides { seed: Some(5), ..Overrides::default() }).unwrap();
    assert_ne!(h0, seeded.hash("estimate").unwrap());
    let sample = dir.path().join("sample.csv");
    let text = std::fs::read_to_string(&sample).unwrap();
    std::fs::write(&sample, format!("{text}\n")).unwrap();
    assert_ne!(h0, load(&cfg_path, &out).hash("estimate").unwrap());
}

#[test]
fn configuration_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "colour=blue\n").unwrap();
    assert!(RunConfig::load(Some(&bad), &Overrides::default()).is_err());
    std::fs::write(&bad, "ties=0\n").unwrap();
    assert!(RunConfig::load(Some(&bad), &Overrides::default()).is_err());
    std::fs::write(&bad, "metric=euclid\n").unwrap();
    assert!(RunConfig::load(Some(&bad), &Overrides::default()).is_err());
    std::fs::write(&bad, "params=missing.txt\n").unwrap();
    let cfg = RunConfig::load(Some(&bad), &Overrides::default()).unwrap();
    assert!(run_estimate(&cfg).is_err());
}

#[test]
fn weights_command_writes_the_tie_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load(&estimation_fixture(dir.path(), 25, ""), &dir.path().join("out"));
    let (w, _) = run_weights(&cfg).unwrap();
    assert_eq!(w.q(), 25);
    let rows = read_csv(&dir.path().join("out/weights.csv"));
    assert_eq!(rows.len(), 25 * 3);
    for i in 0..25 {
        let total: f64 = rows.iter().filter(|r| r[0] == i.to_string()).map(|r| r[2].parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn validate_accepts_good_inputs_and_rejects_bad_ones() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = estimation_fixture(dir.path(), 10, "");
    assert!(run_validate(&load(&cfg_path, dir.path())).is_empty());
    let status = bin().arg("validate").arg("--config").arg(&cfg_path).output().unwrap();
    assert!(status.status.success());

    let sample = dir.path().join("sample.csv");
    let text = std::fs::read_to_string(&sample).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let col = lines[0].split(',').position(|h| h == "y1").unwrap();
    let mut cells: Vec<String> = lines[2].split(',').map(str::to_string).collect();
    cells[col] = "6".into();
    lines[2] = cells.join(",");
    std::fs::write(&sample, lines.join("\n")).unwrap();
    let problems = run_validate(&load(&cfg_path, dir.path()));
    assert_eq!(problems.len(), 1);
    assert!(problems[0].contains("row 2") && problems[0].contains("y1"), "{}", problems[0]);
    let out = bin().arg("validate").arg("--config").arg(&cfg_path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("y1"));
}

#[test]
fn binary_runs_simulate_with_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sim_config(dir.path(), "horizon_years=4\n");
    let out = dir.path().join("out");
    let run = bin()
        .args(["simulate", "--seed", "7", "--ties", "4", "--metric", "spatial", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let head = first_line(&out.join("summary.csv"));
    assert!(head.contains("command=simulate") && head.ends_with("seed=7"));
    let traj = read_csv(&out.join("trajectory.csv"));
    assert_eq!(traj.len(), 10 * 4);
    let bad = bin().args(["simulate", "--metric", "euclid"]).arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
