use std::path::Path;
use std::process::Command;

use rsvf_bench::problems::{single_state_mdp, terminal_values};
use rsvf_bench::{build_species_mdp, generate_dataset, run_experiment, ExperimentConfig, Method, ProblemConfig};
use rsvf_core::posterior::{PopulationModelParams, CONTROL};
use rsvf_core::TransitionModel;

fn small_config(methods: &str, n: &str, replications: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{"methods": {methods}, "samples_per_cell": {n}, "replications": {replications},
            "posterior_samples": 300, "seed": {seed},
            "problem": {{"kind": "single_state_dirichlet"}}}}"#
    ))
    .unwrap()
}

#[test]
fn cli_experiment_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"methods": ["hoeffding", "bci", "rsvf", "mean"], "samples_per_cell": [5, 20],
            "replications": 6, "posterior_samples": 300, "seed": 9,
            "problem": {"kind": "single_state_dirichlet"}}"#,
    )
    .unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_rsvf"))
            .args(["experiment", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 4 * 2 * 6);
    assert!(dir.path().join("a.meta.json").exists());

    let summary = Command::new(env!("CARGO_BIN_EXE_rsvf"))
        .args(["summarize", "--records"])
        .arg(dir.path().join("a.csv"))
        .output()
        .unwrap();
    assert!(summary.status.success());
    let text = String::from_utf8(summary.stdout).unwrap();
    assert!(text.starts_with("method,n_per_cell,mean_regret,stderr_regret,violation_rate,replications\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 2);
}

#[test]
fn cli_seed_override_changes_records() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"methods": ["bci"], "samples_per_cell": [5], "replications": 4, "posterior_samples": 200,
            "problem": {"kind": "single_state_dirichlet"}}"#,
    )
    .unwrap();
    let run = |seed: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_rsvf"))
            .args(["experiment", "--seed", seed, "--config"])
            .arg(&config)
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    assert_ne!(run("1"), run("2"));
}

#[test]
fn cli_rejects_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"methods": ["bci"], "samples_per_cell": [5], "replications": 1, "posterior_samples": 10, "typo": 1, "problem": {"kind": "single_state_dirichlet"}}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rsvf")).args(["experiment", "--config"]).arg(&config).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn dataset_frequencies_converge_to_truth() {
    let row = vec![0.0, 0.25, 0.25, 0.25, 0.25];
    let truth = TransitionModel::from_rows(5, 1, vec![row.clone(); 5]).unwrap();
    let data = generate_dataset(&truth, 10_000, 42).unwrap();
    for cell in 0..5 {
        let freq = data.empirical_row(cell).unwrap();
        for (f, p) in freq.iter().zip(&row) {
            assert!((f - p).abs() < 0.02, "cell {cell}: {f} vs {p}");
        }
        assert_eq!(freq[0], 0.0);
    }
}

fn expected_population(setup: &rsvf_bench::problems::SpeciesSetup, bin: usize, action: usize) -> f64 {
    let row = setup.truth.row(bin, action);
    row.iter().enumerate().map(|(j, p)| p * setup.dynamics.population(j)).sum()
}

#[test]
fn noiseless_species_rows_are_point_masses() {
    let mut config = rsvf_bench::config::SpeciesConfig::default();
    config.params = PopulationModelParams { sigma_lambda: 0.0, sigma_y: 0.0, ..PopulationModelParams::default() };
    let setup = build_species_mdp(&config).unwrap();
    for cell in 0..setup.mdp.num_cells() {
        let row = setup.truth.cell_row(cell);
        let top = row.iter().copied().fold(0.0, f64::max);
        assert!((top - 1.0).abs() < 1e-9, "cell {cell} has spread mass {row:?}");
    }
}

#[test]
fn species_rows_stay_within_capacity_and_control_helps() {
    let config = rsvf_bench::config::SpeciesConfig::default();
    let setup = build_species_mdp(&config).unwrap();
    let bins = setup.dynamics.bins();
    assert_eq!(setup.mdp.num_states(), bins);
    assert!((setup.dynamics.population(bins - 1) - setup.dynamics.capacity()).abs() < setup.dynamics.capacity() / bins as f64);
    for cell in 0..setup.mdp.num_cells() {
        let sum: f64 = setup.truth.cell_row(cell).iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
    for bin in bins / 2..bins {
        assert!(expected_population(&setup, bin, CONTROL) < expected_population(&setup, bin, 0));
    }
    // Both actions must appear in the true optimal policy for the benchmark to be interesting.
    let (policy, _) = rsvf_core::solve_nominal(&setup.mdp, &setup.truth).unwrap();
    assert!(policy.actions().contains(&0) && policy.actions().contains(&CONTROL));
}

#[test]
fn mean_method_regret_vanishes_with_abundant_data() {
    let records = run_experiment(&small_config(r#"["mean"]"#, "[5000]", 8, 3)).unwrap();
    let mean: f64 = records.iter().map(|r| r.regret).sum::<f64>() / records.len() as f64;
    assert!(mean < 0.1, "mean regret {mean}");
}

#[test]
fn hoeffding_with_one_sample_is_the_full_simplex_bound() {
    let config = small_config(r#"["hoeffding"]"#, "[1]", 5, 4);
    let ProblemConfig::SingleStateDirichlet(problem) = &config.problem else { unreachable!() };
    let shape = problem.shape();
    let floor = terminal_values(&shape).into_iter().fold(f64::INFINITY, f64::min) * shape.discount;
    assert_eq!(single_state_mdp(&shape).unwrap().uncertain_cells(), 1);
    for r in run_experiment(&config).unwrap() {
        assert!((r.safe_estimate - floor).abs() < 1e-9, "{} vs {floor}", r.safe_estimate);
        assert_eq!(r.violation, Some(false));
    }
}

#[test]
fn record_columns_are_consistent() {
    let records = run_experiment(&small_config(r#"["hoeffding", "bci", "rsvf", "mean"]"#, "[5, 50]", 10, 5)).unwrap();
    assert_eq!(records.len(), 4 * 2 * 10);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r.method, Method::ALL[i / 20]);
        assert_eq!(r.n_per_cell, if i % 20 < 10 { 5 } else { 50 });
        assert_eq!(r.replication, i % 10);
        assert_eq!(r.violation, Some(r.safe_estimate > r.realized_return));
        assert_eq!(r.regret, (r.true_optimal - r.safe_estimate).abs());
        assert!(r.realized_return <= r.true_optimal + 1e-9);
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
            seen += 1;
        }
    }
    assert_eq!(seen, 3);
}
