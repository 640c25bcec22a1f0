use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rsvf_bench::experiment::solve_method;
use rsvf_bench::io::{read_records, write_records, write_summary};
use rsvf_bench::{generate_dataset, run_experiment_detailed, summarize, ExperimentConfig, Method, Problem};
use rsvf_core::seed::derive;
use rsvf_core::{evaluate_policy, return_of, solve_nominal};

#[derive(Parser)]
#[command(name = "rsvf", version, about = "Safe return estimates for MDPs from data via robust ambiguity sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Failure probability, overriding the config.
    #[arg(long)]
    delta: Option<f64>,
}

impl Overrides {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(delta) = self.delta {
            config.delta = delta;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one replication of the configured problem with one method.
    Solve {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = "rsvf")]
        method: Method,
        /// Samples per state-action; defaults to the first grid value.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        replication: usize,
    },
    /// Run the full grid of the configuration and write per-replication records.
    Experiment {
        #[command(flatten)]
        overrides: Overrides,
        /// Restrict to these methods (repeatable).
        #[arg(long)]
        method: Vec<Method>,
        /// Records CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the summary table here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Aggregate a records CSV into a summary table.
    Summarize {
        /// Records CSV produced by `experiment`.
        #[arg(long)]
        records: PathBuf,
        /// Summary CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn solve(config: ExperimentConfig, method: Method, n: Option<usize>, replication: usize) -> Result<()> {
    let n = n.unwrap_or(config.samples_per_cell[0]);
    let problem = Problem::prepare(&config.problem)?;
    let seed = derive(config.seed, &[n as u64, replication as u64]);
    let truth = problem.draw_truth(derive(seed, &[0]))?;
    let data = generate_dataset(&truth, n, derive(seed, &[1]))?;
    let posterior = if method.is_bayesian() {
        Some(problem.posterior(&data, config.posterior_samples, derive(seed, &[2]))?)
    } else {
        None
    };
    let solved = solve_method(&problem, &config, method, &data, posterior.as_ref(), None)?;
    let mdp = problem.mdp();
    let realized = return_of(mdp, &evaluate_policy(mdp, &solved.solution.policy, &truth)?)?;
    let (_, optimal) = solve_nominal(mdp, &truth)?;
    println!("problem: {} ({})", config.problem.label(), config.problem.posterior_note());
    println!("method: {method}");
    println!("samples_per_cell: {n}");
    println!("safe_estimate: {}", solved.solution.safe_return);
    println!("realized_return: {realized}");
    println!("true_optimal: {}", return_of(mdp, &optimal)?);
    println!("policy: {:?}", solved.solution.policy.actions());
    println!("radii: {:?}", solved.radii);
    if let Some(trace) = solved.trace {
        let returns: Vec<f64> = trace.iterations.iter().map(|i| i.safe_return).collect();
        println!("rsvf_passes: {returns:?}");
        println!("rsvf_terminated_by: {:?}", trace.terminated_by);
    }
    Ok(())
}

fn experiment(mut config: ExperimentConfig, methods: Vec<Method>, out: Option<PathBuf>, summary: Option<PathBuf>) -> Result<()> {
    if !methods.is_empty() {
        config.methods = methods;
    }
    let result = run_experiment_detailed(&config)?;
    for line in &result.diagnostics {
        eprintln!("warning: {line}");
    }
    let mut w = output(out.as_deref())?;
    write_records(&mut w, &result.records)?;
    w.flush()?;
    if let Some(path) = &out {
        let meta = serde_json::json!({
            "problem": config.problem.label(),
            "posterior": config.problem.posterior_note(),
            "config": config,
        });
        let meta_path = path.with_extension("meta.json");
        std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")
            .with_context(|| format!("writing {}", meta_path.display()))?;
    }
    if let Some(path) = summary {
        let mut w = output(Some(&path))?;
        write_summary(&mut w, &summarize(&result.records))?;
        w.flush()?;
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve { overrides, method, n, replication } => solve(overrides.load()?, method, n, replication),
        Command::Experiment { overrides, method, out, summary } => experiment(overrides.load()?, method, out, summary),
        Command::Summarize { records, out } => {
            let file = File::open(&records).with_context(|| format!("opening {}", records.display()))?;
            let rows = summarize(&read_records(file)?);
            let mut w = output(out.as_deref())?;
            write_summary(&mut w, &rows)?;
            w.flush()?;
            Ok(())
        }
    }
}
