//! Replicated experiments: simulate data, fit, build sets, solve, score.

use anyhow::Result;
use rayon::prelude::*;
use rsvf_core::seed::derive;
use rsvf_core::sets::{build_bci, build_hoeffding, build_mean, build_rsvf, ConfidenceBudget, RsvfOptions, RsvfTrace, Termination};
use rsvf_core::{evaluate_policy, return_of, solve_nominal, solve_robust, Policy, RobustSolution};

use crate::config::{ExperimentConfig, Method};
use crate::problems::{generate_dataset, Problem};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub method: Method,
    pub n_per_cell: usize,
    pub replication: usize,
    pub safe_estimate: f64,
    pub true_optimal: f64,
    pub realized_return: f64,
    pub regret: f64,
    /// `None` marks a failed row.
    pub violation: Option<bool>,
}

impl ExperimentRecord {
    fn scored(method: Method, n: usize, rep: usize, safe: f64, true_optimal: f64, realized: f64) -> Self {
        Self {
            method,
            n_per_cell: n,
            replication: rep,
            safe_estimate: safe,
            true_optimal,
            realized_return: realized,
            regret: (true_optimal - safe).abs(),
            violation: Some(safe > realized),
        }
    }

    fn failed(method: Method, n: usize, rep: usize) -> Self {
        Self {
            method,
            n_per_cell: n,
            replication: rep,
            safe_estimate: f64::NAN,
            true_optimal: f64::NAN,
            realized_return: f64::NAN,
            regret: f64::NAN,
            violation: None,
        }
    }

    pub fn is_failure(&self) -> bool {
        self.violation.is_none()
    }
}

/// RSVF trace of one replication.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub n_per_cell: usize,
    pub replication: usize,
    pub trace: RsvfTrace,
    pub final_estimate: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub records: Vec<ExperimentRecord>,
    pub traces: Vec<TraceRecord>,
    /// Failure messages and sampler warnings, tagged with their unit.
    pub diagnostics: Vec<String>,
}

/// Solution of one method on one replication.
pub struct MethodSolution {
    pub solution: RobustSolution,
    /// Per-cell radii of the sets behind `solution`.
    pub radii: Vec<f64>,
    pub trace: Option<RsvfTrace>,
}

struct UnitOutput {
    results: Vec<(Method, Result<(f64, f64, f64)>)>,
    trace: Option<(RsvfTrace, f64)>,
    diagnostics: Vec<String>,
}

/// Solves one method on one dataset.
pub fn solve_method(
    problem: &Problem,
    config: &ExperimentConfig,
    method: Method,
    data: &rsvf_core::TransitionDataset,
    posterior: Option<&rsvf_core::PosteriorSampleSet>,
    verification: Option<&rsvf_core::PosteriorSampleSet>,
) -> Result<MethodSolution> {
    let mdp = problem.mdp();
    let budget = ConfidenceBudget::for_mdp(config.delta, mdp)?;
    let need = || posterior.ok_or_else(|| anyhow::anyhow!("posterior unavailable"));
    let fixed = |amdp: rsvf_core::AmbiguousMDP| -> Result<MethodSolution> {
        Ok(MethodSolution { solution: solve_robust(&amdp)?, radii: amdp.radii(), trace: None })
    };
    match method {
        Method::Hoeffding => fixed(build_hoeffding(mdp, data, budget)?),
        Method::Bci => fixed(build_bci(mdp, need()?, budget)?),
        Method::Mean => {
            Ok(MethodSolution { solution: build_mean(mdp, need()?)?, radii: vec![0.0; mdp.num_cells()], trace: None })
        }
        Method::Rsvf => {
            let options = RsvfOptions { max_iters: config.rsvf_max_iters, verification };
            let (solution, trace) = build_rsvf(mdp, need()?, budget, &options)?;
            let radii = match (trace.terminated_by, trace.iterations.last()) {
                (Termination::ConditionSatisfied, Some(last)) => last.radii.clone(),
                _ => build_bci(mdp, need()?, budget)?.radii(),
            };
            Ok(MethodSolution { solution, radii, trace: Some(trace) })
        }
    }
}

fn realized(problem: &Problem, policy: &Policy, truth: &rsvf_core::TransitionModel) -> Result<f64> {
    Ok(return_of(problem.mdp(), &evaluate_policy(problem.mdp(), policy, truth)?)?)
}

fn run_unit(problem: &Problem, config: &ExperimentConfig, n: usize, rep: usize) -> UnitOutput {
    let seed = derive(config.seed, &[n as u64, rep as u64]);
    let mut diagnostics = Vec::new();
    let prepared = (|| -> Result<_> {
        let truth = problem.draw_truth(derive(seed, &[0]))?;
        let data = generate_dataset(&truth, n, derive(seed, &[1]))?;
        let (_, optimal_value) = solve_nominal(problem.mdp(), &truth)?;
        let true_optimal = return_of(problem.mdp(), &optimal_value)?;
        let posterior = if config.methods.iter().any(|m| m.is_bayesian()) {
            Some(problem.posterior(&data, config.posterior_samples, derive(seed, &[2]))?)
        } else {
            None
        };
        let verification = if config.rsvf_fresh_verification && config.methods.contains(&Method::Rsvf) {
            Some(problem.posterior(&data, config.posterior_samples, derive(seed, &[3]))?)
        } else {
            None
        };
        Ok((truth, data, true_optimal, posterior, verification))
    })();
    let (truth, data, true_optimal, posterior, verification) = match prepared {
        Ok(p) => p,
        Err(e) => {
            diagnostics.push(format!("n={n} replication={rep}: {e:#}"));
            let results = config.methods.iter().map(|&m| (m, Err(anyhow::anyhow!("setup failed")))).collect();
            return UnitOutput { results, trace: None, diagnostics };
        }
    };
    if let Some(p) = &posterior {
        diagnostics.extend(p.warnings().iter().map(|w| format!("n={n} replication={rep}: {w}")));
    }
    let mut trace = None;
    let results = config
        .methods
        .iter()
        .map(|&method| {
            let outcome = solve_method(problem, config, method, &data, posterior.as_ref(), verification.as_ref())
                .and_then(|s| {
                    let realized = realized(problem, &s.solution.policy, &truth)?;
                    if let Some(t) = s.trace {
                        trace = Some((t, s.solution.safe_return));
                    }
                    Ok((s.solution.safe_return, true_optimal, realized))
                });
            if let Err(e) = &outcome {
                diagnostics.push(format!("n={n} replication={rep} method={method}: {e:#}"));
            }
            (method, outcome)
        })
        .collect();
    UnitOutput { results, trace, diagnostics }
}

/// Runs every (n, replication) unit, in parallel, and returns records ordered
/// by method (in config order), n (in config order) and replication.
pub fn run_experiment_detailed(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let problem = Problem::prepare(&config.problem)?;
    let units: Vec<(usize, usize)> = config
        .samples_per_cell
        .iter()
        .flat_map(|&n| (0..config.replications).map(move |r| (n, r)))
        .collect();
    let outputs: Vec<UnitOutput> = units.par_iter().map(|&(n, rep)| run_unit(&problem, config, n, rep)).collect();

    let mut out = ExperimentOutput::default();
    for (position, &method) in config.methods.iter().enumerate() {
        for (&(n, rep), unit) in units.iter().zip(&outputs) {
            let (m, result) = &unit.results[position];
            debug_assert_eq!(*m, method);
            out.records.push(match result {
                Ok((safe, optimal, realized)) => ExperimentRecord::scored(method, n, rep, *safe, *optimal, *realized),
                Err(_) => ExperimentRecord::failed(method, n, rep),
            });
        }
    }
    for (&(n, rep), unit) in units.iter().zip(outputs) {
        if let Some((trace, final_estimate)) = unit.trace {
            out.traces.push(TraceRecord { n_per_cell: n, replication: rep, trace, final_estimate });
        }
        out.diagnostics.extend(unit.diagnostics);
    }
    Ok(out)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    Ok(run_experiment_detailed(config)?.records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub n_per_cell: usize,
    pub mean_regret: f64,
    pub stderr_regret: f64,
    pub violation_rate: f64,
    /// Successful replications behind the statistics.
    pub replications: usize,
}

/// Per (method, n), in order of first appearance: mean regret, its standard
/// error (sample standard deviation over sqrt(R), zero for R = 1) and the
/// violation rate. Failed rows are skipped.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, usize)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.method, r.n_per_cell)) {
            keys.push((r.method, r.n_per_cell));
        }
    }
    keys.into_iter()
        .map(|(method, n)| {
            let rows: Vec<&ExperimentRecord> =
                records.iter().filter(|r| r.method == method && r.n_per_cell == n && !r.is_failure()).collect();
            let count = rows.len();
            // Shifted by the first regret so identical rows give an exact mean and zero spread.
            let shift = rows.first().map_or(0.0, |r| r.regret);
            let offsets: Vec<f64> = rows.iter().map(|r| r.regret - shift).collect();
            let mean_offset = offsets.iter().sum::<f64>() / count as f64;
            let mean = shift + mean_offset;
            let stderr = if count > 1 {
                let var = offsets.iter().map(|d| (d - mean_offset).powi(2)).sum::<f64>() / (count - 1) as f64;
                (var / count as f64).sqrt()
            } else if count == 1 {
                0.0
            } else {
                f64::NAN
            };
            let violations = rows.iter().filter(|r| r.violation == Some(true)).count();
            SummaryRow {
                method,
                n_per_cell: n,
                mean_regret: mean,
                stderr_regret: stderr,
                violation_rate: violations as f64 / count as f64,
                replications: count,
            }
        })
        .collect()
}
