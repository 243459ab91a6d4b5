//! One entry point for every solver and decomposer.

use anyhow::Result;

use redispatch::alphaexp::{alpha_expansion, AlphaConfig};
use redispatch::decomposers::{decompose_loop, DecomposeLoopConfig, Strategy};
use redispatch::model::encode_one_hot;
use redispatch::solvers::{Budget, SolveRequest, Solver};
use redispatch::{BitVector, Configuration, ProblemInstance, Qubo};

use crate::config::{Method, RunConfig};
use crate::report::Table;

/// Iterations for the samplers when the configuration leaves them open.
pub const DEFAULT_ITERATIONS: u64 = 20_000;
/// Tabu iterations for decomposer sub-problems too large to enumerate.
pub const DEFAULT_SUB_ITERATIONS: u64 = 2_000;
/// Step limit of the random and score decomposers when neither a step nor a time
/// limit is configured.
pub const DEFAULT_DECOMPOSER_STEPS: u64 = 1_000;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: BitVector,
    pub score: f64,
    /// Solver iterations, or decomposition steps for the decomposers.
    pub steps: u64,
    pub trace: Vec<(u64, f64)>,
    /// Per-step or per-epoch progress of the decomposers.
    pub progress: Option<Table>,
}

/// The all-off configuration, feasible for every instance.
pub fn all_off(inst: &ProblemInstance) -> BitVector {
    encode_one_hot(
        &Configuration::constant(inst.timepoints, inst.resources, 1),
        inst.states,
    )
}

fn progress_table(rows: impl Iterator<Item = (String, String, String)>) -> Table {
    let mut t = Table::new(&["epoch", "accepted", "score"]);
    for (a, b, c) in rows {
        t.push(vec![a, b, c]);
    }
    t
}

/// Minimizes `q` with `method`. Decomposers start from the all-off configuration.
pub fn run_method(method: Method, inst: &ProblemInstance, q: &Qubo, seed: u64, cfg: &RunConfig) -> Result<Outcome> {
    let time_limit = cfg.time_limit();
    let sampler = match method {
        Method::BruteForce => Some(Solver::BruteForce),
        Method::Tabu => Some(Solver::Tabu),
        Method::Annealing => Some(Solver::Annealing),
        _ => None,
    };
    if let Some(solver) = sampler {
        let mut budget = Budget::iterations(cfg.iterations.unwrap_or(DEFAULT_ITERATIONS));
        if let Some(l) = time_limit {
            budget = budget.with_time_limit(l);
        }
        let r = solver.run(&SolveRequest::new(q, seed).with_budget(budget).with_trace())?;
        return Ok(Outcome {
            score: r.score,
            steps: r.iterations,
            trace: r.trace.unwrap_or_default(),
            x: r.best,
            progress: None,
        });
    }
    let x0 = all_off(inst);
    if method == Method::Alpha {
        let acfg = AlphaConfig {
            proposals: cfg.proposals.unwrap_or(AlphaConfig::default().proposals),
            max_epochs: cfg.max_steps.map(|s| s as usize),
            time_limit,
            seed,
            patience: cfg
                .patience
                .unwrap_or(if time_limit.is_some() { usize::MAX } else { 1 }),
            ..AlphaConfig::default()
        };
        let r = alpha_expansion(inst.layout(), q, &x0, &acfg)?;
        let progress = progress_table(
            r.epochs
                .iter()
                .map(|e| (e.epoch.to_string(), e.accepted.to_string(), format!("{}", e.score))),
        );
        return Ok(Outcome {
            score: r.result.score,
            steps: r.steps,
            trace: r.result.trace.unwrap_or_default(),
            x: r.result.best,
            progress: Some(progress),
        });
    }
    let strategy = if method == Method::Random {
        Strategy::Random
    } else {
        Strategy::Score
    };
    let dcfg = DecomposeLoopConfig {
        subproblem_size: cfg.subproblem_size.unwrap_or(16).min(q.dim()),
        sub_iterations: cfg.iterations.unwrap_or(DEFAULT_SUB_ITERATIONS),
        max_steps: match (cfg.max_steps, time_limit) {
            (None, None) => Some(DEFAULT_DECOMPOSER_STEPS),
            (steps, _) => steps,
        },
        time_limit,
        seed,
    };
    let r = decompose_loop(q, &x0, strategy, &dcfg)?;
    let progress = progress_table(
        r.history
            .iter()
            .map(|h| (h.step.to_string(), (h.accepted as u8).to_string(), format!("{}", h.score))),
    );
    Ok(Outcome {
        score: r.result.score,
        steps: r.steps,
        trace: r.result.trace.unwrap_or_default(),
        x: r.result.best,
        progress: Some(progress),
    })
}
