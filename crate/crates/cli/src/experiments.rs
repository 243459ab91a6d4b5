//! The four experiments: penalty normalization, score normalization, decomposer
//! comparison and per-timepoint traces.
//!
//! Repetition `r` uses seed `seed + r` for cost sampling and for the solver.
//! Repetitions run on the rayon pool; tables are assembled in repetition order, so
//! the output does not depend on scheduling.

use std::path::Path;

use anyhow::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use redispatch::data::{aggregate_time, nearest_level_configuration, random_feasible_configuration};
use redispatch::encodings::{
    build_objective, build_onehot_qubo, build_adjacency_qubo, build_score_normalized_term, build_term,
    extremal_configurations, load_slack, penalty_bounds, power_slack, ObjectiveOptions, Term,
};
use redispatch::model::{decode_one_hot, encode_one_hot};
use redispatch::{BitVector, Configuration, Multipliers, ProblemInstance, Qubo, QuboBuilder};

use crate::commands::prepare;
use crate::config::{Method, Preset, RunConfig};
use crate::methods::run_method;
use crate::report::{mean, median, metrics, num, opt_count, opt_num, std_dev, Metrics, Table, MISSING};
use crate::CliError;

pub const DEFAULT_REPETITIONS: usize = 10;
pub const DEFAULT_SAMPLES: usize = 1000;
/// Time limit of the decomposer comparison when neither a time nor a step limit is set.
pub const DEFAULT_DECOMPOSER_SECONDS: f64 = 60.0;

fn seeds(cfg: &RunConfig) -> Vec<u64> {
    let base = cfg.seed();
    (0..cfg.repetitions.unwrap_or(DEFAULT_REPETITIONS) as u64).map(|r| base + r).collect()
}

fn sampler(cfg: &RunConfig) -> Result<Method, CliError> {
    match cfg.solver.unwrap_or(Method::Tabu) {
        m @ (Method::BruteForce | Method::Tabu | Method::Annealing) => Ok(m),
        m => Err(CliError::Config(format!(
            "this experiment needs a sampler (brute-force, tabu, annealing), got {}",
            m.name()
        ))),
    }
}

/// Mean and sample deviation of a column, as two cells.
fn stat_cells(xs: &[f64]) -> [String; 2] {
    [opt_num(mean(xs)), opt_num(std_dev(xs))]
}

/// Writes every table; the first error is returned after all were attempted.
fn write_all(out: &Path, tables: &[(&str, &Table)]) -> Result<()> {
    let mut first = None;
    for (name, t) in tables {
        if let Err(e) = t.write(&out.join(name)) {
            first.get_or_insert(e);
        }
    }
    first.map_or(Ok(()), Err)
}

/// Splits per-repetition results into successes and the first failure, so partial
/// results can still be written.
fn partition<T>(results: Vec<Result<T>>) -> (Vec<T>, Option<anyhow::Error>) {
    let mut ok = Vec::new();
    let mut err = None;
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                err.get_or_insert(e);
            }
        }
    }
    (ok, err)
}

// ---------------------------------------------------------------------------
// penalty-norm

#[derive(Debug, Clone)]
pub struct PenaltyRun {
    pub normalized: bool,
    pub repetition: usize,
    pub seed: u64,
    pub score: f64,
    pub metrics: Metrics,
}

impl PenaltyRun {
    pub fn variant(&self) -> &'static str {
        if self.normalized {
            "normalized"
        } else {
            "baseline"
        }
    }
}

#[derive(Debug, Clone)]
pub struct PenaltyNormReport {
    pub runs: Vec<PenaltyRun>,
    pub runs_table: Table,
    pub summary: Table,
}

impl PenaltyNormReport {
    /// Overloaded line counts of one variant, in repetition order.
    pub fn overloaded(&self, normalized: bool) -> Vec<f64> {
        self.runs
            .iter()
            .filter(|r| r.normalized == normalized)
            .map(|r| r.metrics.overloaded as f64)
            .collect()
    }
}

/// Minimizes `λ_g Q_g + λ_h Q_h` plus the hard terms with and without penalty
/// normalization, once per repetition.
pub fn penalty_norm_report(cfg: &RunConfig, loaded: &crate::source::Loaded) -> Result<(PenaltyNormReport, Option<anyhow::Error>)> {
    let method = sampler(cfg)?;
    let seeds = seeds(cfg);
    let jobs: Vec<(usize, u64, bool)> = seeds
        .iter()
        .enumerate()
        .flat_map(|(r, &s)| [(r, s, true), (r, s, false)])
        .collect();
    let results: Vec<Result<PenaltyRun>> = jobs
        .par_iter()
        .map(|&(repetition, seed, normalized)| {
            let mut inst = loaded.instance(cfg, seed)?;
            let m = cfg.multipliers();
            inst.multipliers = Multipliers {
                power: m.power,
                load: m.load,
                cost: 0.0,
                switching: 0.0,
            };
            let opts = ObjectiveOptions {
                normalized_penalties: normalized,
                score_normalized: false,
                hard_weight: cfg.hard_weight.unwrap_or(1.0),
            };
            let q = build_objective(&inst, &opts)?;
            let o = run_method(method, &inst, &q, seed, cfg)?;
            Ok(PenaltyRun {
                normalized,
                repetition,
                seed,
                score: o.score,
                metrics: metrics(&inst, &o.x),
            })
        })
        .collect();
    let (runs, err) = partition(results);

    let mut runs_table = Table::new(&[
        "variant",
        "repetition",
        "seed",
        "objective",
        "one_hot",
        "overloaded_lines",
        "overloaded_per_timepoint",
        "fulfilled_timepoints",
        "mean_fulfillment",
    ]);
    for r in &runs {
        runs_table.push(vec![
            r.variant().into(),
            r.repetition.to_string(),
            r.seed.to_string(),
            num(r.score),
            r.metrics.one_hot.to_string(),
            r.metrics.overloaded.to_string(),
            num(r.metrics.overloaded_per_timepoint),
            r.metrics.fulfilled.to_string(),
            opt_num(r.metrics.mean_fulfillment),
        ]);
    }
    let mut summary = Table::new(&[
        "variant",
        "runs",
        "overloaded_mean",
        "overloaded_std",
        "overloaded_per_timepoint_mean",
        "fulfillment_mean",
        "fulfillment_std",
        "one_hot_runs",
    ]);
    for normalized in [false, true] {
        let sel: Vec<&PenaltyRun> = runs.iter().filter(|r| r.normalized == normalized).collect();
        let over: Vec<f64> = sel.iter().map(|r| r.metrics.overloaded as f64).collect();
        let per_t: Vec<f64> = sel.iter().map(|r| r.metrics.overloaded_per_timepoint).collect();
        let ful: Vec<f64> = sel.iter().filter_map(|r| r.metrics.mean_fulfillment).collect();
        let [om, os] = stat_cells(&over);
        let [fm, fs] = stat_cells(&ful);
        summary.push(vec![
            if normalized { "normalized" } else { "baseline" }.into(),
            sel.len().to_string(),
            om,
            os,
            opt_num(mean(&per_t)),
            fm,
            fs,
            sel.iter().filter(|r| r.metrics.one_hot).count().to_string(),
        ]);
    }
    Ok((
        PenaltyNormReport {
            runs,
            runs_table,
            summary,
        },
        err,
    ))
}

pub fn penalty_norm(cfg: &RunConfig) -> Result<(), CliError> {
    sampler(cfg)?;
    let (loaded, out) = prepare("experiment penalty-norm", cfg, seeds(cfg))?;
    let (report, err) = penalty_norm_report(cfg, &loaded)?;
    write_all(
        &out,
        &[
            ("penalty_norm_runs.csv", &report.runs_table),
            ("penalty_norm_summary.csv", &report.summary),
        ],
    )?;
    err.map_or(Ok(()), |e| Err(e.into()))
}

// ---------------------------------------------------------------------------
// score-norm

/// Scores of one term over sampled feasible vectors, raw and rescaled.
#[derive(Debug, Clone)]
pub struct TermDistribution {
    pub term: Term,
    pub raw: Vec<f64>,
    /// `None` when the term is constant over one-hot vectors.
    pub normalized: Option<Vec<f64>>,
    /// Rescaled scores of the prescribed minimizing and maximizing configurations.
    pub extremes: Option<(f64, f64)>,
}

/// Scores `samples` random adjacency-feasible configurations under every soft term.
pub fn score_distributions(inst: &ProblemInstance, opts: &ObjectiveOptions<f64>, samples: usize, seed: u64) -> Result<Vec<TermDistribution>> {
    let bounds = penalty_bounds(inst, opts.normalized_penalties)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<BitVector> = (0..samples)
        .map(|_| {
            let z = random_feasible_configuration(&mut rng, inst.timepoints, inst.resources, inst.states);
            encode_one_hot(&z, inst.states)
        })
        .collect();
    let mut out = Vec::new();
    for term in Term::ALL {
        let raw_q = build_term(inst, term, &bounds);
        let raw = xs.iter().map(|x| raw_q.evaluate(x)).collect();
        let (normalized, extremes) = match build_score_normalized_term(inst, term, &bounds) {
            Ok(q) => {
                let (lo, hi) = extremal_configurations(inst, term);
                let ext = (
                    q.evaluate(&encode_one_hot(&lo, inst.states)),
                    q.evaluate(&encode_one_hot(&hi, inst.states)),
                );
                (Some(xs.iter().map(|x| q.evaluate(x)).collect()), Some(ext))
            }
            Err(redispatch::encodings::EncodingError::Qubo(redispatch::qubo::QuboError::DegenerateRange(_))) => {
                (None, None)
            }
            Err(e) => return Err(e.into()),
        };
        out.push(TermDistribution {
            term,
            raw,
            normalized,
            extremes,
        });
    }
    Ok(out)
}

fn single_term_objective(inst: &ProblemInstance, term: Term, normalized: bool, opts: &ObjectiveOptions<f64>) -> Result<Option<Qubo>> {
    let bounds = penalty_bounds(inst, opts.normalized_penalties)?;
    let q = if normalized {
        match build_score_normalized_term(inst, term, &bounds) {
            Ok(q) => q,
            Err(redispatch::encodings::EncodingError::Qubo(redispatch::qubo::QuboError::DegenerateRange(_))) => {
                return Ok(None)
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        build_term(inst, term, &bounds)
    };
    let layout = inst.layout();
    let mut b = QuboBuilder::new(layout.dim());
    b.add_qubo(1.0, &q)?;
    b.add_qubo(opts.hard_weight, &build_onehot_qubo(layout))?;
    b.add_qubo(opts.hard_weight, &build_adjacency_qubo(layout))?;
    Ok(Some(b.build()))
}

#[derive(Debug, Clone)]
pub struct TermRun {
    pub term: Term,
    pub normalized: bool,
    pub repetition: usize,
    pub seed: u64,
    pub score: f64,
    pub metrics: Metrics,
}

pub fn score_norm(cfg: &RunConfig) -> Result<(), CliError> {
    let method = sampler(cfg)?;
    let seeds = seeds(cfg);
    let (loaded, out) = prepare("experiment score-norm", cfg, seeds.clone())?;
    let opts = cfg.objective_options();
    let samples = cfg.samples.unwrap_or(DEFAULT_SAMPLES);

    let mut dist = Table::new(&[
        "term",
        "method",
        "min",
        "median",
        "max",
        "at_min_configuration",
        "at_max_configuration",
    ]);
    let dist_result = (|| -> Result<()> {
        let inst = loaded.instance(cfg, cfg.seed())?;
        for d in score_distributions(&inst, &opts, samples, cfg.seed())? {
            let fold = |v: &[f64], f: fn(f64, f64) -> f64, init: f64| v.iter().copied().fold(init, f);
            dist.push(vec![
                d.term.name().into(),
                "raw".into(),
                num(fold(&d.raw, f64::min, f64::INFINITY)),
                opt_num(median(&d.raw)),
                num(fold(&d.raw, f64::max, f64::NEG_INFINITY)),
                MISSING.into(),
                MISSING.into(),
            ]);
            let (lo, hi) = d.extremes.map_or((None, None), |(a, b)| (Some(a), Some(b)));
            let n = d.normalized.as_deref().unwrap_or(&[]);
            dist.push(vec![
                d.term.name().into(),
                "normalized".into(),
                if n.is_empty() { MISSING.into() } else { num(fold(n, f64::min, f64::INFINITY)) },
                opt_num(median(n)),
                if n.is_empty() { MISSING.into() } else { num(fold(n, f64::max, f64::NEG_INFINITY)) },
                opt_num(lo),
                opt_num(hi),
            ]);
        }
        Ok(())
    })();

    let jobs: Vec<(usize, u64, Term, bool)> = seeds
        .iter()
        .enumerate()
        .flat_map(|(r, &s)| Term::ALL.into_iter().flat_map(move |t| [(r, s, t, false), (r, s, t, true)]))
        .collect();
    let results: Vec<Result<Option<TermRun>>> = jobs
        .par_iter()
        .map(|&(repetition, seed, term, normalized)| {
            let inst = loaded.instance(cfg, seed)?;
            let Some(q) = single_term_objective(&inst, term, normalized, &opts)? else {
                return Ok(None);
            };
            let o = run_method(method, &inst, &q, seed, cfg)?;
            Ok(Some(TermRun {
                term,
                normalized,
                repetition,
                seed,
                score: o.score,
                metrics: metrics(&inst, &o.x),
            }))
        })
        .collect();
    let (runs, err) = partition(results);
    let runs: Vec<TermRun> = runs.into_iter().flatten().collect();

    let mut runs_table = Table::new(&[
        "term",
        "method",
        "repetition",
        "seed",
        "objective",
        "one_hot",
        "overloaded_lines",
        "production_cost",
        "fulfilled_timepoints",
        "mean_fulfillment",
        "switches",
    ]);
    for r in &runs {
        runs_table.push(vec![
            r.term.name().into(),
            if r.normalized { "normalized" } else { "raw" }.into(),
            r.repetition.to_string(),
            r.seed.to_string(),
            num(r.score),
            r.metrics.one_hot.to_string(),
            r.metrics.overloaded.to_string(),
            num(r.metrics.production_cost),
            r.metrics.fulfilled.to_string(),
            opt_num(r.metrics.mean_fulfillment),
            opt_count(r.metrics.switches),
        ]);
    }
    let mut summary = Table::new(&[
        "term",
        "method",
        "runs",
        "overloaded_mean",
        "overloaded_std",
        "cost_mean",
        "cost_std",
        "fulfillment_mean",
        "fulfillment_std",
        "switches_mean",
        "switches_std",
        "one_hot_runs",
    ]);
    for term in Term::ALL {
        for normalized in [false, true] {
            let sel: Vec<&TermRun> = runs.iter().filter(|r| r.term == term && r.normalized == normalized).collect();
            let col = |f: &dyn Fn(&TermRun) -> Option<f64>| -> Vec<f64> { sel.iter().filter_map(|r| f(r)).collect() };
            let over = col(&|r| Some(r.metrics.overloaded as f64));
            let cost = col(&|r| Some(r.metrics.production_cost));
            let ful = col(&|r| r.metrics.mean_fulfillment);
            let sw = col(&|r| r.metrics.switches.map(|s| s as f64));
            let mut row = vec![
                term.name().to_string(),
                if normalized { "normalized" } else { "raw" }.to_string(),
                sel.len().to_string(),
            ];
            for xs in [&over, &cost, &ful, &sw] {
                row.extend(stat_cells(xs));
            }
            row.push(sel.iter().filter(|r| r.metrics.one_hot).count().to_string());
            summary.push(row);
        }
    }
    write_all(
        &out,
        &[
            ("score_norm_distribution.csv", &dist),
            ("score_norm_runs.csv", &runs_table),
            ("score_norm_summary.csv", &summary),
        ],
    )?;
    dist_result?;
    err.map_or(Ok(()), |e| Err(e.into()))
}

// ---------------------------------------------------------------------------
// decomposers

#[derive(Debug, Clone)]
pub struct DecomposerRun {
    pub method: Method,
    pub repetition: usize,
    pub seed: u64,
    pub steps: u64,
    /// Full objective, hard-constraint terms included.
    pub objective: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone)]
pub struct DecomposerReport {
    pub runs: Vec<DecomposerRun>,
    pub runs_table: Table,
    pub summary: Table,
}

impl DecomposerReport {
    pub fn objective(&self, method: Method, repetition: usize) -> Option<f64> {
        self.runs
            .iter()
            .find(|r| r.method == method && r.repetition == repetition)
            .map(|r| r.objective)
    }
}

/// Decomposers without an implementation; they are listed as unavailable.
pub const UNAVAILABLE: [&str; 2] = ["component", "roof-dual"];

/// Runs each method once per repetition on the full objective.
pub fn decomposer_report(
    cfg: &RunConfig,
    loaded: &crate::source::Loaded,
    methods: &[Method],
) -> Result<(DecomposerReport, Option<anyhow::Error>)> {
    let seeds = seeds(cfg);
    let opts = cfg.objective_options();
    let results: Vec<Result<Vec<DecomposerRun>>> = seeds
        .par_iter()
        .enumerate()
        .map(|(repetition, &seed)| {
            let inst = loaded.instance(cfg, seed)?;
            let q = build_objective(&inst, &opts)?;
            let mut runs = Vec::new();
            for &method in methods {
                let o = run_method(method, &inst, &q, seed, cfg)?;
                runs.push(DecomposerRun {
                    method,
                    repetition,
                    seed,
                    steps: o.steps,
                    objective: q.evaluate(&o.x),
                    metrics: metrics(&inst, &o.x),
                });
            }
            Ok(runs)
        })
        .collect();
    let (runs, err) = partition(results);
    let runs: Vec<DecomposerRun> = runs.into_iter().flatten().collect();

    let mut runs_table = Table::new(&[
        "method",
        "repetition",
        "seed",
        "steps",
        "objective",
        "one_hot",
        "adjacency_feasible",
        "overloaded_lines",
        "production_cost",
        "fulfilled_timepoints",
        "switches",
    ]);
    for r in &runs {
        runs_table.push(vec![
            r.method.name().into(),
            r.repetition.to_string(),
            r.seed.to_string(),
            r.steps.to_string(),
            num(r.objective),
            r.metrics.one_hot.to_string(),
            r.metrics.adjacency_feasible.to_string(),
            r.metrics.overloaded.to_string(),
            num(r.metrics.production_cost),
            r.metrics.fulfilled.to_string(),
            opt_count(r.metrics.switches),
        ]);
    }
    let mut summary = Table::new(&[
        "method",
        "runs",
        "steps_mean",
        "steps_std",
        "objective_mean",
        "objective_std",
        "overloaded_mean",
        "overloaded_std",
        "cost_mean",
        "cost_std",
        "fulfilled_mean",
        "fulfilled_std",
        "switches_mean",
        "switches_std",
        "feasible_runs",
    ]);
    for &method in methods {
        let sel: Vec<&DecomposerRun> = runs.iter().filter(|r| r.method == method).collect();
        let col = |f: &dyn Fn(&DecomposerRun) -> Option<f64>| -> Vec<f64> { sel.iter().filter_map(|r| f(r)).collect() };
        let mut row = vec![method.name().to_string(), sel.len().to_string()];
        for xs in [
            col(&|r| Some(r.steps as f64)),
            col(&|r| Some(r.objective)),
            col(&|r| Some(r.metrics.overloaded as f64)),
            col(&|r| Some(r.metrics.production_cost)),
            col(&|r| Some(r.metrics.fulfilled as f64)),
            col(&|r| r.metrics.switches.map(|s| s as f64)),
        ] {
            row.extend(stat_cells(&xs));
        }
        row.push(sel.iter().filter(|r| r.metrics.adjacency_feasible).count().to_string());
        summary.push(row);
    }
    for name in UNAVAILABLE {
        let mut row = vec![name.to_string()];
        row.extend(std::iter::repeat_n("unavailable".to_string(), summary.header.len() - 1));
        summary.push(row);
    }
    Ok((
        DecomposerReport {
            runs,
            runs_table,
            summary,
        },
        err,
    ))
}

/// Fills the defaults of the decomposer comparison: the L preset and a 60 s limit.
pub fn decomposer_config(cfg: &RunConfig) -> RunConfig {
    let mut cfg = cfg.clone();
    cfg.preset.get_or_insert(Preset::L);
    if cfg.time_limit.is_none() && cfg.max_steps.is_none() {
        cfg.time_limit = Some(DEFAULT_DECOMPOSER_SECONDS);
    }
    cfg
}

pub fn decomposers(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let cfg = decomposer_config(cfg);
    let (loaded, out) = prepare("experiment decomposers", &cfg, seeds(&cfg))?;
    let methods = [Method::Alpha, Method::Random, Method::Score];
    let (report, err) = decomposer_report(&cfg, &loaded, &methods)?;
    write_all(
        &out,
        &[
            ("decomposers_runs.csv", &report.runs_table),
            ("decomposers_summary.csv", &report.summary),
        ],
    )?;
    err.map_or(Ok(()), |e| Err(e.into()))
}

// ---------------------------------------------------------------------------
// timeseries

/// Per-timepoint cost, production, target, overloads and switches of `x`. Switches
/// at `t` count resources whose state differs from `t − 1`.
fn timepoint_rows(inst: &ProblemInstance, x: &BitVector) -> Vec<[String; 5]> {
    let layout = inst.layout();
    let slack = power_slack(inst, x);
    let loads = load_slack(inst, x);
    let z = decode_one_hot(x, layout).ok();
    (0..inst.timepoints)
        .map(|t| {
            let mut cost = 0.0;
            for a in 0..inst.resources {
                for i in 0..inst.states {
                    if x.get(layout.index(t, a, i)) {
                        cost += inst.c(t, a, i);
                    }
                }
            }
            let over = loads[t * inst.lines..(t + 1) * inst.lines].iter().filter(|&&h| h < 0.0).count();
            let switches = z.as_ref().map(|z| {
                if t == 0 {
                    0
                } else {
                    (0..inst.resources).filter(|&a| z.state(t, a) != z.state(t - 1, a)).count()
                }
            });
            [
                num(cost),
                num(slack[t] + inst.targets[t]),
                num(inst.targets[t]),
                over.to_string(),
                opt_count(switches),
            ]
        })
        .collect()
}

pub fn timeseries(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    cfg.preset.get_or_insert(Preset::L);
    let method = cfg.solver.unwrap_or(Method::Alpha);
    if matches!(cfg.source()?, crate::config::Source::Instance(_)) {
        return Err(CliError::Config("timeseries compares with history and needs --data or --synth".into()));
    }
    let seeds = seeds(&cfg);
    let (loaded, out) = prepare("experiment timeseries", &cfg, seeds.clone())?;
    let net = loaded.network().expect("network source");
    let opts = cfg.objective_options();
    let history_profiles = {
        let t = cfg.build_options(cfg.seed()).timepoints;
        aggregate_time(&net.dataset, t).map_err(anyhow::Error::from)?.controllable_profiles
    };

    let results: Vec<Result<(Vec<[String; 5]>, Vec<[String; 5]>)>> = seeds
        .par_iter()
        .map(|&seed| {
            let inst = loaded.instance(&cfg, seed)?;
            let q = build_objective(&inst, &opts)?;
            let o = run_method(method, &inst, &q, seed, &cfg)?;
            let hist: Configuration = nearest_level_configuration(&history_profiles, &inst.power);
            Ok((timepoint_rows(&inst, &o.x), timepoint_rows(&inst, &encode_one_hot(&hist, inst.states))))
        })
        .collect();
    let mut table = Table::new(&[
        "source",
        "repetition",
        "seed",
        "t",
        "cost",
        "power",
        "target",
        "overloaded_lines",
        "switches",
    ]);
    let mut err = None;
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok((sol, hist)) => {
                for (source, rows) in [("solution", sol), ("historical", hist)] {
                    for (t, cells) in rows.into_iter().enumerate() {
                        let mut row = vec![source.to_string(), r.to_string(), seeds[r].to_string(), t.to_string()];
                        row.extend(cells);
                        table.push(row);
                    }
                }
            }
            Err(e) => {
                err.get_or_insert(e);
            }
        }
    }
    write_all(&out, &[("timeseries.csv", &table)])?;
    match err {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}
