//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if
//! any criterion fails or overruns its time budget.
//!
//! `cargo test --test acceptance -- 3 6` runs only criteria 3 and 6.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use redispatch::alphaexp::{
    alpha_expansion_observed, build_alpha_qubo, rectified_column, rectify, sample_disjoint_changes, AlphaConfig,
    StateChange,
};
use redispatch::data::{
    estimate_sensitivity, random_feasible_configuration, synth_instance, synth_network, SensitivityFitConfig,
    SynthNetworkSpec,
};
use redispatch::encodings::{
    build_adjacency_qubo, build_cost_qubo, build_load_qubo, build_objective, build_onehot_qubo, build_power_qubo,
    build_switch_qubo, compute_bounds, ObjectiveOptions,
};
use redispatch::model::{decode_one_hot, encode_one_hot, is_adjacent_feasible};
use redispatch::solvers::{brute_force, Budget, SolveRequest, Solver};
use redispatch::{BitVector, Configuration, Layout, Matrix, Multipliers, ProblemInstance};

use redispatch_cli::config::{Method, Preset, RunConfig};
use redispatch_cli::experiments::{decomposer_config, decomposer_report, penalty_norm_report, score_distributions};
use redispatch_cli::report::{mean, std_dev};
use redispatch_cli::source::Loaded;

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + b.abs())
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

// ---------------------------------------------------------------------------
// 1: every QUBO term against a direct evaluation of its defining sum

fn random_instance(rng: &mut ChaCha8Rng) -> ProblemInstance {
    let n = rng.random_range(1..=4);
    let k = rng.random_range(2..=4);
    let t = rng.random_range(1..=4);
    let l = rng.random_range(1..=3);
    let power = Matrix::from_fn(n, k, |_, _| rng.random_range(0.0..50.0));
    let power = Matrix::from_rows(
        power
            .to_rows()
            .into_iter()
            .map(|mut r| {
                r.sort_by(f64::total_cmp);
                r
            })
            .collect(),
    )
    .unwrap();
    let sensitivity = Matrix::from_fn(n, l, |_, _| rng.random_range(0.0..1.0));
    let top: f64 = (0..n).map(|a| power[(a, k - 1)]).sum();
    let floor: Vec<f64> = (0..l).map(|j| (0..n).map(|a| power[(a, 0)] * sensitivity[(a, j)]).sum()).collect();
    let ceiling: Vec<f64> = (0..l).map(|j| (0..n).map(|a| power[(a, k - 1)] * sensitivity[(a, j)]).sum()).collect();
    ProblemInstance {
        timepoints: t,
        resources: n,
        states: k,
        lines: l,
        cost: Matrix::from_fn(t, n * k, |_, _| rng.random_range(0.0..100.0)),
        line_limits: Matrix::from_fn(t, l, |_, j| floor[j] + rng.random_range(0.1..1.0) * (ceiling[j] - floor[j] + 1.0)),
        targets: (0..t).map(|_| rng.random_range(0.0..0.95) * top).collect(),
        switch_scale: rng.random_range(0.1..2.0),
        power,
        sensitivity,
        multipliers: Multipliers::reference(),
    }
}

fn zeta(u: f64) -> f64 {
    1.0 - u + u * u / 2.0
}

/// Direct evaluations of the six terms at a configuration, from the instance data.
fn term_oracles(inst: &ProblemInstance, z: &Configuration, x: &BitVector) -> [f64; 6] {
    let (t_n, n, k, l) = (inst.timepoints, inst.resources, inst.states, inst.lines);
    let p = |a: usize, s: usize| inst.power[(a, s - 1)];
    let mut one_hot = 0.0;
    for block in 0..t_n * n {
        let m = (0..k).filter(|&i| x.get(block * k + i)).count() as f64;
        one_hot += m * m - 2.0 * m;
    }
    let mut adjacency = 0.0;
    let mut switching = 0.0;
    for t in 0..t_n.saturating_sub(1) {
        for a in 0..n {
            if z.state(t, a).abs_diff(z.state(t + 1, a)) > 1 {
                adjacency += 1.0;
            }
            switching += inst.switch_scale * (p(a, z.state(t, a)) - p(a, z.state(t + 1, a))).abs();
        }
    }
    let mut cost = 0.0;
    let mut power = 0.0;
    let mut load = 0.0;
    let top: f64 = (0..n).map(|a| (1..=k).map(|s| p(a, s)).fold(f64::MIN, f64::max)).sum();
    for t in 0..t_n {
        let produced: f64 = (0..n).map(|a| p(a, z.state(t, a))).sum();
        power += zeta((produced - inst.targets[t]) / (top - inst.targets[t]));
        for a in 0..n {
            cost += inst.cost[(t, a * k + z.state(t, a) - 1)];
        }
        for j in 0..l {
            let flow: f64 = (0..n).map(|a| p(a, z.state(t, a)) * inst.sensitivity[(a, j)]).sum();
            let least: f64 = (0..n)
                .map(|a| (1..=k).map(|s| p(a, s) * inst.sensitivity[(a, j)]).fold(f64::MAX, f64::min))
                .sum();
            let m = inst.line_limits[(t, j)];
            load += zeta((m - flow) / (m - least));
        }
    }
    [one_hot, adjacency, cost, switching, power, load]
}

fn criterion_1() -> Outcome {
    const NAMES: [&str; 6] = ["one-hot", "adjacency", "cost", "switching", "power", "load"];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    for _ in 0..10 {
        let inst = random_instance(&mut rng);
        inst.validate().map_err(|e| e.to_string())?;
        let layout = inst.layout();
        let bounds = compute_bounds(&inst).map_err(|e| e.to_string())?;
        let qubos = [
            build_onehot_qubo(layout),
            build_adjacency_qubo(layout),
            build_cost_qubo(&inst),
            build_switch_qubo(&inst),
            build_power_qubo(&inst, &bounds),
            build_load_qubo(&inst, &bounds),
        ];
        for _ in 0..200 {
            // Any one-hot vector, adjacency-feasible or not.
            let rows = (0..inst.timepoints)
                .map(|_| (0..inst.resources).map(|_| rng.random_range(1..=inst.states)).collect())
                .collect();
            let z = Configuration::from_rows(rows, inst.states).unwrap();
            let x = encode_one_hot(&z, inst.states);
            let oracle = term_oracles(&inst, &z, &x);
            for (i, q) in qubos.iter().enumerate() {
                let got = q.evaluate(&x);
                ensure!(close(got, oracle[i]), "{} term: matrix {got} vs oracle {}", NAMES[i], oracle[i]);
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} term evaluations agree"))
}

// ---------------------------------------------------------------------------
// 2: hard-constraint certificates

fn criterion_2() -> Outcome {
    let mut vectors = 0u64;
    for (t, n, k) in [(2, 2, 3), (3, 2, 2), (1, 3, 4), (2, 3, 2), (1, 2, 6)] {
        let layout = Layout::new(t, n, k);
        let q = build_onehot_qubo::<f64>(layout);
        let floor = -((t * n) as f64);
        for mask in 0u64..1 << layout.dim() {
            let x = BitVector::from_u64(mask, layout.dim());
            let one_hot = (0..t * n).all(|b| ((mask >> (b * k)) & ((1 << k) - 1)).count_ones() == 1);
            let s = q.evaluate(&x);
            if one_hot {
                ensure!(s == floor, "one-hot vector {mask:b} scores {s}, expected {floor}");
            } else {
                ensure!(s > floor, "vector {mask:b} is not one-hot but scores {s}");
            }
            vectors += 1;
        }
    }
    let layout = Layout::new(3, 2, 3);
    let q = build_adjacency_qubo::<f64>(layout);
    let mut configurations = 0;
    for code in 0..3usize.pow(6) {
        let digits: Vec<usize> = (0..6).map(|d| code / 3usize.pow(d) % 3 + 1).collect();
        let z = Configuration::from_rows(digits.chunks(2).map(<[usize]>::to_vec).collect(), 3).unwrap();
        let violations = (0..2)
            .flat_map(|t| (0..2).map(move |a| (t, a)))
            .filter(|&(t, a)| z.state(t, a).abs_diff(z.state(t + 1, a)) > 1)
            .count();
        let s = q.evaluate(&encode_one_hot(&z, 3));
        ensure!(s == violations as f64, "configuration {:?} scores {s}, has {violations} violations", z.to_rows());
        configurations += 1;
    }
    Ok(format!("{vectors} vectors and {configurations} configurations certified"))
}

// ---------------------------------------------------------------------------
// 3: exact optimum of planted instances

fn criterion_3() -> Outcome {
    const SHAPES: [(usize, usize, usize); 5] = [(2, 2, 2), (2, 3, 2), (2, 4, 2), (4, 2, 2), (1, 4, 4)];
    let opts = ObjectiveOptions {
        normalized_penalties: true,
        score_normalized: false,
        hard_weight: 1.0,
    };
    let (mut runs, mut matches) = (0, 0);
    for i in 0..20u64 {
        let (n, k, t) = SHAPES[i as usize % SHAPES.len()];
        let (inst, planted) = synth_instance(n, k, t, 2, 100 + i);
        let q = build_objective(&inst, &opts).map_err(|e| e.to_string())?;
        ensure!(q.dim() <= 16, "dimension {} exceeds 16", q.dim());
        let exact = brute_force(&SolveRequest::new(&q, 0)).map_err(|e| e.to_string())?;
        let found = decode_one_hot(&exact.best, inst.layout()).map_err(|e| format!("instance {i}: {e}"))?;
        ensure!(found == planted, "instance {i}: brute force found {:?}, planted {:?}", found.to_rows(), planted.to_rows());
        for seed in 0..5 {
            let req = SolveRequest::new(&q, seed).with_budget(Budget::iterations(2_000));
            let r = Solver::Tabu.run(&req).map_err(|e| e.to_string())?;
            runs += 1;
            if close(r.score, exact.score) {
                matches += 1;
            }
        }
    }
    let rate = matches as f64 / runs as f64;
    ensure!(rate >= 0.95, "tabu matched brute force in {matches}/{runs} runs");
    Ok(format!("20/20 planted optima recovered; tabu matched {matches}/{runs}"))
}

// ---------------------------------------------------------------------------
// 4: alpha-expansion contracts

fn column(col: &[usize]) -> Configuration {
    Configuration::from_rows(col.iter().map(|&s| vec![s]).collect(), 3).unwrap()
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut identities = 0;
    for trial in 0..60u64 {
        let (inst, _) = synth_instance(3, 4, 4, 2, trial);
        let q = build_objective(&inst, &ObjectiveOptions::default()).map_err(|e| e.to_string())?;
        let z = random_feasible_configuration(&mut rng, 4, 3, 4);
        let x = encode_one_hot(&z, 4);
        let c = 1 + trial as usize % 3;
        let changes = sample_disjoint_changes(&mut rng, &z, 4, c);
        let cycles: Vec<_> = changes.iter().map(|&ch| rectify(&z, ch, 4)).collect();
        let b = build_alpha_qubo(&q, &x, &cycles).map_err(|e| e.to_string())?;
        let base = q.evaluate(&x);
        let mut seen = std::collections::BTreeSet::new();
        if !cycles.iter().all(|cs| cs.touched.iter().all(|blk| seen.insert(*blk))) {
            continue;
        }
        for mask in 0u64..1 << cycles.len() {
            let alpha = BitVector::from_u64(mask, cycles.len());
            let mut y = x.clone();
            for i in alpha.ones() {
                cycles[i].apply(&mut y);
            }
            let direct = q.evaluate(&y);
            let via = base + b.evaluate(&alpha);
            ensure!(close(via, direct), "trial {trial}, alpha {mask:b}: {via} vs {direct}");
            identities += 1;
        }
    }
    ensure!(identities >= 100, "only {identities} move identities checked");

    let mut accepted = 0;
    for seed in 0..10u64 {
        let (inst, _) = synth_instance(4, 5, 8, 3, seed);
        let layout = inst.layout();
        let q = build_objective(&inst, &ObjectiveOptions::default()).map_err(|e| e.to_string())?;
        let x0 = encode_one_hot(&random_feasible_configuration(&mut rng, 8, 4, 5), 5);
        let mut last = q.evaluate(&x0);
        let mut problem = None;
        let cfg = AlphaConfig {
            proposals: 4,
            seed,
            ..AlphaConfig::default()
        };
        let r = alpha_expansion_observed(layout, &q, &x0, &cfg, |x, score| {
            accepted += 1;
            let z = match decode_one_hot(x, layout) {
                Ok(z) => z,
                Err(_) => {
                    problem.get_or_insert("iterate is not one-hot".to_string());
                    return;
                }
            };
            if !is_adjacent_feasible(&z) {
                problem.get_or_insert("iterate violates adjacency".to_string());
            }
            if score > last + 1e-9 * (1.0 + last.abs()) {
                problem.get_or_insert(format!("score rose from {last} to {score}"));
            }
            if !close(score, q.evaluate(x)) {
                problem.get_or_insert(format!("reported score {score} differs from {}", q.evaluate(x)));
            }
            last = score;
        })
        .map_err(|e| e.to_string())?;
        if let Some(p) = problem {
            return Err(format!("seed {seed}: {p}"));
        }
        let trace = r.result.trace.unwrap_or_default();
        ensure!(trace.windows(2).all(|w| w[1].1 <= w[0].1), "seed {seed}: trace not monotone");
    }

    let cases: [(&[usize], usize, usize, &[usize]); 3] = [
        (&[2, 2, 2], 1, 3, &[2, 3, 2]),
        (&[1, 1, 1], 1, 3, &[2, 3, 2]),
        (&[1, 1, 1], 0, 3, &[3, 2, 1]),
    ];
    for (start, t, s, expected) in cases {
        let z = column(start);
        let change = StateChange {
            t,
            resource: 0,
            new_state: s,
        };
        let got = rectified_column(&z, change);
        ensure!(got == expected, "{start:?} with state {s} at t={t}: got {got:?}, expected {expected:?}");
    }
    let touched: Vec<usize> = rectify(&column(&[1, 1, 1]), StateChange { t: 1, resource: 0, new_state: 3 }, 3)
        .touched
        .iter()
        .map(|&(t, _)| t)
        .collect();
    ensure!(touched == [0, 1, 2], "rectification touched timepoints {touched:?}");
    Ok(format!("{identities} move identities; {accepted} accepted iterates feasible and monotone; rectification examples hold"))
}

// ---------------------------------------------------------------------------
// 5: penalty normalization on the desk fixture

fn desk_config(preset: Preset) -> RunConfig {
    RunConfig {
        data: Some(fixture("desk")),
        preset: Some(preset),
        repetitions: Some(10),
        ..RunConfig::default()
    }
}

fn open(cfg: &RunConfig) -> Result<Loaded, String> {
    let source = cfg.source().map_err(|e| e.to_string())?;
    Loaded::open(cfg, &source).map(|(l, _)| l).map_err(|e| e.to_string())
}

fn criterion_5() -> Outcome {
    let cfg = desk_config(Preset::S);
    let loaded = open(&cfg)?;
    let inst = loaded.instance(&cfg, 0).map_err(|e| e.to_string())?;
    ensure!(
        (inst.resources, inst.lines, inst.timepoints) == (12, 20, 2),
        "fixture instance has n={}, L={}, T={}",
        inst.resources,
        inst.lines,
        inst.timepoints
    );
    let (report, err) = penalty_norm_report(&cfg, &loaded).map_err(|e| e.to_string())?;
    if let Some(e) = err {
        return Err(e.to_string());
    }
    let stats = |normalized| {
        let xs = report.overloaded(normalized);
        (mean(&xs).unwrap_or(f64::NAN), std_dev(&xs).unwrap_or(f64::NAN), xs.len())
    };
    let (nm, ns, nn) = stats(true);
    let (bm, bs, bn) = stats(false);
    ensure!(nn == 10 && bn == 10, "expected 10 runs per variant, got {nn} and {bn}");
    let detail = format!("overloaded lines normalized {nm:.2}±{ns:.2} vs baseline {bm:.2}±{bs:.2}");
    ensure!(nm < bm && nm + ns < bm - bs, "{detail}");
    Ok(detail)
}

// ---------------------------------------------------------------------------
// 6: score normalization

fn criterion_6() -> Outcome {
    let mut checked = 0;
    for preset in [Preset::S, Preset::L] {
        let cfg = desk_config(preset);
        let loaded = open(&cfg)?;
        for seed in 0..2 {
            let inst = loaded.instance(&cfg, seed).map_err(|e| e.to_string())?;
            let dists = score_distributions(&inst, &cfg.objective_options(), 1000, seed).map_err(|e| e.to_string())?;
            ensure!(dists.len() == 4, "expected four terms");
            for d in dists {
                let name = d.term.name();
                let values = d.normalized.ok_or(format!("{name} term could not be normalized"))?;
                ensure!(values.len() == 1000, "{name}: {} samples", values.len());
                if let Some(v) = values.iter().find(|v| !(-1e-9..=1.0 + 1e-9).contains(*v)) {
                    return Err(format!("{name} ({preset:?}, seed {seed}): normalized score {v} outside [0, 1]"));
                }
                let (lo, hi) = d.extremes.ok_or(format!("{name}: no extremes"))?;
                ensure!(lo.abs() <= 1e-9 && (hi - 1.0).abs() <= 1e-9, "{name}: extremes score {lo} and {hi}");
                checked += values.len();
            }
        }
    }
    Ok(format!("{checked} normalized scores in [0, 1]; extremal configurations score 0 and 1"))
}

// ---------------------------------------------------------------------------
// 7: alpha-expansion against the random decomposer

fn criterion_7() -> Outcome {
    let cfg = decomposer_config(&RunConfig {
        time_limit: Some(60.0),
        ..desk_config(Preset::L)
    });
    let loaded = open(&cfg)?;
    let (report, err) = decomposer_report(&cfg, &loaded, &[Method::Alpha, Method::Random]).map_err(|e| e.to_string())?;
    if let Some(e) = err {
        return Err(e.to_string());
    }
    let mut wins = 0;
    let mut margins = Vec::new();
    for r in report.runs.iter().filter(|r| r.method == Method::Alpha) {
        ensure!(
            r.metrics.one_hot && r.metrics.adjacency_feasible,
            "alpha run {} returned an infeasible solution",
            r.repetition
        );
        let random = report
            .objective(Method::Random, r.repetition)
            .ok_or(format!("no random run for repetition {}", r.repetition))?;
        if r.objective <= random {
            wins += 1;
        }
        margins.push(format!("{:+.4}", r.objective - random));
    }
    ensure!(margins.len() == 10, "expected 10 alpha runs, got {}", margins.len());
    let detail = format!("alpha <= random in {wins}/10 runs (alpha - random: {})", margins.join(" "));
    ensure!(wins >= 8, "{detail}");
    Ok(detail)
}

// ---------------------------------------------------------------------------
// 8: sensitivity fit

fn relative_error(s: &Matrix<f64>, truth: &Matrix<f64>) -> f64 {
    let diff = Matrix::from_fn(s.rows(), s.cols(), |r, c| s[(r, c)] - truth[(r, c)]);
    (diff.frobenius_sq() / truth.frobenius_sq()).sqrt()
}

fn criterion_8() -> Outcome {
    let mut worst: f64 = 0.0;
    let cfg = SensitivityFitConfig::default();
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = Matrix::from_fn(64, 8, |_, _| rng.random_range(0.0..100.0));
        let truth = Matrix::from_fn(8, 5, |_, _| rng.random_range(0.0..1.0));
        let psi = phi.matmul(&truth);
        let fit = estimate_sensitivity(&phi, &psi, &cfg).map_err(|e| e.to_string())?;
        ensure!(
            fit.loss_trace.windows(2).all(|w| w[1] <= w[0]),
            "seed {seed}: loss increased across an accepted step"
        );
        let err = relative_error(&fit.s, &truth);
        ensure!(err <= 1e-3, "seed {seed}: relative Frobenius error {err:.3e}");
        worst = worst.max(err);
    }
    // Generated network exports: 5 controllables and 3 fixed elements over 64 steps.
    // The fit pushes flows towards non-negative values, so only exports whose planted
    // flows are non-negative have the planted matrix as their optimum.
    let networks = (0..)
        .map(|seed| (seed, synth_network(&SynthNetworkSpec::new(5, 3, 5, 64, seed))))
        .filter(|(_, (ds, _))| ds.flows.iter().all(|&f| f >= 0.0))
        .take(3);
    for (seed, (ds, truth)) in networks {
        let fit = estimate_sensitivity(&ds.element_profiles(), &ds.flows, &cfg).map_err(|e| e.to_string())?;
        ensure!(
            fit.loss_trace.windows(2).all(|w| w[1] <= w[0]),
            "network {seed}: loss increased across an accepted step"
        );
        let err = relative_error(&fit.s, &truth);
        ensure!(err <= 1e-3, "network {seed}: relative Frobenius error {err:.3e}");
        worst = worst.max(err);
    }
    Ok(format!("worst relative error {worst:.2e}; loss traces monotone"))
}

// ---------------------------------------------------------------------------
// 9: byte-identical reruns of every command

fn run_cli(args: &[String]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_redispatch"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "redispatch {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(())
}

fn csv_files(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            files.insert(name, std::fs::read(&path).map_err(|e| e.to_string())?);
        }
    }
    Ok(files)
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let small = fixture("small").display().to_string();
    let instance = tmp.path().join("built/instance.json").display().to_string();
    let runs: Vec<(&str, Vec<String>)> = vec![
        ("built", vec!["build-instance".into(), "--data".into(), small.clone(), "--seed".into(), "3".into()]),
        ("synth-built", vec!["build-instance".into(), "--synth".into(), "4,2,3,16".into(), "--seed".into(), "5".into()]),
        ("solve-tabu", vec!["solve".into(), "--data".into(), small.clone(), "--iterations".into(), "3000".into()]),
        ("solve-annealing", vec!["solve".into(), "--data".into(), small.clone(), "--solver".into(), "annealing".into(), "--iterations".into(), "3000".into()]),
        ("solve-alpha", vec!["solve".into(), "--instance".into(), instance.clone(), "--solver".into(), "alpha".into()]),
        ("solve-score", vec!["solve".into(), "--instance".into(), instance, "--solver".into(), "score".into(), "--max-steps".into(), "30".into()]),
        ("sensitivity", vec!["estimate-sensitivity".into(), "--synth".into(), "5,3,5,64".into()]),
        ("penalty", vec!["experiment".into(), "penalty-norm".into(), "--data".into(), small.clone(), "--repetitions".into(), "3".into(), "--iterations".into(), "2000".into()]),
        ("score", vec!["experiment".into(), "score-norm".into(), "--data".into(), small.clone(), "--repetitions".into(), "2".into(), "--samples".into(), "200".into(), "--iterations".into(), "2000".into()]),
        ("decomposers", vec!["experiment".into(), "decomposers".into(), "--data".into(), small.clone(), "--repetitions".into(), "2".into(), "--max-steps".into(), "20".into()]),
        ("timeseries", vec!["experiment".into(), "timeseries".into(), "--data".into(), small, "--repetitions".into(), "2".into(), "--max-steps".into(), "20".into()]),
    ];
    let mut compared = 0;
    for (name, args) in &runs {
        let mut outputs = Vec::new();
        for round in ["a", "b"] {
            let dir = tmp.path().join(if round == "a" { name.to_string() } else { format!("{name}-{round}") });
            let mut full = args.clone();
            full.extend(["--out".into(), dir.display().to_string()]);
            run_cli(&full)?;
            outputs.push(csv_files(&dir)?);
        }
        ensure!(!outputs[0].is_empty() || *name == "built" || *name == "synth-built", "{name}: no CSV written");
        ensure!(outputs[0].keys().eq(outputs[1].keys()), "{name}: different CSV files across runs");
        for (file, bytes) in &outputs[0] {
            ensure!(outputs[1][file] == *bytes, "{name}: {file} differs between runs");
            compared += 1;
        }
    }
    Ok(format!("{} commands, {compared} CSV files byte-identical across reruns", runs.len()))
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [(u8, Duration, fn() -> Outcome); 9] = [
        (1, Duration::from_secs(10), criterion_1),
        (2, Duration::from_secs(30), criterion_2),
        (3, Duration::from_secs(120), criterion_3),
        (4, Duration::from_secs(60), criterion_4),
        (5, Duration::from_secs(300), criterion_5),
        (6, Duration::from_secs(30), criterion_6),
        (7, Duration::from_secs(25 * 60), criterion_7),
        (8, Duration::from_secs(60), criterion_8),
        (9, Duration::from_secs(600), criterion_9),
    ];
    let selected: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, budget, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; over the {} s budget", budget.as_secs())),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {id}: PASS ({:.1} s) {detail}", elapsed.as_secs_f64()),
            Err(detail) => {
                failed += 1;
                println!("criterion {id}: FAIL ({:.1} s) {detail}", elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
