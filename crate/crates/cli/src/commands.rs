//! `build-instance`, `solve` and `estimate-sensitivity`.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use redispatch::data::instance_to_json;
use redispatch::encodings::build_objective;
use redispatch::model::{decode_one_hot, evaluate};
use redispatch::ProblemInstance;

use crate::config::{Method, RunConfig, Source};
use crate::methods::run_method;
use crate::report::{metrics, num, opt_count, opt_num, Manifest, Table};
use crate::source::Loaded;
use crate::CliError;

/// Validates `cfg`, opens the source and writes the manifest into a fresh output dir.
pub(crate) fn prepare(command: &str, cfg: &RunConfig, seeds: Vec<u64>) -> Result<(Loaded, std::path::PathBuf), CliError> {
    let source = cfg.source()?;
    let out = cfg.out_dir();
    let run = || -> Result<(Loaded, std::path::PathBuf)> {
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        let (loaded, files) = Loaded::open(cfg, &source)?;
        Manifest::new(command, cfg, seeds, &files)?.write(&out)?;
        Ok((loaded, out.clone()))
    };
    Ok(run()?)
}

pub fn build_instance(cfg: &RunConfig) -> Result<(), CliError> {
    if matches!(cfg.source()?, Source::Instance(_)) {
        return Err(CliError::Config("build-instance needs --data or --synth".into()));
    }
    let (loaded, out) = prepare("build-instance", cfg, vec![cfg.seed()])?;
    let run = || -> Result<()> {
        let inst = loaded.instance(cfg, cfg.seed())?;
        fs::write(out.join("instance.json"), instance_to_json(&inst) + "\n")?;
        let q = build_objective(&inst, &cfg.objective_options())?;
        let mut buf = Vec::new();
        q.write_triplets(&mut buf)?;
        fs::write(out.join("qubo.csv"), buf)?;
        Ok(())
    };
    Ok(run()?)
}

fn summary_table(inst: &ProblemInstance, x: &redispatch::BitVector, score: f64, steps: u64) -> Table {
    let m = metrics(inst, x);
    let mut t = Table::new(&["metric", "value"]);
    let rows: Vec<(&str, String)> = vec![
        ("objective", num(score)),
        ("steps", steps.to_string()),
        ("one_hot", m.one_hot.to_string()),
        ("adjacency_feasible", m.adjacency_feasible.to_string()),
        ("overloaded_lines", m.overloaded.to_string()),
        ("overloaded_per_timepoint", num(m.overloaded_per_timepoint)),
        ("production_cost", num(m.production_cost)),
        ("switching_cost", opt_num(m.switching_cost)),
        ("fulfilled_timepoints", m.fulfilled.to_string()),
        ("mean_fulfillment", opt_num(m.mean_fulfillment)),
        ("switches", opt_count(m.switches)),
    ];
    for (k, v) in rows {
        t.push(vec![k.to_string(), v]);
    }
    t
}

fn solution_table(inst: &ProblemInstance, x: &redispatch::BitVector) -> Table {
    let layout = inst.layout();
    let z = decode_one_hot(x, layout).ok();
    let mut t = Table::new(&["t", "resource", "bits", "state"]);
    for tt in 0..inst.timepoints {
        for a in 0..inst.resources {
            let start = layout.block_start(tt, a);
            let bits: String = (start..start + inst.states).map(|i| if x.get(i) { '1' } else { '0' }).collect();
            let state = z.as_ref().map(|z| z.state(tt, a));
            t.push(vec![tt.to_string(), a.to_string(), bits, opt_count(state)]);
        }
    }
    t
}

pub fn solve(cfg: &RunConfig) -> Result<(), CliError> {
    let method = cfg.solver.unwrap_or(Method::Tabu);
    let (loaded, out) = prepare("solve", cfg, vec![cfg.seed()])?;
    let run = || -> Result<()> {
        let inst = loaded.instance(cfg, cfg.seed())?;
        let q = build_objective(&inst, &cfg.objective_options())?;
        let o = run_method(method, &inst, &q, cfg.seed(), cfg)?;
        solution_table(&inst, &o.x).write(&out.join("solution.csv"))?;
        summary_table(&inst, &o.x, o.score, o.steps).write(&out.join("summary.csv"))?;
        let mut trace = Table::new(&["iteration", "best_score"]);
        for (it, s) in &o.trace {
            trace.push(vec![it.to_string(), num(*s)]);
        }
        trace.write(&out.join("trace.csv"))?;
        if let Some(p) = &o.progress {
            p.write(&out.join("progress.csv"))?;
        }
        let report = decode_one_hot(&o.x, inst.layout()).ok().map(|z| evaluate(&inst, &z));
        let json = serde_json::json!({
            "method": method.name(),
            "objective": o.score,
            "metrics": metrics(&inst, &o.x),
            "report": report,
        });
        fs::write(out.join("report.json"), serde_json::to_string_pretty(&json)? + "\n")?;
        Ok(())
    };
    Ok(run()?)
}

pub fn estimate_sensitivity(cfg: &RunConfig) -> Result<(), CliError> {
    if matches!(cfg.source()?, Source::Instance(_)) {
        return Err(CliError::Config("estimate-sensitivity needs --data or --synth".into()));
    }
    let (loaded, out) = prepare("estimate-sensitivity", cfg, vec![cfg.seed()])?;
    let net = loaded.network().expect("network source");
    write_sensitivity(net, &out)?;
    Ok(())
}

fn write_sensitivity(net: &crate::source::Network, out: &Path) -> Result<()> {
    let ds = &net.dataset;
    let s = &net.fit.s;
    let mut header = vec!["element"];
    header.extend(ds.lines.iter().map(|l| l.id.as_str()));
    let mut table = Table::new(&header);
    let ids = ds.controllables.iter().map(|c| c.id.as_str()).chain(ds.fixed_ids.iter().map(String::as_str));
    for (r, id) in ids.enumerate() {
        let mut row = vec![id.to_string()];
        row.extend(s.row(r).iter().map(|&v| num(v)));
        table.push(row);
    }
    table.write(&out.join("sensitivity.csv"))?;

    let mut trace = Table::new(&["step", "loss"]);
    for (i, l) in net.fit.loss_trace.iter().enumerate() {
        trace.push(vec![i.to_string(), num(*l)]);
    }
    trace.write(&out.join("loss_trace.csv"))?;

    let mut summary = Table::new(&["metric", "value"]);
    summary.push(vec!["iterations".into(), net.fit.iterations.to_string()]);
    summary.push(vec!["converged".into(), net.fit.converged.to_string()]);
    summary.push(vec!["final_loss".into(), num(*net.fit.loss_trace.last().expect("start loss"))]);
    let rel = net.truth.as_ref().map(|truth| {
        let diff = redispatch::Matrix::from_fn(s.rows(), s.cols(), |r, c| s[(r, c)] - truth[(r, c)]);
        (diff.frobenius_sq() / truth.frobenius_sq()).sqrt()
    });
    summary.push(vec!["relative_error".into(), opt_num(rel)]);
    summary.write(&out.join("fit_summary.csv"))?;
    Ok(())
}
