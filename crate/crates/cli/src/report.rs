//! Report plumbing: number formatting, summary statistics, metrics of arbitrary
//! bit vectors, CSV tables and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use redispatch::encodings::{load_slack, power_slack};
use redispatch::model::{decode_one_hot, first_adjacency_violation};
use redispatch::{BitVector, ProblemInstance};

use crate::config::RunConfig;

/// Text used for metrics that have no value.
pub const MISSING: &str = "n/a";

/// Shortest round-trip decimal, or [`MISSING`] for non-finite values.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        MISSING.to_string()
    }
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), num)
}

pub fn opt_count(v: Option<usize>) -> String {
    v.map_or_else(|| MISSING.to_string(), |c| c.to_string())
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample standard deviation; needs two values.
pub fn std_dev(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    (xs.len() > 1).then(|| (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt())
}

/// Median of the values; the mean of the middle pair for even counts.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

/// Solution metrics that also work for vectors that are not one-hot: production is
/// summed over set bits, so an infeasible vector is judged by what it encodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub one_hot: bool,
    pub adjacency_feasible: bool,
    pub overloaded: usize,
    pub overloaded_per_timepoint: f64,
    pub production_cost: f64,
    /// Timepoints whose production reaches the target.
    pub fulfilled: usize,
    /// Mean production/target ratio over timepoints with a positive target.
    pub mean_fulfillment: Option<f64>,
    /// Defined only for one-hot vectors.
    pub switches: Option<usize>,
    pub switching_cost: Option<f64>,
}

pub fn metrics(inst: &ProblemInstance, x: &BitVector) -> Metrics {
    let layout = inst.layout();
    let overloaded = load_slack(inst, x).iter().filter(|&&h| h < 0.0).count();
    let slack = power_slack(inst, x);
    let fulfilled = slack.iter().filter(|&&g| g >= 0.0).count();
    let ratios: Vec<f64> = slack
        .iter()
        .zip(&inst.targets)
        .filter(|(_, &tau)| tau > 0.0)
        .map(|(g, tau)| (g + tau) / tau)
        .collect();
    let production_cost = x
        .ones()
        .map(|idx| {
            let (t, a, i) = layout.locate(idx);
            inst.c(t, a, i)
        })
        .sum();
    let z = decode_one_hot(x, layout).ok();
    Metrics {
        one_hot: z.is_some(),
        adjacency_feasible: z.as_ref().is_some_and(|z| first_adjacency_violation(z).is_none()),
        overloaded,
        overloaded_per_timepoint: overloaded as f64 / inst.timepoints as f64,
        production_cost,
        fulfilled,
        mean_fulfillment: mean(&ratios),
        switches: z.as_ref().map(|z| z.switches()),
        switching_cost: z.as_ref().map(|z| redispatch::model::switching_cost(inst, z)),
    }
}

/// Rows of strings written as one CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Identity of a run: what was asked for and which inputs it read.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seeds: Vec<u64>,
    /// SHA-256 of the command and the effective configuration, output dir excluded.
    pub config_hash: String,
    pub config: RunConfig,
    /// SHA-256 of every input file.
    pub inputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig, seeds: Vec<u64>, inputs: &[PathBuf]) -> Result<Self> {
        let mut hashed = cfg.clone();
        hashed.out = None;
        let config_hash = sha256_hex(serde_json::to_string(&(command, &hashed))?.as_bytes());
        let mut files = BTreeMap::new();
        for p in inputs {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            files.insert(p.display().to_string(), sha256_hex(&bytes));
        }
        Ok(Self {
            tool: "redispatch",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seeds,
            config_hash,
            config: cfg.clone(),
            inputs: files,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("MANIFEST.json");
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats() {
        assert_eq!(mean(&[]), None);
        assert_eq!(mean(&[1.0, 2.0, 6.0]), Some(3.0));
        assert_eq!(std_dev(&[4.0]), None);
        assert!((std_dev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap() - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
    }

    #[test]
    fn sentinels() {
        assert_eq!(num(f64::NAN), MISSING);
        assert_eq!(num(f64::INFINITY), MISSING);
        assert_eq!(num(0.1), "0.1");
        assert_eq!(opt_num(None), MISSING);
        assert_eq!(opt_count(Some(3)), "3");
    }
}
