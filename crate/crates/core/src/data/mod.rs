//! Instance construction from network exports: ingestion, time aggregation, power
//! level discretization, cost sampling, sensitivity estimation and line limits.
//!
//! Units are MW for power and flow, kV and kA for line ratings, € per MWh for rates.

mod io;
mod sensitivity;
mod synth;

use std::borrow::Cow;
use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::model::{Configuration, ModelError, Multipliers, ProblemInstance};

pub use io::{load_network, write_network};
pub use sensitivity::{estimate_sensitivity, SensitivityFit, SensitivityFitConfig};
pub use synth::{random_feasible_configuration, synth_instance, synth_instance_planted, synth_network, SynthNetworkSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: u64, msg: String },
    #[error("{file}: {msg}")]
    Schema { file: String, msg: String },
    #[error("{file}: {msg}")]
    Io { file: String, msg: String },
    #[error("invalid power levels: {0}")]
    BadLevels(String),
    #[error("no cost range for resource type '{0}'")]
    UnknownType(String),
    #[error("sensitivity fit diverged after {iterations} iterations (loss {loss})")]
    Diverged { iterations: usize, loss: f64 },
    #[error("invalid fit configuration: {0}")]
    BadFitConfig(String),
    #[error("cannot aggregate {raw} timepoints into {target}")]
    BadAggregation { raw: usize, target: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controllable {
    pub id: String,
    pub kind: String,
    pub min_mw: f64,
    pub max_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub voltage_kv: f64,
    pub max_current_ka: f64,
}

impl Line {
    /// Thermal capacity `V·I·√3`; kV times kA gives MW.
    pub fn capacity_mw(&self) -> f64 {
        self.voltage_kv * self.max_current_ka * 3f64.sqrt()
    }
}

/// Network export: controllable resources, fixed elements (statics, loads and
/// external grids; negative MW is consumption), lines and simulated line flows.
/// Every series is indexed by timepoint along matrix rows.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDataset {
    pub controllables: Vec<Controllable>,
    /// `raw_T × n` historical production.
    pub controllable_profiles: Matrix<f64>,
    pub fixed_ids: Vec<String>,
    /// `raw_T × m` signed power of the fixed elements.
    pub fixed_profiles: Matrix<f64>,
    pub lines: Vec<Line>,
    /// `raw_T × L` line flows.
    pub flows: Matrix<f64>,
}

impl NetworkDataset {
    pub fn timepoints(&self) -> usize {
        self.flows.rows()
    }

    /// `[controllable | fixed]` production, `raw_T × (n + m)`.
    pub fn element_profiles(&self) -> Matrix<f64> {
        self.controllable_profiles.hcat(&self.fixed_profiles)
    }
}

fn aggregate_rows(m: &Matrix<f64>, target: usize) -> Matrix<f64> {
    let raw = m.rows();
    let width = raw / target;
    Matrix::from_fn(target, m.cols(), |w, c| {
        let start = w * width;
        let end = if w + 1 == target { raw } else { start + width };
        (start..end).map(|r| m[(r, c)]).sum::<f64>() / (end - start) as f64
    })
}

/// Replaces every series by window means over `target` windows of `raw/target`
/// timepoints; a remainder is folded into the last window.
pub fn aggregate_time(ds: &NetworkDataset, target: usize) -> Result<NetworkDataset, DataError> {
    let raw = ds.timepoints();
    if target == 0 || target > raw {
        return Err(DataError::BadAggregation { raw, target });
    }
    Ok(NetworkDataset {
        controllables: ds.controllables.clone(),
        controllable_profiles: aggregate_rows(&ds.controllable_profiles, target),
        fixed_ids: ds.fixed_ids.clone(),
        fixed_profiles: aggregate_rows(&ds.fixed_profiles, target),
        lines: ds.lines.clone(),
        flows: aggregate_rows(&ds.flows, target),
    })
}

/// `k` power levels. The first is always 0 (off); with `min = 0` the levels run
/// linearly from 0 to `max`, otherwise states 2..k run linearly from `min` to `max`.
pub fn discretize_levels(min: f64, max: f64, k: usize) -> Result<Vec<f64>, DataError> {
    if !(min.is_finite() && max.is_finite()) || min < 0.0 || min > max {
        return Err(DataError::BadLevels(format!("range [{min}, {max}]")));
    }
    if k < 2 {
        return Err(DataError::BadLevels(format!("k = {k} < 2")));
    }
    if min == 0.0 {
        let step = max / (k - 1) as f64;
        return Ok((0..k).map(|i| i as f64 * step).collect());
    }
    if min == max {
        let mut levels = vec![max; k];
        levels[0] = 0.0;
        return Ok(levels);
    }
    if k < 3 {
        return Err(DataError::BadLevels(format!("k = {k} < 3 with non-zero minimum {min}")));
    }
    let step = (max - min) / (k - 2) as f64;
    let mut levels = vec![0.0];
    levels.extend((0..k - 1).map(|j| min + j as f64 * step));
    Ok(levels)
}

fn normalize_tag(tag: &str) -> String {
    tag.split(|c: char| c.is_whitespace() || c == '_' || c == '-')
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Per-type production rate range in € per MWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    ranges: BTreeMap<String, (f64, f64)>,
}

impl CostTable {
    pub fn new() -> Self {
        Self {
            ranges: BTreeMap::new(),
        }
    }

    /// Rates per generation type.
    pub fn reference() -> Self {
        let mut t = Self::new();
        for (tag, lo, hi) in [
            ("Hard Coal", 50.0, 90.0),
            ("Gas", 40.0, 100.0),
            ("Solar", 30.0, 60.0),
            ("Nuclear", 80.0, 120.0),
            ("Offshore wind", 70.0, 120.0),
            ("Onshore wind", 40.0, 80.0),
            ("Waste", 80.0, 110.0),
            ("Lignite", 40.0, 70.0),
            ("Oil", 90.0, 160.0),
            ("Imported Energy", 30.0, 100.0),
        ] {
            t.insert(tag, lo, hi).expect("valid reference range");
        }
        t
    }

    pub fn insert(&mut self, tag: &str, min: f64, max: f64) -> Result<(), DataError> {
        if !(min > 0.0 && min <= max) {
            return Err(DataError::BadLevels(format!("cost range [{min}, {max}] for '{tag}'")));
        }
        self.ranges.insert(normalize_tag(tag), (min, max));
        Ok(())
    }

    /// Lookup ignoring case and treating spaces, `_` and `-` alike.
    pub fn range(&self, tag: &str) -> Result<(f64, f64), DataError> {
        self.ranges
            .get(&normalize_tag(tag))
            .copied()
            .ok_or_else(|| DataError::UnknownType(tag.to_string()))
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.ranges.keys().map(String::as_str)
    }
}

impl Default for CostTable {
    fn default() -> Self {
        Self::reference()
    }
}

/// A rate drawn uniformly from the type's range.
pub fn sample_costs<R: Rng>(rng: &mut R, tag: &str, table: &CostTable) -> Result<f64, DataError> {
    let (lo, hi) = table.range(tag)?;
    Ok(if lo == hi { lo } else { rng.random_range(lo..=hi) })
}

/// `c_{t,a,i} = rate_a · p_{a,i}`, identical for every timepoint.
pub fn build_cost_tensor(levels: &Matrix<f64>, rates: &[f64], timepoints: usize) -> Matrix<f64> {
    let k = levels.cols();
    Matrix::from_fn(timepoints, levels.rows() * k, |_, j| rates[j / k] * levels[(j / k, j % k)])
}

/// Historical total controllable production per timepoint. Fixed elements act
/// through the line limits instead.
pub fn compute_targets(ds: &NetworkDataset) -> Vec<f64> {
    (0..ds.controllable_profiles.rows())
        .map(|t| ds.controllable_profiles.row(t).iter().sum())
        .collect()
}

/// `M_{t,l} = V_l·I_l·√3 − [Φ_fixed · S_fixed]_{t,l}`.
pub fn compute_line_limits(ds: &NetworkDataset, s_fixed: &Matrix<f64>) -> Matrix<f64> {
    let fixed_flow = ds.fixed_profiles.matmul(s_fixed);
    Matrix::from_fn(ds.timepoints(), ds.lines.len(), |t, l| {
        ds.lines[l].capacity_mw() - fixed_flow[(t, l)]
    })
}

/// Size presets: `S` has 2 timepoints and 3 states (off, min, max), `L` has 8
/// timepoints and 5 states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SizePreset {
    S,
    L,
}

impl SizePreset {
    pub fn timepoints(self) -> usize {
        match self {
            SizePreset::S => 2,
            SizePreset::L => 8,
        }
    }

    pub fn states(self) -> usize {
        match self {
            SizePreset::S => 3,
            SizePreset::L => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOptions {
    pub timepoints: usize,
    pub states: usize,
    pub seed: u64,
    pub multipliers: Multipliers<f64>,
    pub cost_table: CostTable,
    pub fit: SensitivityFitConfig,
    /// Scale of the switching cost.
    pub switch_scale: f64,
    /// When set, fixed elements that never consume become on/off controllables of
    /// this cost type (levels `0` and their peak output).
    pub promote_statics: Option<String>,
}

impl BuildOptions {
    pub fn preset(preset: SizePreset, seed: u64) -> Self {
        Self {
            timepoints: preset.timepoints(),
            states: preset.states(),
            seed,
            multipliers: Multipliers::reference(),
            cost_table: CostTable::reference(),
            fit: SensitivityFitConfig::default(),
            switch_scale: 1.0,
            promote_statics: None,
        }
    }
}

/// Turns fixed elements that never consume into controllables of type `tag`.
pub fn promote_statics(ds: &NetworkDataset, tag: &str) -> NetworkDataset {
    let m = ds.fixed_ids.len();
    let promoted: Vec<usize> = (0..m)
        .filter(|&j| (0..ds.timepoints()).all(|t| ds.fixed_profiles[(t, j)] >= 0.0))
        .collect();
    let kept: Vec<usize> = (0..m).filter(|j| !promoted.contains(j)).collect();
    let mut controllables = ds.controllables.clone();
    for &j in &promoted {
        let peak = (0..ds.timepoints()).map(|t| ds.fixed_profiles[(t, j)]).fold(0.0, f64::max);
        controllables.push(Controllable {
            id: ds.fixed_ids[j].clone(),
            kind: tag.to_string(),
            min_mw: peak,
            max_mw: peak,
        });
    }
    let raw = ds.timepoints();
    let n = ds.controllables.len();
    let controllable_profiles = Matrix::from_fn(raw, n + promoted.len(), |t, c| {
        if c < n {
            ds.controllable_profiles[(t, c)]
        } else {
            ds.fixed_profiles[(t, promoted[c - n])]
        }
    });
    NetworkDataset {
        controllables,
        controllable_profiles,
        fixed_ids: kept.iter().map(|&j| ds.fixed_ids[j].clone()).collect(),
        fixed_profiles: Matrix::from_fn(raw, kept.len(), |t, c| ds.fixed_profiles[(t, kept[c])]),
        lines: ds.lines.clone(),
        flows: ds.flows.clone(),
    }
}

/// The dataset an instance is built from: `ds` itself, or a copy with statics
/// promoted when [`BuildOptions::promote_statics`] is set.
pub fn prepare_dataset<'a>(ds: &'a NetworkDataset, opts: &BuildOptions) -> Cow<'a, NetworkDataset> {
    match &opts.promote_statics {
        Some(tag) => Cow::Owned(promote_statics(ds, tag)),
        None => Cow::Borrowed(ds),
    }
}

/// Assembles a problem instance. The sensitivity matrix is fitted on the raw
/// series; everything else uses the aggregated ones.
pub fn build_instance(ds: &NetworkDataset, opts: &BuildOptions) -> Result<ProblemInstance<f64>, DataError> {
    let ds = prepare_dataset(ds, opts);
    let fit = estimate_sensitivity(&ds.element_profiles(), &ds.flows, &opts.fit)?;
    build_instance_with_sensitivity(&ds, &fit.s, opts)
}

/// [`build_instance`] with a given `(n + m) × L` sensitivity matrix. `ds` must be
/// the output of [`prepare_dataset`]; only the cost sampling depends on the seed.
pub fn build_instance_with_sensitivity(
    ds: &NetworkDataset,
    s: &Matrix<f64>,
    opts: &BuildOptions,
) -> Result<ProblemInstance<f64>, DataError> {
    let n = ds.controllables.len();
    if s.rows() != n + ds.fixed_ids.len() || s.cols() != ds.lines.len() {
        return Err(DataError::BadFitConfig(format!(
            "sensitivity is {}x{}, dataset needs {}x{}",
            s.rows(),
            s.cols(),
            n + ds.fixed_ids.len(),
            ds.lines.len()
        )));
    }
    let s_ctrl = s.row_range(0, n);
    let s_fixed = s.row_range(n, s.rows());
    let agg = aggregate_time(ds, opts.timepoints)?;

    let mut levels = Vec::with_capacity(n);
    for c in &ds.controllables {
        levels.push(discretize_levels(c.min_mw, c.max_mw, opts.states)?);
    }
    let levels = Matrix::from_rows(levels).expect("uniform level count");
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut rates = Vec::with_capacity(n);
    for c in &ds.controllables {
        rates.push(sample_costs(&mut rng, &c.kind, &opts.cost_table)?);
    }
    let inst = ProblemInstance {
        timepoints: opts.timepoints,
        resources: n,
        states: opts.states,
        lines: ds.lines.len(),
        cost: build_cost_tensor(&levels, &rates, opts.timepoints),
        power: levels,
        sensitivity: s_ctrl,
        line_limits: compute_line_limits(&agg, &s_fixed),
        targets: compute_targets(&agg),
        switch_scale: opts.switch_scale,
        multipliers: opts.multipliers,
    };
    inst.validate_with_box(opts.fit.lower, opts.fit.upper)?;
    Ok(inst)
}

/// State whose power level is closest to each observed production, ties to the
/// lower state. `profiles` is `T×n`, `power` is `n×k`.
pub fn nearest_level_configuration(profiles: &Matrix<f64>, power: &Matrix<f64>) -> Configuration {
    let rows = (0..profiles.rows())
        .map(|t| {
            (0..profiles.cols())
                .map(|a| {
                    let v = profiles[(t, a)];
                    let mut best = 0;
                    for i in 1..power.cols() {
                        if (power[(a, i)] - v).abs() < (power[(a, best)] - v).abs() {
                            best = i;
                        }
                    }
                    best + 1
                })
                .collect()
        })
        .collect();
    Configuration::from_rows(rows, power.cols()).expect("states in range")
}

/// Writes an instance as pretty JSON with its dimensions first.
pub fn instance_to_json(inst: &ProblemInstance<f64>) -> String {
    serde_json::to_string_pretty(inst).expect("instance serializes")
}

pub fn instance_from_json(s: &str) -> Result<ProblemInstance<f64>, DataError> {
    let inst: ProblemInstance<f64> = serde_json::from_str(s).map_err(|e| DataError::Parse {
        file: "instance".into(),
        line: e.line() as u64,
        msg: e.to_string(),
    })?;
    inst.validate()?;
    Ok(inst)
}
