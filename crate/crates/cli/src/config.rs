//! Run configuration shared by every subcommand. Each field doubles as a long
//! flag; a TOML file given with `--config` overrides the flags field by field.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use redispatch::data::{BuildOptions, SizePreset, SynthNetworkSpec};
use redispatch::encodings::ObjectiveOptions;
use redispatch::Multipliers;

use crate::CliError;

/// Shape of a generated network: `controllables,fixed,lines,raw_timepoints`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub controllables: usize,
    pub fixed: usize,
    pub lines: usize,
    pub raw_timepoints: usize,
}

impl FromStr for SynthSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| format!("'{p}': {e}")))
            .collect::<Result<_, _>>()?;
        match parts[..] {
            [controllables, fixed, lines, raw_timepoints] => Ok(Self {
                controllables,
                fixed,
                lines,
                raw_timepoints,
            }),
            _ => Err("expected controllables,fixed,lines,raw_timepoints".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    S,
    L,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    BruteForce,
    Tabu,
    Annealing,
    Alpha,
    Random,
    Score,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::BruteForce => "brute-force",
            Method::Tabu => "tabu",
            Method::Annealing => "annealing",
            Method::Alpha => "alpha",
            Method::Random => "random",
            Method::Score => "score",
        }
    }
}

/// Every setting of a run. Unset fields fall back to per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding a network export.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Generated network `controllables,fixed,lines,raw_timepoints`, seeded by `--seed`.
    #[arg(long)]
    pub synth: Option<SynthSpec>,
    /// Instance JSON written by `build-instance`.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub timepoints: Option<usize>,
    #[arg(long)]
    pub states: Option<usize>,
    /// Cost type given to statics promoted to on/off controllables.
    #[arg(long)]
    pub promote_statics: Option<String>,
    #[arg(long)]
    pub lambda_power: Option<f64>,
    #[arg(long)]
    pub lambda_load: Option<f64>,
    #[arg(long)]
    pub lambda_cost: Option<f64>,
    #[arg(long)]
    pub lambda_switching: Option<f64>,
    #[arg(long)]
    pub switch_scale: Option<f64>,
    /// Weight of the one-hot and adjacency terms.
    #[arg(long)]
    pub hard_weight: Option<f64>,
    #[arg(long)]
    pub normalize_penalties: Option<bool>,
    #[arg(long)]
    pub score_normalize: Option<bool>,
    #[arg(long, value_enum)]
    pub solver: Option<Method>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Solver iterations (tabu moves, annealing proposals).
    #[arg(long)]
    pub iterations: Option<u64>,
    /// Step limit for the decomposers.
    #[arg(long)]
    pub max_steps: Option<u64>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long)]
    pub subproblem_size: Option<usize>,
    /// Moves per alpha-expansion step.
    #[arg(long)]
    pub proposals: Option<usize>,
    /// Alpha-expansion epochs without progress before stopping. Defaults to 1,
    /// or to running until the time limit when one is set.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Random feasible configurations scored by the score-norm experiment.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub fit_penalty: Option<f64>,
    #[arg(long)]
    pub fit_max_iterations: Option<usize>,
    #[arg(long)]
    pub fit_lower: Option<f64>,
    #[arg(long)]
    pub fit_upper: Option<f64>,
    #[arg(long)]
    pub fit_step: Option<f64>,
    #[arg(long)]
    pub fit_line_search: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $(if $src.$f.is_some() { $dst.$f = $src.$f.clone(); })*
    };
}

/// Where the instance comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Data(PathBuf),
    Synth(SynthSpec),
    Instance(PathBuf),
}

impl RunConfig {
    /// Reads a TOML file with the same field names as the flags (snake case).
    pub fn from_toml_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `file` replace those in `self`.
    pub fn overlay(mut self, file: &RunConfig) -> Self {
        overlay!(self, file;
            data, synth, instance, preset, timepoints, states, promote_statics,
            lambda_power, lambda_load, lambda_cost, lambda_switching, switch_scale,
            hard_weight, normalize_penalties, score_normalize, solver, seed, time_limit,
            iterations, max_steps, repetitions, subproblem_size, proposals, patience, samples,
            fit_penalty, fit_max_iterations, fit_lower, fit_upper, fit_step,
            fit_line_search, out);
        self
    }

    /// Checks the invariants that do not depend on the command.
    pub fn validate(&self) -> Result<(), CliError> {
        let sources = [self.data.is_some(), self.synth.is_some(), self.instance.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(CliError::Config(
                "exactly one of --data, --synth or --instance is required".into(),
            ));
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Config(format!("time limit must be positive, got {t}")));
            }
        }
        for (name, v) in [
            ("repetitions", self.repetitions),
            ("subproblem-size", self.subproblem_size),
            ("proposals", self.proposals),
            ("patience", self.patience),
            ("samples", self.samples),
            ("timepoints", self.timepoints),
        ] {
            if v == Some(0) {
                return Err(CliError::Config(format!("{name} must be positive")));
            }
        }
        if self.states.is_some_and(|k| k < 2) {
            return Err(CliError::Config("states must be at least 2".into()));
        }
        if self.preset == Some(Preset::Custom) && (self.timepoints.is_none() || self.states.is_none()) {
            return Err(CliError::Config("custom preset needs --timepoints and --states".into()));
        }
        if let Some(s) = self.synth {
            if s.controllables == 0 || s.lines == 0 || s.raw_timepoints == 0 {
                return Err(CliError::Config("synthetic network needs controllables, lines and timepoints".into()));
            }
        }
        for (name, v) in [
            ("lambda-power", self.lambda_power),
            ("lambda-load", self.lambda_load),
            ("lambda-cost", self.lambda_cost),
            ("lambda-switching", self.lambda_switching),
            ("switch-scale", self.switch_scale),
            ("hard-weight", self.hard_weight),
        ] {
            if v.is_some_and(|v| !(v >= 0.0 && v.is_finite())) {
                return Err(CliError::Config(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }

    pub fn source(&self) -> Result<Source, CliError> {
        self.validate()?;
        Ok(match (&self.data, self.synth, &self.instance) {
            (Some(d), _, _) => Source::Data(d.clone()),
            (_, Some(s), _) => Source::Synth(s),
            (_, _, Some(i)) => Source::Instance(i.clone()),
            _ => unreachable!("validated"),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn time_limit(&self) -> Option<Duration> {
        self.time_limit.map(Duration::from_secs_f64)
    }

    pub fn multipliers(&self) -> Multipliers {
        let r = Multipliers::reference();
        Multipliers {
            power: self.lambda_power.unwrap_or(r.power),
            load: self.lambda_load.unwrap_or(r.load),
            cost: self.lambda_cost.unwrap_or(r.cost),
            switching: self.lambda_switching.unwrap_or(r.switching),
        }
    }

    pub fn objective_options(&self) -> ObjectiveOptions<f64> {
        ObjectiveOptions {
            normalized_penalties: self.normalize_penalties.unwrap_or(true),
            score_normalized: self.score_normalize.unwrap_or(true),
            hard_weight: self.hard_weight.unwrap_or(1.0),
        }
    }

    /// Instance construction settings; `seed` drives cost sampling.
    pub fn build_options(&self, seed: u64) -> BuildOptions {
        let preset = match self.preset.unwrap_or(Preset::S) {
            Preset::L => SizePreset::L,
            _ => SizePreset::S,
        };
        let mut opts = BuildOptions::preset(preset, seed);
        if let Some(t) = self.timepoints {
            opts.timepoints = t;
        }
        if let Some(k) = self.states {
            opts.states = k;
        }
        opts.multipliers = self.multipliers();
        if let Some(g) = self.switch_scale {
            opts.switch_scale = g;
        }
        opts.promote_statics = self.promote_statics.clone();
        if let Some(v) = self.fit_penalty {
            opts.fit.penalty = v;
        }
        if let Some(v) = self.fit_max_iterations {
            opts.fit.max_iterations = v;
        }
        if let Some(v) = self.fit_lower {
            opts.fit.lower = v;
        }
        if let Some(v) = self.fit_upper {
            opts.fit.upper = v;
        }
        if self.fit_step.is_some() {
            opts.fit.step = self.fit_step;
        }
        if let Some(v) = self.fit_line_search {
            opts.fit.line_search = v;
        }
        opts
    }

    pub fn synth_network_spec(&self, spec: SynthSpec) -> SynthNetworkSpec {
        SynthNetworkSpec::new(spec.controllables, spec.fixed, spec.lines, spec.raw_timepoints, self.seed())
    }
}
