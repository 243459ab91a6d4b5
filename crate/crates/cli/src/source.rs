//! Turns the configured instance source into problem instances.

use std::path::PathBuf;

use anyhow::{Context, Result};

use redispatch::data::{
    build_instance_with_sensitivity, estimate_sensitivity, instance_from_json, load_network, prepare_dataset,
    synth_network, NetworkDataset, SensitivityFit,
};
use redispatch::{Matrix, ProblemInstance};

use crate::config::{RunConfig, Source};

pub const NETWORK_FILES: [&str; 5] = [
    "controllables.csv",
    "controllable_profiles.csv",
    "fixed_profiles.csv",
    "lines.csv",
    "flows.csv",
];

/// A network with its fitted sensitivity matrix.
pub struct Network {
    /// After static promotion, as used for the instance.
    pub dataset: NetworkDataset,
    pub fit: SensitivityFit,
    /// Planted sensitivity of a generated network.
    pub truth: Option<Matrix<f64>>,
}

pub enum Loaded {
    Network(Box<Network>),
    Instance(Box<ProblemInstance>),
}

impl Loaded {
    /// Reads or generates the source and fits the sensitivity matrix once. Returns
    /// the files read, for the manifest.
    pub fn open(cfg: &RunConfig, source: &Source) -> Result<(Self, Vec<PathBuf>)> {
        let (raw, truth, files) = match source {
            Source::Instance(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let inst = instance_from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
                return Ok((Loaded::Instance(Box::new(inst)), vec![path.clone()]));
            }
            Source::Data(dir) => {
                let ds = load_network(dir).with_context(|| format!("loading {}", dir.display()))?;
                (ds, None, NETWORK_FILES.iter().map(|f| dir.join(f)).collect())
            }
            Source::Synth(spec) => {
                let (ds, s) = synth_network(&cfg.synth_network_spec(*spec));
                (ds, Some(s), Vec::new())
            }
        };
        let opts = cfg.build_options(cfg.seed());
        let dataset = prepare_dataset(&raw, &opts).into_owned();
        // Promotion reorders elements, so a planted matrix no longer lines up.
        let truth = truth.filter(|_| opts.promote_statics.is_none());
        let fit = estimate_sensitivity(&dataset.element_profiles(), &dataset.flows, &opts.fit)?;
        Ok((Loaded::Network(Box::new(Network { dataset, fit, truth })), files))
    }

    /// The instance for one repetition; `seed` drives cost sampling. Multipliers set
    /// in `cfg` replace those stored in an instance file.
    pub fn instance(&self, cfg: &RunConfig, seed: u64) -> Result<ProblemInstance> {
        match self {
            Loaded::Network(net) => {
                let opts = cfg.build_options(seed);
                Ok(build_instance_with_sensitivity(&net.dataset, &net.fit.s, &opts)?)
            }
            Loaded::Instance(inst) => {
                let mut inst = (**inst).clone();
                let m = &mut inst.multipliers;
                m.power = cfg.lambda_power.unwrap_or(m.power);
                m.load = cfg.lambda_load.unwrap_or(m.load);
                m.cost = cfg.lambda_cost.unwrap_or(m.cost);
                m.switching = cfg.lambda_switching.unwrap_or(m.switching);
                Ok(inst)
            }
        }
    }

    pub fn network(&self) -> Option<&Network> {
        match self {
            Loaded::Network(n) => Some(n),
            Loaded::Instance(_) => None,
        }
    }
}
