use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CostTable, Controllable, Line, NetworkDataset};
use crate::matrix::Matrix;
use crate::model::{power_production, Configuration, Multipliers, ProblemInstance};

fn random_walk_column<R: Rng>(rng: &mut R, timepoints: usize, k: usize) -> Vec<usize> {
    let mut col = vec![rng.random_range(1..=k)];
    for _ in 1..timepoints {
        let last = *col.last().unwrap() as i64;
        col.push((last + rng.random_range(-1..=1)).clamp(1, k as i64) as usize);
    }
    col
}

/// Random adjacency-feasible configuration: each column is a lazy random walk over
/// the states.
pub fn random_feasible_configuration<R: Rng>(rng: &mut R, timepoints: usize, resources: usize, k: usize) -> Configuration {
    let cols: Vec<Vec<usize>> = (0..resources).map(|_| random_walk_column(rng, timepoints, k)).collect();
    let rows = (0..timepoints).map(|t| cols.iter().map(|c| c[t]).collect()).collect();
    Configuration::from_rows(rows, k).expect("states in range")
}

/// Random adjacency-feasible instance with a planted configuration, for tests.
///
/// See [`synth_instance_planted`] for the construction.
pub fn synth_instance(n: usize, k: usize, timepoints: usize, lines: usize, seed: u64) -> (ProblemInstance<f64>, Configuration) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_2a11);
    loop {
        let cols: Vec<Vec<usize>> = (0..n).map(|_| random_walk_column(&mut rng, timepoints, k)).collect();
        // Keep the power target strictly below full output.
        if (0..timepoints).any(|t| cols.iter().all(|c| c[t] == k)) {
            continue;
        }
        let rows = (0..timepoints).map(|t| cols.iter().map(|c| c[t]).collect()).collect();
        let z = Configuration::from_rows(rows, k).expect("states in range");
        return (synth_instance_planted(n, k, timepoints, lines, seed, &z), z);
    }
}

/// Instance built around `z`: targets equal the production of `z`, line limits sit
/// just above its loads, and each cost grows with the distance to the planted state.
/// All costs are below one, so with unit hard-constraint weights `z` is the unique
/// optimum of the cost-only objective.
pub fn synth_instance_planted(
    n: usize,
    k: usize,
    timepoints: usize,
    lines: usize,
    seed: u64,
    z: &Configuration,
) -> ProblemInstance<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let power = Matrix::from_rows(
        (0..n)
            .map(|_| {
                let top = rng.random_range(5.0..20.0);
                (0..k).map(|i| top * i as f64 / (k - 1) as f64).collect()
            })
            .collect(),
    )
    .expect("uniform rows");
    let sensitivity = Matrix::from_fn(n, lines, |_, _| rng.random_range(0.0..1.0));
    let step = 0.9 / (k - 1) as f64;
    let cost = Matrix::from_fn(timepoints, n * k, |t, j| {
        let (a, i) = (j / k, j % k);
        0.02 * rng.random::<f64>() + step * (i + 1).abs_diff(z.state(t, a)) as f64
    });
    let mut inst = ProblemInstance {
        timepoints,
        resources: n,
        states: k,
        lines,
        power,
        cost,
        sensitivity,
        line_limits: Matrix::zeros(timepoints, lines),
        targets: vec![0.0; timepoints],
        switch_scale: 1.0,
        multipliers: Multipliers {
            cost: 1.0,
            ..Multipliers::zero()
        },
    };
    let produced = power_production(&inst, z);
    let loads = produced.matmul(&inst.sensitivity);
    inst.targets = (0..timepoints).map(|t| produced.row(t).iter().sum()).collect();
    inst.line_limits = Matrix::from_fn(timepoints, lines, |t, l| loads[(t, l)] + 1.0 + rng.random_range(0.0..0.5));
    inst
}

/// Shape of a synthetic network export.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthNetworkSpec {
    pub controllables: usize,
    pub fixed: usize,
    pub lines: usize,
    pub raw_timepoints: usize,
    pub seed: u64,
    /// Upper end of the random capacity headroom over the historical peak flow.
    pub headroom: f64,
}

impl SynthNetworkSpec {
    pub fn new(controllables: usize, fixed: usize, lines: usize, raw_timepoints: usize, seed: u64) -> Self {
        Self {
            controllables,
            fixed,
            lines,
            raw_timepoints,
            seed,
            headroom: 0.3,
        }
    }
}

/// Synthetic export with daily-cycle profiles. Flows are `Φ·S_true` for a sparse
/// planted sensitivity matrix, which is returned alongside.
pub fn synth_network(spec: &SynthNetworkSpec) -> (NetworkDataset, Matrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, m, l, raw) = (spec.controllables, spec.fixed, spec.lines, spec.raw_timepoints);
    let tags: Vec<String> = CostTable::reference().tags().map(str::to_string).collect();
    let wave = |t: usize, phase: f64| (std::f64::consts::TAU * t as f64 / 96.0 + phase).sin();

    let mut controllables = Vec::with_capacity(n);
    let mut ctrl = Matrix::zeros(raw, n);
    for a in 0..n {
        let max = (rng.random_range(50.0..400.0f64) * 10.0).round() / 10.0;
        let min = if rng.random_bool(0.5) {
            0.0
        } else {
            (max * rng.random_range(0.1..0.3f64) * 10.0).round() / 10.0
        };
        let level = rng.random_range(0.3..0.8);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        for t in 0..raw {
            let v = max * (level + 0.15 * wave(t, phase) + rng.random_range(-0.05..0.05));
            ctrl[(t, a)] = v.clamp(min, 0.95 * max);
        }
        controllables.push(Controllable {
            id: format!("gen_{a:04}"),
            kind: tags.choose(&mut rng).expect("non-empty table").clone(),
            min_mw: min,
            max_mw: max,
        });
    }

    let mut fixed_ids = Vec::with_capacity(m);
    let mut fixed = Matrix::zeros(raw, m);
    for j in 0..m {
        let load = rng.random_bool(0.6);
        let scale = if load {
            -rng.random_range(20.0..300.0)
        } else {
            rng.random_range(5.0..100.0)
        };
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        for t in 0..raw {
            fixed[(t, j)] = scale * (0.7 + 0.2 * wave(t, phase) + rng.random_range(-0.05..0.05));
        }
        fixed_ids.push(format!("{}_{j:04}", if load { "load" } else { "sgen" }));
    }

    let elements = n + m;
    let mut s_true = Matrix::zeros(elements, l);
    for e in 0..elements {
        let reach = rng.random_range(3..=6).min(l);
        for line in rand::seq::index::sample(&mut rng, l, reach) {
            s_true[(e, line)] = rng.random_range(0.05..0.6);
        }
    }
    if n > 0 {
        // Every line carries power from at least two controllables.
        for line in 0..l {
            for a in rand::seq::index::sample(&mut rng, n, 2.min(n)) {
                if s_true[(a, line)] == 0.0 {
                    s_true[(a, line)] = rng.random_range(0.05..0.6);
                }
            }
        }
    }
    let phi = ctrl.hcat(&fixed);
    let flows = phi.matmul(&s_true);
    let ctrl_flow = ctrl.matmul(&s_true.row_range(0, n));
    let fixed_flow = fixed.matmul(&s_true.row_range(n, elements));

    let mut lines = Vec::with_capacity(l);
    for line in 0..l {
        let peak = (0..raw).map(|t| flows[(t, line)].abs()).fold(0.0, f64::max);
        let fixed_peak = (0..raw).map(|t| fixed_flow[(t, line)]).fold(f64::NEG_INFINITY, f64::max);
        let ctrl_peak = (0..raw).map(|t| ctrl_flow[(t, line)]).fold(0.0, f64::max);
        let cap = (peak * (1.0 + rng.random_range(0.0..spec.headroom))).max(fixed_peak + 0.5 * ctrl_peak + 1.0)
            .max(1.0);
        let voltage: f64 = *[110.0, 220.0, 380.0].choose(&mut rng).expect("non-empty");
        lines.push(Line {
            id: format!("line_{line:04}"),
            voltage_kv: voltage,
            max_current_ka: cap / (voltage * 3f64.sqrt()),
        });
    }

    let ds = NetworkDataset {
        controllables,
        controllable_profiles: ctrl,
        fixed_ids,
        fixed_profiles: fixed,
        lines,
        flows,
    };
    (ds, s_true)
}
