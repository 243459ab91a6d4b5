//! Re-dispatch problem data, configuration codecs, feasibility checks and solution metrics.
//!
//! Timepoints and resources are indexed from zero everywhere in the API. Resource
//! *states* are 1-based in a [`Configuration`] (`1..=k`, state 1 being the lowest
//! power level) and 0-based inside a [`BitVector`]; only [`encode_one_hot`] and
//! [`decode_one_hot`] translate between the two.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("block (t={t}, a={a}) has {set} set bits, expected exactly one")]
    NotOneHot { t: usize, a: usize, set: usize },
    #[error("bit vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("state {state} at (t={t}, a={a}) outside 1..={k}")]
    StateOutOfRange { t: usize, a: usize, state: usize, k: usize },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

/// Flattening of `(t, a, i)` into a bit position: t-major, then resource, then state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layout {
    pub timepoints: usize,
    pub resources: usize,
    pub states: usize,
}

impl Layout {
    pub fn new(timepoints: usize, resources: usize, states: usize) -> Self {
        Self {
            timepoints,
            resources,
            states,
        }
    }

    /// Number of binary variables `T·n·k`.
    pub fn dim(&self) -> usize {
        self.timepoints * self.resources * self.states
    }

    /// Number of one-hot blocks `T·n`.
    pub fn blocks(&self) -> usize {
        self.timepoints * self.resources
    }

    /// Zero-based `(t, a, i)` to flat index.
    #[inline]
    pub fn index(&self, t: usize, a: usize, i: usize) -> usize {
        debug_assert!(t < self.timepoints && a < self.resources && i < self.states);
        (t * self.resources + a) * self.states + i
    }

    #[inline]
    pub fn block_start(&self, t: usize, a: usize) -> usize {
        self.index(t, a, 0)
    }

    /// Inverse of [`Layout::index`].
    pub fn locate(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.states;
        let block = idx / self.states;
        (block / self.resources, block % self.resources, i)
    }
}

/// Binary solution vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitVector(Vec<bool>);

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// Parses a string of `0`/`1` characters, ignoring whitespace.
    pub fn parse(s: &str) -> Option<Self> {
        s.chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self)
    }

    /// Bit `i` is bit `i` of `value` (least significant first).
    pub fn from_u64(value: u64, len: usize) -> Self {
        Self((0..len).map(|i| (value >> i) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        self.0[i] = v;
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn to_bit_string(&self) -> String {
        self.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl std::fmt::Display for BitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_bit_string())
    }
}

/// `T×n` matrix of 1-based resource states.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Configuration {
    timepoints: usize,
    resources: usize,
    states: Vec<usize>,
}

impl Configuration {
    /// Builds from rows of 1-based states, checking every entry lies in `1..=k`.
    pub fn from_rows(rows: Vec<Vec<usize>>, k: usize) -> Result<Self, ModelError> {
        let timepoints = rows.len();
        let resources = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != resources) {
            return Err(ModelError::InvalidInstance("ragged configuration rows".into()));
        }
        for (t, row) in rows.iter().enumerate() {
            for (a, &s) in row.iter().enumerate() {
                if s == 0 || s > k {
                    return Err(ModelError::StateOutOfRange { t, a, state: s, k });
                }
            }
        }
        Ok(Self {
            timepoints,
            resources,
            states: rows.into_iter().flatten().collect(),
        })
    }

    /// Every resource at the same state at every timepoint.
    pub fn constant(timepoints: usize, resources: usize, state: usize) -> Self {
        Self {
            timepoints,
            resources,
            states: vec![state; timepoints * resources],
        }
    }

    pub fn timepoints(&self) -> usize {
        self.timepoints
    }

    pub fn resources(&self) -> usize {
        self.resources
    }

    /// 1-based state of resource `a` at timepoint `t`.
    #[inline]
    pub fn state(&self, t: usize, a: usize) -> usize {
        self.states[t * self.resources + a]
    }

    pub fn set_state(&mut self, t: usize, a: usize, s: usize) {
        self.states[t * self.resources + a] = s;
    }

    pub fn column(&self, a: usize) -> Vec<usize> {
        (0..self.timepoints).map(|t| self.state(t, a)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<usize>> {
        self.states
            .chunks(self.resources.max(1))
            .take(self.timepoints)
            .map(<[usize]>::to_vec)
            .collect()
    }

    /// Number of `(t, a)` pairs whose state differs from the next timepoint.
    pub fn switches(&self) -> usize {
        (0..self.timepoints.saturating_sub(1))
            .flat_map(|t| (0..self.resources).map(move |a| (t, a)))
            .filter(|&(t, a)| self.state(t, a) != self.state(t + 1, a))
            .count()
    }
}

/// Weights of the four soft objective terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multipliers<F> {
    pub power: F,
    pub load: F,
    pub cost: F,
    pub switching: F,
}

impl<F: Scalar> Multipliers<F> {
    /// `λ_g = 30, λ_h = 100, λ_C = 20, λ_W = 0.0001`, chosen for score-normalized terms.
    pub fn reference() -> Self {
        Self {
            power: F::lit(30.0),
            load: F::lit(100.0),
            cost: F::lit(20.0),
            switching: F::lit(0.0001),
        }
    }

    pub fn zero() -> Self {
        Self {
            power: F::zero(),
            load: F::zero(),
            cost: F::zero(),
            switching: F::zero(),
        }
    }
}

impl<F: Scalar> Default for Multipliers<F> {
    fn default() -> Self {
        Self::reference()
    }
}

/// All static data of one re-dispatch problem. Units are MW and €.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar + Serialize", deserialize = "F: Scalar + Deserialize<'de>"))]
pub struct ProblemInstance<F> {
    pub timepoints: usize,
    pub resources: usize,
    pub states: usize,
    pub lines: usize,
    /// `n×k` power per (resource, state), non-decreasing along states.
    pub power: Matrix<F>,
    /// `T×(n·k)` production cost per (timepoint, resource, state).
    pub cost: Matrix<F>,
    /// `n×L` share of each resource's output flowing over each line.
    pub sensitivity: Matrix<F>,
    /// `T×L` residual line capacity.
    pub line_limits: Matrix<F>,
    /// Length-`T` power targets.
    pub targets: Vec<F>,
    /// Scale of the switching cost `γ·|p_i − p_i'|`.
    pub switch_scale: F,
    pub multipliers: Multipliers<F>,
}

impl<F: Scalar> ProblemInstance<F> {
    pub fn layout(&self) -> Layout {
        Layout::new(self.timepoints, self.resources, self.states)
    }

    /// Power of resource `a` in 0-based state `i`.
    #[inline]
    pub fn p(&self, a: usize, i: usize) -> F {
        self.power[(a, i)]
    }

    /// Cost at timepoint `t`, resource `a`, 0-based state `i`.
    #[inline]
    pub fn c(&self, t: usize, a: usize, i: usize) -> F {
        self.cost[(t, a * self.states + i)]
    }

    /// Checks shapes and the value invariants. The sensitivity box is `[lo, hi]`.
    pub fn validate_with_box(&self, lo: F, hi: F) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidInstance(m));
        let (t, n, k, l) = (self.timepoints, self.resources, self.states, self.lines);
        if t < 1 || n < 1 || k < 2 {
            return bad(format!("need T>=1, n>=1, k>=2; got T={t}, n={n}, k={k}"));
        }
        let shapes = [
            ("power", &self.power, n, k),
            ("cost", &self.cost, t, n * k),
            ("sensitivity", &self.sensitivity, n, l),
            ("line_limits", &self.line_limits, t, l),
        ];
        for (name, m, r, c) in shapes {
            // A matrix with zero columns round-trips as rows of empty lists.
            if m.rows() != r || (m.cols() != c && r > 0) {
                return bad(format!(
                    "{name} has shape {}x{}, expected {r}x{c}",
                    m.rows(),
                    m.cols()
                ));
            }
        }
        if self.targets.len() != t {
            return bad(format!("targets has length {}, expected {t}", self.targets.len()));
        }
        for a in 0..n {
            for i in 0..k {
                let v = self.p(a, i);
                if !(v >= F::zero()) || !v.is_finite() {
                    return bad(format!("power[{a}][{i}] = {v} must be finite and >= 0"));
                }
                if i > 0 && v < self.p(a, i - 1) {
                    return bad(format!("power levels of resource {a} decrease at state {}", i + 1));
                }
            }
        }
        if self.cost.iter().any(|&c| !(c >= F::zero()) || !c.is_finite()) {
            return bad("costs must be finite and >= 0".into());
        }
        if self.sensitivity.iter().any(|&s| !(s >= lo && s <= hi)) {
            return bad(format!("sensitivity entries must lie in [{lo}, {hi}]"));
        }
        if self.line_limits.iter().any(|m| !m.is_finite()) {
            return bad("line limits must be finite".into());
        }
        if self.targets.iter().any(|&x| !(x >= F::zero()) || !x.is_finite()) {
            return bad("targets must be finite and >= 0".into());
        }
        if !self.switch_scale.is_finite() || self.switch_scale < F::zero() {
            return bad("switch_scale must be finite and >= 0".into());
        }
        Ok(())
    }

    /// Validation with the default sensitivity box `[0, 1]`.
    pub fn validate(&self) -> Result<(), ModelError> {
        self.validate_with_box(F::zero(), F::one())
    }

    pub fn cast<G: Scalar>(&self) -> ProblemInstance<G> {
        let c = |v: F| G::lit(v.to_f64_lossy());
        ProblemInstance {
            timepoints: self.timepoints,
            resources: self.resources,
            states: self.states,
            lines: self.lines,
            power: self.power.cast(),
            cost: self.cost.cast(),
            sensitivity: self.sensitivity.cast(),
            line_limits: self.line_limits.cast(),
            targets: self.targets.iter().map(|&v| c(v)).collect(),
            switch_scale: c(self.switch_scale),
            multipliers: Multipliers {
                power: c(self.multipliers.power),
                load: c(self.multipliers.load),
                cost: c(self.multipliers.cost),
                switching: c(self.multipliers.switching),
            },
        }
    }
}

/// Metrics of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionReport<F> {
    /// Count of `(t, l)` with load strictly above the limit.
    pub overloaded_lines: usize,
    /// `overloaded_lines / T`.
    pub overloaded_per_timepoint: F,
    pub production_cost: F,
    pub switching_cost: F,
    /// `Σ_a P_{t,a} / τ_t` per timepoint; `None` when `τ_t = 0`.
    pub fulfillment: Vec<Option<F>>,
    /// Mean of the defined fulfillment ratios; `None` if none is defined.
    pub mean_fulfillment: Option<F>,
    /// Timepoints whose production reaches the target.
    pub fulfilled_timepoints: usize,
    pub switches: usize,
}

pub fn encode_one_hot(z: &Configuration, k: usize) -> BitVector {
    let layout = Layout::new(z.timepoints(), z.resources(), k);
    let mut bits = BitVector::zeros(layout.dim());
    for t in 0..z.timepoints() {
        for a in 0..z.resources() {
            bits.set(layout.index(t, a, z.state(t, a) - 1), true);
        }
    }
    bits
}

pub fn decode_one_hot(x: &BitVector, layout: Layout) -> Result<Configuration, ModelError> {
    if x.len() != layout.dim() {
        return Err(ModelError::LengthMismatch {
            expected: layout.dim(),
            got: x.len(),
        });
    }
    let mut states = Vec::with_capacity(layout.blocks());
    for t in 0..layout.timepoints {
        for a in 0..layout.resources {
            let start = layout.block_start(t, a);
            let block = &x.as_slice()[start..start + layout.states];
            let set = block.iter().filter(|&&b| b).count();
            if set != 1 {
                return Err(ModelError::NotOneHot { t, a, set });
            }
            states.push(block.iter().position(|&b| b).unwrap() + 1);
        }
    }
    Ok(Configuration {
        timepoints: layout.timepoints,
        resources: layout.resources,
        states,
    })
}

/// `T×n` matrix of produced power.
pub fn power_production<F: Scalar>(inst: &ProblemInstance<F>, z: &Configuration) -> Matrix<F> {
    Matrix::from_fn(inst.timepoints, inst.resources, |t, a| inst.p(a, z.state(t, a) - 1))
}

/// `T×L` line loads `P(Z)·S`.
pub fn line_loads<F: Scalar>(inst: &ProblemInstance<F>, z: &Configuration) -> Matrix<F> {
    power_production(inst, z).matmul(&inst.sensitivity)
}

/// First `(t, a)` with `|Z_{t,a} − Z_{t+1,a}| > 1`, scanning timepoints then resources.
pub fn first_adjacency_violation(z: &Configuration) -> Option<(usize, usize)> {
    for t in 0..z.timepoints().saturating_sub(1) {
        for a in 0..z.resources() {
            if z.state(t, a).abs_diff(z.state(t + 1, a)) > 1 {
                return Some((t, a));
            }
        }
    }
    None
}

pub fn is_adjacent_feasible(z: &Configuration) -> bool {
    first_adjacency_violation(z).is_none()
}

pub fn adjacency_violations(z: &Configuration) -> usize {
    (0..z.timepoints().saturating_sub(1))
        .flat_map(|t| (0..z.resources()).map(move |a| (t, a)))
        .filter(|&(t, a)| z.state(t, a).abs_diff(z.state(t + 1, a)) > 1)
        .count()
}

pub fn production_cost<F: Scalar>(inst: &ProblemInstance<F>, z: &Configuration) -> F {
    let mut total = F::zero();
    for t in 0..inst.timepoints {
        for a in 0..inst.resources {
            total += inst.c(t, a, z.state(t, a) - 1);
        }
    }
    total
}

pub fn switching_cost<F: Scalar>(inst: &ProblemInstance<F>, z: &Configuration) -> F {
    let mut total = F::zero();
    for t in 0..inst.timepoints.saturating_sub(1) {
        for a in 0..inst.resources {
            let now = inst.p(a, z.state(t, a) - 1);
            let next = inst.p(a, z.state(t + 1, a) - 1);
            total += (now - next).abs();
        }
    }
    inst.switch_scale * total
}

pub fn evaluate<F: Scalar>(inst: &ProblemInstance<F>, z: &Configuration) -> SolutionReport<F> {
    let production = power_production(inst, z);
    let loads = production.matmul(&inst.sensitivity);
    let mut overloaded = 0;
    for t in 0..inst.timepoints {
        for l in 0..inst.lines {
            if loads[(t, l)] > inst.line_limits[(t, l)] {
                overloaded += 1;
            }
        }
    }
    let mut fulfillment = Vec::with_capacity(inst.timepoints);
    let mut fulfilled = 0;
    for t in 0..inst.timepoints {
        let total: F = production.row(t).iter().copied().sum();
        let target = inst.targets[t];
        if total >= target {
            fulfilled += 1;
        }
        fulfillment.push((target > F::zero()).then(|| total / target));
    }
    let defined: Vec<F> = fulfillment.iter().flatten().copied().collect();
    let mean_fulfillment = (!defined.is_empty())
        .then(|| defined.iter().copied().sum::<F>() / F::from_count(defined.len()));
    SolutionReport {
        overloaded_lines: overloaded,
        overloaded_per_timepoint: F::from_count(overloaded) / F::from_count(inst.timepoints),
        production_cost: production_cost(inst, z),
        switching_cost: switching_cost(inst, z),
        fulfillment,
        mean_fulfillment,
        fulfilled_timepoints: fulfilled,
        switches: z.switches(),
    }
}
