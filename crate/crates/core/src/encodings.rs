//! QUBO terms of the re-dispatch objective.
//!
//! Each builder has a scalar counterpart that defines it: the penalty oracles and
//! the cost functions in [`crate::model`]. The matrix forms expand those scalars
//! exactly, so they agree on every binary vector (the constants live in the QUBO
//! offset instead of being spread over the diagonal).

use thiserror::Error;

use crate::model::{BitVector, Configuration, Layout, ProblemInstance};
use crate::qubo::{Qubo, QuboBuilder, QuboError};
use crate::model::encode_one_hot;
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodingError {
    #[error("power target at t={t} cannot be exceeded: max surplus {bound}")]
    InfeasiblePowerBound { t: usize, bound: f64 },
    #[error("line l={l} at t={t} is overloaded even at minimum output: headroom {bound}")]
    InfeasibleLoadBound { t: usize, l: usize, bound: f64 },
    #[error(transparent)]
    Qubo(#[from] QuboError),
}

/// Reciprocals of the largest attainable values of the inequality slacks.
///
/// `power[t] = 1 / max_x g_t(x)` and `load[t][l] = 1 / max_x h_{t,l}(x)`, so that the
/// normalized slacks `g·power` and `h·load` never exceed one.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyBounds<F> {
    pub power: Vec<F>,
    /// Row-major `T×L`.
    pub load: Vec<F>,
    lines: usize,
}

impl<F: Scalar> PenaltyBounds<F> {
    /// All factors one: the plain (un-normalized) unbalanced penalty.
    pub fn unit(timepoints: usize, lines: usize) -> Self {
        Self {
            power: vec![F::one(); timepoints],
            load: vec![F::one(); timepoints * lines],
            lines,
        }
    }

    #[inline]
    pub fn load_at(&self, t: usize, l: usize) -> F {
        self.load[t * self.lines + l]
    }
}

/// Which soft QUBO term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Term {
    Cost,
    Load,
    Power,
    Switch,
}

impl Term {
    pub const ALL: [Term; 4] = [Term::Cost, Term::Load, Term::Power, Term::Switch];

    pub fn name(self) -> &'static str {
        match self {
            Term::Cost => "cost",
            Term::Load => "load",
            Term::Power => "power",
            Term::Switch => "switch",
        }
    }
}

/// `I_{T·n} ⊗ (J_k − 2 I_k)`: scores `m² − 2m` per block with `m` set bits.
pub fn build_onehot_qubo<F: Scalar>(layout: Layout) -> Qubo<F> {
    let mut b = QuboBuilder::new(layout.dim());
    let two = F::lit(2.0);
    for t in 0..layout.timepoints {
        for a in 0..layout.resources {
            for i in 0..layout.states {
                let u = layout.index(t, a, i);
                b.add_linear(u, -F::one());
                for j in i + 1..layout.states {
                    b.add_quadratic(u, layout.index(t, a, j), two);
                }
            }
        }
    }
    b.build()
}

/// Couples each resource's blocks at consecutive timepoints with `[|i − i'| > 1]`.
pub fn build_adjacency_qubo<F: Scalar>(layout: Layout) -> Qubo<F> {
    let mut b = QuboBuilder::new(layout.dim());
    for t in 0..layout.timepoints.saturating_sub(1) {
        for a in 0..layout.resources {
            for i in 0..layout.states {
                for j in 0..layout.states {
                    if i.abs_diff(j) > 1 {
                        b.add_quadratic(layout.index(t, a, i), layout.index(t + 1, a, j), F::one());
                    }
                }
            }
        }
    }
    b.build()
}

/// `diag(c)`.
pub fn build_cost_qubo<F: Scalar>(inst: &ProblemInstance<F>) -> Qubo<F> {
    let layout = inst.layout();
    let mut b = QuboBuilder::new(layout.dim());
    for t in 0..inst.timepoints {
        for a in 0..inst.resources {
            for i in 0..inst.states {
                b.add_linear(layout.index(t, a, i), inst.c(t, a, i));
            }
        }
    }
    b.build()
}

/// `γ·|p_{a,i} − p_{a,i'}|` between `(t,a,i)` and `(t+1,a,i')`.
pub fn build_switch_qubo<F: Scalar>(inst: &ProblemInstance<F>) -> Qubo<F> {
    let layout = inst.layout();
    let mut b = QuboBuilder::new(layout.dim());
    for t in 0..inst.timepoints.saturating_sub(1) {
        for a in 0..inst.resources {
            for i in 0..inst.states {
                for j in 0..inst.states {
                    let w = inst.switch_scale * (inst.p(a, i) - inst.p(a, j)).abs();
                    if w != F::zero() {
                        b.add_quadratic(layout.index(t, a, i), layout.index(t + 1, a, j), w);
                    }
                }
            }
        }
    }
    b.build()
}

/// Computes the normalizing factors from the extreme configurations.
///
/// `max g_t = Σ_a max_i p_{a,i} − τ_t`; `max h_{t,l} = M_{t,l} − Σ_a min_i p_{a,i} S_{a,l}`
/// (with non-negative sensitivities the minimum is attained at the lowest state).
pub fn compute_bounds<F: Scalar>(inst: &ProblemInstance<F>) -> Result<PenaltyBounds<F>, EncodingError> {
    let mut power = Vec::with_capacity(inst.timepoints);
    let top: F = (0..inst.resources)
        .map(|a| (0..inst.states).map(|i| inst.p(a, i)).fold(F::neg_infinity(), F::max))
        .sum();
    for t in 0..inst.timepoints {
        let bound = top - inst.targets[t];
        if !(bound > F::zero()) {
            return Err(EncodingError::InfeasiblePowerBound {
                t,
                bound: bound.to_f64_lossy(),
            });
        }
        power.push(F::one() / bound);
    }
    let floor: Vec<F> = (0..inst.lines)
        .map(|l| {
            (0..inst.resources)
                .map(|a| {
                    let s = inst.sensitivity[(a, l)];
                    (0..inst.states).map(|i| inst.p(a, i) * s).fold(F::infinity(), F::min)
                })
                .sum()
        })
        .collect();
    let mut load = Vec::with_capacity(inst.timepoints * inst.lines);
    for t in 0..inst.timepoints {
        for (l, &fl) in floor.iter().enumerate() {
            let bound = inst.line_limits[(t, l)] - fl;
            if !(bound > F::zero()) {
                return Err(EncodingError::InfeasibleLoadBound {
                    t,
                    l,
                    bound: bound.to_f64_lossy(),
                });
            }
            load.push(F::one() / bound);
        }
    }
    Ok(PenaltyBounds {
        power,
        load,
        lines: inst.lines,
    })
}

/// Bounds for the requested variant: computed factors, or all ones.
pub fn penalty_bounds<F: Scalar>(
    inst: &ProblemInstance<F>,
    normalized: bool,
) -> Result<PenaltyBounds<F>, EncodingError> {
    if normalized {
        compute_bounds(inst)
    } else {
        Ok(PenaltyBounds::unit(inst.timepoints, inst.lines))
    }
}

/// Second-order expansion of `e^{-h}` around zero: `1 − h + h²/2`.
#[inline]
pub fn penalty_scalar<F: Scalar>(h: F) -> F {
    F::one() - h + F::lit(0.5) * h * h
}

/// `g_t(x) = Σ_{a,i} p_{a,i} x_{t,a,i} − τ_t` for every timepoint.
pub fn power_slack<F: Scalar>(inst: &ProblemInstance<F>, x: &BitVector) -> Vec<F> {
    let layout = inst.layout();
    (0..inst.timepoints)
        .map(|t| {
            let mut s = -inst.targets[t];
            for a in 0..inst.resources {
                for i in 0..inst.states {
                    if x.get(layout.index(t, a, i)) {
                        s += inst.p(a, i);
                    }
                }
            }
            s
        })
        .collect()
}

/// `h_{t,l}(x) = M_{t,l} − Σ_{a,i} p_{a,i} x_{t,a,i} S_{a,l}`, row-major `T×L`.
pub fn load_slack<F: Scalar>(inst: &ProblemInstance<F>, x: &BitVector) -> Vec<F> {
    let layout = inst.layout();
    let mut out = Vec::with_capacity(inst.timepoints * inst.lines);
    for t in 0..inst.timepoints {
        for l in 0..inst.lines {
            let mut s = inst.line_limits[(t, l)];
            for a in 0..inst.resources {
                for i in 0..inst.states {
                    if x.get(layout.index(t, a, i)) {
                        s -= inst.p(a, i) * inst.sensitivity[(a, l)];
                    }
                }
            }
            out.push(s);
        }
    }
    out
}

pub fn power_penalty_oracle<F: Scalar>(inst: &ProblemInstance<F>, bounds: &PenaltyBounds<F>, x: &BitVector) -> F {
    power_slack(inst, x)
        .into_iter()
        .zip(&bounds.power)
        .map(|(g, &f)| penalty_scalar(g * f))
        .sum()
}

pub fn load_penalty_oracle<F: Scalar>(inst: &ProblemInstance<F>, bounds: &PenaltyBounds<F>, x: &BitVector) -> F {
    load_slack(inst, x)
        .into_iter()
        .zip(&bounds.load)
        .map(|(h, &f)| penalty_scalar(h * f))
        .sum()
}

/// Unbalanced penalty of the power targets, `Σ_t ζ(f_t·g_t(x))`.
///
/// With `u = Σ_j w_j x_j − f τ` and `w_j = f p_j`, `1 − u + u²/2` expands to
/// linear terms `w_j²/2 − w_j − f τ w_j`, couplings `w_j w_j'` and the constant
/// `1 + f τ + (f τ)²/2`.
pub fn build_power_qubo<F: Scalar>(inst: &ProblemInstance<F>, bounds: &PenaltyBounds<F>) -> Qubo<F> {
    let layout = inst.layout();
    let mut b = QuboBuilder::new(layout.dim());
    let half = F::lit(0.5);
    let nk = inst.resources * inst.states;
    for t in 0..inst.timepoints {
        let f = bounds.power[t];
        let ft = f * inst.targets[t];
        b.add_offset(F::one() + ft + half * ft * ft);
        let base = layout.block_start(t, 0);
        let w: Vec<F> = (0..nk)
            .map(|j| f * inst.p(j / inst.states, j % inst.states))
            .collect();
        for j in 0..nk {
            if w[j] == F::zero() {
                continue;
            }
            b.add_linear(base + j, half * w[j] * w[j] - w[j] - ft * w[j]);
            for jj in j + 1..nk {
                if w[jj] != F::zero() {
                    b.add_quadratic(base + j, base + jj, w[j] * w[jj]);
                }
            }
        }
    }
    b.build()
}

/// Unbalanced penalty of the line limits, `Σ_{t,l} ζ(f_{t,l}·h_{t,l}(x))`.
///
/// With `u = f M − Σ_j w_j x_j` and `w_j = f p_j S_{a(j),l}`, the expansion gives
/// linear terms `w_j + w_j²/2 − f M w_j`, couplings `w_j w_j'` and the constant
/// `1 − f M + (f M)²/2`. Summing the couplings over lines yields
/// `p_j p_j' [S diag(f_t²) Sᵀ]_{a,a'}`.
pub fn build_load_qubo<F: Scalar>(inst: &ProblemInstance<F>, bounds: &PenaltyBounds<F>) -> Qubo<F> {
    let layout = inst.layout();
    let (n, k) = (inst.resources, inst.states);
    let nk = n * k;
    let half = F::lit(0.5);
    let mut b = QuboBuilder::new(layout.dim());
    for t in 0..inst.timepoints {
        let base = layout.block_start(t, 0);
        let mut gram = vec![F::zero(); n * n];
        let mut linear = vec![F::zero(); nk];
        for l in 0..inst.lines {
            let f = bounds.load_at(t, l);
            let fm = f * inst.line_limits[(t, l)];
            b.add_offset(F::one() - fm + half * fm * fm);
            for a in 0..n {
                let sa = inst.sensitivity[(a, l)];
                if sa == F::zero() {
                    continue;
                }
                for i in 0..k {
                    let w = f * inst.p(a, i) * sa;
                    linear[a * k + i] += w + half * w * w - fm * w;
                }
                for a2 in a..n {
                    gram[a * n + a2] += f * f * sa * inst.sensitivity[(a2, l)];
                }
            }
        }
        for j in 0..nk {
            b.add_linear(base + j, linear[j]);
            let (a, i) = (j / k, j % k);
            let pj = inst.p(a, i);
            if pj == F::zero() {
                continue;
            }
            for jj in j + 1..nk {
                let (a2, i2) = (jj / k, jj % k);
                let g = gram[a * n + a2];
                let v = g * pj * inst.p(a2, i2);
                if v != F::zero() {
                    b.add_quadratic(base + j, base + jj, v);
                }
            }
        }
    }
    b.build()
}

/// Options for assembling the full objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveOptions<F> {
    /// Divide each slack by its largest attainable value before penalizing.
    pub normalized_penalties: bool,
    /// Rescale each soft term onto `[0, 1]` over one-hot vectors before weighting.
    pub score_normalized: bool,
    /// Weight of the one-hot and adjacency terms (one in the reference objective).
    pub hard_weight: F,
}

impl<F: Scalar> Default for ObjectiveOptions<F> {
    fn default() -> Self {
        Self {
            normalized_penalties: true,
            score_normalized: true,
            hard_weight: F::one(),
        }
    }
}

/// Builds one soft term.
pub fn build_term<F: Scalar>(
    inst: &ProblemInstance<F>,
    term: Term,
    bounds: &PenaltyBounds<F>,
) -> Qubo<F> {
    match term {
        Term::Cost => build_cost_qubo(inst),
        Term::Load => build_load_qubo(inst, bounds),
        Term::Power => build_power_qubo(inst, bounds),
        Term::Switch => build_switch_qubo(inst),
    }
}

/// The two configurations at which a term attains its minimum and maximum score.
pub fn extremal_configurations<F: Scalar>(inst: &ProblemInstance<F>, term: Term) -> (Configuration, Configuration) {
    let (t, n, k) = (inst.timepoints, inst.resources, inst.states);
    let low = Configuration::constant(t, n, 1);
    let high = Configuration::constant(t, n, k);
    match term {
        Term::Cost | Term::Load => (low, high),
        Term::Power => (high, low),
        Term::Switch => {
            let mut alt = Configuration::constant(t, n, 1);
            for a in 0..n {
                // pair of states with the largest power gap
                let (mut lo, mut hi) = (0, 0);
                for i in 0..k {
                    if inst.p(a, i) < inst.p(a, lo) {
                        lo = i;
                    }
                    if inst.p(a, i) > inst.p(a, hi) {
                        hi = i;
                    }
                }
                for tt in 0..t {
                    alt.set_state(tt, a, if tt % 2 == 0 { lo + 1 } else { hi + 1 });
                }
            }
            (low, alt)
        }
    }
}

/// Score of a term at its prescribed minimizing and maximizing configurations.
pub fn extremal_scores<F: Scalar>(
    inst: &ProblemInstance<F>,
    term: Term,
    qubo: &Qubo<F>,
) -> Result<(F, F), EncodingError> {
    let (lo, hi) = extremal_configurations(inst, term);
    let e_min = qubo.evaluate(&encode_one_hot(&lo, inst.states));
    let e_max = qubo.evaluate(&encode_one_hot(&hi, inst.states));
    if e_min == e_max {
        return Err(QuboError::DegenerateRange(e_min.to_f64_lossy()).into());
    }
    Ok((e_min, e_max))
}

/// A soft term rescaled onto `[0, 1]` over one-hot vectors.
pub fn build_score_normalized_term<F: Scalar>(
    inst: &ProblemInstance<F>,
    term: Term,
    bounds: &PenaltyBounds<F>,
) -> Result<Qubo<F>, EncodingError> {
    let q = build_term(inst, term, bounds);
    let (e_min, e_max) = extremal_scores(inst, term, &q)?;
    Ok(q.normalize_range(e_min, e_max, inst.layout().blocks())?)
}

/// The soft terms of the objective and their weights, before summation.
pub fn objective_terms<F: Scalar>(
    inst: &ProblemInstance<F>,
    opts: &ObjectiveOptions<F>,
) -> Result<Vec<(Term, F, Qubo<F>)>, EncodingError> {
    let lam = inst.multipliers;
    let needs_bounds = lam.power != F::zero() || lam.load != F::zero();
    let bounds = if needs_bounds {
        penalty_bounds(inst, opts.normalized_penalties)?
    } else {
        PenaltyBounds::unit(inst.timepoints, inst.lines)
    };
    let weighted = [
        (Term::Power, lam.power),
        (Term::Load, lam.load),
        (Term::Cost, lam.cost),
        (Term::Switch, lam.switching),
    ];
    let mut out = Vec::new();
    for (term, w) in weighted {
        if w == F::zero() {
            continue;
        }
        let q = if opts.score_normalized {
            match build_score_normalized_term(inst, term, &bounds) {
                Ok(q) => q,
                // A constant term cannot change the argmin.
                Err(EncodingError::Qubo(QuboError::DegenerateRange(_))) => continue,
                Err(e) => return Err(e),
            }
        } else {
            build_term(inst, term, &bounds)
        };
        out.push((term, w, q));
    }
    Ok(out)
}

/// `λ_g Q_g + λ_h Q_h + λ_C Q_C + λ_W Q_W + w_hard (Q_H + Q_A)`.
pub fn build_objective<F: Scalar>(
    inst: &ProblemInstance<F>,
    opts: &ObjectiveOptions<F>,
) -> Result<Qubo<F>, EncodingError> {
    let layout = inst.layout();
    let mut b = QuboBuilder::new(layout.dim());
    for (_, w, q) in objective_terms(inst, opts)? {
        b.add_qubo(w, &q)?;
    }
    if opts.hard_weight != F::zero() {
        b.add_qubo(opts.hard_weight, &build_onehot_qubo(layout))?;
        b.add_qubo(opts.hard_weight, &build_adjacency_qubo(layout))?;
    }
    Ok(b.build())
}
