//! Constraint-preserving alpha-expansion.
//!
//! Every move is a set of transpositions inside one-hot blocks, so one-hot feasibility
//! is kept by construction. A requested state change is first rectified (its
//! neighbours in time are pulled along) so that adjacency feasibility is kept too.
//! Each step proposes up to `c` mutually disjoint moves and picks the best subset by
//! minimizing a `c`-variable QUBO whose score is the exact change of the objective.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{decode_one_hot, first_adjacency_violation, BitVector, Configuration, Layout, ModelError};
use crate::qubo::{Qubo, QuboBuilder};
use crate::solvers::{self, Budget, SolveRequest, SolveResult, SolverError};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlphaError {
    #[error("cycle sets {first} and {second} touch the same block")]
    NonDisjointCycles { first: usize, second: usize },
    #[error("start vector is not one-hot feasible: {0}")]
    NotOneHot(#[from] ModelError),
    #[error("start configuration violates adjacency at t={t}, resource {resource}")]
    InfeasibleStart { t: usize, resource: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Request to move `resource` at timepoint `t` (both 0-based) into `new_state` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateChange {
    pub t: usize,
    pub resource: usize,
    pub new_state: usize,
}

/// Transpositions of bits inside one-hot blocks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CycleSet {
    pub swaps: Vec<(usize, usize)>,
    /// `(t, resource)` blocks touched by the swaps.
    pub touched: BTreeSet<(usize, usize)>,
}

impl CycleSet {
    pub fn is_empty(&self) -> bool {
        self.swaps.is_empty()
    }

    pub fn apply(&self, x: &mut BitVector) {
        for &(u, v) in &self.swaps {
            let (bu, bv) = (x.get(u), x.get(v));
            x.set(u, bv);
            x.set(v, bu);
        }
    }

    /// `C x − x` as sparse `(index, ±1)` entries.
    pub fn difference(&self, x: &BitVector) -> Vec<(usize, i8)> {
        let mut out = Vec::with_capacity(2 * self.swaps.len());
        for &(u, v) in &self.swaps {
            let d = x.get(v) as i8 - x.get(u) as i8;
            if d != 0 {
                out.push((u, d));
                out.push((v, -d));
            }
        }
        out
    }

    /// For a move on one resource: `(resource, first t, last t)` of the touched blocks.
    pub fn window(&self) -> Option<(usize, usize, usize)> {
        let first = self.touched.iter().next()?;
        let last = self.touched.iter().next_back()?;
        debug_assert!(self.touched.iter().all(|b| b.1 == first.1));
        Some((first.1, first.0, last.0))
    }
}

/// Swap of states `from` and `to` (1-based) in block `(t, resource)`; empty when equal.
pub fn make_cycle(layout: Layout, t: usize, resource: usize, from: usize, to: usize) -> CycleSet {
    let mut cs = CycleSet::default();
    if from != to {
        cs.swaps.push((layout.index(t, resource, from - 1), layout.index(t, resource, to - 1)));
        cs.touched.insert((t, resource));
    }
    cs
}

/// New column for `change.resource` after applying the change and walking outward,
/// pulling each out-of-range neighbour to distance one of its inner neighbour on the
/// side of its old state. The walk stops at the first neighbour already in range.
pub fn rectified_column(z: &Configuration, change: StateChange) -> Vec<usize> {
    let old = z.column(change.resource);
    let mut col = old.clone();
    col[change.t] = change.new_state;
    for t in (0..change.t).rev() {
        let inner = col[t + 1];
        if old[t].abs_diff(inner) <= 1 {
            break;
        }
        col[t] = if old[t] < inner { inner - 1 } else { inner + 1 };
    }
    for t in change.t + 1..col.len() {
        let inner = col[t - 1];
        if old[t].abs_diff(inner) <= 1 {
            break;
        }
        col[t] = if old[t] < inner { inner - 1 } else { inner + 1 };
    }
    col
}

/// The cycles realizing [`rectified_column`] on the one-hot encoding of `z`.
pub fn rectify(z: &Configuration, change: StateChange, k: usize) -> CycleSet {
    let layout = Layout::new(z.timepoints(), z.resources(), k);
    let col = rectified_column(z, change);
    let mut cs = CycleSet::default();
    for (t, &s) in col.iter().enumerate() {
        let old = z.state(t, change.resource);
        if s != old {
            let c = make_cycle(layout, t, change.resource, old, s);
            cs.swaps.extend(c.swaps);
            cs.touched.extend(c.touched);
        }
    }
    cs
}

/// Distance rule between two proposals: different resources never conflict, changes
/// on the same resource must be at least `k` timepoints apart.
pub fn changes_compatible(a: &StateChange, b: &StateChange, k: usize) -> bool {
    a.resource != b.resource || a.t.abs_diff(b.t) >= k
}

/// Every non-trivial state change of `z`.
pub fn all_changes(z: &Configuration, k: usize) -> Vec<StateChange> {
    let mut out = Vec::new();
    for t in 0..z.timepoints() {
        for a in 0..z.resources() {
            for s in 1..=k {
                if s != z.state(t, a) {
                    out.push(StateChange {
                        t,
                        resource: a,
                        new_state: s,
                    });
                }
            }
        }
    }
    out
}

/// Up to `c` random changes that pairwise satisfy [`changes_compatible`].
pub fn sample_disjoint_changes<R: Rng>(rng: &mut R, z: &Configuration, k: usize, c: usize) -> Vec<StateChange> {
    let mut pool = all_changes(z, k);
    pool.shuffle(rng);
    let mut out: Vec<StateChange> = Vec::with_capacity(c);
    for ch in pool {
        if out.len() == c {
            break;
        }
        if out.iter().all(|o| changes_compatible(o, &ch, k)) {
            out.push(ch);
        }
    }
    out
}

/// QUBO over move indicators `α` whose score is the exact objective change:
/// `B(α) + Q(x) = Q(x with the cycles {i : α_i = 1} applied)`.
///
/// With `Q_s` the symmetric form of `Q` and `c_i = C_i x − x`:
/// `B_ii = c_iᵀQ_s c_i + 2 xᵀQ_s c_i` and `B_ij = 2 c_iᵀQ_s c_j`.
pub fn build_alpha_qubo<F: Scalar>(q: &Qubo<F>, x: &BitVector, cycles: &[CycleSet]) -> Result<Qubo<F>, AlphaError> {
    let mut owner: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (ci, cs) in cycles.iter().enumerate() {
        for &blk in &cs.touched {
            if let Some(&prev) = owner.get(&blk) {
                return Err(AlphaError::NonDisjointCycles { first: prev, second: ci });
            }
            owner.insert(blk, ci);
        }
    }
    let diffs: Vec<Vec<(usize, i8)>> = cycles.iter().map(|cs| cs.difference(x)).collect();
    let mut sign_of: BTreeMap<usize, (usize, F)> = BTreeMap::new();
    for (ci, d) in diffs.iter().enumerate() {
        for &(u, s) in d {
            sign_of.insert(u, (ci, F::lit(s as f64)));
        }
    }
    let half = F::lit(0.5);
    let mut b = QuboBuilder::new(cycles.len());
    for (ci, d) in diffs.iter().enumerate() {
        let mut diag = F::zero();
        for &(u, s) in d {
            let s = F::lit(s as f64);
            let du = q.linear(u);
            diag += du * s * s;
            // (Q_s x)_u = d_u x_u + ½ Σ_v q_uv x_v
            let mut qx = if x.get(u) { du } else { F::zero() };
            for (v, quv) in q.neighbors(u) {
                if x.get(v) {
                    qx += half * quv;
                }
                if let Some(&(cj, sv)) = sign_of.get(&v) {
                    if cj == ci && u < v {
                        diag += quv * s * sv;
                    } else if ci < cj {
                        b.add_quadratic(ci, cj, quv * s * sv);
                    }
                }
            }
            diag += F::lit(2.0) * s * qx;
        }
        b.add_linear(ci, diag);
    }
    Ok(b.build())
}

/// Sub-problem solver for the move QUBO.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubSolver {
    /// Exhaustive when the move count allows it, tabu search otherwise.
    Auto,
    BruteForce,
    Tabu { iterations: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaConfig {
    /// Proposals per step.
    pub proposals: usize,
    pub sub_solver: SubSolver,
    pub max_epochs: Option<usize>,
    pub time_limit: Option<Duration>,
    pub seed: u64,
    /// Relative tolerance for treating a score change as zero.
    pub tolerance: f64,
    /// Consecutive epochs without an accepted step before stopping. Each epoch
    /// reshuffles the proposal pool, so later epochs can still find moves.
    pub patience: usize,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        Self {
            proposals: 16,
            sub_solver: SubSolver::Auto,
            max_epochs: None,
            time_limit: None,
            seed: 0,
            tolerance: 1e-9,
            patience: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord<F> {
    pub epoch: usize,
    pub accepted: usize,
    pub score: F,
}

#[derive(Debug, Clone)]
pub struct AlphaResult<F> {
    pub result: SolveResult<F>,
    pub epochs: Vec<EpochRecord<F>>,
    /// Number of move QUBOs solved.
    pub steps: u64,
}

impl<F: Scalar> AlphaResult<F> {
    /// Writes per-epoch progress as `epoch,accepted,score` CSV.
    pub fn write_progress<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,accepted,score")?;
        for e in &self.epochs {
            writeln!(w, "{},{},{}", e.epoch, e.accepted, e.score)?;
        }
        Ok(())
    }
}

fn windows_clear(a: (usize, usize, usize), b: (usize, usize, usize)) -> bool {
    // Same-resource windows need an untouched timepoint between them.
    a.0 != b.0 || a.2 + 1 < b.1 || b.2 + 1 < a.1
}

type Proposal = (StateChange, CycleSet, (usize, usize, usize));

/// Takes up to `c` mutually compatible proposals off the back of `pool`. Changes at
/// the timepoint of the last pooled change go first: the power and line terms only
/// couple variables of one timepoint, so moves there are worth deciding jointly.
/// Proposals that no longer change `z` are dropped; incompatible ones stay pooled.
fn next_batch(pool: &mut Vec<StateChange>, z: &Configuration, k: usize, c: usize) -> Vec<Proposal> {
    let mut batch: Vec<Proposal> = Vec::with_capacity(c);
    let mut keep = vec![true; pool.len()];
    let anchor = pool.last().map(|ch| ch.t);
    for same_t in [true, false] {
        for i in (0..pool.len()).rev() {
            if batch.len() == c {
                break;
            }
            let ch = pool[i];
            if !keep[i] || (same_t && Some(ch.t) != anchor) {
                continue;
            }
            if z.state(ch.t, ch.resource) == ch.new_state {
                keep[i] = false;
                continue;
            }
            if !batch.iter().all(|(o, _, _)| changes_compatible(o, &ch, k)) {
                continue;
            }
            let cs = rectify(z, ch, k);
            let win = cs.window().expect("non-trivial change touches a block");
            if batch.iter().all(|(_, _, w)| windows_clear(*w, win)) {
                batch.push((ch, cs, win));
                keep[i] = false;
            }
        }
    }
    let mut i = 0;
    pool.retain(|_| {
        i += 1;
        keep[i - 1]
    });
    batch
}

fn solve_moves<F: Scalar>(b: &Qubo<F>, sub: SubSolver, seed: u64) -> Result<BitVector, SolverError> {
    let exact = match sub {
        SubSolver::Auto => b.dim() <= 20,
        SubSolver::BruteForce => true,
        SubSolver::Tabu { .. } => false,
    };
    let req = SolveRequest::new(b, seed);
    if exact {
        return Ok(solvers::brute_force(&req)?.best);
    }
    let iterations = match sub {
        SubSolver::Tabu { iterations } => iterations,
        _ => 50 * b.dim() as u64,
    };
    let req = req
        .with_initial(BitVector::zeros(b.dim()))
        .with_budget(Budget::iterations(iterations));
    Ok(solvers::tabu_search(&req)?.best)
}

/// Checks that `x` decodes to an adjacency-feasible configuration.
pub fn feasible_configuration(x: &BitVector, layout: Layout) -> Result<Configuration, AlphaError> {
    let z = decode_one_hot(x, layout)?;
    if let Some((t, resource)) = first_adjacency_violation(&z) {
        return Err(AlphaError::InfeasibleStart { t, resource });
    }
    Ok(z)
}

pub fn alpha_expansion<F: Scalar>(
    layout: Layout,
    q: &Qubo<F>,
    x0: &BitVector,
    cfg: &AlphaConfig,
) -> Result<AlphaResult<F>, AlphaError> {
    alpha_expansion_observed(layout, q, x0, cfg, |_, _| {})
}

/// [`alpha_expansion`] calling `on_accept(x, score)` after every accepted step.
pub fn alpha_expansion_observed<F: Scalar>(
    layout: Layout,
    q: &Qubo<F>,
    x0: &BitVector,
    cfg: &AlphaConfig,
    mut on_accept: impl FnMut(&BitVector, F),
) -> Result<AlphaResult<F>, AlphaError> {
    let start = Instant::now();
    let mut z = feasible_configuration(x0, layout)?;
    let k = layout.states;
    let tol = F::lit(cfg.tolerance);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = x0.clone();
    let mut score = q.evaluate(&x);
    let mut trace = vec![(0u64, score)];
    let mut epochs = Vec::new();
    let mut steps = 0u64;
    let out_of_time = |start: &Instant| cfg.time_limit.is_some_and(|l| start.elapsed() >= l);
    let mut epoch = 0usize;
    let mut idle = 0usize;
    'epochs: while cfg.max_epochs.is_none_or(|m| epoch < m) {
        if out_of_time(&start) {
            break;
        }
        let mut pool = all_changes(&z, k);
        pool.shuffle(&mut rng);
        let mut accepted = 0usize;
        while !pool.is_empty() {
            if out_of_time(&start) {
                epochs.push(EpochRecord { epoch, accepted, score });
                break 'epochs;
            }
            let batch = next_batch(&mut pool, &z, k, cfg.proposals);
            if batch.is_empty() {
                break;
            }
            let cycles: Vec<CycleSet> = batch.into_iter().map(|(_, cs, _)| cs).collect();
            let b = build_alpha_qubo(q, &x, &cycles)?;
            let alpha = solve_moves(&b, cfg.sub_solver, rng.random())?;
            steps += 1;
            if alpha.count_ones() == 0 {
                continue;
            }
            let delta = b.evaluate(&alpha);
            let mut candidate = x.clone();
            for i in alpha.ones() {
                cycles[i].apply(&mut candidate);
            }
            let zc = decode_one_hot(&candidate, layout)?;
            debug_assert!(first_adjacency_violation(&zc).is_none());
            let scale = tol * (F::one() + score.abs());
            let take = if delta < -scale {
                true
            } else if delta.abs() <= scale {
                zc.switches() < z.switches() || epoch == 0
            } else {
                false
            };
            if take {
                x = candidate;
                z = zc;
                score = score + delta;
                accepted += 1;
                trace.push((steps, score));
                on_accept(&x, score);
            }
        }
        // Fresh evaluation once per epoch keeps the running score from drifting.
        score = q.evaluate(&x);
        epochs.push(EpochRecord { epoch, accepted, score });
        epoch += 1;
        idle = if accepted == 0 { idle + 1 } else { 0 };
        if idle >= cfg.patience.max(1) {
            break;
        }
    }
    let score = q.evaluate(&x);
    Ok(AlphaResult {
        result: SolveResult {
            best: x,
            score,
            iterations: steps,
            wall_seconds: start.elapsed().as_secs_f64(),
            trace: Some(trace),
        },
        epochs,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encodings::{build_cost_qubo, build_objective, ObjectiveOptions};
    use crate::model::{encode_one_hot, is_adjacent_feasible, tests::hand_instance, Multipliers};
    use rand::Rng;

    fn column(col: &[usize]) -> Configuration {
        Configuration::from_rows(col.iter().map(|&s| vec![s]).collect(), 3).unwrap()
    }

    fn random_qubo(dim: usize, seed: u64) -> Qubo<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = QuboBuilder::new(dim);
        b.add_offset(rng.random_range(-1.0..1.0));
        for i in 0..dim {
            b.add_linear(i, rng.random_range(-2.0..2.0));
            for j in i + 1..dim {
                if rng.random_bool(0.4) {
                    b.add_quadratic(i, j, rng.random_range(-2.0..2.0));
                }
            }
        }
        b.build()
    }

    #[test]
    fn batches_start_at_anchor_timepoint() {
        let z = Configuration::constant(3, 2, 1);
        let mut pool = all_changes(&z, 3);
        let stale = StateChange {
            t: 0,
            resource: 0,
            new_state: 1,
        };
        pool.insert(0, stale);
        let total = pool.len();
        let batch = next_batch(&mut pool, &z, 3, 16);
        assert!(!batch.is_empty());
        let anchor = 2;
        let leading = batch.iter().take_while(|(ch, _, _)| ch.t == anchor).count();
        assert!(leading > 0);
        assert!(batch[leading..].iter().all(|(ch, _, _)| ch.t != anchor));
        assert!(!pool.contains(&stale));
        assert_eq!(batch.len() + pool.len(), total - 1);
        for (i, (_, _, a)) in batch.iter().enumerate() {
            for (_, _, b) in &batch[i + 1..] {
                assert!(windows_clear(*a, *b));
            }
        }
    }

    #[test]
    fn make_cycle_cases() {
        let layout = Layout::new(2, 2, 3);
        assert!(make_cycle(layout, 0, 0, 2, 2).is_empty());
        let c = make_cycle(layout, 1, 1, 1, 3);
        assert_eq!(c.swaps, vec![(layout.index(1, 1, 0), layout.index(1, 1, 2))]);
        let z = Configuration::from_rows(vec![vec![1, 2], vec![3, 1]], 3).unwrap();
        let x = encode_one_hot(&z, 3);
        let mut y = x.clone();
        c.apply(&mut y);
        assert_eq!(decode_one_hot(&y, layout).unwrap().state(1, 1), 3);
        c.apply(&mut y);
        assert_eq!(y, x);
    }

    #[test]
    fn rectify_examples() {
        let ch = StateChange {
            t: 1,
            resource: 0,
            new_state: 3,
        };
        let z = column(&[2, 2, 2]);
        assert_eq!(rectified_column(&z, ch), vec![2, 3, 2]);
        assert_eq!(rectify(&z, ch, 3).touched.len(), 1);

        let z = column(&[1, 1, 1]);
        assert_eq!(rectified_column(&z, ch), vec![2, 3, 2]);
        let touched: Vec<usize> = rectify(&z, ch, 3).touched.iter().map(|b| b.0).collect();
        assert_eq!(touched, vec![0, 1, 2]);

        let z = column(&[1, 1, 1]);
        let at0 = StateChange { t: 0, ..ch };
        assert_eq!(rectified_column(&z, at0), vec![3, 2, 1]);
    }

    #[test]
    fn rectified_moves_stay_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = 5;
        for _ in 0..200 {
            // random walk column with steps in {-1, 0, 1}
            let mut col = vec![rng.random_range(1..=k)];
            for _ in 1..9 {
                let last = *col.last().unwrap() as i64;
                let next = (last + rng.random_range(-1..=1)).clamp(1, k as i64);
                col.push(next as usize);
            }
            let z = Configuration::from_rows(col.iter().map(|&s| vec![s]).collect(), k).unwrap();
            let ch = StateChange {
                t: rng.random_range(0..9),
                resource: 0,
                new_state: rng.random_range(1..=k),
            };
            let mut x = encode_one_hot(&z, k);
            let cs = rectify(&z, ch, k);
            cs.apply(&mut x);
            let zn = decode_one_hot(&x, Layout::new(9, 1, k)).unwrap();
            assert!(is_adjacent_feasible(&zn));
            assert_eq!(zn.state(ch.t, 0), ch.new_state);
            assert!(cs.touched.len() <= 2 * (k - 1) + 1);
        }
    }

    #[test]
    fn distance_rule() {
        let a = StateChange {
            t: 0,
            resource: 0,
            new_state: 2,
        };
        assert!(!changes_compatible(&a, &StateChange { t: 2, ..a }, 3));
        assert!(changes_compatible(&a, &StateChange { t: 3, ..a }, 3));
        assert!(changes_compatible(&a, &StateChange { resource: 1, ..a }, 3));
        let z = Configuration::constant(6, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_disjoint_changes(&mut rng, &z, 3, 5);
        assert!(s.len() <= 5);
        for (i, x) in s.iter().enumerate() {
            for y in &s[i + 1..] {
                assert!(changes_compatible(x, y, 3));
            }
        }
        assert_eq!(sample_disjoint_changes(&mut rng, &z, 3, 1).len(), 1);
    }

    #[test]
    fn move_qubo_contract_exhaustive() {
        let layout = Layout::new(3, 3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..20 {
            let q = random_qubo(layout.dim(), seed);
            let z = Configuration::constant(3, 3, 2);
            let x = encode_one_hot(&z, 3);
            for c in 1..=3 {
                let cycles: Vec<CycleSet> = (0..c)
                    .map(|a| make_cycle(layout, rng.random_range(0..3), a, 2, [1, 3][rng.random_range(0..2)]))
                    .collect();
                let b = build_alpha_qubo(&q, &x, &cycles).unwrap();
                let base = q.evaluate(&x);
                for mask in 0..(1u64 << c) {
                    let alpha = BitVector::from_u64(mask, c);
                    let mut y = x.clone();
                    for i in alpha.ones() {
                        cycles[i].apply(&mut y);
                    }
                    let want = q.evaluate(&y);
                    let got = b.evaluate(&alpha) + base;
                    assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()), "c={c} mask={mask}");
                }
            }
        }
    }

    #[test]
    fn move_qubo_contract_on_multi_block_cycles() {
        let layout = Layout::new(5, 2, 3);
        let q = random_qubo(layout.dim(), 3);
        let z = Configuration::constant(5, 2, 1);
        let x = encode_one_hot(&z, 3);
        let cycles = vec![
            rectify(&z, StateChange { t: 1, resource: 0, new_state: 3 }, 3),
            rectify(&z, StateChange { t: 3, resource: 1, new_state: 3 }, 3),
        ];
        let b = build_alpha_qubo(&q, &x, &cycles).unwrap();
        for mask in 0..4u64 {
            let alpha = BitVector::from_u64(mask, 2);
            let mut y = x.clone();
            for i in alpha.ones() {
                cycles[i].apply(&mut y);
            }
            assert!((b.evaluate(&alpha) + q.evaluate(&x) - q.evaluate(&y)).abs() < 1e-9);
        }
    }

    #[test]
    fn overlapping_cycles_rejected() {
        let layout = Layout::new(1, 1, 3);
        let q = Qubo::<f64>::zero(3);
        let x = BitVector::parse("100").unwrap();
        let cs = vec![make_cycle(layout, 0, 0, 1, 2), make_cycle(layout, 0, 0, 1, 3)];
        assert_eq!(
            build_alpha_qubo(&q, &x, &cs).unwrap_err(),
            AlphaError::NonDisjointCycles { first: 0, second: 1 }
        );
    }

    #[test]
    fn cost_only_descends_to_cheapest_states() {
        let mut inst = hand_instance();
        inst.multipliers = Multipliers::zero();
        let q = build_cost_qubo(&inst);
        let layout = inst.layout();
        let x0 = encode_one_hot(&Configuration::constant(2, 2, 3), 3);
        let mut visited = 0;
        let r = alpha_expansion_observed(layout, &q, &x0, &AlphaConfig::default(), |x, _| {
            visited += 1;
            assert!(feasible_configuration(x, layout).is_ok());
        })
        .unwrap();
        assert!(visited > 0);
        let z = decode_one_hot(&r.result.best, layout).unwrap();
        assert_eq!(z, Configuration::constant(2, 2, 1));
        let scores: Vec<f64> = r.result.trace.unwrap().iter().map(|p| p.1).collect();
        assert!(scores.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_epochs_returns_start() {
        let inst = hand_instance();
        let q = build_objective(&inst, &ObjectiveOptions::default()).unwrap();
        let x0 = encode_one_hot(&Configuration::constant(2, 2, 2), 3);
        let cfg = AlphaConfig {
            max_epochs: Some(0),
            ..AlphaConfig::default()
        };
        let r = alpha_expansion(inst.layout(), &q, &x0, &cfg).unwrap();
        assert_eq!(r.result.best, x0);
        assert_eq!(r.steps, 0);
    }

    #[test]
    fn infeasible_start_rejected() {
        let inst = hand_instance();
        let q = build_cost_qubo(&inst);
        let z = Configuration::from_rows(vec![vec![1, 1], vec![3, 1]], 3).unwrap();
        let err = alpha_expansion(inst.layout(), &q, &encode_one_hot(&z, 3), &AlphaConfig::default()).unwrap_err();
        assert_eq!(err, AlphaError::InfeasibleStart { t: 0, resource: 0 });
        let bad = BitVector::zeros(12);
        assert!(matches!(
            alpha_expansion(inst.layout(), &q, &bad, &AlphaConfig::default()),
            Err(AlphaError::NotOneHot(_))
        ));
    }

    #[test]
    fn progress_csv_header() {
        let inst = hand_instance();
        let q = build_cost_qubo(&inst);
        let x0 = encode_one_hot(&Configuration::constant(2, 2, 2), 3);
        let r = alpha_expansion(inst.layout(), &q, &x0, &AlphaConfig::default()).unwrap();
        let mut out = Vec::new();
        r.write_progress(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.starts_with("epoch,accepted,score\n0,"));
    }
}
