//! Seeded classical QUBO samplers: exhaustive enumeration, tabu search and
//! simulated annealing.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::BitVector;
use crate::qubo::Qubo;
use crate::Scalar;

/// Largest dimension accepted by [`brute_force`].
pub const BRUTE_FORCE_MAX_DIM: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("dimension {dim} too large for exhaustive search (max {max})")]
    TooLarge { dim: usize, max: usize },
    #[error("initial vector has length {got}, expected {expected}")]
    InitialLength { expected: usize, got: usize },
    #[error("invalid solver parameter: {0}")]
    InvalidParams(String),
}

/// Iteration and wall-clock limits. An iteration is one single-bit move (tabu),
/// one proposal (annealing) or one enumerated vector (brute force ignores it).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub max_iterations: u64,
    pub time_limit: Option<Duration>,
}

impl Budget {
    pub fn iterations(n: u64) -> Self {
        Self {
            max_iterations: n,
            time_limit: None,
        }
    }

    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = Some(limit);
        self
    }
}

impl Default for Budget {
    fn default() -> Self {
        Self::iterations(100_000)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams<F> {
    /// Tabu tenure; `None` picks `max(10, dim/50)`, capped below `dim`.
    pub tabu_tenure: Option<usize>,
    /// Iterations without a new best before tabu search perturbs; `None` picks `max(200, 20·dim)`.
    pub tabu_stall: Option<usize>,
    /// Annealing start temperature; `None` estimates it for ~0.8 initial acceptance.
    pub sa_t_start: Option<F>,
    /// Annealing end temperature; `None` uses `1e-3·t_start`.
    pub sa_t_end: Option<F>,
    pub sa_sweeps: usize,
}

impl<F> Default for SolverParams<F> {
    fn default() -> Self {
        Self {
            tabu_tenure: None,
            tabu_stall: None,
            sa_t_start: None,
            sa_t_end: None,
            sa_sweeps: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveRequest<'a, F> {
    pub qubo: &'a Qubo<F>,
    pub initial: Option<BitVector>,
    pub seed: u64,
    pub budget: Budget,
    pub params: SolverParams<F>,
    pub record_trace: bool,
}

impl<'a, F: Scalar> SolveRequest<'a, F> {
    pub fn new(qubo: &'a Qubo<F>, seed: u64) -> Self {
        Self {
            qubo,
            initial: None,
            seed,
            budget: Budget::default(),
            params: SolverParams::default(),
            record_trace: false,
        }
    }

    pub fn with_initial(mut self, x: BitVector) -> Self {
        self.initial = Some(x);
        self
    }

    pub fn with_budget(mut self, budget: Budget) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    fn check(&self) -> Result<(), SolverError> {
        if let Some(x) = &self.initial {
            if x.len() != self.qubo.dim() {
                return Err(SolverError::InitialLength {
                    expected: self.qubo.dim(),
                    got: x.len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<F> {
    pub best: BitVector,
    pub score: F,
    pub iterations: u64,
    pub wall_seconds: f64,
    /// `(iteration, best score so far)` at every improvement.
    pub trace: Option<Vec<(u64, F)>>,
}

impl<F: Scalar> SolveResult<F> {
    /// Writes the trace as `iteration,best_score` CSV.
    pub fn write_trace<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,best_score")?;
        for (it, s) in self.trace.iter().flatten() {
            writeln!(w, "{it},{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    BruteForce,
    Tabu,
    Annealing,
}

impl Solver {
    pub fn run<F: Scalar>(self, req: &SolveRequest<'_, F>) -> Result<SolveResult<F>, SolverError> {
        match self {
            Solver::BruteForce => brute_force(req),
            Solver::Tabu => tabu_search(req),
            Solver::Annealing => simulated_annealing(req),
        }
    }
}

/// Score change from flipping bit `i` of `x`.
pub fn incremental_delta<F: Scalar>(qubo: &Qubo<F>, x: &BitVector, i: usize) -> F {
    qubo.flip_delta(x, i)
}

/// Picks the best of several runs: lowest score, then earliest in `results`.
pub fn merge_results<F: Scalar>(results: Vec<SolveResult<F>>) -> Option<SolveResult<F>> {
    let mut best: Option<SolveResult<F>> = None;
    for r in results {
        match &best {
            Some(b) if !(r.score < b.score) => {}
            _ => best = Some(r),
        }
    }
    best
}

/// Current vector with its score and local fields `h_i = q_ii + Σ_j q_ij x_j`,
/// updated in `O(degree)` per flip.
#[derive(Debug, Clone)]
pub struct FieldState<'a, F> {
    qubo: &'a Qubo<F>,
    x: BitVector,
    field: Vec<F>,
    score: F,
}

impl<'a, F: Scalar> FieldState<'a, F> {
    pub fn new(qubo: &'a Qubo<F>, x: BitVector) -> Self {
        let field = (0..qubo.dim()).map(|i| qubo.local_field(&x, i)).collect();
        let score = qubo.evaluate(&x);
        Self { qubo, x, field, score }
    }

    #[inline]
    pub fn delta(&self, i: usize) -> F {
        if self.x.get(i) {
            -self.field[i]
        } else {
            self.field[i]
        }
    }

    pub fn flip(&mut self, i: usize) {
        self.score += self.delta(i);
        let on = !self.x.get(i);
        self.x.set(i, on);
        for (j, q) in self.qubo.neighbors(i) {
            if on {
                self.field[j] += q;
            } else {
                self.field[j] -= q;
            }
        }
    }

    pub fn x(&self) -> &BitVector {
        &self.x
    }

    pub fn score(&self) -> F {
        self.score
    }

    /// Recomputes fields and score from scratch.
    pub fn reset(&mut self, x: BitVector) {
        *self = Self::new(self.qubo, x);
    }
}

struct Clock {
    start: Instant,
    limit: Option<Duration>,
}

impl Clock {
    fn new(limit: Option<Duration>) -> Self {
        Self {
            start: Instant::now(),
            limit,
        }
    }

    fn expired(&self) -> bool {
        self.limit.is_some_and(|l| self.start.elapsed() >= l)
    }

    fn seconds(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> BitVector {
    BitVector::from_bits((0..dim).map(|_| rng.random::<bool>()).collect())
}

fn lex_less(a: &BitVector, b: &BitVector) -> bool {
    a.as_slice() < b.as_slice()
}

/// Exhaustive minimization in Gray-code order.
///
/// Ties within a small relative tolerance go to the vector with the smallest
/// integer value when `x_0` is read as the most significant bit.
pub fn brute_force<F: Scalar>(req: &SolveRequest<'_, F>) -> Result<SolveResult<F>, SolverError> {
    req.check()?;
    let clock = Clock::new(None);
    let q = req.qubo;
    let dim = q.dim();
    if dim > BRUTE_FORCE_MAX_DIM {
        return Err(SolverError::TooLarge {
            dim,
            max: BRUTE_FORCE_MAX_DIM,
        });
    }
    let tol = F::lit(1e-12);
    let mut state = FieldState::new(q, BitVector::zeros(dim));
    let mut best = state.x().clone();
    let mut best_score = state.score();
    let mut trace = req.record_trace.then(|| vec![(0u64, best_score)]);
    let total: u64 = 1 << dim;
    for g in 1..total {
        // Flip the highest-index variable most often so x_0 changes least.
        let bit = dim - 1 - g.trailing_zeros() as usize;
        state.flip(bit);
        if g % 4096 == 0 {
            let x = state.x().clone();
            state.reset(x);
        }
        let s = state.score();
        let better = s < best_score - tol * (F::one() + best_score.abs());
        let tie = !better && (s - best_score).abs() <= tol * (F::one() + best_score.abs());
        if better || (tie && lex_less(state.x(), &best)) {
            if better {
                if let Some(t) = trace.as_mut() {
                    t.push((g, s));
                }
            }
            best = state.x().clone();
            best_score = s;
        }
    }
    let score = q.evaluate(&best);
    Ok(SolveResult {
        best,
        score,
        iterations: total,
        wall_seconds: clock.seconds(),
        trace,
    })
}

fn default_tenure(dim: usize) -> usize {
    (dim / 50).max(10).min(dim.saturating_sub(1))
}

/// Single-flip tabu search with aspiration and perturbation on stagnation.
///
/// Starts from `initial` (or a seeded random vector) and never returns a worse score.
pub fn tabu_search<F: Scalar>(req: &SolveRequest<'_, F>) -> Result<SolveResult<F>, SolverError> {
    req.check()?;
    let clock = Clock::new(req.budget.time_limit);
    let q = req.qubo;
    let dim = q.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let x0 = req.initial.clone().unwrap_or_else(|| random_vector(&mut rng, dim));
    let mut state = FieldState::new(q, x0);
    let mut best = state.x().clone();
    let mut best_score = state.score();
    let mut trace = req.record_trace.then(|| vec![(0u64, best_score)]);
    if dim == 0 {
        return Ok(SolveResult {
            best,
            score: best_score,
            iterations: 0,
            wall_seconds: clock.seconds(),
            trace,
        });
    }
    let tenure = req.params.tabu_tenure.unwrap_or_else(|| default_tenure(dim)) as u64;
    let stall_limit = req.params.tabu_stall.unwrap_or((20 * dim).max(200)) as u64;
    let mut tabu_until = vec![0u64; dim];
    let mut last_improvement = 0u64;
    let mut candidates = Vec::new();
    let mut it = 0u64;
    while it < req.budget.max_iterations {
        if it % 64 == 0 && clock.expired() {
            break;
        }
        it += 1;
        let current = state.score();
        let mut best_delta = F::infinity();
        candidates.clear();
        for i in 0..dim {
            let d = state.delta(i);
            let allowed = tabu_until[i] < it || current + d < best_score;
            if !allowed {
                continue;
            }
            if d < best_delta {
                best_delta = d;
                candidates.clear();
                candidates.push(i);
            } else if d == best_delta {
                candidates.push(i);
            }
        }
        let Some(&first) = candidates.first() else {
            // Everything tabu and nothing aspirates: release the oldest.
            let oldest = (0..dim).min_by_key(|&i| (tabu_until[i], i)).unwrap_or(0);
            tabu_until[oldest] = 0;
            continue;
        };
        let pick = if candidates.len() == 1 {
            first
        } else {
            candidates[rng.random_range(0..candidates.len())]
        };
        state.flip(pick);
        tabu_until[pick] = it + tenure;
        if state.score() < best_score {
            best_score = state.score();
            best = state.x().clone();
            last_improvement = it;
            if let Some(t) = trace.as_mut() {
                t.push((it, best_score));
            }
        } else if it - last_improvement >= stall_limit {
            let mut x = best.clone();
            let flips = (dim / 10).max(2).min(dim);
            for _ in 0..flips {
                x.flip(rng.random_range(0..dim));
            }
            state.reset(x);
            tabu_until.iter_mut().for_each(|t| *t = 0);
            last_improvement = it;
        }
    }
    let score = q.evaluate(&best);
    Ok(SolveResult {
        best,
        score,
        iterations: it,
        wall_seconds: clock.seconds(),
        trace,
    })
}

/// Temperature at which the mean positive single-flip delta of random vectors is
/// accepted with probability 0.8.
pub fn estimate_start_temperature<F: Scalar>(qubo: &Qubo<F>, rng: &mut ChaCha8Rng) -> F {
    let dim = qubo.dim();
    if dim == 0 {
        return F::one();
    }
    let mut sum = F::zero();
    let mut count = 0usize;
    for _ in 0..100 {
        let x = random_vector(rng, dim);
        let d = qubo.flip_delta(&x, rng.random_range(0..dim));
        if d > F::zero() {
            sum += d;
            count += 1;
        }
    }
    if count == 0 {
        return F::one();
    }
    let mean = sum / F::from_count(count);
    -mean / F::lit(0.8f64.ln())
}

/// Simulated annealing with geometric cooling and Metropolis acceptance over
/// single-bit flips, visiting variables in sweep order.
pub fn simulated_annealing<F: Scalar>(req: &SolveRequest<'_, F>) -> Result<SolveResult<F>, SolverError> {
    req.check()?;
    let clock = Clock::new(req.budget.time_limit);
    let q = req.qubo;
    let dim = q.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let x0 = req.initial.clone().unwrap_or_else(|| random_vector(&mut rng, dim));
    let t_start = match req.params.sa_t_start {
        Some(t) => t,
        None => estimate_start_temperature(q, &mut rng),
    };
    let t_end = req.params.sa_t_end.unwrap_or(t_start * F::lit(1e-3));
    if !(t_start > F::zero() && t_end > F::zero()) {
        return Err(SolverError::InvalidParams(format!(
            "temperatures must be positive (start {t_start}, end {t_end})"
        )));
    }
    let sweeps = req.params.sa_sweeps.max(1);
    let cooling = if sweeps > 1 {
        (t_end / t_start).powf(F::one() / F::from_count(sweeps - 1))
    } else {
        F::one()
    };
    let mut state = FieldState::new(q, x0);
    let mut best = state.x().clone();
    let mut best_score = state.score();
    let mut trace = req.record_trace.then(|| vec![(0u64, best_score)]);
    let mut temp = t_start;
    let mut it = 0u64;
    'outer: for _ in 0..sweeps {
        for i in 0..dim {
            if it >= req.budget.max_iterations || (it % 64 == 0 && clock.expired()) {
                break 'outer;
            }
            it += 1;
            let d = state.delta(i);
            let accept = d <= F::zero() || {
                let u: f64 = rng.random();
                u < (-(d / temp)).exp().to_f64_lossy()
            };
            if accept {
                state.flip(i);
                if state.score() < best_score {
                    best_score = state.score();
                    best = state.x().clone();
                    if let Some(t) = trace.as_mut() {
                        t.push((it, best_score));
                    }
                }
            }
        }
        temp *= cooling;
    }
    let score = q.evaluate(&best);
    Ok(SolveResult {
        best,
        score,
        iterations: it,
        wall_seconds: clock.seconds(),
        trace,
    })
}
