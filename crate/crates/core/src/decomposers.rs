//! Clamping decomposers: pick `m` free variables, fix the rest at their current
//! values, solve the reduced form and merge the result back when it does not worsen
//! the full score. Unlike alpha-expansion these may leave the one-hot set.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::BitVector;
use crate::qubo::{Clamped, Qubo, QuboError};
use crate::solvers::{self, Budget, SolveRequest, SolveResult, SolverError};
use crate::Scalar;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DecomposeError {
    #[error("sub-problem size {m} outside 1..={dim}")]
    BadSize { m: usize, dim: usize },
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Random,
    Score,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeLoopConfig {
    pub subproblem_size: usize,
    /// Iteration budget for tabu search when the sub-problem is too large to enumerate.
    pub sub_iterations: u64,
    pub max_steps: Option<u64>,
    pub time_limit: Option<Duration>,
    pub seed: u64,
}

impl Default for DecomposeLoopConfig {
    fn default() -> Self {
        Self {
            subproblem_size: 16,
            sub_iterations: 2_000,
            max_steps: None,
            time_limit: None,
            seed: 0,
        }
    }
}

fn clamp_except<F: Scalar>(q: &Qubo<F>, x: &BitVector, free: &[usize]) -> Result<Clamped<F>, QuboError> {
    let mut is_free = vec![false; q.dim()];
    for &i in free {
        is_free[i] = true;
    }
    let fixed: BTreeMap<usize, bool> = (0..q.dim()).filter(|&i| !is_free[i]).map(|i| (i, x.get(i))).collect();
    q.clamp(&fixed)
}

fn check_size(m: usize, dim: usize) -> Result<(), DecomposeError> {
    if m == 0 || m > dim {
        return Err(DecomposeError::BadSize { m, dim });
    }
    Ok(())
}

/// `m` variables drawn uniformly without replacement; the rest clamped to `x`.
pub fn random_subproblem<F: Scalar, R: Rng>(
    rng: &mut R,
    q: &Qubo<F>,
    x: &BitVector,
    m: usize,
) -> Result<Clamped<F>, DecomposeError> {
    check_size(m, q.dim())?;
    let mut free = rand::seq::index::sample(rng, q.dim(), m).into_vec();
    free.sort_unstable();
    Ok(clamp_except(q, x, &free)?)
}

/// Variables ordered by how much a single flip would lower the score, best first,
/// ties by index.
pub fn rank_by_gain<F: Scalar>(q: &Qubo<F>, x: &BitVector, exclude: &[bool]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..q.dim()).filter(|&i| !exclude.get(i).copied().unwrap_or(false)).collect();
    let delta: Vec<F> = (0..q.dim()).map(|i| q.flip_delta(x, i)).collect();
    idx.sort_by(|&a, &b| delta[a].partial_cmp(&delta[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx
}

/// Grows a set of `m` variables breadth-first over the couplings of `q`, strongest
/// coupling first. Seeds are taken in [`rank_by_gain`] order among the variables not
/// in `exclude`; growth itself ignores `exclude` so a seed keeps its partners.
pub fn grow_subproblem<F: Scalar>(q: &Qubo<F>, x: &BitVector, exclude: &[bool], m: usize) -> Vec<usize> {
    let ranked = rank_by_gain(q, x, &[]);
    let mut pos = vec![0usize; q.dim()];
    for (r, &i) in ranked.iter().enumerate() {
        pos[i] = r;
    }
    let mut taken = vec![false; q.dim()];
    let mut free = Vec::with_capacity(m);
    let mut seeds = ranked.iter().copied().filter(|&i| !exclude.get(i).copied().unwrap_or(false));
    let mut queue = VecDeque::new();
    while free.len() < m {
        let u = match queue.pop_front() {
            Some(u) => u,
            None => match seeds.by_ref().find(|&i| !taken[i]).or_else(|| ranked.iter().copied().find(|&i| !taken[i])) {
                Some(u) => {
                    taken[u] = true;
                    u
                }
                None => break,
            },
        };
        free.push(u);
        let mut next: Vec<(usize, F)> = q.neighbors(u).filter(|&(v, w)| !taken[v] && w != F::zero()).collect();
        next.sort_by(|a, b| {
            b.1.abs()
                .partial_cmp(&a.1.abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(pos[a.0].cmp(&pos[b.0]))
        });
        for (v, _) in next {
            taken[v] = true;
            queue.push_back(v);
        }
    }
    free
}

/// Sub-problem grown by [`grow_subproblem`] from the best single flips; the rest
/// clamped to `x`.
pub fn score_subproblem<F: Scalar>(q: &Qubo<F>, x: &BitVector, m: usize) -> Result<Clamped<F>, DecomposeError> {
    check_size(m, q.dim())?;
    let mut free = grow_subproblem(q, x, &[], m);
    free.sort_unstable();
    Ok(clamp_except(q, x, &free)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord<F> {
    pub step: u64,
    pub accepted: bool,
    pub score: F,
}

#[derive(Debug, Clone)]
pub struct DecomposeResult<F> {
    pub result: SolveResult<F>,
    pub steps: u64,
    pub history: Vec<StepRecord<F>>,
}

impl<F: Scalar> DecomposeResult<F> {
    /// Same layout as the alpha-expansion progress file; each step is one row.
    pub fn write_progress<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,accepted,score")?;
        for r in &self.history {
            writeln!(w, "{},{},{}", r.step, r.accepted as u8, r.score)?;
        }
        Ok(())
    }
}

fn solve_sub<F: Scalar>(sub: &Qubo<F>, start: BitVector, iterations: u64, seed: u64) -> Result<BitVector, SolverError> {
    let req = SolveRequest::new(sub, seed).with_initial(start);
    if sub.dim() <= 20 {
        let r = solvers::brute_force(&req)?;
        return Ok(r.best);
    }
    Ok(solvers::tabu_search(&req.with_budget(Budget::iterations(iterations)))?.best)
}

/// Repeatedly decomposes at the current vector, solves the sub-problem and merges
/// the assignment when the full score does not increase.
///
/// The score strategy excludes recently freed variables so consecutive steps do not
/// keep selecting the same block once it is locally optimal.
pub fn decompose_loop<F: Scalar>(
    q: &Qubo<F>,
    x0: &BitVector,
    strategy: Strategy,
    cfg: &DecomposeLoopConfig,
) -> Result<DecomposeResult<F>, DecomposeError> {
    let start = Instant::now();
    let dim = q.dim();
    check_size(cfg.subproblem_size, dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = x0.clone();
    let mut score = q.evaluate(&x);
    let mut trace = vec![(0u64, score)];
    let mut history = Vec::new();
    let mut excluded = vec![false; dim];
    let mut excluded_count = 0usize;
    let mut steps = 0u64;
    loop {
        if cfg.max_steps.is_some_and(|m| steps >= m) || cfg.time_limit.is_some_and(|l| start.elapsed() >= l) {
            break;
        }
        let clamped = match strategy {
            Strategy::Random => random_subproblem(&mut rng, q, &x, cfg.subproblem_size)?,
            Strategy::Score => {
                if dim - excluded_count < cfg.subproblem_size {
                    excluded.iter_mut().for_each(|e| *e = false);
                    excluded_count = 0;
                }
                let mut free = grow_subproblem(q, &x, &excluded, cfg.subproblem_size);
                for &i in &free {
                    if !excluded[i] {
                        excluded[i] = true;
                        excluded_count += 1;
                    }
                }
                free.sort_unstable();
                clamp_except(q, &x, &free)?
            }
        };
        steps += 1;
        let local = BitVector::from_bits(clamped.remap.iter().map(|&i| x.get(i)).collect());
        let sol = solve_sub(&clamped.qubo, local, cfg.sub_iterations, rng.random())?;
        let mut candidate = x.clone();
        for (j, &i) in clamped.remap.iter().enumerate() {
            candidate.set(i, sol.get(j));
        }
        let new_score = clamped.qubo.evaluate(&sol);
        let accepted = new_score <= score;
        if accepted {
            if new_score < score {
                trace.push((steps, new_score));
            }
            x = candidate;
            score = new_score;
        }
        history.push(StepRecord { step: steps, accepted, score });
    }
    let score = q.evaluate(&x);
    Ok(DecomposeResult {
        result: SolveResult {
            best: x,
            score,
            iterations: steps,
            wall_seconds: start.elapsed().as_secs_f64(),
            trace: Some(trace),
        },
        steps,
        history,
    })
}
