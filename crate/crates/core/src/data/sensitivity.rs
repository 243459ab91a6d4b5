use serde::{Deserialize, Serialize};

use super::DataError;
use crate::matrix::Matrix;

/// Projected gradient settings for fitting `Ψ ≈ Φ·S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityFitConfig {
    /// Initial step; `None` uses `1 / (2‖ΦᵀΦ‖_F)`.
    pub step: Option<f64>,
    /// Weight of the push towards `min(Φ·S) ≥ 0`.
    pub penalty: f64,
    pub max_iterations: usize,
    /// Stop when a step lowers the loss by less than this fraction.
    pub tolerance: f64,
    pub lower: f64,
    pub upper: f64,
    /// Try a Barzilai-Borwein step and backtrack until the loss does not increase.
    /// Without it the step is fixed and ten consecutive increases abort the fit.
    pub line_search: bool,
}

impl Default for SensitivityFitConfig {
    fn default() -> Self {
        Self {
            step: None,
            penalty: 1.0,
            max_iterations: 20_000,
            tolerance: 1e-12,
            lower: 0.0,
            upper: 1.0,
            line_search: true,
        }
    }
}

impl SensitivityFitConfig {
    fn check(&self) -> Result<(), DataError> {
        if self.step.is_some_and(|s| !(s > 0.0)) {
            return Err(DataError::BadFitConfig("step must be positive".into()));
        }
        if !(self.lower < self.upper) {
            return Err(DataError::BadFitConfig(format!(
                "box [{}, {}] is empty",
                self.lower, self.upper
            )));
        }
        if !(self.penalty >= 0.0) {
            return Err(DataError::BadFitConfig("penalty must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityFit {
    /// `(n + m) × L`.
    pub s: Matrix<f64>,
    /// Loss after the start and after every accepted step.
    pub loss_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

struct Problem<'a> {
    phi: &'a Matrix<f64>,
    psi: &'a Matrix<f64>,
    gram: Matrix<f64>,
    cross: Matrix<f64>,
    penalty: f64,
}

impl Problem<'_> {
    /// `‖ΦS − Ψ‖² + penalty·max(0, −min ΦS)` and the most violated entry of `ΦS`.
    fn loss(&self, s: &Matrix<f64>) -> (f64, Option<(usize, usize)>) {
        let fit = self.phi.matmul(s);
        let mut sq = 0.0;
        let mut worst = (0.0, None);
        for r in 0..fit.rows() {
            for c in 0..fit.cols() {
                let v = fit[(r, c)];
                let e = v - self.psi[(r, c)];
                sq += e * e;
                if v < worst.0 {
                    worst = (v, Some((r, c)));
                }
            }
        }
        (sq - self.penalty * worst.0, worst.1)
    }

    /// `2(ΦᵀΦS − ΦᵀΨ)` minus the penalty push on the violated column.
    fn direction(&self, s: &Matrix<f64>, violated: Option<(usize, usize)>) -> Matrix<f64> {
        let gs = self.gram.matmul(s);
        let mut d = Matrix::from_fn(s.rows(), s.cols(), |r, c| 2.0 * (gs[(r, c)] - self.cross[(r, c)]));
        if let Some((iota, kappa)) = violated {
            for r in 0..s.rows() {
                d[(r, kappa)] -= self.penalty * self.phi[(iota, r)];
            }
        }
        d
    }
}

/// Fits `S` in the box by projected gradient descent on `‖ΦS − Ψ‖²`, with a
/// penalty nudging the most negative entry of `ΦS` up. Starts at the rectangular
/// identity.
pub fn estimate_sensitivity(
    phi: &Matrix<f64>,
    psi: &Matrix<f64>,
    cfg: &SensitivityFitConfig,
) -> Result<SensitivityFit, DataError> {
    cfg.check()?;
    if phi.rows() != psi.rows() {
        return Err(DataError::BadFitConfig(format!(
            "{} production rows but {} flow rows",
            phi.rows(),
            psi.rows()
        )));
    }
    let pt = phi.transpose();
    let prob = Problem {
        phi,
        psi,
        gram: pt.matmul(phi),
        cross: pt.matmul(psi),
        penalty: cfg.penalty,
    };
    let project = |m: Matrix<f64>| m.map(|v| v.clamp(cfg.lower, cfg.upper));
    let mut s = project(Matrix::identity(phi.cols(), psi.cols()));
    let (mut loss, mut violated) = prob.loss(&s);
    let mut trace = vec![loss];
    let gram_norm = prob.gram.frobenius_sq().sqrt();
    let mut eta = cfg
        .step
        .unwrap_or(if gram_norm > 0.0 { 0.5 / gram_norm } else { 1.0 });
    let mut increases = 0;
    let mut converged = false;
    let mut it = 0;
    // Iterate and direction at the last accepted step, for the Barzilai-Borwein step.
    let mut prev: Option<(Matrix<f64>, Matrix<f64>)> = None;
    while it < cfg.max_iterations {
        it += 1;
        let dir = prob.direction(&s, violated);
        if let Some((ps, pd)) = prev.take() {
            let (mut ss, mut sy) = (0.0, 0.0);
            for ((a, b), (c, d)) in s.iter().zip(ps.iter()).zip(dir.iter().zip(pd.iter())) {
                ss += (a - b) * (a - b);
                sy += (a - b) * (c - d);
            }
            if ss > 0.0 && sy > 0.0 {
                eta = ss / sy;
            }
        }
        let step = |eta: f64| {
            let cand = project(Matrix::from_fn(s.rows(), s.cols(), |r, c| s[(r, c)] - eta * dir[(r, c)]));
            let (l, v) = prob.loss(&cand);
            (cand, l, v)
        };
        let (cand, new_loss, new_violated) = if cfg.line_search {
            let mut found = None;
            for _ in 0..60 {
                let (cand, l, v) = step(eta);
                if l <= loss {
                    found = Some((cand, l, v));
                    break;
                }
                eta *= 0.5;
            }
            match found {
                Some(f) => f,
                None => {
                    converged = true;
                    break;
                }
            }
        } else {
            step(eta)
        };
        if !cfg.line_search {
            increases = if new_loss > loss { increases + 1 } else { 0 };
            if increases >= 10 || !new_loss.is_finite() {
                return Err(DataError::Diverged {
                    iterations: it,
                    loss: new_loss,
                });
            }
        }
        let gain = loss - new_loss;
        let moved = cand != s;
        let old = std::mem::replace(&mut s, cand);
        violated = new_violated;
        let previous = loss;
        loss = new_loss;
        trace.push(loss);
        if cfg.line_search {
            eta *= 2.0;
            prev = Some((old, dir));
        }
        if !moved || loss == 0.0 || (gain >= 0.0 && gain <= cfg.tolerance * previous) {
            converged = true;
            break;
        }
    }
    Ok(SensitivityFit {
        s,
        loss_trace: trace,
        iterations: it,
        converged,
    })
}
