//! Sparse symmetric quadratic binary forms.
//!
//! A [`Qubo`] represents `offset + Σ_i d_i x_i + Σ_{i<j} q_ij x_i x_j` over binary
//! `x`. Off-diagonal coefficients are stored once per unordered pair, already merged
//! (`q_ij = Q_ij + Q_ji` of a full matrix). Internally the pairs are kept in a
//! symmetric compressed-row adjacency so a variable's neighbourhood can be scanned in
//! `O(degree)`.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::matrix::Matrix;
use crate::model::BitVector;
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuboError {
    #[error("variable index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("degenerate score range: E_min = E_max = {0}")]
    DegenerateRange(f64),
    #[error("triplet format error on line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Accumulates coefficients; repeated entries for the same pair are summed.
#[derive(Debug, Clone)]
pub struct QuboBuilder<F> {
    dim: usize,
    offset: F,
    diag: Vec<F>,
    pairs: HashMap<(usize, usize), F>,
}

impl<F: Scalar> QuboBuilder<F> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            offset: F::zero(),
            diag: vec![F::zero(); dim],
            pairs: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn add_offset(&mut self, v: F) -> &mut Self {
        self.offset += v;
        self
    }

    pub fn add_linear(&mut self, i: usize, v: F) -> &mut Self {
        assert!(i < self.dim, "linear index {i} out of range {}", self.dim);
        self.diag[i] += v;
        self
    }

    /// Adds `v·x_i·x_j`. `i == j` lands on the diagonal since `x_i² = x_i`.
    pub fn add_quadratic(&mut self, i: usize, j: usize, v: F) -> &mut Self {
        assert!(
            i < self.dim && j < self.dim,
            "pair ({i},{j}) out of range {}",
            self.dim
        );
        if i == j {
            self.diag[i] += v;
        } else {
            *self.pairs.entry((i.min(j), i.max(j))).or_insert_with(F::zero) += v;
        }
        self
    }

    pub fn add_qubo(&mut self, weight: F, q: &Qubo<F>) -> Result<&mut Self, QuboError> {
        if q.dim != self.dim {
            return Err(QuboError::DimensionMismatch {
                left: self.dim,
                right: q.dim,
            });
        }
        self.offset += weight * q.offset;
        for (i, d) in q.diag.iter().enumerate() {
            self.diag[i] += weight * *d;
        }
        for (i, j, v) in q.pairs() {
            *self.pairs.entry((i, j)).or_insert_with(F::zero) += weight * v;
        }
        Ok(self)
    }

    pub fn build(self) -> Qubo<F> {
        let mut entries: Vec<((usize, usize), F)> = self
            .pairs
            .into_iter()
            .filter(|(_, v)| *v != F::zero())
            .collect();
        entries.sort_unstable_by_key(|(k, _)| *k);
        Qubo::from_sorted_pairs(self.dim, self.offset, self.diag, &entries)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Qubo<F> {
    dim: usize,
    offset: F,
    diag: Vec<F>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<F>,
}

/// Result of [`Qubo::clamp`]: the reduced form and, for each free variable, its
/// index in the original form.
#[derive(Debug, Clone)]
pub struct Clamped<F> {
    pub qubo: Qubo<F>,
    pub remap: Vec<usize>,
}

impl<F: Scalar> Qubo<F> {
    pub fn zero(dim: usize) -> Self {
        QuboBuilder::new(dim).build()
    }

    fn from_sorted_pairs(dim: usize, offset: F, diag: Vec<F>, entries: &[((usize, usize), F)]) -> Self {
        let mut degree = vec![0usize; dim];
        for &((i, j), _) in entries {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        row_ptr.push(0);
        for d in &degree {
            row_ptr.push(row_ptr.last().unwrap() + d);
        }
        let nnz = *row_ptr.last().unwrap();
        let mut cols = vec![0usize; nnz];
        let mut vals = vec![F::zero(); nnz];
        let mut fill = row_ptr[..dim].to_vec();
        // Entries sorted by (i, j): row i receives its j's in ascending order, and row
        // j receives its i's in ascending order as well, so rows end up sorted.
        for &((i, j), v) in entries {
            cols[fill[j]] = i;
            vals[fill[j]] = v;
            fill[j] += 1;
        }
        for &((i, j), v) in entries {
            cols[fill[i]] = j;
            vals[fill[i]] = v;
            fill[i] += 1;
        }
        let mut diag = diag;
        for d in diag.iter_mut() {
            if *d == F::zero() {
                *d = F::zero(); // normalise -0.0
            }
        }
        Self {
            dim,
            offset,
            diag,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Canonical form of an arbitrary square matrix `A` (`xᵀAx`).
    pub fn from_dense(a: &Matrix<F>) -> Self {
        assert_eq!(a.rows(), a.cols(), "QUBO matrix must be square");
        let mut b = QuboBuilder::new(a.rows());
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                let v = a[(i, j)];
                if v != F::zero() {
                    b.add_quadratic(i, j, v);
                }
            }
        }
        b.build()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn offset(&self) -> F {
        self.offset
    }

    pub fn linear(&self, i: usize) -> F {
        self.diag[i]
    }

    /// Number of stored off-diagonal pairs.
    pub fn num_pairs(&self) -> usize {
        self.cols.len() / 2
    }

    /// Neighbours of `i` with their merged coupling.
    #[inline]
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, F)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[s..e].iter().copied().zip(self.vals[s..e].iter().copied())
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// Merged coefficient of `x_i x_j` (`i == j` gives the linear term).
    pub fn coeff(&self, i: usize, j: usize) -> F {
        if i == j {
            return self.diag[i];
        }
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[s..e].binary_search(&j) {
            Ok(p) => self.vals[s + p],
            Err(_) => F::zero(),
        }
    }

    /// Off-diagonal pairs `(i, j, q_ij)` with `i < j`, in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, F)> + '_ {
        (0..self.dim).flat_map(move |i| {
            self.neighbors(i)
                .filter(move |&(j, _)| j > i)
                .map(move |(j, v)| (i, j, v))
        })
    }

    /// All non-zero coefficients `(i, j, v)` with `i <= j`, diagonal included.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, F)> + '_ {
        (0..self.dim).flat_map(move |i| {
            let d = self.diag[i];
            std::iter::once((i, i, d))
                .filter(|&(_, _, v)| v != F::zero())
                .chain(
                    self.neighbors(i)
                        .filter(move |&(j, _)| j > i)
                        .map(move |(j, v)| (i, j, v)),
                )
        })
    }

    pub fn evaluate(&self, x: &BitVector) -> F {
        assert_eq!(x.len(), self.dim, "bit vector length must equal QUBO dimension");
        let mut total = self.offset;
        for i in x.ones() {
            total += self.diag[i];
            for (j, v) in self.neighbors(i) {
                if j > i && x.get(j) {
                    total += v;
                }
            }
        }
        total
    }

    /// `d_i + Σ_j q_ij x_j`: the change in score from setting `x_i` to one with all
    /// other bits held.
    #[inline]
    pub fn local_field(&self, x: &BitVector, i: usize) -> F {
        let mut f = self.diag[i];
        for (j, v) in self.neighbors(i) {
            if x.get(j) {
                f += v;
            }
        }
        f
    }

    /// Score change from flipping bit `i`, in `O(degree(i))`.
    #[inline]
    pub fn flip_delta(&self, x: &BitVector, i: usize) -> F {
        let f = self.local_field(x, i);
        if x.get(i) {
            -f
        } else {
            f
        }
    }

    /// Fixes the variables in `fixed` and folds them into the linear terms and offset.
    pub fn clamp(&self, fixed: &BTreeMap<usize, bool>) -> Result<Clamped<F>, QuboError> {
        if let Some((&index, _)) = fixed.iter().find(|(&i, _)| i >= self.dim) {
            return Err(QuboError::IndexOutOfRange {
                index,
                dim: self.dim,
            });
        }
        let mut new_index = vec![usize::MAX; self.dim];
        let mut remap = Vec::with_capacity(self.dim - fixed.len());
        for i in 0..self.dim {
            if !fixed.contains_key(&i) {
                new_index[i] = remap.len();
                remap.push(i);
            }
        }
        let mut b = QuboBuilder::new(remap.len());
        b.add_offset(self.offset);
        for (&i, &bit) in fixed {
            if bit {
                b.add_offset(self.diag[i]);
            }
        }
        for (new_i, &i) in remap.iter().enumerate() {
            b.add_linear(new_i, self.diag[i]);
        }
        for (i, j, v) in self.pairs() {
            match (fixed.get(&i), fixed.get(&j)) {
                (None, None) => {
                    b.add_quadratic(new_index[i], new_index[j], v);
                }
                (None, Some(&true)) => {
                    b.add_linear(new_index[i], v);
                }
                (Some(&true), None) => {
                    b.add_linear(new_index[j], v);
                }
                (Some(&true), Some(&true)) => {
                    b.add_offset(v);
                }
                _ => {}
            }
        }
        Ok(Clamped {
            qubo: b.build(),
            remap,
        })
    }

    /// `Σ w_i·Q_i`; all terms must share one dimension.
    pub fn weighted_sum(terms: &[(F, &Qubo<F>)]) -> Result<Qubo<F>, QuboError> {
        let dim = terms.first().map_or(0, |(_, q)| q.dim);
        let mut b = QuboBuilder::new(dim);
        for (w, q) in terms {
            b.add_qubo(*w, q)?;
        }
        Ok(b.build())
    }

    pub fn scaled(&self, w: F) -> Qubo<F> {
        if w == F::zero() {
            return Qubo::zero(self.dim);
        }
        let mut out = self.clone();
        out.offset *= w;
        out.diag.iter_mut().for_each(|d| *d *= w);
        out.vals.iter_mut().for_each(|v| *v *= w);
        out
    }

    /// Affine rescaling onto `[0, 1]` for vectors with exactly `ones_count` set bits:
    /// `(Q − (E_min/ones_count)·I) / (E_max − E_min)`.
    ///
    /// On vectors with a different number of set bits the shift is not `E_min`, so the
    /// result is only meaningful on one-hot feasible solutions.
    pub fn normalize_range(&self, e_min: F, e_max: F, ones_count: usize) -> Result<Qubo<F>, QuboError> {
        let range = e_max - e_min;
        if range == F::zero() || !range.is_finite() {
            return Err(QuboError::DegenerateRange(e_min.to_f64_lossy()));
        }
        assert!(ones_count > 0, "ones_count must be positive");
        let shift = e_min / F::from_count(ones_count);
        let mut out = self.clone();
        for d in out.diag.iter_mut() {
            *d = (*d - shift) / range;
        }
        for v in out.vals.iter_mut() {
            *v /= range;
        }
        out.offset /= range;
        Ok(out)
    }

    /// Writes the header `dim offset` followed by one `i j value` line per term.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<(), QuboError> {
        let io = |e: std::io::Error| QuboError::Io(e.to_string());
        writeln!(w, "{} {}", self.dim, self.offset.to_f64_lossy()).map_err(io)?;
        for (i, j, v) in self.terms() {
            writeln!(w, "{i} {j} {}", v.to_f64_lossy()).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_triplets<R: BufRead>(r: R) -> Result<Qubo<F>, QuboError> {
        let mut lines = r
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l))
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty() && !s.starts_with('#')));
        let fmt = |line: usize, msg: &str| QuboError::Format {
            line,
            msg: msg.to_string(),
        };
        let (hline, header) = lines.next().ok_or_else(|| fmt(1, "missing header"))?;
        let header = header.map_err(|e| QuboError::Io(e.to_string()))?;
        let mut parts = header.split_whitespace();
        let dim: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fmt(hline, "bad dimension"))?;
        let offset: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fmt(hline, "bad offset"))?;
        let mut b = QuboBuilder::new(dim);
        b.add_offset(F::lit(offset));
        for (n, line) in lines {
            let line = line.map_err(|e| QuboError::Io(e.to_string()))?;
            let mut p = line.split_whitespace();
            let i: usize = p.next().and_then(|s| s.parse().ok()).ok_or_else(|| fmt(n, "bad row index"))?;
            let j: usize = p.next().and_then(|s| s.parse().ok()).ok_or_else(|| fmt(n, "bad column index"))?;
            let v: f64 = p.next().and_then(|s| s.parse().ok()).ok_or_else(|| fmt(n, "bad value"))?;
            if i >= dim || j >= dim {
                return Err(QuboError::IndexOutOfRange { index: i.max(j), dim });
            }
            b.add_quadratic(i, j, F::lit(v));
        }
        Ok(b.build())
    }
}
