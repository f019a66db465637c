// SPDX-License-Identifier: Apache-2.0

//! Harmonic label propagation.
//!
//! The transition matrix is built in two steps: `T_ij = A_ij / Σ_f A_fj`
//! (column normalization), then `T̄` is `T` with each row rescaled to sum to one.
//! After reordering nodes so the labeled set comes first, `T̄` splits into the
//! blocks `T̄_ll, T̄_lu, T̄_ul, T̄_uu`, and the unlabeled class distributions solve
//!
//! ```text
//! (I - T̄_uu) Y_U = T̄_ul Y_L
//! ```
//!
//! which is the fixed point of `Y ← T̄ Y` with the labeled rows clamped.

use nalgebra::{DMatrix, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeSample};

/// Floor applied to predicted probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// How the row-stochastic matrix is derived from the adjacency matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionKind {
    /// Column-normalize `A`, then row-normalize the result.
    #[default]
    AsWritten,
    /// Plain random walk, `A_ij / deg(i)`.
    RandomWalk,
}

impl std::str::FromStr for TransitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aswritten" => Ok(TransitionKind::AsWritten),
            "randomwalk" => Ok(TransitionKind::RandomWalk),
            other => Err(Error::validation(format!(
                "unknown transition kind `{other}` (expected aswritten or randomwalk)"
            ))),
        }
    }
}

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBlock {
    n_rows: usize,
    n_cols: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseBlock {
    fn with_capacity(n_rows: usize, n_cols: usize) -> Self {
        SparseBlock {
            n_rows: 0,
            n_cols,
            offsets: {
                let mut v = Vec::with_capacity(n_rows + 1);
                v.push(0);
                v
            },
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (c, v) in entries {
            self.cols.push(c);
            self.vals.push(v);
        }
        self.offsets.push(self.cols.len());
        self.n_rows += 1;
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, row) in dense.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        dense
    }

    /// `self · rhs` for a dense row-major `n_cols × k` right-hand side.
    fn mul_dense(&self, rhs: &[f64], k: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n_rows {
            let dst = &mut out[i * k..(i + 1) * k];
            for (j, w) in self.row(i) {
                for (d, s) in dst.iter_mut().zip(&rhs[j * k..(j + 1) * k]) {
                    *d += w * s;
                }
            }
        }
    }
}

/// Row-stochastic N×N transition matrix `T̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    matrix: SparseBlock,
    kind: TransitionKind,
}

impl TransitionMatrix {
    pub fn new(graph: &Graph, kind: TransitionKind) -> Result<Self> {
        let isolated = graph.isolated_nodes();
        if !isolated.is_empty() {
            return Err(Error::IsolatedNodes(isolated));
        }
        let n = graph.n_nodes();
        let degree: Vec<f64> = (0..n).map(|i| graph.weighted_degree(i)).collect();
        let mut matrix = SparseBlock::with_capacity(n, n);
        for i in 0..n {
            let raw: Vec<(usize, f64)> = match kind {
                TransitionKind::AsWritten => graph.neighbors(i).map(|(j, a)| (j, a / degree[j])).collect(),
                TransitionKind::RandomWalk => graph.neighbors(i).map(|(j, a)| (j, a / degree[i])).collect(),
            };
            let total: f64 = raw.iter().map(|&(_, v)| v).sum();
            matrix.push_row(raw.into_iter().map(|(j, v)| (j, v / total)));
        }
        Ok(TransitionMatrix { matrix, kind })
    }

    pub fn n_nodes(&self) -> usize {
        self.matrix.n_rows
    }

    pub fn kind(&self) -> TransitionKind {
        self.kind
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.matrix.row(i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.matrix.to_dense()
    }
}

/// Transition matrix exactly as the two-step normalization defines it.
pub fn transition_matrix(graph: &Graph) -> Result<TransitionMatrix> {
    TransitionMatrix::new(graph, TransitionKind::AsWritten)
}

/// `T̄` reordered labeled-first and cut after the l-th row and column.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSplit {
    pub t_ll: SparseBlock,
    pub t_lu: SparseBlock,
    pub t_ul: SparseBlock,
    pub t_uu: SparseBlock,
    pub sample: NodeSample,
}

impl BlockSplit {
    /// Dense `T̄` in the original node order.
    pub fn reassemble(&self) -> Vec<Vec<f64>> {
        let n = self.sample.n_nodes();
        let (lab, unl) = (self.sample.labeled(), self.sample.unlabeled());
        let mut dense = vec![vec![0.0; n]; n];
        let blocks = [
            (&self.t_ll, lab, lab),
            (&self.t_lu, lab, unl),
            (&self.t_ul, unl, lab),
            (&self.t_uu, unl, unl),
        ];
        for (block, rows, cols) in blocks {
            for (r, &i) in rows.iter().enumerate() {
                for (c, v) in block.row(r) {
                    dense[i][cols[c]] = v;
                }
            }
        }
        dense
    }
}

pub fn split_blocks(t: &TransitionMatrix, sample: &NodeSample) -> Result<BlockSplit> {
    let n = t.n_nodes();
    if sample.n_nodes() != n {
        return Err(Error::validation(format!(
            "sample covers {} nodes but the matrix has {n}",
            sample.n_nodes()
        )));
    }
    // position of each node within its own side of the split
    let mut side = vec![(false, 0usize); n];
    for (p, &i) in sample.labeled().iter().enumerate() {
        side[i] = (true, p);
    }
    for (p, &i) in sample.unlabeled().iter().enumerate() {
        side[i] = (false, p);
    }
    let (l, u) = (sample.labeled().len(), sample.unlabeled().len());
    let mut t_ll = SparseBlock::with_capacity(l, l);
    let mut t_lu = SparseBlock::with_capacity(l, u);
    let mut t_ul = SparseBlock::with_capacity(u, l);
    let mut t_uu = SparseBlock::with_capacity(u, u);
    for (rows, to_l, to_u) in [
        (sample.labeled(), &mut t_ll, &mut t_lu),
        (sample.unlabeled(), &mut t_ul, &mut t_uu),
    ] {
        for &i in rows {
            let (mut into_l, mut into_u) = (Vec::new(), Vec::new());
            for (j, v) in t.row(i) {
                match side[j] {
                    (true, p) => into_l.push((p, v)),
                    (false, p) => into_u.push((p, v)),
                }
            }
            to_l.push_row(into_l);
            to_u.push_row(into_u);
        }
    }
    Ok(BlockSplit {
        t_ll,
        t_lu,
        t_ul,
        t_uu,
        sample: sample.clone(),
    })
}

/// Row-major `rows × K` matrix of class probabilities (or indicators).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDistribution {
    n_rows: usize,
    n_classes: usize,
    probs: Vec<f64>,
}

impl LabelDistribution {
    pub fn new(n_rows: usize, n_classes: usize, probs: Vec<f64>) -> Result<Self> {
        if n_classes == 0 || probs.len() != n_rows * n_classes {
            return Err(Error::validation(format!(
                "expected {n_rows}x{n_classes} probabilities, got {}",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::validation("probabilities must be finite and nonnegative"));
        }
        Ok(LabelDistribution {
            n_rows,
            n_classes,
            probs,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks_exact(self.n_classes)
    }

    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.probs[i * self.n_classes + c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Classes with an all-zero column.
    pub fn empty_classes(&self) -> Vec<usize> {
        (0..self.n_classes)
            .filter(|&c| self.rows().all(|r| r[c] == 0.0))
            .collect()
    }
}

/// Indicator rows for `labels`.
pub fn one_hot(labels: &[usize], n_classes: usize) -> Result<LabelDistribution> {
    let mut probs = vec![0.0; labels.len() * n_classes];
    for (i, &c) in labels.iter().enumerate() {
        if c >= n_classes {
            return Err(Error::validation(format!(
                "label {c} outside [0, {n_classes})"
            )));
        }
        probs[i * n_classes + c] = 1.0;
    }
    LabelDistribution::new(labels.len(), n_classes, probs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    /// Dense LU up to `dense_cutover` unknown rows, fixed-point iteration beyond.
    Auto,
    Direct,
    FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub method: SolveMethod,
    pub dense_cutover: usize,
    /// Relative max-norm change that ends fixed-point iteration.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: SolveMethod::Auto,
            dense_cutover: 4000,
            tolerance: 1e-10,
            max_iterations: 100_000,
        }
    }
}

/// Output of one propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    /// Floored, row-normalized `Y_U`, rows in `sample.unlabeled()` order.
    pub y_u: LabelDistribution,
    /// Positions (within the unlabeled set) with no path to any labeled node.
    pub unreachable: Vec<usize>,
    /// Classes with no labeled representative.
    pub absent_classes: Vec<usize>,
    pub method: SolveMethod,
    pub warnings: Vec<String>,
}

enum Factorization {
    Dense(LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Iterative { t_rr: SparseBlock },
}

/// Prepared solver for one block split, reusable across several `Y_L`.
pub struct Propagator<'a> {
    blocks: &'a BlockSplit,
    /// Unlabeled positions that can reach a labeled node.
    reachable: Vec<usize>,
    unreachable: Vec<usize>,
    /// `T̄_ul` restricted to reachable rows.
    t_rl: SparseBlock,
    factorization: Factorization,
    options: SolverOptions,
}

/// Unlabeled positions grouped by whether their component of the unlabeled
/// subgraph touches a labeled node.
fn anchored_components(blocks: &BlockSplit) -> (Vec<usize>, Vec<usize>) {
    let u = blocks.t_uu.n_rows();
    let mut component = vec![usize::MAX; u];
    let mut anchored = Vec::new();
    let mut stack = Vec::new();
    for start in 0..u {
        if component[start] != usize::MAX {
            continue;
        }
        let id = anchored.len();
        let mut touches_labeled = false;
        component[start] = id;
        stack.push(start);
        while let Some(v) = stack.pop() {
            touches_labeled |= blocks.t_ul.row(v).next().is_some();
            for (w, _) in blocks.t_uu.row(v) {
                if component[w] == usize::MAX {
                    component[w] = id;
                    stack.push(w);
                }
            }
        }
        anchored.push(touches_labeled);
    }
    (0..u).partition(|&v| anchored[component[v]])
}

impl<'a> Propagator<'a> {
    pub fn new(blocks: &'a BlockSplit, options: SolverOptions) -> Result<Self> {
        let (reachable, unreachable) = anchored_components(blocks);
        let mut reduced = vec![usize::MAX; blocks.t_uu.n_rows()];
        for (r, &v) in reachable.iter().enumerate() {
            reduced[v] = r;
        }
        let nr = reachable.len();
        let mut t_rr = SparseBlock::with_capacity(nr, nr);
        let mut t_rl = SparseBlock::with_capacity(nr, blocks.t_ul.n_cols());
        for &v in &reachable {
            // unreachable positions lie in other components, so no entry is dropped here
            t_rr.push_row(blocks.t_uu.row(v).map(|(w, x)| (reduced[w], x)));
            t_rl.push_row(blocks.t_ul.row(v));
        }

        let dense = match options.method {
            SolveMethod::Direct => true,
            SolveMethod::FixedPoint => false,
            SolveMethod::Auto => nr <= options.dense_cutover,
        };
        let factorization = if dense {
            let mut m = DMatrix::<f64>::identity(nr, nr);
            for r in 0..nr {
                for (c, x) in t_rr.row(r) {
                    m[(r, c)] -= x;
                }
            }
            let lu = m.lu();
            if !lu.is_invertible() {
                return Err(Error::Numerical(
                    "I - T_uu is singular on the reachable unlabeled nodes".into(),
                ));
            }
            Factorization::Dense(lu)
        } else {
            Factorization::Iterative { t_rr }
        };
        Ok(Propagator {
            blocks,
            reachable,
            unreachable,
            t_rl,
            factorization,
            options,
        })
    }

    pub fn unreachable(&self) -> &[usize] {
        &self.unreachable
    }

    fn iterate(&self, t_rr: &SparseBlock, b: &[f64], k: usize) -> Result<Vec<f64>> {
        let mut y = vec![0.0; b.len()];
        let mut next = vec![0.0; b.len()];
        for _ in 0..self.options.max_iterations {
            t_rr.mul_dense(&y, k, &mut next);
            next.iter_mut().zip(b).for_each(|(v, bi)| *v += bi);
            let change = next
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let scale = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            std::mem::swap(&mut y, &mut next);
            if change <= self.options.tolerance * scale.max(f64::MIN_POSITIVE) {
                return Ok(y);
            }
        }
        Err(Error::Numerical(format!(
            "fixed-point propagation did not reach relative tolerance {:e} in {} iterations",
            self.options.tolerance, self.options.max_iterations
        )))
    }

    /// Solves for `Y_U` given the labeled distributions `y_l`.
    pub fn solve(&self, y_l: &LabelDistribution) -> Result<Propagation> {
        let l = self.blocks.t_ul.n_cols();
        if y_l.n_rows() != l {
            return Err(Error::validation(format!(
                "Y_L has {} rows but {l} nodes are labeled",
                y_l.n_rows()
            )));
        }
        let k = y_l.n_classes();
        let nr = self.reachable.len();
        let mut b = vec![0.0; nr * k];
        self.t_rl.mul_dense(y_l.as_slice(), k, &mut b);

        let (solution, method) = match &self.factorization {
            // every unlabeled node is unreachable; nalgebra cannot solve a 0x0 system
            Factorization::Dense(_) if nr == 0 => (Vec::new(), SolveMethod::Direct),
            Factorization::Dense(lu) => {
                let rhs = DMatrix::from_row_slice(nr, k, &b);
                let x = lu
                    .solve(&rhs)
                    .ok_or_else(|| Error::Numerical("LU solve failed".into()))?;
                let mut out = vec![0.0; nr * k];
                for r in 0..nr {
                    for c in 0..k {
                        out[r * k + c] = x[(r, c)];
                    }
                }
                (out, SolveMethod::Direct)
            }
            Factorization::Iterative { t_rr } => (self.iterate(t_rr, &b, k)?, SolveMethod::FixedPoint),
        };
        if solution.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("propagation produced non-finite values".into()));
        }

        let u = self.blocks.t_uu.n_rows();
        let mut probs = vec![1.0 / k as f64; u * k];
        for (r, &v) in self.reachable.iter().enumerate() {
            probs[v * k..(v + 1) * k].copy_from_slice(&solution[r * k..(r + 1) * k]);
        }
        for row in probs.chunks_exact_mut(k) {
            row.iter_mut().for_each(|p| *p = p.clamp(PROB_FLOOR, 1.0));
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
        }

        let absent_classes = y_l.empty_classes();
        let mut warnings = Vec::new();
        if !self.unreachable.is_empty() {
            warnings.push(format!(
                "{} unlabeled node(s) cannot reach a labeled node; assigned uniform 1/{k}",
                self.unreachable.len()
            ));
        }
        if !absent_classes.is_empty() {
            warnings.push(format!("classes absent from labeled sample: {absent_classes:?}"));
        }
        Ok(Propagation {
            y_u: LabelDistribution::new(u, k, probs)?,
            unreachable: self.unreachable.clone(),
            absent_classes,
            method,
            warnings,
        })
    }
}

/// Solves `(I - T̄_uu) Y_U = T̄_ul Y_L` with default solver options.
pub fn propagate(blocks: &BlockSplit, y_l: &LabelDistribution) -> Result<Propagation> {
    Propagator::new(blocks, SolverOptions::default())?.solve(y_l)
}

/// `-Σ_ic Z_ic ln Y_ic`, summed over rows; `Y` is floored at [`PROB_FLOOR`].
pub fn cross_entropy(z_u: &LabelDistribution, y_u: &LabelDistribution) -> Result<f64> {
    if z_u.n_rows() != y_u.n_rows() || z_u.n_classes() != y_u.n_classes() {
        return Err(Error::validation(format!(
            "shape mismatch: {}x{} vs {}x{}",
            z_u.n_rows(),
            z_u.n_classes(),
            y_u.n_rows(),
            y_u.n_classes()
        )));
    }
    let log_likelihood: f64 = z_u
        .as_slice()
        .iter()
        .zip(y_u.as_slice())
        .filter(|(z, _)| **z != 0.0)
        .map(|(z, y)| z * y.max(PROB_FLOOR).ln())
        .sum();
    // 0.0 - x keeps an exact zero positive
    Ok(0.0 - log_likelihood)
}

/// [`cross_entropy`] against the indicator rows of `labels`.
pub fn cross_entropy_labels(labels: &[usize], y_u: &LabelDistribution) -> Result<f64> {
    if labels.len() != y_u.n_rows() {
        return Err(Error::validation(format!(
            "{} labels for {} prediction rows",
            labels.len(),
            y_u.n_rows()
        )));
    }
    let log_likelihood: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if c >= y_u.n_classes() {
                Err(Error::validation(format!("label {c} outside [0, {})", y_u.n_classes())))
            } else {
                Ok(y_u.get(i, c).max(PROB_FLOOR).ln())
            }
        })
        .sum::<Result<f64>>()?;
    Ok(0.0 - log_likelihood)
}
