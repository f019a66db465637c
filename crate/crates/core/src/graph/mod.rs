// SPDX-License-Identifier: Apache-2.0

//! Graphs, partitions, attribute matrices and node samples.

mod io;
mod knn;

pub use io::{
    format_attributes, format_edge_list, format_partition, load_attributes, load_edge_list,
    load_partition, parse_attributes, parse_edge_list, parse_partition, write_all_atomic,
    write_atomic, write_attributes, write_edge_list, write_partition,
};
pub use knn::build_knn_graph;

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected graph with nonnegative edge weights, stored as symmetric CSR.
///
/// Neighbor lists are sorted by node index. Self-loops are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_nodes: usize,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
}

impl Graph {
    /// Builds a graph from undirected edges. A repeated pair keeps the last weight given;
    /// zero-weight edges are dropped.
    pub fn from_edges<I>(n_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut unique: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, w) in edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::validation(format!(
                    "edge ({i}, {j}) out of range for {n_nodes} nodes"
                )));
            }
            if i == j {
                return Err(Error::validation(format!("self-loop on node {i}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::validation(format!(
                    "edge ({i}, {j}) has invalid weight {w}"
                )));
            }
            unique.insert((i.min(j), i.max(j)), w);
        }

        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_nodes];
        for (&(i, j), &w) in &unique {
            if w > 0.0 {
                adjacency[i].push((j, w));
                adjacency[j].push((i, w));
            }
        }

        let mut offsets = Vec::with_capacity(n_nodes + 1);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for mut row in adjacency {
            row.sort_unstable_by_key(|&(j, _)| j);
            for (j, w) in row {
                targets.push(j);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        Ok(Graph {
            n_nodes,
            offsets,
            targets,
            weights,
        })
    }

    /// Graph with `n_nodes` nodes and no edges.
    pub fn empty(n_nodes: usize) -> Self {
        Graph {
            n_nodes,
            offsets: vec![0; n_nodes + 1],
            targets: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Number of undirected edges.
    pub fn n_edges(&self) -> usize {
        self.targets.len() / 2
    }

    /// Neighbors of `i` with edge weights, in increasing node order.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    pub fn neighbor_count(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Weight of edge (i, j), or 0.0 when absent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if i >= self.n_nodes || j >= self.n_nodes {
            return 0.0;
        }
        let range = self.offsets[i]..self.offsets[i + 1];
        match self.targets[range.clone()].binary_search(&j) {
            Ok(pos) => self.weights[range.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Sum of incident edge weights.
    pub fn degree(&self, i: usize) -> Result<f64> {
        if i >= self.n_nodes {
            return Err(Error::validation(format!(
                "node {i} out of range for {} nodes",
                self.n_nodes
            )));
        }
        Ok(self.weighted_degree(i))
    }

    pub(crate) fn weighted_degree(&self, i: usize) -> f64 {
        self.weights[self.offsets[i]..self.offsets[i + 1]].iter().sum()
    }

    /// Undirected edges `(i, j, w)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_nodes).flat_map(move |i| {
            self.neighbors(i)
                .filter(move |&(j, _)| j > i)
                .map(move |(j, w)| (i, j, w))
        })
    }

    /// Sum of all weighted degrees (twice the total edge weight).
    pub fn total_degree(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn isolated_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes)
            .filter(|&i| self.neighbor_count(i) == 0)
            .collect()
    }
}

/// Assignment of each node to one of `n_classes` classes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    n_classes: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::validation("partition is empty"));
        }
        if n_classes == 0 {
            return Err(Error::validation("partition needs at least one class"));
        }
        if let Some((i, &c)) = labels.iter().enumerate().find(|&(_, &c)| c >= n_classes) {
            return Err(Error::validation(format!(
                "label {c} at node {i} outside [0, {n_classes})"
            )));
        }
        Ok(Partition { labels, n_classes })
    }

    /// Partition with `K = 1 + max(label)`.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |&m| m + 1);
        Self::new(labels, k)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_classes];
        for &c in &self.labels {
            sizes[c] += 1;
        }
        sizes
    }

    /// Number of classes that actually occur.
    pub fn n_occupied(&self) -> usize {
        self.class_sizes().iter().filter(|&&s| s > 0).count()
    }

    /// Labels of the nodes in `indices`, in that order.
    pub fn restrict(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }

    /// Renumbers classes to consecutive indices in order of first appearance.
    pub fn compacted(&self) -> Partition {
        let mut map = vec![usize::MAX; self.n_classes];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&c| {
                if map[c] == usize::MAX {
                    map[c] = next;
                    next += 1;
                }
                map[c]
            })
            .collect();
        Partition {
            labels,
            n_classes: next,
        }
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.labels.len() != n {
            return Err(Error::validation(format!(
                "partition has {} labels but graph has {n} nodes",
                self.labels.len()
            )));
        }
        Ok(())
    }

    /// Uniformly shuffles all labels.
    pub fn shuffled<R: Rng + ?Sized>(&self, rng: &mut R) -> Partition {
        let mut labels = self.labels.clone();
        labels.shuffle(rng);
        Partition {
            labels,
            n_classes: self.n_classes,
        }
    }
}

/// Dense row-major N×p real matrix; row i holds the attributes of node i.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl AttributeMatrix {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::validation("attribute matrix is empty"));
        }
        if values.len() != n_rows * n_cols {
            return Err(Error::validation(format!(
                "expected {} values for a {n_rows}x{n_cols} matrix, got {}",
                n_rows * n_cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite attribute at row {}, column {}",
                pos / n_cols + 1,
                pos % n_cols + 1
            )));
        }
        Ok(AttributeMatrix {
            n_rows,
            n_cols,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(Error::validation(format!(
                "row {} has {} values, expected {n_cols}",
                i + 1,
                rows[i].len()
            )));
        }
        Self::new(rows.len(), n_cols, rows.concat())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Attribute count p.
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    /// Single column as an N×1 matrix.
    pub fn column(&self, j: usize) -> AttributeMatrix {
        AttributeMatrix {
            n_rows: self.n_rows,
            n_cols: 1,
            values: (0..self.n_rows).map(|i| self.get(i, j)).collect(),
        }
    }

    /// The listed columns, in the order given.
    pub fn select_columns(&self, columns: &[usize]) -> Result<AttributeMatrix> {
        if let Some(&bad) = columns.iter().find(|&&j| j >= self.n_cols) {
            return Err(Error::validation(format!(
                "column {bad} out of range for {} columns",
                self.n_cols
            )));
        }
        let values = self
            .rows()
            .flat_map(|row| columns.iter().map(move |&j| row[j]))
            .collect();
        AttributeMatrix::new(self.n_rows, columns.len(), values)
    }

    /// Column-wise z-scores; constant columns become all zeros.
    pub fn standardized(&self) -> AttributeMatrix {
        let n = self.n_rows as f64;
        let mut values = self.values.clone();
        for j in 0..self.n_cols {
            let mean = (0..self.n_rows).map(|i| self.get(i, j)).sum::<f64>() / n;
            let var = (0..self.n_rows)
                .map(|i| (self.get(i, j) - mean).powi(2))
                .sum::<f64>()
                / n;
            let sd = var.sqrt();
            for i in 0..self.n_rows {
                let v = &mut values[i * self.n_cols + j];
                *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
            }
        }
        AttributeMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            values,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Split of the nodes into a labeled set {L} and its complement {U}.
///
/// Both index lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSample {
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
}

impl NodeSample {
    pub fn new(n_nodes: usize, labeled: &[usize]) -> Result<Self> {
        let mut is_labeled = vec![false; n_nodes];
        for &i in labeled {
            if i >= n_nodes {
                return Err(Error::validation(format!(
                    "labeled node {i} out of range for {n_nodes} nodes"
                )));
            }
            if is_labeled[i] {
                return Err(Error::validation(format!("node {i} labeled twice")));
            }
            is_labeled[i] = true;
        }
        if labeled.is_empty() || labeled.len() >= n_nodes {
            return Err(Error::validation(format!(
                "labeled set size {} must be in [1, {}]",
                labeled.len(),
                n_nodes.saturating_sub(1)
            )));
        }
        let (lab, unl): (Vec<usize>, Vec<usize>) = (0..n_nodes).partition(|&i| is_labeled[i]);
        Ok(NodeSample {
            labeled: lab,
            unlabeled: unl,
        })
    }

    /// Draws `size` labeled nodes uniformly without replacement.
    pub fn random<R: Rng + ?Sized>(n_nodes: usize, size: usize, rng: &mut R) -> Result<Self> {
        if size == 0 || size >= n_nodes {
            return Err(Error::validation(format!(
                "sample size {size} must be in [1, {}]",
                n_nodes.saturating_sub(1)
            )));
        }
        let picked = index::sample(rng, n_nodes, size).into_vec();
        Self::new(n_nodes, &picked)
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn n_nodes(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn degree_of_path_middle() {
        assert_eq!(path3().degree(1).unwrap(), 2.0);
    }

    #[test]
    fn degree_of_isolated_node_is_zero() {
        let g = Graph::from_edges(3, [(0, 1, 1.0)]).unwrap();
        assert_eq!(g.degree(2).unwrap(), 0.0);
        assert_eq!(g.isolated_nodes(), vec![2]);
    }

    #[test]
    fn degree_of_weighted_edge() {
        let g = Graph::from_edges(2, [(0, 1, 2.5)]).unwrap();
        assert_eq!(g.degree(0).unwrap(), 2.5);
    }

    #[test]
    fn degree_out_of_range() {
        assert!(matches!(path3().degree(3), Err(Error::Validation(_))));
    }

    #[test]
    fn weights_are_symmetric() {
        let g = Graph::from_edges(4, [(0, 1, 2.0), (3, 1, 0.5)]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(g.weight(i, j), g.weight(j, i));
            }
        }
        assert_eq!(g.weight(1, 3), 0.5);
        assert_eq!(g.n_edges(), 2);
    }

    #[test]
    fn rejects_self_loop_and_negative_weight() {
        assert!(Graph::from_edges(2, [(1, 1, 1.0)]).is_err());
        assert!(Graph::from_edges(2, [(0, 1, -1.0)]).is_err());
        assert!(Graph::from_edges(2, [(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![], 1).is_err());
        assert!(Partition::new(vec![0, 2], 2).is_err());
        assert!(Partition::new(vec![0], 0).is_err());
        let p = Partition::from_labels(vec![0, 2, 2]).unwrap();
        assert_eq!(p.n_classes(), 3);
        assert_eq!(p.class_sizes(), vec![1, 0, 2]);
        assert_eq!(p.n_occupied(), 2);
        assert_eq!(p.compacted().labels(), &[0, 1, 1]);
    }

    #[test]
    fn node_sample_bounds() {
        assert!(NodeSample::new(3, &[]).is_err());
        assert!(NodeSample::new(3, &[0, 1, 2]).is_err());
        assert!(NodeSample::new(3, &[0, 0]).is_err());
        let s = NodeSample::new(4, &[3, 1]).unwrap();
        assert_eq!(s.labeled(), &[1, 3]);
        assert_eq!(s.unlabeled(), &[0, 2]);
    }

    #[test]
    fn random_sample_is_a_partition_of_nodes() {
        let mut rng = crate::rng::rng_from_seed(5);
        let s = NodeSample::random(50, 20, &mut rng).unwrap();
        assert_eq!(s.labeled().len(), 20);
        let mut all: Vec<usize> = s.labeled().iter().chain(s.unlabeled()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn attribute_matrix_rejects_nonfinite() {
        assert!(AttributeMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(AttributeMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn select_columns() {
        let x = AttributeMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let y = x.select_columns(&[2, 0]).unwrap();
        assert_eq!(y.row(1), &[6.0, 4.0]);
        assert!(x.select_columns(&[3]).is_err());
        assert!(x.select_columns(&[]).is_err());
    }

    #[test]
    fn standardized_columns() {
        let x = AttributeMatrix::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        let z = x.standardized();
        assert_eq!(z.row(0), &[-1.0, 0.0]);
        assert_eq!(z.row(1), &[1.0, 0.0]);
    }
}
