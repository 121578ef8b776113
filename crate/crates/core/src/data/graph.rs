use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labeled undirected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphRecord {
    node_count: usize,
    /// Undirected edges `(u, v)` with `u < v`, sorted and unique.
    edges: Vec<(usize, usize)>,
    features: Array2<f64>,
    label: usize,
}

impl GraphRecord {
    /// Normalizes the edge list (orientation, duplicates); self-loops are
    /// dropped since normalization adds them.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>, features: Array2<f64>, label: usize) -> Result<Self> {
        if features.nrows() != node_count {
            return Err(Error::Invalid(format!(
                "feature matrix has {} rows for {node_count} nodes",
                features.nrows()
            )));
        }
        let mut list = Vec::new();
        for (u, v) in edges {
            if u >= node_count || v >= node_count {
                return Err(Error::Invalid(format!("edge ({u}, {v}) outside 0..{node_count}")));
            }
            if u != v {
                list.push((u.min(v), u.max(v)));
            }
        }
        list.sort_unstable();
        list.dedup();
        Ok(Self {
            node_count,
            edges: list,
            features,
            label,
        })
    }

    /// Graph with a single all-one feature channel.
    pub fn unfeatured(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>, label: usize) -> Result<Self> {
        Self::new(node_count, edges, Array2::ones((node_count, 1)), label)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.node_count {
            return Err(Error::Invalid(format!(
                "feature matrix has {} rows for {} nodes",
                features.nrows(),
                self.node_count
            )));
        }
        self.features = features;
        Ok(self)
    }

    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Symmetric 0/1 adjacency without self-loops.
    pub fn dense_adjacency(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.node_count, self.node_count));
        for &(u, v) in &self.edges {
            a[[u, v]] = 1.0;
            a[[v, u]] = 1.0;
        }
        a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub graphs: usize,
    pub classes: usize,
    pub feature_dim: usize,
    pub avg_nodes: f64,
    pub avg_edges: f64,
}

impl DatasetStats {
    pub fn of(records: &[GraphRecord]) -> Self {
        let n = records.len().max(1) as f64;
        Self {
            graphs: records.len(),
            classes: records.iter().map(|r| r.label + 1).max().unwrap_or(0),
            feature_dim: records.first().map_or(0, GraphRecord::feature_dim),
            avg_nodes: records.iter().map(|r| r.node_count as f64).sum::<f64>() / n,
            avg_edges: records.iter().map(|r| r.edges.len() as f64).sum::<f64>() / n,
        }
    }
}

/// Named collection of graphs sharing one feature width.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub records: Vec<GraphRecord>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, records: Vec<GraphRecord>) -> Result<Self> {
        if let Some(first) = records.first() {
            let d = first.feature_dim();
            if let Some(bad) = records.iter().position(|r| r.feature_dim() != d) {
                return Err(Error::Invalid(format!(
                    "graph {bad} has feature width {} but graph 0 has {d}",
                    records[bad].feature_dim()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            records,
        })
    }

    pub fn stats(&self) -> DatasetStats {
        DatasetStats::of(&self.records)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(GraphRecord::label).collect()
    }

    pub fn classes(&self) -> usize {
        self.stats().classes
    }

    pub fn feature_dim(&self) -> usize {
        self.records.first().map_or(0, GraphRecord::feature_dim)
    }

    /// `n` graphs drawn without replacement, kept in their original order.
    /// Returns the whole dataset when `n >= len`.
    pub fn subsample(&self, n: usize, seed: u64) -> Dataset {
        if n >= self.len() {
            return self.clone();
        }
        let mut picked = rand::seq::index::sample(&mut crate::rng::rng(seed), self.len(), n).into_vec();
        picked.sort_unstable();
        Dataset {
            name: self.name.clone(),
            records: picked.into_iter().map(|i| self.records[i].clone()).collect(),
        }
    }
}
