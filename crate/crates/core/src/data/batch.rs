use std::sync::Arc;

use ndarray::{s, Array2};

use super::graph::GraphRecord;
use crate::autodiff::{BlockDiagonal, Segments};
use crate::error::{Error, Result};

/// Several graphs assembled into one block-diagonal graph.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    adjacency: Arc<BlockDiagonal>,
    normalized: Arc<BlockDiagonal>,
    features: Array2<f64>,
    segments: Arc<Segments>,
    labels: Vec<usize>,
    indices: Vec<usize>,
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` for one graph.
pub fn gcn_normalize(adjacency: &Array2<f64>) -> Array2<f64> {
    let n = adjacency.nrows();
    let mut a = adjacency + &Array2::<f64>::eye(n);
    let inv_sqrt: Vec<f64> = a.rows().into_iter().map(|r| 1.0 / r.sum().sqrt()).collect();
    for ((i, j), v) in a.indexed_iter_mut() {
        *v *= inv_sqrt[i] * inv_sqrt[j];
    }
    a
}

pub fn build_batch(records: &[GraphRecord], indices: &[usize]) -> Result<GraphBatch> {
    if indices.is_empty() {
        return Err(Error::Invalid("cannot build a batch from zero graphs".into()));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= records.len()) {
        return Err(Error::Invalid(format!("graph index {bad} out of range for {} records", records.len())));
    }
    let chosen: Vec<&GraphRecord> = indices.iter().map(|&i| &records[i]).collect();
    let width = chosen[0].feature_dim();
    if let Some(r) = chosen.iter().find(|r| r.feature_dim() != width) {
        return Err(Error::Shape {
            op: "build_batch",
            lhs: (chosen[0].node_count(), width),
            rhs: (r.node_count(), r.feature_dim()),
        });
    }
    let sizes: Vec<usize> = chosen.iter().map(|r| r.node_count()).collect();
    let total: usize = sizes.iter().sum();
    let mut features = Array2::zeros((total, width));
    let mut offset = 0;
    let mut blocks = Vec::with_capacity(chosen.len());
    for r in &chosen {
        features
            .slice_mut(s![offset..offset + r.node_count(), ..])
            .assign(r.features());
        blocks.push(r.dense_adjacency());
        offset += r.node_count();
    }
    let adjacency = BlockDiagonal::new(blocks)?;
    let normalized = adjacency.map_blocks(gcn_normalize);
    Ok(GraphBatch {
        adjacency: Arc::new(adjacency),
        normalized: Arc::new(normalized),
        features,
        segments: Arc::new(Segments::from_sizes(&sizes)?),
        labels: chosen.iter().map(|r| r.label()).collect(),
        indices: indices.to_vec(),
    })
}

impl GraphBatch {
    pub fn adjacency(&self) -> &Arc<BlockDiagonal> {
        &self.adjacency
    }

    /// Symmetrically normalized adjacency with self-loops.
    pub fn normalized_adjacency(&self) -> &Arc<BlockDiagonal> {
        &self.normalized
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn segments(&self) -> &Arc<Segments> {
        &self.segments
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Dataset indices of the graphs in this batch.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn graphs(&self) -> usize {
        self.labels.len()
    }

    pub fn nodes(&self) -> usize {
        self.features.nrows()
    }

    /// Features and adjacency block of the `g`-th graph of the batch.
    pub fn graph(&self, g: usize) -> (Array2<f64>, Array2<f64>) {
        let offs = self.adjacency.offsets();
        let (a, b) = (offs[g], offs[g + 1]);
        (
            self.features.slice(s![a..b, ..]).to_owned(),
            self.adjacency.blocks()[g].clone(),
        )
    }
}

/// Splits `indices` into consecutive batches of at most `batch_size` graphs.
pub fn batches(records: &[GraphRecord], indices: &[usize], batch_size: usize) -> Result<Vec<GraphBatch>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    indices.chunks(batch_size).map(|c| build_batch(records, c)).collect()
}
