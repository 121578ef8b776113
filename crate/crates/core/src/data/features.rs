use ndarray::Array2;

use super::graph::GraphRecord;
use crate::error::Result;

/// Default degree cap for featureless datasets.
pub const DEFAULT_DEGREE_CAP: usize = 64;

/// Replaces features with a one-hot encoding of the node degree clamped to
/// `cap` (feature width `cap + 1`).
pub fn featurize_degrees(records: Vec<GraphRecord>, cap: usize) -> Result<Vec<GraphRecord>> {
    records
        .into_iter()
        .map(|r| {
            let mut f = Array2::zeros((r.node_count(), cap + 1));
            for (node, d) in r.degrees().into_iter().enumerate() {
                f[[node, d.min(cap)]] = 1.0;
            }
            r.with_features(f)
        })
        .collect()
}
