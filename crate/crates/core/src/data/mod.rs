//! Graph datasets: TU ingestion, synthetic diameter trees, featurization,
//! stratified folds and block-diagonal batching.

mod batch;
mod features;
mod folds;
mod graph;
mod synth;
mod tu;

pub use batch::{batches, build_batch, gcn_normalize, GraphBatch};
pub use features::{featurize_degrees, DEFAULT_DEGREE_CAP};
pub use folds::{stratified_kfold, Fold, FoldPlan};
pub use graph::{Dataset, DatasetStats, GraphRecord};
pub use synth::{synthesize_diameter_dataset, DiameterClass, DEFAULT_NODE_BUDGET};
pub use tu::{has_node_labels, parse_tu_dataset, write_tu_dataset};
