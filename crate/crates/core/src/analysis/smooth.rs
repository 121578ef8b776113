//! Over-smoothing distance between node representations.

use ndarray::{Array1, Array2, ArrayView2};
use serde::Serialize;

use crate::autodiff::{ParamStore, Segments, Tape, TrainMask};
use crate::data::{batches, Fold, GraphRecord};
use crate::error::{Error, Result};
use crate::ops::Dropout;
use crate::search::{train_final_model, HyperParams, TrainSetup};
use crate::supernet::{preset_architecture, Architecture, Mode, Preset, SuperNet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothnessReport {
    /// Mean pairwise distance within a graph, averaged over graphs.
    pub distance: f64,
    pub graphs: usize,
    pub pairs: usize,
    /// Rows with zero L1 norm, left out of every pair.
    pub skipped_rows: usize,
}

fn normalized_rows(h: ArrayView2<f64>) -> (Vec<Array1<f64>>, usize) {
    let mut rows = Vec::with_capacity(h.nrows());
    let mut skipped = 0;
    for row in h.rows() {
        let norm: f64 = row.iter().map(|v| v.abs()).sum();
        if norm > 0.0 {
            rows.push(&row / norm);
        } else {
            skipped += 1;
        }
    }
    (rows, skipped)
}

/// `(sum of pair distances, pairs)` over one graph's rows.
fn pair_sum(rows: &[Array1<f64>]) -> (f64, usize) {
    let mut sum = 0.0;
    let mut pairs = 0;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            sum += rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b).abs()).sum::<f64>();
            pairs += 1;
        }
    }
    (sum, pairs)
}

/// Mean over node pairs of `‖h_i/‖h_i‖₁ − h_j/‖h_j‖₁‖₁` within each graph,
/// averaged over graphs with at least one valid pair.
pub fn smoothness_report(h: &Array2<f64>, segments: &Segments) -> Result<SmoothnessReport> {
    if h.nrows() != segments.nodes() {
        return Err(Error::Shape {
            op: "smoothness",
            lhs: h.dim(),
            rhs: (segments.nodes(), h.ncols()),
        });
    }
    let (mut total, mut graphs, mut pairs, mut skipped) = (0.0, 0, 0, 0);
    for g in 0..segments.graphs() {
        let members = segments.members(g);
        let sub = h.select(ndarray::Axis(0), members);
        let (rows, s) = normalized_rows(sub.view());
        skipped += s;
        let (sum, p) = pair_sum(&rows);
        if p > 0 {
            total += sum / p as f64;
            graphs += 1;
            pairs += p;
        }
    }
    if graphs == 0 {
        return Err(Error::Invalid("no valid pairs for the smoothness distance".into()));
    }
    Ok(SmoothnessReport {
        distance: total / graphs as f64,
        graphs,
        pairs,
        skipped_rows: skipped,
    })
}

/// Distance over all rows of `h` taken as one graph.
pub fn smoothness_distance(h: &Array2<f64>) -> Result<f64> {
    let seg = Segments::from_sizes(&[h.nrows()])?;
    smoothness_report(h, &seg).map(|r| r.distance)
}

/// Smoothness of the deepest live aggregation op's output over `indices`,
/// averaged over graphs.
pub fn final_layer_smoothness(
    net: &SuperNet,
    store: &ParamStore,
    arch: &Architecture,
    records: &[GraphRecord],
    indices: &[usize],
) -> Result<SmoothnessReport> {
    let layout = net.layout();
    let last = arch
        .live_ops()
        .into_iter()
        .filter(|&op| layout.is_aggregation(op))
        .max()
        .ok_or_else(|| Error::Invalid("architecture has no live aggregation op".into()))?;
    let (mut total, mut graphs, mut pairs, mut skipped) = (0.0, 0, 0, 0);
    for batch in batches(records, indices, 256)? {
        let tape = Tape::new(TrainMask::Frozen);
        let out = net.forward(&tape, store, &batch, Mode::Discrete(arch), &mut Dropout::disabled())?;
        let h = out.ops[last].expect("live op computed").value();
        match smoothness_report(&h, batch.segments()) {
            Ok(r) => {
                total += r.distance * r.graphs as f64;
                graphs += r.graphs;
                pairs += r.pairs;
                skipped += r.skipped_rows;
            }
            Err(Error::Invalid(_)) => skipped += h.nrows(),
            Err(e) => return Err(e),
        }
    }
    if graphs == 0 {
        return Err(Error::Invalid("no valid pairs for the smoothness distance".into()));
    }
    Ok(SmoothnessReport {
        distance: total / graphs as f64,
        graphs,
        pairs,
        skipped_rows: skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingPoint {
    pub layers: usize,
    /// Final aggregation layer smoothness on the test split.
    pub distance: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

/// Trains `family` at every depth in `depths` and measures how smooth the
/// last aggregation layer is on the test graphs of `fold`.
pub fn smoothing_curve(
    family: Preset,
    depths: &[usize],
    records: &[GraphRecord],
    fold: &Fold,
    hyper: &HyperParams,
    setup: &TrainSetup,
) -> Result<Vec<SmoothingPoint>> {
    depths
        .iter()
        .map(|&l| {
            let arch = preset_architecture(family.with_layers(l), l)?;
            let (outcome, model) = train_final_model(&arch, records, fold, hyper, setup)?;
            let report = final_layer_smoothness(&model.net, &model.store, &arch, records, &fold.test)?;
            Ok(SmoothingPoint {
                layers: l,
                distance: report.distance,
                train_acc: outcome.train_acc,
                test_acc: outcome.test_acc,
            })
        })
        .collect()
}

/// `layers,distance,train_acc,test_acc` rows with a header.
pub fn smoothing_csv(points: &[SmoothingPoint]) -> String {
    let mut out = String::from("layers,distance,train_acc,test_acc\n");
    for p in points {
        out.push_str(&format!("{},{:.6},{:.4},{:.4}\n", p.layers, p.distance, p.train_acc, p.test_acc));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identical_rows_are_zero() {
        assert_eq!(smoothness_distance(&array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap(), 0.0);
    }

    #[test]
    fn orthogonal_rows_are_two() {
        assert_eq!(smoothness_distance(&array![[1.0, 0.0], [0.0, 1.0]]).unwrap(), 2.0);
    }

    #[test]
    fn scaling_is_ignored() {
        assert_eq!(smoothness_distance(&array![[1.0, 0.0], [5.0, 0.0]]).unwrap(), 0.0);
        let h = array![[1.0, -2.0], [0.5, 3.0], [2.0, 2.0]];
        let scaled = array![[3.0, -6.0], [0.05, 0.3], [7.0, 7.0]];
        let (a, b) = (smoothness_distance(&h).unwrap(), smoothness_distance(&scaled).unwrap());
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn zero_rows_are_skipped_and_all_zero_fails() {
        let seg = Segments::from_sizes(&[3]).unwrap();
        let r = smoothness_report(&array![[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]], &seg).unwrap();
        assert_eq!((r.distance, r.skipped_rows, r.pairs), (2.0, 1, 1));
        assert!(smoothness_distance(&Array2::zeros((3, 2))).is_err());
    }

    #[test]
    fn averaged_over_graphs() {
        let seg = Segments::from_sizes(&[2, 2, 1]).unwrap();
        let h = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, 2.0], [4.0, 1.0]];
        let r = smoothness_report(&h, &seg).unwrap();
        assert_eq!((r.graphs, r.pairs), (2, 2));
        assert!((r.distance - 1.0).abs() < 1e-12);
    }
}
