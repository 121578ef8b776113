//! Diagnostics: 1-WL refinement, over-smoothing distance, architecture depth
//! and graph diameters.

mod depth;
mod diameter;
mod smooth;
mod wl;

pub use depth::architecture_depth;
pub use diameter::{diameter_histogram, graph_diameter, Diameter};
pub use smooth::{
    final_layer_smoothness, smoothing_csv, smoothing_curve, smoothness_distance, smoothness_report, SmoothingPoint, SmoothnessReport,
};
pub use wl::{wl_difference_profile, wl_distinguish_iteration, wl_distinguish_with, wl_refine, Histogram, WlColoring, WlVerdict};
