//! Central finite-difference validation of tape gradients.
//!
//! The checked function may contain kinks (ReLU, max, sort). A perturbation
//! that changes the tape [`signature`](super::Tape::signature) has crossed a
//! kink, so the step is shrunk until both sides stay on the smooth piece of
//! the unperturbed point. Coordinates that sit exactly on a kink at every step
//! are counted as non-smooth and reported separately.

use super::tape::{Tape, TrainMask, Var};
use super::tensor::{ParamId, ParamStore};
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Initial central-difference step.
    pub step: f64,
    /// Pass threshold on the maximum relative error.
    pub tolerance: f64,
    /// Denominator floor of the relative error, so coordinates with vanishing
    /// gradients are compared absolutely.
    pub floor: f64,
    /// How many times the step may be divided by ten near a kink.
    pub refinements: u32,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-6,
            refinements: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstCoordinate {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<WorstCoordinate>,
    pub checked: usize,
    /// Coordinates that needed a smaller step to avoid crossing a kink.
    pub refined: usize,
    /// Coordinates sitting on a kink at every tried step; excluded.
    pub non_smooth: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares tape gradients of the scalar built by `f` against central
/// differences for every coordinate of `ids`. `f` must be deterministic.
pub fn finite_diff_check<F>(
    store: &mut ParamStore,
    ids: &[ParamId],
    mut f: F,
    config: GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: for<'t> FnMut(&'t Tape, &ParamStore) -> Result<Var<'t>>,
{
    let (analytic, base_sig) = {
        let tape = Tape::new(TrainMask::All);
        let out = f(&tape, store)?;
        let grads = tape.backward(out)?;
        let analytic: Vec<_> = ids
            .iter()
            .map(|&id| {
                grads
                    .get(id)
                    .cloned()
                    .unwrap_or_else(|| ndarray::Array2::zeros(store.value(id).raw_dim()))
            })
            .collect();
        (analytic, tape.signature())
    };

    let mut eval = |store: &ParamStore| -> Result<(f64, u64)> {
        let tape = Tape::new(TrainMask::Frozen);
        let out = f(&tape, store)?;
        Ok((out.scalar(), tape.signature()))
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        refined: 0,
        non_smooth: 0,
        tolerance: config.tolerance,
    };

    for (&id, grad) in ids.iter().zip(&analytic) {
        for index in 0..grad.len() {
            let original = store.value(id).as_slice().expect("standard layout")[index];
            let mut h = config.step;
            let mut numeric = None;
            for attempt in 0..=config.refinements {
                store.value_mut(id).as_slice_mut().unwrap()[index] = original + h;
                let (plus, sig_plus) = eval(store)?;
                store.value_mut(id).as_slice_mut().unwrap()[index] = original - h;
                let (minus, sig_minus) = eval(store)?;
                store.value_mut(id).as_slice_mut().unwrap()[index] = original;
                if sig_plus == base_sig && sig_minus == base_sig {
                    numeric = Some((plus - minus) / (2.0 * h));
                    if attempt > 0 {
                        report.refined += 1;
                    }
                    break;
                }
                h /= 10.0;
            }
            let Some(numeric) = numeric else {
                report.non_smooth += 1;
                continue;
            };
            let a = grad.as_slice().expect("standard layout")[index];
            let err = relative_error(a, numeric, config.floor);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                if report.worst.as_ref().is_none_or(|w| err >= w.rel_error) {
                    report.worst = Some(WorstCoordinate {
                        param: store.get(id).name().to_string(),
                        index,
                        analytic: a,
                        numeric,
                        rel_error: err,
                    });
                }
            }
        }
    }
    Ok(report)
}
