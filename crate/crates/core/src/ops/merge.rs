use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Linear, LstmCell};
use crate::autodiff::{ParamId, ParamStore, Reduce, Segments, Tape, Var};
use crate::error::{Error, Result};

/// Candidate merge operations, in candidate order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MergeKind {
    Concat,
    Lstm,
    Att,
    Sum,
    Mean,
    Max,
}

impl MergeKind {
    pub const ALL: [MergeKind; 6] = [Self::Concat, Self::Lstm, Self::Att, Self::Sum, Self::Mean, Self::Max];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).expect("listed")
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Concat => "CONCAT",
            Self::Lstm => "LSTM",
            Self::Att => "ATT",
            Self::Sum => "SUM",
            Self::Mean => "MEAN",
            Self::Max => "MAX",
        }
    }
}

impl fmt::Display for MergeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MergeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown merge {s:?}")))
    }
}

/// Parameters of every merge candidate at one operation with a fixed number
/// of incoming slots. Missing inputs are passed as zero matrices, so all
/// learnable merges are built without biases and map all-zero inputs to zero.
#[derive(Debug, Clone)]
pub struct MergeParams {
    fan_in: usize,
    hidden: usize,
    /// Stacked per-slot blocks `(fan_in·h) × h`.
    concat: Linear,
    lstm: LstmCell,
    /// Shared scoring vector `h × 1`.
    att: ParamId,
}

impl MergeParams {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, fan_in: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            fan_in,
            hidden,
            concat: Linear::new(store, &format!("{name}.concat"), fan_in * hidden, hidden, false, rng),
            lstm: LstmCell::new(store, &format!("{name}.lstm"), hidden, hidden, false, rng),
            att: store.add_uniform(format!("{name}.att"), hidden, 1, hidden, rng),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.fan_in
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Parameters used by one candidate.
    pub fn params_of(&self, kind: MergeKind) -> Vec<ParamId> {
        match kind {
            MergeKind::Concat => self.concat.params(),
            MergeKind::Lstm => self.lstm.params(),
            MergeKind::Att => vec![self.att],
            MergeKind::Sum | MergeKind::Mean | MergeKind::Max => Vec::new(),
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        MergeKind::ALL.iter().flat_map(|&k| self.params_of(k)).collect()
    }

    /// Combines the inputs, given in ascending source order.
    pub fn apply<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        kind: MergeKind,
        inputs: &[Var<'t>],
        segments: &Arc<Segments>,
    ) -> Result<Var<'t>> {
        let Some(&first) = inputs.first() else {
            return Err(Error::Invalid("merge of an empty input list".into()));
        };
        if let Some(bad) = inputs.iter().find(|v| v.shape() != first.shape()) {
            return Err(Error::Shape {
                op: "merge",
                lhs: first.shape(),
                rhs: bad.shape(),
            });
        }
        match kind {
            MergeKind::Sum => sum(inputs),
            MergeKind::Mean => sum(inputs)?.scale(1.0 / inputs.len() as f64),
            MergeKind::Max => Var::maximum(inputs),
            MergeKind::Concat => {
                if inputs.len() != self.fan_in {
                    return Err(Error::Invalid(format!(
                        "CONCAT built for {} inputs, got {}",
                        self.fan_in,
                        inputs.len()
                    )));
                }
                self.concat.forward(tape, store, Var::concat_cols(inputs)?)
            }
            MergeKind::Lstm => {
                let n = first.rows();
                let mut state = (tape.zeros(n, self.hidden), tape.zeros(n, self.hidden));
                for &x in inputs {
                    state = self.lstm.step(tape, store, x, state)?;
                }
                Ok(state.0)
            }
            MergeKind::Att => {
                let a = tape.param(store, self.att);
                let scores = inputs
                    .iter()
                    .map(|x| x.segment_reduce(segments, Reduce::Mean)?.matmul(a))
                    .collect::<Result<Vec<_>>>()?;
                let weights = Var::concat_cols(&scores)?.softmax_row()?;
                let mut out: Option<Var<'t>> = None;
                for (i, &x) in inputs.iter().enumerate() {
                    let w = weights.slice_cols(i, 1)?.gather_segments(segments)?;
                    let term = x.mul_col(w)?;
                    out = Some(match out {
                        Some(acc) => acc.add(term)?,
                        None => term,
                    });
                }
                Ok(out.expect("non-empty"))
            }
        }
    }
}

fn sum<'t>(inputs: &[Var<'t>]) -> Result<Var<'t>> {
    inputs[1..].iter().try_fold(inputs[0], |acc, &x| acc.add(x))
}
