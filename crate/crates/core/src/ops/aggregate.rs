use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Linear, Mlp2};
use crate::autodiff::{ParamGroup, ParamId, ParamStore, Tape, Var};
use crate::data::GraphBatch;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AggregationKind {
    Gcn,
    Gin,
}

impl fmt::Display for AggregationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregationKind::Gcn => "GCN",
            AggregationKind::Gin => "GIN",
        })
    }
}

impl FromStr for AggregationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "GCN" => Ok(Self::Gcn),
            "GIN" => Ok(Self::Gin),
            _ => Err(Error::Config(format!("unknown aggregation {s:?} (expected GCN or GIN)"))),
        }
    }
}

#[derive(Debug, Clone)]
enum Weights {
    /// `ReLU(Â·H·W + b)`.
    Gcn(Linear),
    /// `ReLU(MLP((1 + ε)·H + A·H))`.
    Gin { mlp: Mlp2, eps: ParamId },
}

/// One message-passing layer of width `hidden`.
#[derive(Debug, Clone)]
pub struct AggregationLayer {
    kind: AggregationKind,
    weights: Weights,
}

impl AggregationLayer {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, kind: AggregationKind, inputs: usize, hidden: usize, rng: &mut R) -> Self {
        let weights = match kind {
            AggregationKind::Gcn => Weights::Gcn(Linear::new(store, name, inputs, hidden, true, rng)),
            AggregationKind::Gin => Weights::Gin {
                mlp: Mlp2::new(store, &format!("{name}.mlp"), inputs, hidden, rng),
                eps: store.add(format!("{name}.eps"), ParamGroup::Weights, ndarray::Array2::zeros((1, 1))),
            },
        };
        Self { kind, weights }
    }

    pub fn kind(&self) -> AggregationKind {
        self.kind
    }

    pub fn forward<'t>(&self, tape: &'t Tape, store: &ParamStore, batch: &GraphBatch, h: Var<'t>) -> Result<Var<'t>> {
        match &self.weights {
            Weights::Gcn(lin) => {
                let mixed = h.propagate(batch.normalized_adjacency())?;
                lin.forward(tape, store, mixed)?.relu()
            }
            Weights::Gin { mlp, eps } => {
                let own = h.add(h.scale_by(tape.param(store, *eps))?)?;
                let z = own.add(h.propagate(batch.adjacency())?)?;
                mlp.forward(tape, store, z)?.relu()
            }
        }
    }

    pub fn linear(&self) -> Option<&Linear> {
        match &self.weights {
            Weights::Gcn(l) => Some(l),
            Weights::Gin { .. } => None,
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        match &self.weights {
            Weights::Gcn(l) => l.params(),
            Weights::Gin { mlp, eps } => {
                let mut p = mlp.params();
                p.push(*eps);
                p
            }
        }
    }
}
