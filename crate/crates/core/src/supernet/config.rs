use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::AggregationKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Full,
    Repeat,
    Diverse,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::Repeat => "repeat",
            Variant::Diverse => "diverse",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Self::Full),
            "repeat" => Ok(Self::Repeat),
            "diverse" => Ok(Self::Diverse),
            _ => Err(Error::Config(format!("unknown variant {s:?} (expected full, repeat or diverse)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anneal {
    Geometric,
    Linear,
    Constant,
}

/// Gumbel-Softmax temperature over search epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal: Anneal,
}

impl Default for TemperatureSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.1,
            anneal: Anneal::Geometric,
        }
    }
}

impl TemperatureSchedule {
    pub fn constant(value: f64) -> Self {
        Self {
            start: value,
            end: value,
            anneal: Anneal::Constant,
        }
    }

    /// Temperature at `epoch` of `epochs`; the first epoch uses `start`, the
    /// last `end`.
    pub fn at(&self, epoch: usize, epochs: usize) -> f64 {
        if epochs <= 1 {
            return self.start;
        }
        let t = epoch.min(epochs - 1) as f64 / (epochs - 1) as f64;
        match self.anneal {
            Anneal::Constant => self.start,
            Anneal::Linear => self.start + (self.end - self.start) * t,
            Anneal::Geometric => self.start * (self.end / self.start).powf(t),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start > 0.0 && self.end > 0.0 && self.start.is_finite() && self.end.is_finite()) {
            return Err(Error::Config(format!(
                "temperatures must be positive, got {} → {}",
                self.start, self.end
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperNetConfig {
    pub variant: Variant,
    /// Aggregation operations in total.
    pub b: usize,
    /// Cells; 1 for `Full`.
    pub c: usize,
    pub hidden: usize,
    pub aggregation: AggregationKind,
    pub input_dim: usize,
    pub classes: usize,
    /// Sort-pool size of the GSORT readout.
    pub sort_k: usize,
    pub temperature: TemperatureSchedule,
    pub seed: u64,
}

impl SuperNetConfig {
    pub fn new(variant: Variant, b: usize, c: usize, input_dim: usize, classes: usize) -> Self {
        Self {
            variant,
            b,
            c,
            hidden: 32,
            aggregation: AggregationKind::Gcn,
            input_dim,
            classes,
            sort_k: 10,
            temperature: TemperatureSchedule::default(),
            seed: 0,
        }
    }

    pub fn full(b: usize, input_dim: usize, classes: usize) -> Self {
        Self::new(Variant::Full, b, 1, input_dim, classes)
    }

    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.hidden = hidden;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_aggregation(mut self, kind: AggregationKind) -> Self {
        self.aggregation = kind;
        self
    }

    pub fn with_sort_k(mut self, k: usize) -> Self {
        self.sort_k = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.b == 0 {
            return bad("B must be at least 1".into());
        }
        match self.variant {
            Variant::Full if self.c != 1 => return bad(format!("full variant requires C = 1, got {}", self.c)),
            Variant::Repeat | Variant::Diverse if self.c < 2 => {
                return bad(format!("{} variant requires C ≥ 2, got {}", self.variant, self.c))
            }
            _ => {}
        }
        if self.b % self.c != 0 {
            return bad(format!("B = {} is not divisible by C = {}", self.b, self.c));
        }
        if self.hidden == 0 || self.input_dim == 0 {
            return bad("hidden and input widths must be positive".into());
        }
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.sort_k == 0 {
            return bad("sort_k must be positive".into());
        }
        self.temperature.validate()
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.b / self.c.max(1), self.c.max(1))
    }
}

/// Global numbering of the operation DAG.
///
/// Op 0 is the pre-processing MLP. Cell `c` owns local ops `1..=b+1` (`b`
/// aggregations then its post-processing MLP) at global index
/// `c·(b+1) + local`; local op 0 of cell `c` is global `c·(b+1)`, i.e. the
/// pre-processing op or the previous cell's post-processing op.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    b: usize,
    c: usize,
}

impl Layout {
    pub fn new(b_per_cell: usize, cells: usize) -> Self {
        Self { b: b_per_cell, c: cells }
    }

    pub fn per_cell(&self) -> usize {
        self.b
    }

    pub fn cells(&self) -> usize {
        self.c
    }

    pub fn op_count(&self) -> usize {
        self.c * (self.b + 1) + 1
    }

    pub fn global(&self, cell: usize, local: usize) -> usize {
        cell * (self.b + 1) + local
    }

    /// `(cell, local)` for ops other than 0.
    pub fn locate(&self, op: usize) -> (usize, usize) {
        debug_assert!(op > 0 && op < self.op_count());
        let cell = (op - 1) / (self.b + 1);
        (cell, op - cell * (self.b + 1))
    }

    /// Final post-processing op feeding the readout.
    pub fn sink(&self) -> usize {
        self.op_count() - 1
    }

    pub fn is_aggregation(&self, op: usize) -> bool {
        op > 0 && op < self.op_count() && self.locate(op).1 <= self.b
    }

    pub fn is_post(&self, op: usize) -> bool {
        op > 0 && op < self.op_count() && self.locate(op).1 == self.b + 1
    }

    /// Learnable `(src, dst)` pairs of one cell in local numbering, ordered
    /// by destination then source.
    pub fn cell_pairs(&self) -> Vec<(usize, usize)> {
        (1..=self.b + 1).flat_map(|j| (0..j).map(move |i| (i, j))).collect()
    }

    /// All learnable connections in global numbering.
    pub fn connections(&self) -> Vec<(usize, usize)> {
        (0..self.c)
            .flat_map(|c| self.cell_pairs().into_iter().map(move |(i, j)| (self.global(c, i), self.global(c, j))))
            .collect()
    }

    /// Ops that carry a merge: every op except 0.
    pub fn merge_ops(&self) -> std::ops::Range<usize> {
        1..self.op_count()
    }
}
