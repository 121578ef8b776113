//! Discrete architectures and their JSON document.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{Layout, Variant};
use crate::error::{Error, Result};
use crate::ops::{AggregationKind, MergeKind, ReadoutKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// `search`, `preset:<name>`, `reference:<name>`, ...
    pub origin: String,
    pub seed: u64,
    pub epoch: usize,
    pub hidden: usize,
    pub aggregation: AggregationKind,
    #[serde(default)]
    pub dataset: Option<String>,
    #[serde(default)]
    pub fold: Option<usize>,
}

impl Provenance {
    pub fn new(origin: impl Into<String>) -> Self {
        Self {
            origin: origin.into(),
            seed: 0,
            epoch: 0,
            hidden: 0,
            aggregation: AggregationKind::Gcn,
            dataset: None,
            fold: None,
        }
    }
}

/// ON/OFF bit per learnable connection, one merge per op, one readout.
/// Op numbering follows [`Layout`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub variant: Variant,
    #[serde(rename = "B")]
    pub b: usize,
    #[serde(rename = "C")]
    pub c: usize,
    /// `[src, dst, on]`, every learnable connection, ordered by `(dst, src)`.
    pub connections: Vec<(usize, usize, bool)>,
    /// `[op, kind]` for ops `1..`.
    pub merges: Vec<(usize, MergeKind)>,
    pub readout: ReadoutKind,
    pub provenance: Provenance,
}

impl Architecture {
    /// Every connection OFF, every merge `merge`.
    pub fn empty(variant: Variant, b: usize, c: usize, merge: MergeKind, readout: ReadoutKind, provenance: Provenance) -> Self {
        let layout = Layout::new(b / c.max(1), c.max(1));
        Self {
            variant,
            b,
            c,
            connections: layout.connections().into_iter().map(|(s, d)| (s, d, false)).collect(),
            merges: layout.merge_ops().map(|op| (op, merge)).collect(),
            readout,
            provenance,
        }
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.b / self.c.max(1), self.c.max(1))
    }

    /// Checks that the document matches its own layout.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.b == 0 || self.c == 0 || self.b % self.c != 0 {
            return bad(format!("B = {} and C = {} do not form a valid layout", self.b, self.c));
        }
        if (self.variant == Variant::Full) != (self.c == 1) {
            return bad(format!("{} variant with C = {}", self.variant, self.c));
        }
        let layout = self.layout();
        let expected = layout.connections();
        let got: Vec<_> = self.connections.iter().map(|&(s, d, _)| (s, d)).collect();
        if got != expected {
            let missing = expected.iter().find(|p| !got.contains(p));
            let extra = got.iter().find(|p| !expected.contains(p));
            return bad(format!(
                "connection list does not match the layout (missing {missing:?}, unexpected {extra:?}, {} vs {} entries)",
                got.len(),
                expected.len()
            ));
        }
        let ops: Vec<_> = self.merges.iter().map(|&(op, _)| op).collect();
        if ops != layout.merge_ops().collect::<Vec<_>>() {
            return bad(format!("merges must list ops 1..={} in order", layout.sink()));
        }
        Ok(())
    }

    pub fn is_on(&self, src: usize, dst: usize) -> bool {
        self.connections.iter().any(|&(s, d, on)| on && s == src && d == dst)
    }

    pub fn set(&mut self, src: usize, dst: usize, on: bool) -> Result<()> {
        let entry = self
            .connections
            .iter_mut()
            .find(|(s, d, _)| *s == src && *d == dst)
            .ok_or_else(|| Error::Invalid(format!("{src}→{dst} is not a learnable connection")))?;
        entry.2 = on;
        Ok(())
    }

    pub fn merge_of(&self, op: usize) -> Option<MergeKind> {
        self.merges.iter().find(|&&(o, _)| o == op).map(|&(_, k)| k)
    }

    pub fn set_merge(&mut self, op: usize, kind: MergeKind) -> Result<()> {
        let entry = self
            .merges
            .iter_mut()
            .find(|(o, _)| *o == op)
            .ok_or_else(|| Error::Invalid(format!("op {op} has no merge")))?;
        entry.1 = kind;
        Ok(())
    }

    /// ON sources of each op.
    pub fn incoming(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &(s, d, on) in &self.connections {
            if on {
                map.entry(d).or_default().push(s);
            }
        }
        map
    }

    pub fn on_count(&self) -> usize {
        self.connections.iter().filter(|c| c.2).count()
    }

    /// Ops whose output reaches the readout through ON connections. The
    /// pre-processing op and the sink are always included.
    pub fn live_ops(&self) -> BTreeSet<usize> {
        let layout = self.layout();
        let mut live = BTreeSet::from([layout.sink()]);
        let incoming = self.incoming();
        for op in (1..=layout.sink()).rev() {
            if live.contains(&op) {
                if let Some(srcs) = incoming.get(&op) {
                    live.extend(srcs.iter().copied());
                }
            }
        }
        live.insert(0);
        live
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("architecture serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let arch: Self = serde_json::from_str(text)?;
        arch.validate()?;
        Ok(arch)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str::<Self>(&text)
            .map_err(|e| Error::Format {
                path: path.to_path_buf(),
                line: e.line(),
                msg: format!("column {}: {e}", e.column()),
            })
            .and_then(|a| a.validate().map(|_| a))
    }
}

/// Fixed baseline designs hosted in a Full supernet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Consecutive connections only.
    GcnStack(usize),
    /// Consecutive plus `j−2 → j` skips, summed.
    ResGcn(usize),
    /// Consecutive plus every aggregation op into the post-processing op,
    /// concatenated there.
    Jk(usize),
}

impl Preset {
    pub fn layers(self) -> usize {
        match self {
            Preset::GcnStack(l) | Preset::ResGcn(l) | Preset::Jk(l) => l,
        }
    }

    pub fn family(self) -> &'static str {
        match self {
            Preset::GcnStack(_) => "GCN_stack",
            Preset::ResGcn(_) => "ResGCN",
            Preset::Jk(_) => "JK",
        }
    }

    pub fn with_layers(self, l: usize) -> Self {
        match self {
            Preset::GcnStack(_) => Preset::GcnStack(l),
            Preset::ResGcn(_) => Preset::ResGcn(l),
            Preset::Jk(_) => Preset::Jk(l),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.family(), self.layers())
    }
}

impl FromStr for Preset {
    type Err = Error;

    /// `GCN_stack(4)`, `resgcn(8)`, `jk(2)`.
    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::Config(format!("bad preset {s:?} (expected e.g. GCN_stack(4), ResGCN(4), JK(4))"));
        let (name, rest) = s.trim().split_once('(').ok_or_else(err)?;
        let l: usize = rest.strip_suffix(')').ok_or_else(err)?.trim().parse().map_err(|_| err())?;
        match name.trim().to_ascii_lowercase().as_str() {
            "gcn_stack" | "gcn" => Ok(Preset::GcnStack(l)),
            "resgcn" => Ok(Preset::ResGcn(l)),
            "jk" | "gcnjk" => Ok(Preset::Jk(l)),
            _ => Err(err()),
        }
    }
}

/// Builds `preset` inside a Full supernet with `b ≥ L` aggregation ops.
/// Ops beyond `L` stay disconnected and never execute.
pub fn preset_architecture(preset: Preset, b: usize) -> Result<Architecture> {
    let l = preset.layers();
    if l == 0 || l > b {
        return Err(Error::Config(format!("{preset} needs 1 ≤ L ≤ B = {b}")));
    }
    let post = b + 1;
    let mut arch = Architecture::empty(
        Variant::Full,
        b,
        1,
        MergeKind::Sum,
        ReadoutKind::Gsum,
        Provenance::new(format!("preset:{preset}")),
    );
    for j in 1..=l {
        arch.set(j - 1, j, true)?;
    }
    arch.set(l, post, true)?;
    match preset {
        Preset::GcnStack(_) => {}
        Preset::ResGcn(_) => {
            for j in 2..=l {
                arch.set(j - 2, j, true)?;
            }
        }
        Preset::Jk(_) => {
            for j in 1..=l {
                arch.set(j, post, true)?;
            }
            arch.set_merge(post, MergeKind::Concat)?;
        }
    }
    Ok(arch)
}

/// Hand-built Full B8C1 design of depth 4 that leans on non-consecutive
/// connections; used as a fixture for depth accounting and serialization.
pub fn reference_architecture() -> Architecture {
    let mut arch = Architecture::empty(
        Variant::Full,
        8,
        1,
        MergeKind::Sum,
        ReadoutKind::Gmean,
        Provenance::new("reference:full-b8c1-depth4"),
    );
    let on = [
        (0, 1),
        (0, 2),
        (0, 3),
        (1, 4),
        (2, 4),
        (2, 5),
        (3, 6),
        (4, 6),
        (5, 7),
        (6, 8),
        (0, 9),
        (4, 9),
        (7, 9),
        (8, 9),
    ];
    for (s, d) in on {
        arch.set(s, d, true).expect("learnable");
    }
    for (op, kind) in [(4, MergeKind::Mean), (6, MergeKind::Max), (9, MergeKind::Concat)] {
        arch.set_merge(op, kind).expect("op exists");
    }
    arch
}
