use std::collections::{BTreeSet, HashMap};

use ndarray::Array2;
use serde::Serialize;

use super::architecture::Architecture;
use super::config::{Layout, SuperNetConfig, Variant};
use super::gumbel::{gumbel_softmax, NoiseSource};
use crate::autodiff::{ParamGroup, ParamId, ParamStore, Tape, Var};
use crate::data::GraphBatch;
use crate::error::{Error, Result};
use crate::ops::{AggregationLayer, Dropout, Linear, MergeKind, MergeParams, Mlp2, ReadoutKind, ReadoutParams};
use crate::rng::SeedStreams;

/// Operation weights of one cell.
#[derive(Debug, Clone)]
pub struct CellWeights {
    aggregations: Vec<AggregationLayer>,
    post: Mlp2,
    /// Indexed by local op − 1.
    merges: Vec<MergeParams>,
}

impl CellWeights {
    pub fn aggregation(&self, local: usize) -> &AggregationLayer {
        &self.aggregations[local - 1]
    }

    pub fn post(&self) -> &Mlp2 {
        &self.post
    }

    pub fn merge(&self, local: usize) -> &MergeParams {
        &self.merges[local - 1]
    }
}

/// Architecture logits `θ = ln α` of one cell.
#[derive(Debug, Clone)]
pub struct CellAlphas {
    /// One `1×2` `[ON, OFF]` row per pair of [`Layout::cell_pairs`].
    connections: Vec<ParamId>,
    /// One `1×6` row per local op `1..=b+1`.
    merges: Vec<ParamId>,
}

/// How mixed choices are resolved during a forward pass.
pub enum Mode<'a> {
    Relaxed { temperature: f64, noise: &'a mut NoiseSource },
    Discrete(&'a Architecture),
}

pub struct Forward<'t> {
    pub logits: Var<'t>,
    /// Graph vectors fed to the classifier.
    pub embedding: Var<'t>,
    /// Output of every op by global index; `None` for ops skipped in
    /// discrete mode.
    pub ops: Vec<Option<Var<'t>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParamCounts {
    pub connection_vectors: usize,
    pub merge_vectors: usize,
    pub readout_vectors: usize,
    pub architecture: usize,
    pub operation: usize,
}

impl ParamCounts {
    pub fn total(&self) -> usize {
        self.architecture + self.operation
    }
}

/// The relaxed search space. Parameter values live in a separate
/// [`ParamStore`] returned by [`SuperNet::build`].
#[derive(Debug, Clone)]
pub struct SuperNet {
    config: SuperNetConfig,
    layout: Layout,
    pre: Mlp2,
    cells: Vec<CellWeights>,
    alphas: Vec<CellAlphas>,
    readout: ReadoutParams,
    readout_alpha: ParamId,
    classifier: Linear,
}

impl SuperNet {
    pub fn build(config: SuperNetConfig) -> Result<(Self, ParamStore)> {
        config.validate()?;
        let layout = config.layout();
        let h = config.hidden;
        let mut store = ParamStore::new();
        let mut rng = crate::rng::rng(SeedStreams::new(config.seed).init());
        let pre = Mlp2::new(&mut store, "pre", config.input_dim, h, &mut rng);

        let stored = match config.variant {
            Variant::Full | Variant::Repeat => 1,
            Variant::Diverse => layout.cells(),
        };
        let mut cells = Vec::with_capacity(stored);
        let mut alphas = Vec::with_capacity(stored);
        for c in 0..stored {
            let b = layout.per_cell();
            let aggregations = (1..=b)
                .map(|k| AggregationLayer::new(&mut store, &format!("cell{c}.agg{k}"), config.aggregation, h, h, &mut rng))
                .collect();
            let post = Mlp2::new(&mut store, &format!("cell{c}.post"), h, h, &mut rng);
            let merges = (1..=b + 1)
                .map(|j| MergeParams::new(&mut store, &format!("cell{c}.merge{j}"), j, h, &mut rng))
                .collect();
            cells.push(CellWeights {
                aggregations,
                post,
                merges,
            });
            let arch = ParamGroup::Architecture;
            alphas.push(CellAlphas {
                connections: layout
                    .cell_pairs()
                    .into_iter()
                    .map(|(i, j)| store.add(format!("cell{c}.alpha_c.{i}-{j}"), arch, Array2::zeros((1, 2))))
                    .collect(),
                merges: (1..=b + 1)
                    .map(|j| store.add(format!("cell{c}.alpha_m.{j}"), arch, Array2::zeros((1, MergeKind::ALL.len()))))
                    .collect(),
            });
        }
        let readout = ReadoutParams::new(&mut store, "readout", h, config.sort_k, &mut rng);
        let readout_alpha = store.add("alpha_r", ParamGroup::Architecture, Array2::zeros((1, ReadoutKind::ALL.len())));
        let classifier = Linear::new(&mut store, "classifier", h, config.classes, true, &mut rng);
        Ok((
            Self {
                config,
                layout,
                pre,
                cells,
                alphas,
                readout,
                readout_alpha,
                classifier,
            },
            store,
        ))
    }

    pub fn config(&self) -> &SuperNetConfig {
        &self.config
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    fn stored_index(&self, cell: usize) -> usize {
        match self.config.variant {
            Variant::Diverse => cell,
            Variant::Full | Variant::Repeat => 0,
        }
    }

    /// Number of independently stored cells (1 for Full and Repeat).
    pub fn stored_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn pre(&self) -> &Mlp2 {
        &self.pre
    }

    pub fn cell(&self, cell: usize) -> &CellWeights {
        &self.cells[self.stored_index(cell)]
    }

    pub fn readout(&self) -> &ReadoutParams {
        &self.readout
    }

    pub fn classifier(&self) -> &Linear {
        &self.classifier
    }

    /// `[ON, OFF]` logits of a connection given in local numbering.
    pub fn connection_alpha(&self, cell: usize, src: usize, dst: usize) -> ParamId {
        let pos = self
            .layout
            .cell_pairs()
            .iter()
            .position(|&p| p == (src, dst))
            .expect("learnable pair");
        self.alphas[self.stored_index(cell)].connections[pos]
    }

    pub fn merge_alpha(&self, cell: usize, local: usize) -> ParamId {
        self.alphas[self.stored_index(cell)].merges[local - 1]
    }

    pub fn readout_alpha(&self) -> ParamId {
        self.readout_alpha
    }

    pub fn alpha_ids(&self) -> Vec<ParamId> {
        let mut ids: Vec<_> = self
            .alphas
            .iter()
            .flat_map(|a| a.connections.iter().chain(&a.merges).copied())
            .collect();
        ids.push(self.readout_alpha);
        ids
    }

    pub fn weight_ids(&self) -> Vec<ParamId> {
        let mut ids = self.pre.params();
        for c in &self.cells {
            for a in &c.aggregations {
                ids.extend(a.params());
            }
            ids.extend(c.post.params());
            for m in &c.merges {
                ids.extend(m.params());
            }
        }
        ids.extend(self.readout.params());
        ids.extend(self.classifier.params());
        ids
    }

    pub fn count_parameters(&self, store: &ParamStore) -> ParamCounts {
        let conn: usize = self.alphas.iter().map(|a| a.connections.len()).sum();
        let merges: usize = self.alphas.iter().map(|a| a.merges.len()).sum();
        ParamCounts {
            connection_vectors: conn,
            merge_vectors: merges,
            readout_vectors: 1,
            architecture: store.scalar_count(&self.alpha_ids()),
            operation: store.scalar_count(&self.weight_ids()),
        }
    }

    /// Weights that a discrete forward of `arch` actually touches, sorted.
    pub fn active_params(&self, arch: &Architecture) -> Result<Vec<ParamId>> {
        self.check_arch(arch)?;
        let live = arch.live_ops();
        let mut ids: BTreeSet<ParamId> = self.pre.params().into_iter().collect();
        for &op in live.iter().filter(|&&op| op > 0) {
            let (cell, local) = self.layout.locate(op);
            let w = self.cell(cell);
            let kind = arch.merge_of(op).expect("validated");
            ids.extend(w.merge(local).params_of(kind));
            if local <= self.layout.per_cell() {
                ids.extend(w.aggregation(local).params());
            } else {
                ids.extend(w.post.params());
            }
        }
        ids.extend(self.readout.params_of(arch.readout));
        ids.extend(self.classifier.params());
        Ok(ids.into_iter().collect())
    }

    pub fn active_parameter_count(&self, store: &ParamStore, arch: &Architecture) -> Result<usize> {
        Ok(store.scalar_count(&self.active_params(arch)?))
    }

    fn check_arch(&self, arch: &Architecture) -> Result<()> {
        if arch.variant != self.config.variant || arch.b != self.config.b || arch.c != self.config.c {
            return Err(Error::Invalid(format!(
                "architecture {} B{}C{} does not fit supernet {} B{}C{}",
                arch.variant, arch.b, arch.c, self.config.variant, self.config.b, self.config.c
            )));
        }
        arch.validate()
    }

    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        batch: &GraphBatch,
        mode: Mode<'_>,
        dropout: &mut Dropout,
    ) -> Result<Forward<'t>> {
        let x = batch.features();
        if x.ncols() != self.config.input_dim {
            return Err(Error::Shape {
                op: "supernet_forward",
                lhs: x.dim(),
                rhs: (x.nrows(), self.config.input_dim),
            });
        }
        match mode {
            Mode::Relaxed { temperature, noise } => self.forward_relaxed(tape, store, batch, temperature, noise, dropout),
            Mode::Discrete(arch) => {
                self.check_arch(arch)?;
                self.forward_discrete(tape, store, batch, arch, dropout)
            }
        }
    }

    fn run_op<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        batch: &GraphBatch,
        op: usize,
        merged: Var<'t>,
        dropout: &mut Dropout,
    ) -> Result<Var<'t>> {
        let (cell, local) = self.layout.locate(op);
        let w = self.cell(cell);
        if local <= self.layout.per_cell() {
            let input = dropout.apply(merged)?;
            w.aggregation(local).forward(tape, store, batch, input)
        } else {
            w.post.forward(tape, store, merged)
        }
    }

    fn head<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        embedding: Var<'t>,
        ops: Vec<Option<Var<'t>>>,
        dropout: &mut Dropout,
    ) -> Result<Forward<'t>> {
        let logits = self.classifier.forward(tape, store, dropout.apply(embedding)?)?;
        Ok(Forward { logits, embedding, ops })
    }

    fn forward_relaxed<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        batch: &GraphBatch,
        temperature: f64,
        noise: &mut NoiseSource,
        dropout: &mut Dropout,
    ) -> Result<Forward<'t>> {
        // one draw per stored logit row, reused by cells that share it
        let mut weights: HashMap<ParamId, Var<'t>> = HashMap::new();
        let mut mix = |id: ParamId| -> Result<Var<'t>> {
            if let Some(&w) = weights.get(&id) {
                return Ok(w);
            }
            let theta = tape.param(store, id);
            let w = gumbel_softmax(theta, noise.draw(id, theta.cols()), temperature)?;
            weights.insert(id, w);
            Ok(w)
        };

        let seg = batch.segments();
        let mut ops: Vec<Option<Var<'t>>> = vec![None; self.layout.op_count()];
        ops[0] = Some(self.pre.forward(tape, store, tape.constant(batch.features().clone()))?);
        for cell in 0..self.layout.cells() {
            for j in 1..=self.layout.per_cell() + 1 {
                let mut inputs = Vec::with_capacity(j);
                for i in 0..j {
                    let c = mix(self.connection_alpha(cell, i, j))?;
                    let src = ops[self.layout.global(cell, i)].expect("earlier op");
                    inputs.push(src.scale_by(c.slice_cols(0, 1)?)?);
                }
                let wm = mix(self.merge_alpha(cell, j))?;
                let params = self.cell(cell).merge(j);
                let mut merged: Option<Var<'t>> = None;
                for kind in MergeKind::ALL {
                    let term = params
                        .apply(tape, store, kind, &inputs, seg)?
                        .scale_by(wm.slice_cols(kind.index(), 1)?)?;
                    merged = Some(match merged {
                        Some(m) => m.add(term)?,
                        None => term,
                    });
                }
                let op = self.layout.global(cell, j);
                ops[op] = Some(self.run_op(tape, store, batch, op, merged.expect("six merges"), dropout)?);
            }
        }
        let h = ops[self.layout.sink()].expect("sink computed");
        let wr = mix(self.readout_alpha)?;
        let mut embedding: Option<Var<'t>> = None;
        for kind in ReadoutKind::ALL {
            let term = self
                .readout
                .apply(tape, store, kind, h, seg)?
                .scale_by(wr.slice_cols(kind.index(), 1)?)?;
            embedding = Some(match embedding {
                Some(e) => e.add(term)?,
                None => term,
            });
        }
        self.head(tape, store, embedding.expect("seven readouts"), ops, dropout)
    }

    /// Missing connections enter the merge as zero matrices, so a discrete
    /// forward is the relaxed one with one-hot weights.
    fn forward_discrete<'t>(
        &self,
        tape: &'t Tape,
        store: &ParamStore,
        batch: &GraphBatch,
        arch: &Architecture,
        dropout: &mut Dropout,
    ) -> Result<Forward<'t>> {
        let seg = batch.segments();
        let live = arch.live_ops();
        let on: BTreeSet<(usize, usize)> = arch.connections.iter().filter(|c| c.2).map(|c| (c.0, c.1)).collect();
        let (n, h) = (batch.nodes(), self.config.hidden);
        let zeros = tape.zeros(n, h);

        let mut ops: Vec<Option<Var<'t>>> = vec![None; self.layout.op_count()];
        ops[0] = Some(self.pre.forward(tape, store, tape.constant(batch.features().clone()))?);
        for cell in 0..self.layout.cells() {
            for j in 1..=self.layout.per_cell() + 1 {
                let op = self.layout.global(cell, j);
                if !live.contains(&op) {
                    continue;
                }
                let inputs = (0..j)
                    .map(|i| {
                        let src = self.layout.global(cell, i);
                        if on.contains(&(src, op)) {
                            Ok(ops[src].expect("live source computed"))
                        } else {
                            Ok(zeros)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                let kind = arch.merge_of(op).expect("validated");
                let merged = self.cell(cell).merge(j).apply(tape, store, kind, &inputs, seg)?;
                ops[op] = Some(self.run_op(tape, store, batch, op, merged, dropout)?);
            }
        }
        let h_final = ops[self.layout.sink()].expect("sink is live");
        let embedding = self.readout.apply(tape, store, arch.readout, h_final, seg)?;
        self.head(tape, store, embedding, ops, dropout)
    }
}
