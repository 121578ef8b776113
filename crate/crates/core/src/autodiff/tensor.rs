use std::collections::BTreeMap;

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};

/// Dense row-major matrix with an optional gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    value: Array2<f64>,
    grad: Option<Array2<f64>>,
}

impl Tensor {
    pub fn new(value: Array2<f64>, requires_grad: bool) -> Self {
        let grad = requires_grad.then(|| Array2::zeros(value.raw_dim()));
        Self { value, grad }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                op: "tensor",
                lhs: (rows, cols),
                rhs: (data.len(), 1),
            });
        }
        let value = Array2::from_shape_vec((rows, cols), data).expect("length checked");
        Ok(Self::new(value, false))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(Array2::zeros((rows, cols)), false)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.dim()
    }

    pub fn rows(&self) -> usize {
        self.value.nrows()
    }

    pub fn cols(&self) -> usize {
        self.value.ncols()
    }

    pub fn value(&self) -> &Array2<f64> {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut Array2<f64> {
        &mut self.value
    }

    pub fn requires_grad(&self) -> bool {
        self.grad.is_some()
    }

    pub fn grad(&self) -> Option<&Array2<f64>> {
        self.grad.as_ref()
    }

    pub fn grad_mut(&mut self) -> Option<&mut Array2<f64>> {
        self.grad.as_mut()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.fill(0.0);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Which optimizer owns a parameter during bi-level search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    /// Operation weights, updated on training batches.
    Weights,
    /// Architecture logits, updated on validation batches.
    Architecture,
}

#[derive(Debug, Clone)]
pub struct Parameter {
    name: String,
    group: ParamGroup,
    tensor: Tensor,
    has_fresh_grad: bool,
    updates: u64,
}

impl Parameter {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn group(&self) -> ParamGroup {
        self.group
    }

    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }

    pub fn value(&self) -> &Array2<f64> {
        self.tensor.value()
    }

    /// Number of optimizer steps applied to this parameter.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn len(&self) -> usize {
        self.tensor.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Owns every learnable tensor of a model.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, group: ParamGroup, value: Array2<f64>) -> ParamId {
        self.params.push(Parameter {
            name: name.into(),
            group,
            tensor: Tensor::new(value, true),
            has_fresh_grad: false,
            updates: 0,
        });
        ParamId(self.params.len() - 1)
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn add_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        fan_in: usize,
        rng: &mut R,
    ) -> ParamId {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let value = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound));
        self.add(name, ParamGroup::Weights, value)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Array2<f64> {
        self.params[id.0].tensor.value()
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        self.params[id.0].tensor.value_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.params.len()).map(ParamId)
    }

    pub fn ids_in(&self, group: ParamGroup) -> Vec<ParamId> {
        self.ids().filter(|&id| self.get(id).group == group).collect()
    }

    pub fn scalar_count(&self, ids: &[ParamId]) -> usize {
        ids.iter().map(|&id| self.get(id).len()).sum()
    }

    /// Adds tape gradients into the parameters' gradient buffers.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (id, g) in grads.iter() {
            let p = &mut self.params[id.0];
            if let Some(buf) = p.tensor.grad_mut() {
                *buf += g;
                p.has_fresh_grad = true;
            }
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.tensor.zero_grad();
            p.has_fresh_grad = false;
        }
    }

    /// Gradient of a parameter if a backward sweep reached it since the last step.
    pub fn fresh_grad(&self, id: ParamId) -> Result<&Array2<f64>> {
        let p = &self.params[id.0];
        match (p.has_fresh_grad, p.tensor.grad()) {
            (true, Some(g)) => Ok(g),
            _ => Err(Error::MissingGradient(p.name.clone())),
        }
    }

    pub(crate) fn apply_update(&mut self, id: ParamId, f: impl FnOnce(&mut Array2<f64>, &Array2<f64>)) {
        let p = &mut self.params[id.0];
        let grad = p.tensor.grad.take().expect("parameters always carry a gradient buffer");
        f(&mut p.tensor.value, &grad);
        p.tensor.grad = Some(grad);
        p.tensor.zero_grad();
        p.has_fresh_grad = false;
        p.updates += 1;
    }

    pub fn norm(&self, ids: &[ParamId]) -> f64 {
        ids.iter()
            .map(|&id| self.value(id).iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}

/// Per-parameter gradients collected by one backward sweep.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    entries: BTreeMap<ParamId, Array2<f64>>,
}

impl Gradients {
    pub(crate) fn push(&mut self, id: ParamId, grad: Array2<f64>) {
        match self.entries.get_mut(&id) {
            Some(g) => *g += &grad,
            None => {
                self.entries.insert(id, grad);
            }
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.entries.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Array2<f64>)> {
        self.entries.iter().map(|(i, g)| (*i, g))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Node-to-graph assignment used by segment reductions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segments {
    graph_of: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Segments {
    pub fn new(graph_of: Vec<usize>, graphs: usize) -> Result<Self> {
        let mut members = vec![Vec::new(); graphs];
        for (node, &g) in graph_of.iter().enumerate() {
            if g >= graphs {
                return Err(Error::Invalid(format!(
                    "node {node} assigned to segment {g} but only {graphs} segments exist"
                )));
            }
            members[g].push(node);
        }
        if let Some(empty) = members.iter().position(Vec::is_empty) {
            return Err(Error::EmptySegment(empty));
        }
        Ok(Self { graph_of, members })
    }

    /// Contiguous segments of the given sizes.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let graph_of = sizes
            .iter()
            .enumerate()
            .flat_map(|(g, &n)| std::iter::repeat_n(g, n))
            .collect();
        Self::new(graph_of, sizes.len())
    }

    pub fn nodes(&self) -> usize {
        self.graph_of.len()
    }

    pub fn graphs(&self) -> usize {
        self.members.len()
    }

    pub fn graph_of(&self) -> &[usize] {
        &self.graph_of
    }

    pub fn members(&self, graph: usize) -> &[usize] {
        &self.members[graph]
    }
}

/// Block-diagonal square matrix stored as its dense diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonal {
    blocks: Vec<Array2<f64>>,
    offsets: Vec<usize>,
}

impl BlockDiagonal {
    pub fn new(blocks: Vec<Array2<f64>>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        offsets.push(0);
        for b in &blocks {
            if b.nrows() != b.ncols() {
                return Err(Error::Shape {
                    op: "block_diagonal",
                    lhs: b.dim(),
                    rhs: (b.ncols(), b.nrows()),
                });
            }
            offsets.push(offsets.last().unwrap() + b.nrows());
        }
        Ok(Self { blocks, offsets })
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn blocks(&self) -> &[Array2<f64>] {
        &self.blocks
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.dim();
        let mut out = Array2::zeros((n, n));
        for (b, w) in self.blocks.iter().zip(self.offsets.windows(2)) {
            out.slice_mut(s![w[0]..w[1], w[0]..w[1]]).assign(b);
        }
        out
    }

    /// `self · x`.
    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.apply_with(x, false)
    }

    /// `selfᵀ · x`.
    pub fn apply_transposed(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.apply_with(x, true)
    }

    fn apply_with(&self, x: ArrayView2<f64>, transpose: bool) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), x.ncols()));
        for (b, w) in self.blocks.iter().zip(self.offsets.windows(2)) {
            let rows = x.slice(s![w[0]..w[1], ..]);
            let prod = if transpose { b.t().dot(&rows) } else { b.dot(&rows) };
            out.slice_mut(s![w[0]..w[1], ..]).assign(&prod);
        }
        out
    }

    pub fn map_blocks(&self, f: impl Fn(&Array2<f64>) -> Array2<f64>) -> Self {
        Self {
            blocks: self.blocks.iter().map(f).collect(),
            offsets: self.offsets.clone(),
        }
    }
}
