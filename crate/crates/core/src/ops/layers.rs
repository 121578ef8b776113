use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::error::Result;

/// `x·W (+ b)`.
#[derive(Debug, Clone)]
pub struct Linear {
    weight: ParamId,
    bias: Option<ParamId>,
    inputs: usize,
    outputs: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize, bias: bool, rng: &mut R) -> Self {
        let weight = store.add_uniform(format!("{name}.weight"), inputs, outputs, inputs, rng);
        let bias = bias.then(|| store.add_uniform(format!("{name}.bias"), 1, outputs, inputs, rng));
        Self {
            weight,
            bias,
            inputs,
            outputs,
        }
    }

    pub fn forward<'t>(&self, tape: &'t Tape, store: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        let y = x.matmul(tape.param(store, self.weight))?;
        match self.bias {
            Some(b) => y.add_row(tape.param(store, b)),
            None => Ok(y),
        }
    }

    pub fn weight(&self) -> ParamId {
        self.weight
    }

    pub fn bias(&self) -> Option<ParamId> {
        self.bias
    }

    pub fn params(&self) -> Vec<ParamId> {
        std::iter::once(self.weight).chain(self.bias).collect()
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }
}

/// Two-layer perceptron `Linear → ReLU → Linear`.
#[derive(Debug, Clone)]
pub struct Mlp2 {
    first: Linear,
    second: Linear,
}

impl Mlp2 {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, inputs: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            first: Linear::new(store, &format!("{name}.0"), inputs, hidden, true, rng),
            second: Linear::new(store, &format!("{name}.1"), hidden, hidden, true, rng),
        }
    }

    pub fn forward<'t>(&self, tape: &'t Tape, store: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        let h = self.first.forward(tape, store, x)?.relu()?;
        self.second.forward(tape, store, h)
    }

    pub fn layers(&self) -> (&Linear, &Linear) {
        (&self.first, &self.second)
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = self.first.params();
        p.extend(self.second.params());
        p
    }
}

/// Single LSTM cell with gate order `(input, forget, candidate, output)`.
#[derive(Debug, Clone)]
pub struct LstmCell {
    input: Linear,
    recurrent: Linear,
    hidden: usize,
}

impl LstmCell {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, inputs: usize, hidden: usize, bias: bool, rng: &mut R) -> Self {
        Self {
            input: Linear::new(store, &format!("{name}.input"), inputs, 4 * hidden, bias, rng),
            recurrent: Linear::new(store, &format!("{name}.recurrent"), hidden, 4 * hidden, false, rng),
            hidden,
        }
    }

    /// One step from state `(h, c)`.
    pub fn step<'t>(&self, tape: &'t Tape, store: &ParamStore, x: Var<'t>, state: (Var<'t>, Var<'t>)) -> Result<(Var<'t>, Var<'t>)> {
        let (h, c) = state;
        let z = self
            .input
            .forward(tape, store, x)?
            .add(self.recurrent.forward(tape, store, h)?)?;
        let k = self.hidden;
        let hc = z.lstm_gates(c)?;
        let (h, c) = (hc.slice_cols(0, k)?, hc.slice_cols(k, k)?);
        Ok((h, c))
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = self.input.params();
        p.extend(self.recurrent.params());
        p
    }
}

/// Inverted dropout with its own random stream; `p = 0` is the identity.
#[derive(Debug, Clone)]
pub struct Dropout {
    p: f64,
    rng: crate::rng::Rng,
}

impl Dropout {
    pub fn new(p: f64, seed: u64) -> Self {
        Self {
            p: p.clamp(0.0, 0.99),
            rng: crate::rng::rng(seed),
        }
    }

    pub fn disabled() -> Self {
        Self::new(0.0, 0)
    }

    pub fn rate(&self) -> f64 {
        self.p
    }

    pub fn apply<'t>(&mut self, x: Var<'t>) -> Result<Var<'t>> {
        if self.p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - self.p;
        let (r, c) = x.shape();
        let mask = Array2::from_shape_fn((r, c), |_| if self.rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 });
        x.mul_const(Arc::new(mask))
    }
}
