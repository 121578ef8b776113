use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Linear, LstmCell};
use crate::autodiff::{ParamId, ParamStore, Reduce, Segments, Tape, Var};
use crate::error::{Error, Result};

/// Recurrent steps of the SET2SET readout.
pub const SET2SET_STEPS: usize = 3;

/// Candidate readout operations, in candidate order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ReadoutKind {
    Gmean,
    Gmax,
    Gsum,
    Gsort,
    Gatt,
    Set2set,
    Mema,
}

impl ReadoutKind {
    pub const ALL: [ReadoutKind; 7] = [
        Self::Gmean,
        Self::Gmax,
        Self::Gsum,
        Self::Gsort,
        Self::Gatt,
        Self::Set2set,
        Self::Mema,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).expect("listed")
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Gmean => "GMEAN",
            Self::Gmax => "GMAX",
            Self::Gsum => "GSUM",
            Self::Gsort => "GSORT",
            Self::Gatt => "GATT",
            Self::Set2set => "SET2SET",
            Self::Mema => "MEMA",
        }
    }
}

impl fmt::Display for ReadoutKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReadoutKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown readout {s:?}")))
    }
}

/// Sort-pool size: 30th percentile of `node_counts`, at least 1.
pub fn sort_pool_k(node_counts: &[usize]) -> usize {
    if node_counts.is_empty() {
        return 1;
    }
    let mut sorted = node_counts.to_vec();
    sorted.sort_unstable();
    let pos = ((sorted.len() as f64 * 0.3).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[pos].max(1)
}

/// Parameters of all readout candidates. Every candidate yields `g × h`.
#[derive(Debug, Clone)]
pub struct ReadoutParams {
    hidden: usize,
    sort_k: usize,
    sort_proj: Linear,
    gate: Linear,
    proj: Linear,
    s2s_cell: LstmCell,
    s2s_out: Linear,
    mema: Linear,
}

impl ReadoutParams {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, hidden: usize, sort_k: usize, rng: &mut R) -> Self {
        let sort_k = sort_k.max(1);
        let h = hidden;
        Self {
            hidden,
            sort_k,
            sort_proj: Linear::new(store, &format!("{name}.gsort"), sort_k * h, h, true, rng),
            gate: Linear::new(store, &format!("{name}.gatt.gate"), h, h, true, rng),
            proj: Linear::new(store, &format!("{name}.gatt.proj"), h, h, true, rng),
            s2s_cell: LstmCell::new(store, &format!("{name}.set2set.lstm"), 2 * h, h, true, rng),
            s2s_out: Linear::new(store, &format!("{name}.set2set.out"), 2 * h, h, true, rng),
            mema: Linear::new(store, &format!("{name}.mema"), 2 * h, h, true, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn sort_k(&self) -> usize {
        self.sort_k
    }

    pub fn params_of(&self, kind: ReadoutKind) -> Vec<ParamId> {
        match kind {
            ReadoutKind::Gmean | ReadoutKind::Gmax | ReadoutKind::Gsum => Vec::new(),
            ReadoutKind::Gsort => self.sort_proj.params(),
            ReadoutKind::Gatt => [self.gate.params(), self.proj.params()].concat(),
            ReadoutKind::Set2set => [self.s2s_cell.params(), self.s2s_out.params()].concat(),
            ReadoutKind::Mema => self.mema.params(),
        }
    }

    pub fn params(&self) -> Vec<ParamId> {
        ReadoutKind::ALL.iter().flat_map(|&k| self.params_of(k)).collect()
    }

    pub fn apply<'t>(&self, tape: &'t Tape, store: &ParamStore, kind: ReadoutKind, h: Var<'t>, seg: &Arc<Segments>) -> Result<Var<'t>> {
        match kind {
            ReadoutKind::Gmean => h.segment_reduce(seg, Reduce::Mean),
            ReadoutKind::Gmax => h.segment_reduce(seg, Reduce::Max),
            ReadoutKind::Gsum => h.segment_reduce(seg, Reduce::Sum),
            ReadoutKind::Gsort => self.sort_proj.forward(tape, store, h.sort_pool(seg, self.sort_k)?),
            ReadoutKind::Gatt => {
                let gate = self.gate.forward(tape, store, h)?.sigmoid()?;
                let value = self.proj.forward(tape, store, h)?.tanh()?;
                gate.mul(value)?.segment_reduce(seg, Reduce::Sum)
            }
            ReadoutKind::Set2set => self.set2set(tape, store, h, seg),
            ReadoutKind::Mema => {
                let both = Var::concat_cols(&[h.segment_reduce(seg, Reduce::Mean)?, h.segment_reduce(seg, Reduce::Max)?])?;
                self.mema.forward(tape, store, both)
            }
        }
    }

    fn set2set<'t>(&self, tape: &'t Tape, store: &ParamStore, h: Var<'t>, seg: &Arc<Segments>) -> Result<Var<'t>> {
        let g = seg.graphs();
        let k = self.hidden;
        let mut q_star = tape.zeros(g, 2 * k);
        let mut state = (tape.zeros(g, k), tape.zeros(g, k));
        for _ in 0..SET2SET_STEPS {
            state = self.s2s_cell.step(tape, store, q_star, state)?;
            let q = state.0;
            let e = h.mul(q.gather_segments(seg)?)?.row_sum()?;
            let a = segment_softmax(e, seg)?;
            let r = h.mul_col(a)?.segment_reduce(seg, Reduce::Sum)?;
            q_star = Var::concat_cols(&[q, r])?;
        }
        self.s2s_out.forward(tape, store, q_star)
    }
}

/// Softmax of an `n×1` score column within each graph.
fn segment_softmax<'t>(e: Var<'t>, seg: &Arc<Segments>) -> Result<Var<'t>> {
    let v = e.value();
    let mut shift = Array2::zeros((seg.nodes(), 1));
    for g in 0..seg.graphs() {
        let members = seg.members(g);
        let m = members.iter().map(|&i| v[[i, 0]]).fold(f64::NEG_INFINITY, f64::max);
        for &i in members {
            shift[[i, 0]] = m;
        }
    }
    let x = e.sub(e.tape().constant(shift))?.exp()?;
    let total = x.segment_reduce(seg, Reduce::Sum)?.gather_segments(seg)?;
    x.div(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_diff_check, GradCheckConfig, ParamGroup, TrainMask};
    use ndarray::array;

    fn setup(h: usize, k: usize) -> (ParamStore, ReadoutParams) {
        let mut store = ParamStore::new();
        let r = ReadoutParams::new(&mut store, "r", h, k, &mut crate::rng::rng(9));
        (store, r)
    }

    fn permute_within(x: &Array2<f64>, perm: &[usize]) -> Array2<f64> {
        Array2::from_shape_fn(x.dim(), |(i, j)| x[[perm[i], j]])
    }

    #[test]
    fn names_round_trip() {
        for k in ReadoutKind::ALL {
            assert_eq!(k.name().parse::<ReadoutKind>().unwrap(), k);
            assert_eq!(ReadoutKind::ALL[k.index()], k);
        }
    }

    #[test]
    fn gsum_example() {
        let (store, r) = setup(2, 1);
        let tape = Tape::new(TrainMask::All);
        let seg = Arc::new(Segments::from_sizes(&[2]).unwrap());
        let y = r
            .apply(&tape, &store, ReadoutKind::Gsum, tape.constant(array![[1.0, 2.0], [3.0, 4.0]]), &seg)
            .unwrap();
        assert_eq!(*y.value(), array![[4.0, 6.0]]);
    }

    #[test]
    fn sort_pool_k_is_thirtieth_percentile() {
        assert_eq!(sort_pool_k(&[]), 1);
        assert_eq!(sort_pool_k(&[0]), 1);
        assert_eq!(sort_pool_k(&(1..=10).collect::<Vec<_>>()), 3);
        assert_eq!(sort_pool_k(&[50, 4, 7]), 4);
    }

    #[test]
    fn every_readout_has_width_h_and_ignores_node_order() {
        let (store, r) = setup(3, 4);
        let seg = Arc::new(Segments::from_sizes(&[3, 2]).unwrap());
        let x = Array2::from_shape_fn((5, 3), |(i, j)| ((i * 3 + j) as f64 * 0.71).cos());
        // swap nodes 0 and 2 in graph 0, and the two nodes of graph 1
        let xp = permute_within(&x, &[2, 1, 0, 4, 3]);
        for kind in ReadoutKind::ALL {
            let tape = Tape::new(TrainMask::All);
            let a = r.apply(&tape, &store, kind, tape.constant(x.clone()), &seg).unwrap().value();
            let b = r.apply(&tape, &store, kind, tape.constant(xp.clone()), &seg).unwrap().value();
            assert_eq!(a.dim(), (2, 3), "{kind}");
            let diff = (&*a - &*b).mapv(f64::abs).sum();
            assert!(diff < 1e-12, "{kind}: {diff}");
        }
    }

    #[test]
    fn gsort_pads_short_graphs() {
        let (mut store, r) = setup(2, 3);
        // identity-like projection that reads the flattened sort-pool row
        let w = Array2::from_shape_fn((6, 2), |(i, j)| if i == 4 + j { 1.0 } else { 0.0 });
        *store.value_mut(r.sort_proj.weight()) = w;
        store.value_mut(r.sort_proj.bias().unwrap()).fill(0.0);
        let tape = Tape::new(TrainMask::All);
        let seg = Arc::new(Segments::from_sizes(&[2]).unwrap());
        let y = r
            .apply(&tape, &store, ReadoutKind::Gsort, tape.constant(array![[1.0, 2.0], [3.0, 4.0]]), &seg)
            .unwrap();
        assert_eq!(*y.value(), array![[0.0, 0.0]]);
    }

    #[test]
    fn every_readout_passes_gradient_check() {
        let (mut store, r) = setup(2, 2);
        let x = store.add(
            "x",
            ParamGroup::Weights,
            Array2::from_shape_fn((5, 2), |(i, j)| ((i * 2 + j) as f64 * 1.13).sin()),
        );
        let seg = Arc::new(Segments::from_sizes(&[3, 1, 1]).unwrap());
        for kind in ReadoutKind::ALL {
            let mut ids = r.params_of(kind);
            ids.push(x);
            let report = finite_diff_check(
                &mut store,
                &ids,
                |t, s| r.apply(t, s, kind, t.param(s, x), &seg)?.tanh()?.sum_all(),
                GradCheckConfig::default(),
            )
            .unwrap();
            assert!(report.passed(), "{kind}: {report:?}");
        }
    }
}
