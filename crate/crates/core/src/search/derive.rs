use crate::autodiff::ParamStore;
use crate::ops::{MergeKind, ReadoutKind};
use crate::supernet::{Architecture, Provenance, SuperNet};

/// Index of the largest entry, ties to the lowest index.
fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Strongest candidate of every choice, without repair.
pub fn derive_raw(net: &SuperNet, store: &ParamStore, provenance: Provenance) -> Architecture {
    let cfg = net.config();
    let layout = net.layout();
    let mut arch = Architecture::empty(cfg.variant, cfg.b, cfg.c, MergeKind::Concat, ReadoutKind::Gmean, provenance);
    for cell in 0..layout.cells() {
        for (i, j) in layout.cell_pairs() {
            let theta = store.value(net.connection_alpha(cell, i, j));
            let on = theta[[0, 0]] > theta[[0, 1]];
            arch.set(layout.global(cell, i), layout.global(cell, j), on).expect("layout pair");
        }
        for j in 1..=layout.per_cell() + 1 {
            let row = store.value(net.merge_alpha(cell, j)).iter().copied().collect::<Vec<_>>();
            arch.set_merge(layout.global(cell, j), MergeKind::ALL[argmax(&row)]).expect("layout op");
        }
    }
    let row = store.value(net.readout_alpha()).iter().copied().collect::<Vec<_>>();
    arch.readout = ReadoutKind::ALL[argmax(&row)];
    arch
}

/// Keeps the strongest candidate of every choice (connections ON only when
/// strictly preferred), then repairs the result.
pub fn derive_architecture(net: &SuperNet, store: &ParamStore, provenance: Provenance) -> Architecture {
    repair_architecture(derive_raw(net, store, provenance))
}

/// Makes every op of every cell lie on a path from the cell input to its
/// post-processing op: an op without an ON input gets `j−1 → j`, then an
/// aggregation op without an ON output gets `j → j+1`.
pub fn repair_architecture(mut arch: Architecture) -> Architecture {
    let layout = arch.layout();
    let b = layout.per_cell();
    for cell in 0..layout.cells() {
        for j in 1..=b + 1 {
            let dst = layout.global(cell, j);
            let fed = arch.connections.iter().any(|&(_, d, on)| on && d == dst);
            if !fed {
                arch.set(layout.global(cell, j - 1), dst, true).expect("consecutive pair");
            }
        }
        for j in (1..=b).rev() {
            let src = layout.global(cell, j);
            let used = arch.connections.iter().any(|&(s, _, on)| on && s == src);
            if !used {
                arch.set(src, layout.global(cell, j + 1), true).expect("consecutive pair");
            }
        }
    }
    arch
}
