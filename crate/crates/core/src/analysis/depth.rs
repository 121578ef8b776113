use crate::supernet::Architecture;

/// Largest number of aggregation ops on any ON path from op 0 to the sink.
/// Returns 0 when the sink is unreachable.
pub fn architecture_depth(arch: &Architecture) -> usize {
    let layout = arch.layout();
    let incoming = arch.incoming();
    let mut best: Vec<Option<usize>> = vec![None; layout.op_count()];
    best[0] = Some(0);
    for op in 1..layout.op_count() {
        let from = incoming
            .get(&op)
            .into_iter()
            .flatten()
            .filter_map(|&src| best[src])
            .max();
        best[op] = from.map(|d| d + usize::from(layout.is_aggregation(op)));
    }
    best[layout.sink()].unwrap_or(0)
}
