use std::collections::VecDeque;

use serde::Serialize;

use crate::data::GraphRecord;

/// Eccentricity-based diameter. For a disconnected graph the value is the
/// diameter of its largest component and `connected` is false.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Diameter {
    pub value: usize,
    pub connected: bool,
}

fn bfs(adj: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// All-pairs BFS.
pub fn graph_diameter(graph: &GraphRecord) -> Diameter {
    let adj = graph.adjacency_lists();
    let n = adj.len();
    if n == 0 {
        return Diameter {
            value: 0,
            connected: true,
        };
    }
    let mut component = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    for s in 0..n {
        if component[s] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut size = 0;
        for (v, d) in bfs(&adj, s).into_iter().enumerate() {
            if d.is_some() {
                component[v] = id;
                size += 1;
            }
        }
        sizes.push(size);
    }
    let largest = (0..sizes.len()).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))).unwrap();
    let value = (0..n)
        .filter(|&s| component[s] == largest)
        .map(|s| bfs(&adj, s).into_iter().flatten().max().unwrap_or(0))
        .max()
        .unwrap_or(0);
    Diameter {
        value,
        connected: sizes.len() == 1,
    }
}

/// Histogram (`diameter → count`) and mean diameter over a dataset.
pub fn diameter_histogram(records: &[GraphRecord]) -> (Vec<(usize, usize)>, f64) {
    let mut hist = std::collections::BTreeMap::new();
    let mut total = 0usize;
    for r in records {
        let d = graph_diameter(r).value;
        *hist.entry(d).or_insert(0) += 1;
        total += d;
    }
    let mean = total as f64 / records.len().max(1) as f64;
    (hist.into_iter().collect(), mean)
}
