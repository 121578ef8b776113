//! TU benchmark text format.
//!
//! A dataset `NAME` is a directory of line-oriented files: `NAME_A.txt` holds
//! one `u, v` edge per line with 1-based global node ids,
//! `NAME_graph_indicator.txt` the 1-based graph id of each node,
//! `NAME_graph_labels.txt` one integer per graph and the optional
//! `NAME_node_labels.txt` one integer per node.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::graph::{Dataset, GraphRecord};
use crate::error::{Error, Result};

fn file(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}_{suffix}.txt"))
}

fn read_required(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_ints(path: &Path, text: &str) -> Result<Vec<i64>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<i64>().map_err(|e| Error::Format {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected an integer, found {l:?} ({e})"),
            })
        })
        .collect()
}

/// Maps raw label values onto `0..k` in ascending order of value.
fn index_labels(raw: &[i64]) -> (Vec<usize>, usize) {
    let distinct: Vec<i64> = raw.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let idx = raw
        .iter()
        .map(|v| distinct.binary_search(v).expect("value is present"))
        .collect();
    (idx, distinct.len())
}

/// Reads `dir/NAME_*.txt`. Node labels, when present, become one-hot
/// features; otherwise every node gets a single constant feature.
pub fn parse_tu_dataset(dir: impl AsRef<Path>, name: &str) -> Result<Dataset> {
    let dir = dir.as_ref();
    let a_path = file(dir, name, "A");
    let ind_path = file(dir, name, "graph_indicator");
    let lab_path = file(dir, name, "graph_labels");
    let node_lab_path = file(dir, name, "node_labels");

    let a_text = read_required(&a_path)?;
    let ind_text = read_required(&ind_path)?;
    let lab_text = read_required(&lab_path)?;

    let indicator = parse_ints(&ind_path, &ind_text)?;
    let graph_labels = parse_ints(&lab_path, &lab_text)?;
    let graphs = graph_labels.len();

    let mut graph_of = Vec::with_capacity(indicator.len());
    for (line, &g) in indicator.iter().enumerate() {
        if g < 1 || g as usize > graphs {
            return Err(Error::Format {
                path: ind_path.clone(),
                line: line + 1,
                msg: format!("graph id {g} outside 1..={graphs}"),
            });
        }
        graph_of.push(g as usize - 1);
    }
    if graph_of.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Format {
            path: ind_path,
            line: graph_of.windows(2).position(|w| w[1] < w[0]).unwrap() + 2,
            msg: "graph ids must be non-decreasing".into(),
        });
    }

    let mut first_node = vec![usize::MAX; graphs];
    let mut sizes = vec![0usize; graphs];
    for (node, &g) in graph_of.iter().enumerate() {
        first_node[g] = first_node[g].min(node);
        sizes[g] += 1;
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Format {
            path: lab_path,
            line: empty + 1,
            msg: format!("graph {} has no nodes in the indicator file", empty + 1),
        });
    }

    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); graphs];
    for (i, line) in a_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Format {
            path: a_path.clone(),
            line: i + 1,
            msg,
        };
        let mut parts = line.split(',').map(str::trim);
        let (Some(u), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad(format!("expected `u, v`, found {line:?}")));
        };
        let parse = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("bad node id {s:?}: {e}")));
        let (u, v) = (parse(u)?, parse(v)?);
        for n in [u, v] {
            if n == 0 || n > graph_of.len() {
                return Err(bad(format!("node {n} is not listed in the graph indicator")));
            }
        }
        let (gu, gv) = (graph_of[u - 1], graph_of[v - 1]);
        if gu != gv {
            return Err(bad(format!("edge ({u}, {v}) joins graphs {} and {}", gu + 1, gv + 1)));
        }
        edges[gu].push((u - 1 - first_node[gu], v - 1 - first_node[gu]));
    }

    let features = match fs::read_to_string(&node_lab_path) {
        Ok(text) => {
            let raw = parse_ints(&node_lab_path, &text)?;
            if raw.len() != graph_of.len() {
                return Err(Error::Format {
                    path: node_lab_path,
                    line: raw.len().min(graph_of.len()) + 1,
                    msg: format!("{} node labels for {} nodes", raw.len(), graph_of.len()),
                });
            }
            let (idx, width) = index_labels(&raw);
            Some((idx, width))
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(Error::io(node_lab_path, e)),
    };

    let (labels, _) = index_labels(&graph_labels);
    let mut records = Vec::with_capacity(graphs);
    for g in 0..graphs {
        let n = sizes[g];
        let feats = match &features {
            Some((idx, width)) => {
                let mut f = Array2::zeros((n, *width));
                for local in 0..n {
                    f[[local, idx[first_node[g] + local]]] = 1.0;
                }
                f
            }
            None => Array2::ones((n, 1)),
        };
        records.push(GraphRecord::new(n, edges[g].iter().copied(), feats, labels[g])?);
    }
    Dataset::new(name, records)
}

/// Whether the dataset directory carries node labels.
pub fn has_node_labels(dir: impl AsRef<Path>, name: &str) -> bool {
    file(dir.as_ref(), name, "node_labels").exists()
}

/// Writes records in TU format. Node labels are written when every feature
/// row is one-hot (the label is the hot index).
pub fn write_tu_dataset(dir: impl AsRef<Path>, name: &str, records: &[GraphRecord]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (mut a, mut ind, mut lab, mut nlab) = (String::new(), String::new(), String::new(), String::new());
    let one_hot = records.iter().all(|r| {
        r.features()
            .rows()
            .into_iter()
            .all(|row| row.iter().filter(|&&v| v == 1.0).count() == 1 && row.iter().all(|&v| v == 0.0 || v == 1.0))
    });
    let mut offset = 0;
    for (g, r) in records.iter().enumerate() {
        for &(u, v) in r.edges() {
            let _ = writeln!(a, "{}, {}", u + offset + 1, v + offset + 1);
            let _ = writeln!(a, "{}, {}", v + offset + 1, u + offset + 1);
        }
        for row in r.features().rows() {
            let _ = writeln!(ind, "{}", g + 1);
            if one_hot {
                let _ = writeln!(nlab, "{}", row.iter().position(|&v| v == 1.0).unwrap());
            }
        }
        let _ = writeln!(lab, "{}", r.label());
        offset += r.node_count();
    }
    let mut outputs = vec![("A", a), ("graph_indicator", ind), ("graph_labels", lab)];
    if one_hot {
        outputs.push(("node_labels", nlab));
    }
    for (suffix, text) in outputs {
        let path = file(dir, name, suffix);
        fs::write(&path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
