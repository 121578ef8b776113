//! Random trees labeled by their diameter.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::GraphRecord;
use crate::analysis::graph_diameter;
use crate::error::{Error, Result};
use crate::rng::rng;

/// Default upper bound on the node count of a synthesized tree.
pub const DEFAULT_NODE_BUDGET: usize = 30;

/// `count` trees of exactly `diameter`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiameterClass {
    pub diameter: usize,
    pub count: usize,
}

impl DiameterClass {
    /// Parses `"5:10,14:50"`.
    pub fn parse_list(s: &str) -> Result<Vec<DiameterClass>> {
        s.split(',')
            .map(|part| {
                let (d, c) = part
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| Error::Config(format!("expected `diameter:count`, found {part:?}")))?;
                let parse = |v: &str| {
                    v.trim()
                        .parse::<usize>()
                        .map_err(|e| Error::Config(format!("bad number {v:?} in {part:?}: {e}")))
                };
                Ok(DiameterClass {
                    diameter: parse(d)?,
                    count: parse(c)?,
                })
            })
            .collect()
    }
}

/// Grows a path `p_0 … p_d`, then attaches nodes one at a time to a uniformly
/// chosen node with positive slack, where `p_i` has slack `min(i, d - i)` and
/// a child has its parent's slack minus one. Every node then lies within
/// `min(i, d - i)` hops of its path anchor, so no pair is further than `d`.
fn random_tree<R: Rng>(diameter: usize, nodes: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (1..=diameter).map(|i| (i - 1, i)).collect();
    let mut slack: Vec<usize> = (0..=diameter).map(|i| i.min(diameter - i)).collect();
    while slack.len() < nodes {
        let open: Vec<usize> = (0..slack.len()).filter(|&v| slack[v] > 0).collect();
        if open.is_empty() {
            break;
        }
        let parent = open[rng.random_range(0..open.len())];
        edges.push((parent, slack.len()));
        slack.push(slack[parent] - 1);
    }
    edges
}

/// Class `i` of the output is `classes[i]`; node features are a single
/// all-one channel. The node count of each tree is uniform in
/// `diameter + 1 ..= node_budget` (diameter-1 trees are always one edge).
pub fn synthesize_diameter_dataset(classes: &[DiameterClass], seed: u64, node_budget: usize) -> Result<Vec<GraphRecord>> {
    for c in classes {
        if c.diameter == 0 {
            return Err(Error::Invalid("diameter must be at least 1".into()));
        }
        if c.diameter + 1 > node_budget {
            return Err(Error::Invalid(format!(
                "diameter {} needs {} nodes but the budget is {node_budget}",
                c.diameter,
                c.diameter + 1
            )));
        }
    }
    let mut rng = rng(seed);
    let mut out = Vec::new();
    for (label, c) in classes.iter().enumerate() {
        for _ in 0..c.count {
            let target = rng.random_range(c.diameter + 1..=node_budget);
            let edges = random_tree(c.diameter, target, &mut rng);
            let n = edges.len() + 1;
            let g = GraphRecord::unfeatured(n, edges, label)?;
            let measured = graph_diameter(&g);
            if measured.value != c.diameter || !measured.connected {
                return Err(Error::Invalid(format!(
                    "generated tree has diameter {} instead of {}",
                    measured.value, c.diameter
                )));
            }
            out.push(g);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_spec_string() {
        let v = DiameterClass::parse_list("5:10, 14:50").unwrap();
        assert_eq!(v, vec![DiameterClass { diameter: 5, count: 10 }, DiameterClass { diameter: 14, count: 50 }]);
        assert!(DiameterClass::parse_list("5-10").is_err());
    }

    #[test]
    fn diameter_one_gives_single_edges() {
        let g = synthesize_diameter_dataset(&[DiameterClass { diameter: 1, count: 3 }], 0, 30).unwrap();
        assert_eq!(g.len(), 3);
        assert!(g.iter().all(|r| r.node_count() == 2 && r.edges() == [(0, 1)]));
    }

    #[test]
    fn infeasible_budget_rejected() {
        assert!(synthesize_diameter_dataset(&[DiameterClass { diameter: 30, count: 1 }], 0, 30).is_err());
        assert!(synthesize_diameter_dataset(&[DiameterClass { diameter: 0, count: 1 }], 0, 30).is_err());
    }

    #[test]
    fn trees_are_trees() {
        let g = synthesize_diameter_dataset(&[DiameterClass { diameter: 6, count: 20 }], 9, 25).unwrap();
        for r in &g {
            assert_eq!(r.edges().len(), r.node_count() - 1);
            assert!(r.node_count() <= 25);
        }
    }
}
