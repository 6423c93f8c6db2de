//! Dependence graph of an internal rule: a directed graph on the message
//! alphabet with an edge from mu_i to mu_j whenever some input vector that
//! contains mu_j can produce output mu_i with positive probability.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Alphabet, StochasticKernel};
use crate::report::SCHEMA_VERSION;

#[derive(Clone, Debug)]
pub struct DependenceGraph {
    pub alphabet: Alphabet,
    /// `adjacency[i][j]`: edge from letter i to letter j.
    pub adjacency: Vec<Vec<bool>>,
    /// One witnessing input tuple per edge.
    pub witnesses: BTreeMap<(usize, usize), Vec<usize>>,
    /// Strongly connected components in discovery order.
    pub sccs: Vec<Vec<usize>>,
    pub strongly_connected: bool,
    /// Max over ordered letter pairs of the shortest directed path length;
    /// defined only when the graph is strongly connected.
    pub diameter: Option<usize>,
}

pub fn build_dependence_graph(internal_rule: &StochasticKernel) -> Result<DependenceGraph> {
    if internal_rule.input() != internal_rule.output() {
        return Err(Error::AlphabetMismatch(format!(
            "dependence graph needs a square rule, got {} -> {}",
            internal_rule.input(),
            internal_rule.output()
        )));
    }
    let m = internal_rule.input().len();
    let mut adjacency = vec![vec![false; m]; m];
    let mut witnesses = BTreeMap::new();
    for rank in 0..internal_rule.row_count() {
        let tuple = internal_rule.tuple_of_rank(rank);
        for (out, p) in internal_rule.row_by_rank(rank).iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            for &letter in &tuple {
                if !adjacency[out][letter] {
                    adjacency[out][letter] = true;
                    witnesses.insert((out, letter), tuple.clone());
                }
            }
        }
    }
    let sccs = kosaraju(&adjacency);
    let strongly_connected = sccs.len() == 1;
    let diameter = strongly_connected
        .then(|| diameter_of(&adjacency))
        .flatten();
    Ok(DependenceGraph {
        alphabet: internal_rule.input().clone(),
        adjacency,
        witnesses,
        sccs,
        strongly_connected,
        diameter,
    })
}

impl DependenceGraph {
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.adjacency[from][to]
    }

    pub fn out_edges(&self, from: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| self.adjacency[from][j])
            .collect()
    }

    /// Re-verifies every stored witness against the rule: the witness tuple
    /// must contain the target letter and produce the source letter with
    /// positive probability.
    pub fn verify_witnesses(&self, rule: &StochasticKernel) -> bool {
        for i in 0..self.len() {
            for j in 0..self.len() {
                if self.adjacency[i][j] != self.witnesses.contains_key(&(i, j)) {
                    return false;
                }
            }
        }
        self.witnesses.iter().all(|(&(out, letter), tuple)| {
            tuple.contains(&letter) && !rule.row(tuple)[out].is_zero()
        })
    }

    pub fn to_report(&self) -> GraphReport {
        let names = self.alphabet.label_names();
        let mut edges = Vec::new();
        for i in 0..self.len() {
            for j in 0..self.len() {
                if self.adjacency[i][j] {
                    edges.push((names[i].clone(), names[j].clone()));
                }
            }
        }
        GraphReport {
            schema: SCHEMA_VERSION,
            letters: names.clone(),
            edges,
            sccs: self
                .sccs
                .iter()
                .map(|scc| scc.iter().map(|&v| names[v].clone()).collect())
                .collect(),
            strongly_connected: self.strongly_connected,
            diameter: self.diameter,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub schema: u32,
    pub letters: Vec<String>,
    pub edges: Vec<(String, String)>,
    pub sccs: Vec<Vec<String>>,
    pub strongly_connected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter: Option<usize>,
}

fn kosaraju(adjacency: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = adjacency.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for start in 0..n {
        if !seen[start] {
            forward_dfs(start, adjacency, &mut seen, &mut order);
        }
    }
    let mut component = vec![usize::MAX; n];
    let mut sccs = Vec::new();
    for &v in order.iter().rev() {
        if component[v] != usize::MAX {
            continue;
        }
        let id = sccs.len();
        let mut members = Vec::new();
        let mut stack = vec![v];
        component[v] = id;
        while let Some(u) = stack.pop() {
            members.push(u);
            for w in 0..n {
                // reversed edge w -> u
                if adjacency[w][u] && component[w] == usize::MAX {
                    component[w] = id;
                    stack.push(w);
                }
            }
        }
        members.sort_unstable();
        sccs.push(members);
    }
    sccs
}

fn forward_dfs(start: usize, adjacency: &[Vec<bool>], seen: &mut [bool], order: &mut Vec<usize>) {
    // iterative post-order
    let n = adjacency.len();
    let mut stack = vec![(start, 0usize)];
    seen[start] = true;
    while let Some((v, next)) = stack.pop() {
        let mut pushed = false;
        for w in next..n {
            if adjacency[v][w] && !seen[w] {
                seen[w] = true;
                stack.push((v, w + 1));
                stack.push((w, 0));
                pushed = true;
                break;
            }
        }
        if !pushed {
            order.push(v);
        }
    }
}

fn diameter_of(adjacency: &[Vec<bool>]) -> Option<usize> {
    let n = adjacency.len();
    let mut best = 0usize;
    for src in 0..n {
        let mut dist = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        dist[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for w in 0..n {
                if adjacency[u][w] && dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        for (v, &d) in dist.iter().enumerate() {
            if v != src {
                if d == usize::MAX {
                    return None;
                }
                best = best.max(d);
            }
        }
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes;

    #[test]
    fn majority3_graph_is_complete_with_diameter_one() {
        let g = build_dependence_graph(&schemes::majority_rule(3).unwrap()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(g.has_edge(i, j), "missing edge {i}->{j}");
            }
        }
        assert!(g.strongly_connected);
        assert_eq!(g.diameter, Some(1));
        assert!(g.verify_witnesses(&schemes::majority_rule(3).unwrap()));
    }

    #[test]
    fn or_fixture_graph_matches_hand_enumeration() {
        let rule = schemes::fixture_or_rule(2).unwrap();
        let g = build_dependence_graph(&rule).unwrap();
        // edges: 1->1, 1->0, 0->0; no 0->1
        assert!(g.has_edge(1, 1) && g.has_edge(1, 0) && g.has_edge(0, 0));
        assert!(!g.has_edge(0, 1));
        assert!(!g.strongly_connected);
        assert_eq!(g.diameter, None);
        assert_eq!(g.sccs.len(), 2);
        assert!(g.verify_witnesses(&rule));
    }

    #[test]
    fn quantizer_m3_k2_graph_is_reducible() {
        let rule = schemes::quantizer_internal_rule(3, 2).unwrap();
        let g = build_dependence_graph(&rule).unwrap();
        // letters indexed (-1, 0, 1); out-edges: -1 -> {-1, 0}, 0 -> all, 1 -> {1}
        assert_eq!(g.out_edges(0), vec![0, 1]);
        assert_eq!(g.out_edges(1), vec![0, 1, 2]);
        assert_eq!(g.out_edges(2), vec![2]);
        assert!(!g.strongly_connected);
        assert!(g.verify_witnesses(&rule));
    }

    #[test]
    fn symmetrized_quantizer_graph_is_strongly_connected_with_diameter_two() {
        let rule = schemes::quantizer_sym_internal_rule(3, 2).unwrap();
        let g = build_dependence_graph(&rule).unwrap();
        assert_eq!(g.out_edges(0), vec![0, 1]);
        assert_eq!(g.out_edges(1), vec![0, 1, 2]);
        assert_eq!(g.out_edges(2), vec![1, 2]);
        assert!(g.strongly_connected);
        assert_eq!(g.diameter, Some(2));
    }

    #[test]
    fn diameter_one_iff_all_ordered_pairs_adjacent() {
        let g = build_dependence_graph(&schemes::majority_rule(4).unwrap()).unwrap();
        if g.diameter == Some(1) {
            for i in 0..g.len() {
                for j in 0..g.len() {
                    if i != j {
                        assert!(g.has_edge(i, j));
                    }
                }
            }
        }
    }

    #[test]
    fn non_square_rule_rejected() {
        let leaf = schemes::quantizer_leaf_rule(3).unwrap();
        assert!(build_dependence_graph(&leaf).is_err());
    }
}
