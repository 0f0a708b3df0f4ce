//! Graph metrics on the production DAG induced by positive coefficients.

use std::collections::VecDeque;
use std::fmt;

use petgraph::algo::{is_cyclic_directed, toposort};
use petgraph::graph::{DiGraph, NodeIndex};
use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::economy::{Economy, GoodIndex};
use crate::error::ModelError;

/// Edge-count length of a directed path, or the absence of one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PathLength {
    Finite(usize),
    Unreachable,
}

impl PathLength {
    pub fn finite(self) -> Option<usize> {
        match self {
            PathLength::Finite(n) => Some(n),
            PathLength::Unreachable => None,
        }
    }
}

impl fmt::Display for PathLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathLength::Finite(n) => write!(f, "{n}"),
            PathLength::Unreachable => f.write_str("inf"),
        }
    }
}

/// The production graph: node `i` is good `i` (zero-based), weights are the
/// coefficients.
pub fn production_graph(economy: &Economy) -> DiGraph<(), f64> {
    let mut g = DiGraph::with_capacity(economy.n_goods(), 0);
    for _ in 0..economy.n_goods() {
        g.add_node(());
    }
    for (k, m, b) in economy.edges() {
        g.add_edge(NodeIndex::new(k), NodeIndex::new(m), b);
    }
    g
}

pub fn is_acyclic(economy: &Economy) -> bool {
    !is_cyclic_directed(&production_graph(economy))
}

/// Longest path (in edges) of the production DAG. Returns 0 for cyclic input.
pub fn graph_depth(economy: &Economy) -> usize {
    let g = production_graph(economy);
    let Ok(order) = toposort(&g, None) else {
        return 0;
    };
    let mut longest = vec![0usize; economy.n_goods()];
    for node in order {
        let here = longest[node.index()];
        for next in g.neighbors(node) {
            longest[next.index()] = longest[next.index()].max(here + 1);
        }
    }
    longest.into_iter().max().unwrap_or(0)
}

/// Breadth-first distances from a set of zero-based sources.
fn bfs(economy: &Economy, sources: impl IntoIterator<Item = usize>) -> Vec<PathLength> {
    let n = economy.n_goods();
    let mut dist = vec![PathLength::Unreachable; n];
    let mut queue = VecDeque::new();
    for s in sources {
        dist[s] = PathLength::Finite(0);
        queue.push_back(s);
    }
    while let Some(k) = queue.pop_front() {
        let PathLength::Finite(d) = dist[k] else { unreachable!() };
        for (m, _) in economy.consumers(k) {
            if dist[m] == PathLength::Unreachable {
                dist[m] = PathLength::Finite(d + 1);
                queue.push_back(m);
            }
        }
    }
    dist
}

/// Shortest directed path from `from` to `to`, counted in edges.
pub fn shortest_path(economy: &Economy, from: GoodIndex, to: GoodIndex) -> Result<PathLength, ModelError> {
    let n = economy.n_goods();
    for k in [from, to] {
        if k.zero_based() >= n {
            return Err(ModelError::IndexOutOfRange { index: k.get(), n_goods: n });
        }
    }
    Ok(bfs(economy, [from.zero_based()])[to.zero_based()])
}

/// Distance of every good from the nearest raw resource (zero-based).
pub fn raw_distances(economy: &Economy) -> Vec<PathLength> {
    bfs(economy, 0..economy.n_raw())
}

/// Minimum distance from any raw resource to any member.
pub fn oligarch_depth(economy: &Economy, members: &[GoodIndex]) -> Result<usize, ModelError> {
    if members.is_empty() {
        return Err(ModelError::InvalidOligarch("member set is empty".into()));
    }
    for &m in members {
        economy.company(m)?;
    }
    let dist = raw_distances(economy);
    members
        .iter()
        .filter_map(|m| dist[m.zero_based()].finite())
        .min()
        .ok_or(ModelError::Unreachable(members[0].get()))
}

/// Undirected links between companies: a production edge in either direction,
/// or a shared raw supplier. Pairs are zero-based with `a < b`.
pub fn consistency_links(economy: &Economy) -> Vec<(usize, usize)> {
    let mut links = Vec::new();
    let companies: Vec<usize> = economy.companies().collect();
    for (i, &a) in companies.iter().enumerate() {
        for &b in &companies[i + 1..] {
            let direct = economy.coefficient(a, b) > 0.0 || economy.coefficient(b, a) > 0.0;
            let shared_raw = || {
                (0..economy.n_raw())
                    .any(|n| economy.coefficient(n, a) > 0.0 && economy.coefficient(n, b) > 0.0)
            };
            if direct || shared_raw() {
                links.push((a, b));
            }
        }
    }
    links
}

/// Adjacency lists of the consistency graph over all goods (raw rows empty).
pub fn consistency_adjacency(economy: &Economy) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); economy.n_goods()];
    for (a, b) in consistency_links(economy) {
        adj[a].push(b);
        adj[b].push(a);
    }
    adj
}

/// Whether zero-based `members` are weakly connected in the consistency graph.
pub fn is_consistent(economy: &Economy, members: &[usize]) -> bool {
    if members.is_empty() {
        return false;
    }
    let n = economy.n_goods();
    let mut inside = vec![false; n];
    for &m in members {
        inside[m] = true;
    }
    let mut uf = UnionFind::<usize>::new(n);
    for (a, b) in consistency_links(economy) {
        if inside[a] && inside[b] {
            uf.union(a, b);
        }
    }
    let root = uf.find(members[0]);
    members.iter().all(|&m| uf.find(m) == root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::e8;

    fn idx(k: usize) -> GoodIndex {
        GoodIndex::new(k).unwrap()
    }

    fn chain(edges: usize) -> Economy {
        let n = edges + 1;
        let triplets: Vec<_> = (1..n).map(|k| (k, k + 1, 0.5)).collect();
        Economy::from_triplets(1, n, &triplets, vec![1.0; n], vec![1.0; n]).unwrap()
    }

    /// Longest path by exhaustive depth-first enumeration of every path.
    fn enumerate_longest(e: &Economy) -> usize {
        fn walk(e: &Economy, k: usize, len: usize, best: &mut usize) {
            *best = (*best).max(len);
            for (m, _) in e.consumers(k) {
                walk(e, m, len + 1, best);
            }
        }
        let mut best = 0;
        for k in 0..e.n_goods() {
            walk(e, k, 0, &mut best);
        }
        best
    }

    #[test]
    fn e8_depth_matches_enumeration() {
        let e = e8();
        assert_eq!(enumerate_longest(&e), 5);
        assert_eq!(graph_depth(&e), 5);
    }

    #[test]
    fn depth_of_trivial_graphs() {
        let empty = Economy::from_triplets(1, 3, &[], vec![1.0; 3], vec![1.0; 3]).unwrap();
        assert_eq!(graph_depth(&empty), 0);
        assert_eq!(graph_depth(&chain(4)), 4);
    }

    #[test]
    fn e8_shortest_paths() {
        let e = e8();
        assert_eq!(shortest_path(&e, idx(1), idx(8)).unwrap(), PathLength::Finite(3));
        assert_eq!(shortest_path(&e, idx(5), idx(5)).unwrap(), PathLength::Finite(0));
        assert_eq!(shortest_path(&e, idx(8), idx(1)).unwrap(), PathLength::Unreachable);
        assert!(shortest_path(&e, idx(9), idx(1)).is_err());
    }

    #[test]
    fn e8_oligarch_depths() {
        let e = e8();
        assert_eq!(oligarch_depth(&e, &[idx(3), idx(4), idx(7)]).unwrap(), 1);
        assert_eq!(oligarch_depth(&e, &[idx(8)]).unwrap(), 3);
        assert_eq!(oligarch_depth(&e, &[idx(5)]).unwrap(), 1);
        assert!(oligarch_depth(&e, &[]).is_err());
    }

    #[test]
    fn unreachable_oligarch_is_error() {
        // company 3 has no inputs at all
        let e = Economy::from_triplets(1, 3, &[(1, 2, 0.5)], vec![1.0; 3], vec![1.0; 3]).unwrap();
        assert_eq!(oligarch_depth(&e, &[idx(3)]), Err(ModelError::Unreachable(3)));
    }

    #[test]
    fn shared_raw_supplier_links_companies() {
        let e = e8();
        // 3 and 5 share raw 2 without a direct edge
        assert!(is_consistent(&e, &[2, 4]));
        assert!(!is_consistent(&e, &[2, 7]));
        assert!(is_consistent(&e, &[2, 3, 6]));
    }

    #[test]
    fn self_loop_is_cycle() {
        let e = Economy::from_triplets(1, 3, &[(1, 2, 0.3), (3, 3, 0.1)], vec![1.0; 3], vec![1.0; 3])
            .unwrap();
        assert!(!is_acyclic(&e));
    }
}
