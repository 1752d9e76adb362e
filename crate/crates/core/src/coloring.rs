//! Greedy coloring, exact search and canonicalization of color assignments.
//!
//! Ties are broken by ascending instance id everywhere.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{CellGraph, ColorAssignment, EncodingMatrix};

/// Node traversal order for greedy coloring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderingStrategy {
    #[default]
    AscendingId,
    /// Breadth-first from the smallest id, neighbors in ascending id; the
    /// next component starts at its smallest unvisited id.
    BfsFromMinId,
    /// Highest degree first, equal degrees by ascending id.
    DegreeDescending,
}

impl OrderingStrategy {
    pub const ALL: [OrderingStrategy; 3] =
        [OrderingStrategy::AscendingId, OrderingStrategy::BfsFromMinId, OrderingStrategy::DegreeDescending];

    pub fn name(self) -> &'static str {
        match self {
            OrderingStrategy::AscendingId => "ascending-id",
            OrderingStrategy::BfsFromMinId => "bfs-from-min-id",
            OrderingStrategy::DegreeDescending => "degree-descending",
        }
    }

    /// Permutation of node indices of `graph`.
    pub fn order(self, graph: &CellGraph) -> Vec<usize> {
        let n = graph.node_count();
        match self {
            OrderingStrategy::AscendingId => (0..n).collect(),
            OrderingStrategy::DegreeDescending => {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by_key(|&i| (std::cmp::Reverse(graph.degree(i)), i));
                idx
            }
            OrderingStrategy::BfsFromMinId => {
                let mut seen = vec![false; n];
                let mut out = Vec::with_capacity(n);
                let mut queue = VecDeque::new();
                for start in 0..n {
                    if seen[start] {
                        continue;
                    }
                    seen[start] = true;
                    queue.push_back(start);
                    while let Some(v) = queue.pop_front() {
                        out.push(v);
                        for &u in graph.neighbors(v) {
                            if !seen[u] {
                                seen[u] = true;
                                queue.push_back(u);
                            }
                        }
                    }
                }
                out
            }
        }
    }

    /// The same permutation expressed as instance ids.
    pub fn order_ids(self, graph: &CellGraph) -> Vec<u32> {
        self.order(graph).into_iter().map(|i| graph.nodes()[i]).collect()
    }
}

impl fmt::Display for OrderingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OrderingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OrderingStrategy::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown ordering '{s}'")))
    }
}

/// Greedy coloring along `order`: each node takes the smallest color not
/// held by an already-colored neighbor. Never uses more than `Δ(G) + 1` colors.
pub fn greedy_color(graph: &CellGraph, order: OrderingStrategy) -> ColorAssignment {
    greedy_by_index(graph, &order.order(graph))
}

/// Greedy coloring along an explicit id sequence, which must be a
/// permutation of the graph's nodes.
pub fn greedy_color_in_order(graph: &CellGraph, order: &[u32]) -> Result<ColorAssignment> {
    let mut seen = vec![false; graph.node_count()];
    let mut indices = Vec::with_capacity(order.len());
    for &id in order {
        let i = graph
            .index_of(id)
            .ok_or_else(|| Error::InvalidParameter(format!("order names unknown node {id}")))?;
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidParameter(format!("order repeats node {id}")));
        }
        indices.push(i);
    }
    if let Some(i) = seen.iter().position(|&s| !s) {
        return Err(Error::InvalidParameter(format!("order misses node {}", graph.nodes()[i])));
    }
    Ok(greedy_by_index(graph, &indices))
}

fn greedy_by_index(graph: &CellGraph, order: &[usize]) -> ColorAssignment {
    let mut colors = vec![0u32; graph.node_count()];
    let mut used: Vec<bool> = Vec::new();
    for &v in order {
        let nbrs = graph.neighbors(v);
        used.clear();
        used.resize(nbrs.len() + 2, false);
        for &u in nbrs {
            let c = colors[u] as usize;
            if c != 0 && c < used.len() {
                used[c] = true;
            }
        }
        colors[v] = (1..used.len()).find(|&c| !used[c]).expect("deg + 1 colors suffice") as u32;
    }
    assignment_from_indices(graph, &colors)
}

fn assignment_from_indices(graph: &CellGraph, colors: &[u32]) -> ColorAssignment {
    ColorAssignment::new(graph.nodes().iter().copied().zip(colors.iter().copied()).collect())
        .expect("colors are positive")
}

/// Edges whose endpoints share a color. Empty iff the coloring is proper.
pub fn verify_proper(graph: &CellGraph, assignment: &ColorAssignment) -> Result<Vec<(u32, u32)>> {
    if let Some(&id) = graph.nodes().iter().find(|&&id| assignment.get(id).is_none()) {
        return Err(Error::UncoveredNode(id));
    }
    Ok(graph
        .edges()
        .iter()
        .copied()
        .filter(|&(a, b)| assignment.get(a) == assignment.get(b))
        .collect())
}

/// Default node limit for [`chromatic_number_exact`].
pub const DEFAULT_EXACT_NODE_LIMIT: usize = 24;

/// χ(G) by exhaustive search over `k = 1, 2, …`.
///
/// Refuses graphs with more than `max_nodes` nodes.
pub fn chromatic_number_exact(graph: &CellGraph, max_nodes: usize) -> Result<u32> {
    if graph.node_count() > max_nodes {
        return Err(Error::NodeLimitExceeded { nodes: graph.node_count(), limit: max_nodes });
    }
    if graph.is_empty() {
        return Ok(0);
    }
    let lower = max_clique(graph).len().max(1) as u32;
    let n = graph.node_count() as u32;
    Ok((lower..=n).find(|&k| exact_k_coloring(graph, k).is_some()).unwrap_or(n))
}

/// A proper coloring with at most `k` colors, if one exists.
///
/// Backtracking with ascending-id variable order and lowest-color-first
/// value order, so the result is the lexicographically smallest proper
/// coloring (read in ascending id order). Forward checking and the
/// "at most one new color per step" rule only prune subtrees that cannot
/// contain that solution.
pub fn exact_k_coloring(graph: &CellGraph, k: u32) -> Option<ColorAssignment> {
    let n = graph.node_count();
    if n == 0 {
        return Some(ColorAssignment::default());
    }
    if k == 0 {
        return None;
    }
    let k = k.min(n as u32) as usize;
    let mut search = Search {
        graph,
        k,
        colors: vec![0; n],
        forbid: vec![0; n * (k + 1)],
        forbidden_count: vec![0; n],
    };
    for component in components(graph) {
        if !search.solve(&component, 0, 0) {
            return None;
        }
    }
    Some(assignment_from_indices(graph, &search.colors))
}

/// Connected components as ascending index lists, ordered by smallest member.
pub(crate) fn components(graph: &CellGraph) -> Vec<Vec<usize>> {
    let n = graph.node_count();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut comp = Vec::new();
        while let Some(v) = stack.pop() {
            comp.push(v);
            for &u in graph.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

struct Search<'a> {
    graph: &'a CellGraph,
    k: usize,
    colors: Vec<u32>,
    /// `forbid[v * (k + 1) + c]`: colored neighbors of `v` holding color `c`.
    forbid: Vec<u16>,
    forbidden_count: Vec<usize>,
}

impl Search<'_> {
    fn solve(&mut self, order: &[usize], depth: usize, max_used: usize) -> bool {
        let Some(&v) = order.get(depth) else {
            return true;
        };
        let stride = self.k + 1;
        let limit = self.k.min(max_used + 1);
        for c in 1..=limit {
            if self.forbid[v * stride + c] != 0 {
                continue;
            }
            self.colors[v] = c as u32;
            let mut wiped = false;
            for &u in self.graph.neighbors(v) {
                let slot = &mut self.forbid[u * stride + c];
                *slot += 1;
                if *slot == 1 {
                    self.forbidden_count[u] += 1;
                    if self.colors[u] == 0 && self.forbidden_count[u] == self.k {
                        wiped = true;
                    }
                }
            }
            if !wiped && self.solve(order, depth + 1, max_used.max(c)) {
                return true;
            }
            for &u in self.graph.neighbors(v) {
                let slot = &mut self.forbid[u * stride + c];
                *slot -= 1;
                if *slot == 0 {
                    self.forbidden_count[u] -= 1;
                }
            }
            self.colors[v] = 0;
        }
        false
    }
}

/// A maximum clique (ids ascending). Bron–Kerbosch with pivoting; the
/// lexicographically smallest among maximum cliques is returned.
pub fn max_clique(graph: &CellGraph) -> Vec<u32> {
    let n = graph.node_count();
    let mut best: Vec<usize> = Vec::new();
    let mut current = Vec::new();
    bron_kerbosch(graph, &mut current, (0..n).collect(), Vec::new(), &mut best);
    best.sort_unstable();
    best.into_iter().map(|i| graph.nodes()[i]).collect()
}

fn bron_kerbosch(
    graph: &CellGraph,
    current: &mut Vec<usize>,
    candidates: Vec<usize>,
    mut excluded: Vec<usize>,
    best: &mut Vec<usize>,
) {
    if candidates.is_empty() {
        if excluded.is_empty() {
            let mut sorted = current.clone();
            sorted.sort_unstable();
            if sorted.len() > best.len() || (sorted.len() == best.len() && sorted < *best) {
                *best = sorted;
            }
        }
        return;
    }
    if current.len() + candidates.len() < best.len() {
        return;
    }
    let pivot = candidates
        .iter()
        .chain(&excluded)
        .copied()
        .max_by_key(|&u| (graph.neighbors(u).len(), std::cmp::Reverse(u)))
        .expect("nonempty");
    let is_adj = |a: usize, b: usize| graph.neighbors(a).binary_search(&b).is_ok();
    let mut remaining = candidates.clone();
    for v in candidates.into_iter().filter(|&v| !is_adj(pivot, v)) {
        current.push(v);
        let next_c: Vec<usize> = remaining.iter().copied().filter(|&u| is_adj(v, u)).collect();
        let next_x: Vec<usize> = excluded.iter().copied().filter(|&u| is_adj(v, u)).collect();
        bron_kerbosch(graph, current, next_c, next_x, best);
        current.pop();
        remaining.retain(|&u| u != v);
        excluded.push(v);
    }
}

/// Renames colors by first appearance along `order` (ids): the first color
/// seen becomes 1, the next new one 2, and so on. Ids of the assignment not
/// listed in `order` are visited afterwards in ascending id. The partition
/// into color classes is unchanged.
pub fn relabel_canonical(assignment: &ColorAssignment, order: &[u32]) -> ColorAssignment {
    let mut rename: HashMap<u32, u32> = HashMap::new();
    let listed = order.iter().copied().filter(|&id| assignment.get(id).is_some());
    let rest = assignment.iter().map(|(id, _)| id).filter(|id| !order.contains(id));
    for id in listed.chain(rest) {
        let c = assignment.get(id).expect("present");
        let next = rename.len() as u32 + 1;
        rename.entry(c).or_insert(next);
    }
    ColorAssignment::new(assignment.iter().map(|(id, c)| (id, rename[&c])).collect::<BTreeMap<_, _>>())
        .expect("renamed colors are positive")
}

/// Result of mapping a predicted encoding onto the canonical one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Canonicalized {
    pub matrix: EncodingMatrix,
    /// Edges the prediction colored identically. Empty for a proper prediction.
    pub violations: Vec<(u32, u32)>,
}

impl Canonicalized {
    pub fn was_proper(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Maps a predicted cell-by-color matrix onto the greedy encoding of `graph`
/// (ascending-id order).
///
/// Redundant columns, column permutations and alternative proper colorings
/// all collapse to the same output because the graph is simply recolored.
/// An improper prediction is reported through [`Canonicalized::violations`]
/// and still receives the greedy matrix.
pub fn canonicalize_encoding(pred: &EncodingMatrix, graph: &CellGraph) -> Result<Canonicalized> {
    let predicted = pred.to_assignment(graph)?;
    let violations = verify_proper(graph, &predicted)?;
    let greedy = greedy_color(graph, OrderingStrategy::AscendingId);
    let matrix = EncodingMatrix::from_assignment(&greedy, graph)?;
    debug_assert!(graph.edges().iter().all(|&(a, b)| {
        matrix.row_dot(graph.index_of(a).unwrap(), graph.index_of(b).unwrap()) == 0
    }));
    Ok(Canonicalized { matrix, violations })
}
