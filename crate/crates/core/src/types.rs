//! Shared data model: masks, cell graphs, color assignments, encoding matrices.
//!
//! All grids are row-major with a top-left origin. "Raster order" everywhere
//! in this crate means that scan order, and both canonical relabeling and
//! the default greedy traversal depend on it.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Instance label image; `0` is background, every other value is one cell.
///
/// Ids need not be contiguous or sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InstanceMask {
    width: usize,
    height: usize,
    data: Vec<u32>,
}

impl InstanceMask {
    pub fn new(width: usize, height: usize, data: Vec<u32>) -> Result<Self> {
        if width.checked_mul(height) != Some(data.len()) {
            return Err(Error::DataLength { width, height, len: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn background(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0; width * height] }
    }

    /// Builds a mask from rows of equal length.
    pub fn from_rows<R: AsRef<[u32]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(width * height);
        for row in rows {
            let row = row.as_ref();
            if row.len() != width {
                return Err(Error::InvalidParameter(format!(
                    "ragged rows: expected width {width}, got {}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u32> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.data[y * self.width + x]
    }

    /// Sorted distinct nonzero ids.
    pub fn instance_ids(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.data.iter().copied().filter(|&v| v != 0).collect();
        set.into_iter().collect()
    }

    pub fn instance_count(&self) -> usize {
        self.instance_ids().len()
    }

    /// Pixel count per nonzero id.
    pub fn areas(&self) -> BTreeMap<u32, u64> {
        let mut areas = BTreeMap::new();
        for &v in self.data.iter().filter(|&&v| v != 0) {
            *areas.entry(v).or_insert(0) += 1;
        }
        areas
    }

    /// Remaps ids to `1..=N` in order of first appearance in raster order.
    /// The pixel partition is unchanged.
    pub fn relabel(&self) -> InstanceMask {
        let mut map: HashMap<u32, u32> = HashMap::new();
        let mut next = 0u32;
        let data = self
            .data
            .iter()
            .map(|&v| {
                if v == 0 {
                    0
                } else {
                    *map.entry(v).or_insert_with(|| {
                        next += 1;
                        next
                    })
                }
            })
            .collect();
        InstanceMask { width: self.width, height: self.height, data }
    }

    /// True iff a bijection between the nonzero ids of `self` and `other`
    /// maps every pixel's region onto the same pixels.
    pub fn equivalent(&self, other: &InstanceMask) -> Result<bool> {
        if self.dims() != other.dims() {
            return Err(Error::dims(self.dims(), other.dims()));
        }
        let mut forward: HashMap<u32, u32> = HashMap::new();
        let mut backward: HashMap<u32, u32> = HashMap::new();
        for (&a, &b) in self.data.iter().zip(&other.data) {
            match (a, b) {
                (0, 0) => {}
                (0, _) | (_, 0) => return Ok(false),
                _ => {
                    if *forward.entry(a).or_insert(b) != b || *backward.entry(b).or_insert(a) != a {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }
}

pub fn relabel_instances(mask: &InstanceMask) -> InstanceMask {
    mask.relabel()
}

pub fn masks_equivalent(a: &InstanceMask, b: &InstanceMask) -> Result<bool> {
    a.equivalent(b)
}

/// Semantic mask with values in `0..=4`; `0` is background.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FourColorMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl FourColorMask {
    pub const MAX_COLOR: u8 = 4;

    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width.checked_mul(height) != Some(data.len()) {
            return Err(Error::DataLength { width, height, len: data.len() });
        }
        if let Some(index) = data.iter().position(|&v| v > Self::MAX_COLOR) {
            return Err(Error::InvalidColor { index, value: data[index] as u32 });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(width * height);
        for row in rows {
            let row = row.as_ref();
            if row.len() != width {
                return Err(Error::InvalidParameter(format!(
                    "ragged rows: expected width {width}, got {}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Distinct nonzero values present.
    pub fn colors_present(&self) -> BTreeSet<u8> {
        self.data.iter().copied().filter(|&v| v != 0).collect()
    }
}

/// Undirected cell adjacency graph over instance ids.
///
/// Nodes are kept sorted ascending; edges are stored once as `(lo, hi)`
/// with `lo < hi`, sorted. Node indices (positions in [`nodes`](Self::nodes))
/// are used for fast neighbor lookups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellGraph {
    nodes: Vec<u32>,
    edges: Vec<(u32, u32)>,
    adjacency: Vec<Vec<usize>>,
}

impl CellGraph {
    pub fn new(nodes: impl IntoIterator<Item = u32>, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let nodes: Vec<u32> = nodes.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let mut normalized = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop on node {a}")));
            }
            for v in [a, b] {
                if nodes.binary_search(&v).is_err() {
                    return Err(Error::InvalidGraph(format!("edge ({a}, {b}) references unknown node {v}")));
                }
            }
            normalized.insert((a.min(b), a.max(b)));
        }
        Ok(Self::from_sorted(nodes, normalized.into_iter().collect()))
    }

    /// `nodes` sorted and unique, `edges` sorted, unique, `lo < hi`, endpoints in `nodes`.
    pub(crate) fn from_sorted(nodes: Vec<u32>, edges: Vec<(u32, u32)>) -> Self {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for &(a, b) in &edges {
            let ia = nodes.binary_search(&a).expect("edge endpoint is a node");
            let ib = nodes.binary_search(&b).expect("edge endpoint is a node");
            adjacency[ia].push(ib);
            adjacency[ib].push(ia);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Self { nodes, edges, adjacency }
    }

    pub fn empty() -> Self {
        Self { nodes: Vec::new(), edges: Vec::new(), adjacency: Vec::new() }
    }

    pub fn nodes(&self) -> &[u32] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.nodes.binary_search(&id).ok()
    }

    /// Neighbor indices of the node at `index`, ascending.
    pub fn neighbors(&self, index: usize) -> &[usize] {
        &self.adjacency[index]
    }

    pub fn degree(&self, index: usize) -> usize {
        self.adjacency[index].len()
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }
}

/// Color per instance id. Colors are positive integers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ColorAssignment {
    colors: BTreeMap<u32, u32>,
}

impl ColorAssignment {
    pub fn new(colors: BTreeMap<u32, u32>) -> Result<Self> {
        if let Some((id, _)) = colors.iter().find(|(_, &c)| c == 0) {
            return Err(Error::InvalidAssignment(format!("node {id} has color 0")));
        }
        Ok(Self { colors })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        Self::new(pairs.into_iter().collect())
    }

    pub fn get(&self, id: u32) -> Option<u32> {
        self.colors.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.colors.iter().map(|(&k, &v)| (k, v))
    }

    /// Cardinality of the image of the mapping.
    pub fn colors_used(&self) -> usize {
        self.colors.values().collect::<BTreeSet<_>>().len()
    }

    pub fn max_color(&self) -> u32 {
        self.colors.values().copied().max().unwrap_or(0)
    }

    /// Colors listed in ascending id order.
    pub fn color_sequence(&self) -> Vec<u32> {
        self.colors.values().copied().collect()
    }

    /// Number of cells per color, keyed by color.
    pub fn class_sizes(&self) -> BTreeMap<u32, usize> {
        let mut sizes = BTreeMap::new();
        for &c in self.colors.values() {
            *sizes.entry(c).or_insert(0) += 1;
        }
        sizes
    }
}

/// One-hot `n × k` cell-by-color matrix. Row `i` belongs to the `i`-th node
/// of the graph in ascending id order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl EncodingMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<u8>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::InvalidParameter(format!(
                "encoding matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        for r in 0..rows {
            let row = &data[r * cols..(r + 1) * cols];
            if row.iter().any(|&v| v > 1) || row.iter().filter(|&&v| v == 1).count() != 1 {
                return Err(Error::NotOneHot(r));
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::InvalidParameter("ragged encoding matrix".into()));
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Matrix of `assignment` over `graph`'s nodes; `cols` = largest color.
    pub fn from_assignment(assignment: &ColorAssignment, graph: &CellGraph) -> Result<Self> {
        let cols = graph
            .nodes()
            .iter()
            .map(|&id| assignment.get(id).ok_or(Error::UncoveredNode(id)))
            .try_fold(0u32, |acc, c| c.map(|c| acc.max(c)))? as usize;
        let mut data = vec![0u8; graph.node_count() * cols];
        for (i, &id) in graph.nodes().iter().enumerate() {
            let c = assignment.get(id).expect("checked above") as usize;
            data[i * cols + c - 1] = 1;
        }
        Ok(Self { rows: graph.node_count(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Column holding the `1` in row `r`, 0-based.
    pub fn hot_column(&self, r: usize) -> usize {
        self.row(r).iter().position(|&v| v == 1).expect("one-hot row")
    }

    /// Row inner product `C[i,:] · C[j,:]ᵀ`; zero iff the two cells differ in color.
    pub fn row_dot(&self, i: usize, j: usize) -> u32 {
        self.row(i).iter().zip(self.row(j)).map(|(&a, &b)| (a * b) as u32).sum()
    }

    /// Interprets row `i` as node `graph.nodes()[i]` with color `hot_column + 1`.
    pub fn to_assignment(&self, graph: &CellGraph) -> Result<ColorAssignment> {
        if self.rows != graph.node_count() {
            return Err(Error::InvalidParameter(format!(
                "encoding matrix has {} rows, graph has {} nodes",
                self.rows,
                graph.node_count()
            )));
        }
        ColorAssignment::from_pairs(
            graph.nodes().iter().enumerate().map(|(i, &id)| (id, self.hot_column(i) as u32 + 1)),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relabel_follows_first_appearance() {
        let m = InstanceMask::from_rows(&[[0, 3, 3], [7, 7, 0]]).unwrap();
        let r = m.relabel();
        assert_eq!(r.data(), &[0, 1, 1, 2, 2, 0]);
    }

    #[test]
    fn relabel_background_and_fixed_point() {
        let bg = InstanceMask::background(3, 2);
        assert_eq!(bg.relabel(), bg);
        let m = InstanceMask::from_rows(&[[1, 1, 2], [3, 0, 2]]).unwrap();
        assert_eq!(m.relabel(), m);
    }

    #[test]
    fn equivalence_cases() {
        let a = InstanceMask::from_rows(&[[5, 5, 0], [0, 9, 9]]).unwrap();
        assert!(a.equivalent(&a).unwrap());
        assert!(a.equivalent(&a.relabel()).unwrap());
        let merged = InstanceMask::from_rows(&[[1, 1, 0], [0, 1, 1]]).unwrap();
        assert!(!a.equivalent(&merged).unwrap());
        assert!(!merged.equivalent(&a).unwrap());
        let other = InstanceMask::background(2, 2);
        assert!(matches!(a.equivalent(&other), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn mask_length_checked() {
        assert!(InstanceMask::new(2, 2, vec![0; 3]).is_err());
        assert!(FourColorMask::new(1, 1, vec![5]).is_err());
    }

    #[test]
    fn graph_rejects_self_loop_and_unknown_node() {
        assert!(CellGraph::new([1, 2], [(1, 1)]).is_err());
        assert!(CellGraph::new([1, 2], [(1, 3)]).is_err());
        let g = CellGraph::new([2, 1, 3], [(2, 1), (1, 2), (3, 2)]).unwrap();
        assert_eq!(g.nodes(), &[1, 2, 3]);
        assert_eq!(g.edges(), &[(1, 2), (2, 3)]);
        assert_eq!(g.neighbors(1), &[0, 2]);
    }

    #[test]
    fn assignment_rejects_zero_color() {
        assert!(ColorAssignment::from_pairs([(1, 0)]).is_err());
        let a = ColorAssignment::from_pairs([(1, 1), (2, 3), (4, 1)]).unwrap();
        assert_eq!(a.colors_used(), 2);
        assert_eq!(a.max_color(), 3);
    }

    #[test]
    fn encoding_matrix_one_hot() {
        assert!(matches!(EncodingMatrix::from_rows(&[vec![1, 0], vec![1, 1]]), Err(Error::NotOneHot(1))));
        assert!(matches!(EncodingMatrix::from_rows(&[vec![0, 0]]), Err(Error::NotOneHot(0))));
        let g = CellGraph::new([1, 2], [(1, 2)]).unwrap();
        let a = ColorAssignment::from_pairs([(1, 2), (2, 1)]).unwrap();
        let m = EncodingMatrix::from_assignment(&a, &g).unwrap();
        assert_eq!(m.data(), &[0, 1, 1, 0]);
        assert_eq!(m.row_dot(0, 1), 0);
        assert_eq!(m.to_assignment(&g).unwrap(), a);
    }
}
