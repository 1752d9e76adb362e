//! Cell adjacency graph construction.
//!
//! Two instances are adjacent when the minimum Chebyshev distance between
//! their pixel sets is at most `delta`. Distance 1 is 8-neighborhood contact,
//! so touching cells are always adjacent for any legal `delta`.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::types::{CellGraph, InstanceMask};

/// Builds the `delta`-adjacency graph of `mask`.
///
/// A single sweep over foreground pixels inspects the forward half of each
/// `(2δ+1)²` window, so every unordered pixel pair within range is seen once.
/// A mask without instances yields the empty graph.
pub fn build_cell_graph(mask: &InstanceMask, delta: u32) -> Result<CellGraph> {
    if delta == 0 {
        return Err(Error::InvalidParameter(
            "delta must be at least 1; touching cells would not be adjacent".into(),
        ));
    }
    let (w, h) = mask.dims();
    let data = mask.data();
    let d = delta as isize;

    // forward half-window: rest of the current row to the right, then full rows below
    let offsets: Vec<(isize, isize)> = (0..=d)
        .flat_map(|dy| (-d..=d).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| dy > 0 || dx > 0)
        .collect();

    let mut edges: HashSet<(u32, u32)> = HashSet::new();
    let mut last: Option<(u32, u32)> = None;
    for y in 0..h {
        let row = y * w;
        for x in 0..w {
            let a = data[row + x];
            if a == 0 {
                continue;
            }
            for &(dx, dy) in &offsets {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let b = data[ny as usize * w + nx as usize];
                if b == 0 || b == a {
                    continue;
                }
                let pair = (a.min(b), a.max(b));
                if last != Some(pair) {
                    edges.insert(pair);
                    last = Some(pair);
                }
            }
        }
    }

    let mut edges: Vec<(u32, u32)> = edges.into_iter().collect();
    edges.sort_unstable();
    Ok(CellGraph::from_sorted(mask.instance_ids(), edges))
}

/// Largest node degree; 0 for an empty or edgeless graph.
pub fn max_degree(graph: &CellGraph) -> usize {
    (0..graph.node_count()).map(|i| graph.degree(i)).max().unwrap_or(0)
}

/// Mean node degree; 0 for the empty graph.
pub fn mean_degree(graph: &CellGraph) -> f64 {
    if graph.is_empty() {
        0.0
    } else {
        2.0 * graph.edge_count() as f64 / graph.node_count() as f64
    }
}
