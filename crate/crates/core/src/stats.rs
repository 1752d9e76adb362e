//! Corpus-level structure statistics: degrees and greedy-vs-exact chromatic numbers.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coloring::{chromatic_number_exact, greedy_color, max_clique, OrderingStrategy};
use crate::error::{Error, Result};
use crate::graph::{build_cell_graph, max_degree, mean_degree};
use crate::types::InstanceMask;

/// Default node limit for exact chromatic numbers in corpus reports.
pub const DEFAULT_NODE_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageDegrees {
    pub nodes: usize,
    pub edges: usize,
    pub max_degree: usize,
    pub mean_degree: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub images: Vec<ImageDegrees>,
    /// `max degree → number of images`.
    pub max_degree_histogram: BTreeMap<usize, usize>,
    /// Mean of the per-image mean degrees.
    pub mean_degree: f64,
}

pub fn degree_stats(corpus: &[InstanceMask], delta: u32) -> Result<DegreeReport> {
    if corpus.is_empty() {
        return Err(Error::Empty("degree statistics need at least one image".into()));
    }
    let images = corpus
        .par_iter()
        .map(|m| {
            let g = build_cell_graph(m, delta)?;
            Ok(ImageDegrees {
                nodes: g.node_count(),
                edges: g.edge_count(),
                max_degree: max_degree(&g),
                mean_degree: mean_degree(&g),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut max_degree_histogram = BTreeMap::new();
    for img in &images {
        *max_degree_histogram.entry(img.max_degree).or_insert(0) += 1;
    }
    let mean_degree = images.iter().map(|i| i.mean_degree).sum::<f64>() / images.len() as f64;
    Ok(DegreeReport { images, max_degree_histogram, mean_degree })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChromaticRow {
    pub index: usize,
    pub nodes: usize,
    pub max_degree: usize,
    /// Size of a maximum clique, a lower bound on χ.
    pub clique: usize,
    pub greedy: u32,
    /// `None` when the graph exceeds the node limit.
    pub exact: Option<u32>,
    pub equal: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChromaticReport {
    pub order: OrderingStrategy,
    pub node_limit: usize,
    pub rows: Vec<ChromaticRow>,
    /// Images whose graph exceeded the node limit.
    pub skipped: Vec<usize>,
    pub evaluated: usize,
    pub equal: usize,
    /// `equal / evaluated`; `None` when nothing was evaluated.
    pub equality_fraction: Option<f64>,
    /// Largest `greedy − exact` seen.
    pub max_excess: u32,
}

pub fn chromatic_row(index: usize, mask: &InstanceMask, delta: u32, node_limit: usize, order: OrderingStrategy) -> Result<ChromaticRow> {
    let g = build_cell_graph(mask, delta)?;
    let greedy = greedy_color(&g, order).colors_used() as u32;
    let exact = match chromatic_number_exact(&g, node_limit) {
        Ok(chi) => Some(chi),
        Err(Error::NodeLimitExceeded { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(ChromaticRow {
        index,
        nodes: g.node_count(),
        max_degree: max_degree(&g),
        clique: max_clique(&g).len(),
        greedy,
        exact,
        equal: exact.map(|chi| chi == greedy),
    })
}

/// Greedy versus exact chromatic number for every image.
pub fn theorem1_report(corpus: &[InstanceMask], delta: u32, node_limit: usize, order: OrderingStrategy) -> Result<ChromaticReport> {
    let rows = corpus
        .par_iter()
        .enumerate()
        .map(|(i, m)| chromatic_row(i, m, delta, node_limit, order))
        .collect::<Result<Vec<_>>>()?;
    let skipped: Vec<usize> = rows.iter().filter(|r| r.exact.is_none()).map(|r| r.index).collect();
    let evaluated = rows.len() - skipped.len();
    let equal = rows.iter().filter(|r| r.equal == Some(true)).count();
    let max_excess = rows.iter().filter_map(|r| r.exact.map(|e| r.greedy.saturating_sub(e))).max().unwrap_or(0);
    for r in rows.iter().filter(|r| r.equal == Some(false)) {
        log::info!("image {}: greedy uses {} colors, chromatic number is {}", r.index, r.greedy, r.exact.unwrap_or(0));
    }
    Ok(ChromaticReport {
        order,
        node_limit,
        rows,
        skipped,
        evaluated,
        equal,
        equality_fraction: (evaluated > 0).then(|| equal as f64 / evaluated as f64),
        max_excess,
    })
}
