//! Instance mask ⇄ four-color mask conversion.
//!
//! Decoding recovers instances as per-color connected components. An
//! instance that is itself split into several components survives encoding
//! but comes back as several instances, so round-trip guarantees only hold
//! for masks whose instances are each 4-connected.

use std::str::FromStr;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::coloring::{exact_k_coloring, greedy_color, max_clique, OrderingStrategy};
use crate::error::{Error, Result};
use crate::graph::build_cell_graph;
use crate::types::{CellGraph, ColorAssignment, FourColorMask, InstanceMask};

/// Maximum number of colors the codec emits.
pub const MAX_COLORS: u32 = 4;

/// Display palette indexed by four-color value.
pub const PALETTE: [[u8; 3]; 5] = [
    [0, 0, 0],
    [230, 35, 75],
    [60, 180, 75],
    [0, 105, 199],
    [255, 225, 25],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Connectivity {
    /// N, S, E, W neighbors.
    #[default]
    Four,
    /// All eight neighbors.
    Eight,
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "4" => Ok(Connectivity::Four),
            "8" => Ok(Connectivity::Eight),
            other => Err(Error::InvalidParameter(format!("connectivity must be 4 or 8, got '{other}'"))),
        }
    }
}

/// Everything computed while encoding one mask.
#[derive(Debug, Clone)]
pub struct Encoding {
    pub mask: FourColorMask,
    pub graph: CellGraph,
    pub assignment: ColorAssignment,
    /// True when greedy needed more than four colors and exact search took over.
    pub used_fallback: bool,
}

/// Coloring used by the codec: greedy along `order`, replaced by the exact
/// four-coloring search if greedy needs more than four colors.
pub fn four_color_assignment(graph: &CellGraph, order: OrderingStrategy) -> Result<(ColorAssignment, bool)> {
    let greedy = greedy_color(graph, order);
    if greedy.max_color() <= MAX_COLORS {
        return Ok((greedy, false));
    }
    match exact_k_coloring(graph, MAX_COLORS) {
        Some(exact) => Ok((exact, true)),
        None => Err(Error::NotFourColorable { clique: max_clique(graph) }),
    }
}

pub fn encode_mask(mask: &InstanceMask, delta: u32, order: OrderingStrategy) -> Result<FourColorMask> {
    encode_mask_detailed(mask, delta, order).map(|e| e.mask)
}

/// [`encode_mask`] keeping the graph and assignment.
pub fn encode_mask_detailed(mask: &InstanceMask, delta: u32, order: OrderingStrategy) -> Result<Encoding> {
    let graph = build_cell_graph(mask, delta)?;
    let (assignment, used_fallback) = four_color_assignment(&graph, order)?;
    let fc = paint(mask, &graph, &assignment);
    Ok(Encoding { mask: fc, graph, assignment, used_fallback })
}

/// Writes each instance's color onto its pixels.
pub fn paint(mask: &InstanceMask, graph: &CellGraph, assignment: &ColorAssignment) -> FourColorMask {
    let lut: Vec<u8> = graph
        .nodes()
        .iter()
        .map(|&id| assignment.get(id).expect("assignment covers graph") as u8)
        .collect();
    let mut last = (0u32, 0u8);
    let data = mask
        .data()
        .iter()
        .map(|&id| {
            if id == 0 {
                0
            } else if id == last.0 {
                last.1
            } else {
                let c = lut[graph.index_of(id).expect("mask id is a node")];
                last = (id, c);
                c
            }
        })
        .collect();
    FourColorMask::new(mask.width(), mask.height(), data).expect("colors within 0..=4")
}

/// Splits every color layer into connected components; ids are `1..=N`
/// in raster order of each component's first pixel.
pub fn decode_mask(fc: &FourColorMask, connectivity: Connectivity) -> InstanceMask {
    let (w, h) = fc.dims();
    let src = fc.data();
    let mut out = vec![0u32; w * h];
    let mut next = 0u32;
    let mut stack = Vec::new();
    let four: &[(isize, isize)] = &[(0, -1), (-1, 0), (1, 0), (0, 1)];
    let eight: &[(isize, isize)] = &[(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
    let offsets = match connectivity {
        Connectivity::Four => four,
        Connectivity::Eight => eight,
    };
    for start in 0..w * h {
        let color = src[start];
        if color == 0 || out[start] != 0 {
            continue;
        }
        next += 1;
        out[start] = next;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (x, y) = ((p % w) as isize, (p / w) as isize);
            for &(dx, dy) in offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                if src[q] == color && out[q] == 0 {
                    out[q] = next;
                    stack.push(q);
                }
            }
        }
    }
    InstanceMask::new(w, h, out).expect("same dimensions")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NormalizeOptions {
    pub connectivity: Connectivity,
    pub order: OrderingStrategy,
    /// Drop decoded components made of a single pixel.
    pub drop_single_pixel: bool,
}

/// Decodes a predicted four-color map and re-encodes it canonically.
///
/// Predictions that differ only by color substitution, exchange or an
/// alternative proper rule map to the same output.
pub fn normalize_prediction(
    fc: &FourColorMask,
    delta: u32,
    options: NormalizeOptions,
) -> Result<(InstanceMask, FourColorMask)> {
    let mut instances = decode_mask(fc, options.connectivity);
    if options.drop_single_pixel {
        instances = drop_single_pixel_instances(&instances);
    }
    let encoded = encode_mask(&instances, delta, options.order)?;
    Ok((instances, encoded))
}

fn drop_single_pixel_instances(mask: &InstanceMask) -> InstanceMask {
    let areas = mask.areas();
    let data = mask
        .data()
        .iter()
        .map(|&v| if v != 0 && areas[&v] == 1 { 0 } else { v })
        .collect();
    InstanceMask::new(mask.width(), mask.height(), data).expect("same dimensions").relabel()
}

/// Renders a four-color mask with [`PALETTE`].
pub fn colorize(fc: &FourColorMask) -> RgbImage {
    let (w, h) = fc.dims();
    RgbImage::from_fn(w as u32, h as u32, |x, y| Rgb(PALETTE[fc.get(x as usize, y as usize) as usize]))
}

/// [`colorize`] for raw values that have not been validated.
pub fn colorize_values(width: usize, height: usize, values: &[u8]) -> Result<RgbImage> {
    FourColorMask::new(width, height, values.to_vec()).map(|fc| colorize(&fc))
}
