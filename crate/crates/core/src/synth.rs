//! Synthetic cell layouts with known adjacency structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{decode_mask, encode_mask_detailed, Connectivity};
use crate::coloring::OrderingStrategy;
use crate::error::{Error, Result};
use crate::types::{FourColorMask, InstanceMask};

/// Largest canvas side a generator will produce.
pub const MAX_SIDE: usize = 1 << 14;

/// Range of ellipse axis lengths (full width, pixels) for random packings.
pub const AXIS_RANGE: (f64, f64) = (4.0, 16.0);

/// Placement attempts per cell before it is skipped.
pub const MAX_ATTEMPTS: usize = 1000;

/// Smallest accepted cell area in a random packing.
const MIN_CELL_AREA: usize = 4;

fn side(count: usize, cell: usize, gap: usize) -> Result<usize> {
    count
        .checked_mul(cell)
        .and_then(|v| v.checked_add(count.saturating_sub(1).checked_mul(gap)?))
        .filter(|&v| v <= MAX_SIDE)
        .ok_or_else(|| Error::Capacity(format!("layout side exceeds {MAX_SIDE} pixels")))
}

/// `n` square cells in a row, ids 1..=n left to right, separated by `gap`
/// background columns. With `gap = 0` the cells touch and any `delta > gap`
/// yields the path graph.
pub fn gen_chain(n: usize, cell_size: usize, gap: usize) -> Result<InstanceMask> {
    if n == 0 || cell_size == 0 {
        return Err(Error::InvalidParameter("chain needs n >= 1 and cell_size >= 1".into()));
    }
    let width = side(n, cell_size, gap)?;
    let mut data = vec![0u32; width * cell_size];
    for y in 0..cell_size {
        for i in 0..n {
            let x0 = i * (cell_size + gap);
            data[y * width + x0..y * width + x0 + cell_size].fill(i as u32 + 1);
        }
    }
    InstanceMask::new(width, cell_size, data)
}

/// `rows × cols` square cells with row-major ids.
///
/// Each cell has its four corner pixels removed, so diagonal neighbors sit
/// one Chebyshev step further apart than side neighbors (`gap + 2` versus
/// `gap + 1`). With `delta = gap + 1` the graph is exactly the 4-neighbor
/// grid graph. Needs `cell_size >= 3` so cells stay 4-connected.
pub fn gen_grid(rows: usize, cols: usize, cell_size: usize, gap: usize) -> Result<InstanceMask> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter("grid needs rows >= 1 and cols >= 1".into()));
    }
    if cell_size < 3 {
        return Err(Error::InvalidParameter("grid cells need cell_size >= 3".into()));
    }
    let width = side(cols, cell_size, gap)?;
    let height = side(rows, cell_size, gap)?;
    let mut data = vec![0u32; width * height];
    let last = cell_size - 1;
    for r in 0..rows {
        for c in 0..cols {
            let id = (r * cols + c) as u32 + 1;
            let (x0, y0) = (c * (cell_size + gap), r * (cell_size + gap));
            for dy in 0..cell_size {
                for dx in 0..cell_size {
                    let corner = (dx == 0 || dx == last) && (dy == 0 || dy == last);
                    if !corner {
                        data[(y0 + dy) * width + x0 + dx] = id;
                    }
                }
            }
        }
    }
    InstanceMask::new(width, height, data)
}

/// Random packing result.
#[derive(Debug, Clone)]
pub struct Packing {
    /// Ids relabeled to raster order of first pixel.
    pub mask: InstanceMask,
    pub requested: usize,
    pub placed: usize,
    /// Indices of cells that found no free spot within [`MAX_ATTEMPTS`].
    pub skipped: Vec<usize>,
}

/// Rejection-sampled non-overlapping ellipses.
///
/// Axis lengths are uniform in [`AXIS_RANGE`], rotation uniform. Cell `i`
/// draws from its own ChaCha stream, so adding cells never changes the
/// candidates earlier cells saw. Cells closer than `min_gap` background
/// pixels to an existing cell are rejected; `min_gap = 0` allows touching.
/// Every placed cell is 4-connected.
pub fn gen_random_packing(n: usize, width: usize, height: usize, seed: u64, min_gap: usize) -> Result<Packing> {
    if width < AXIS_RANGE.0 as usize || height < AXIS_RANGE.0 as usize {
        return Err(Error::InvalidParameter(format!("canvas {width}x{height} is too small for a single cell")));
    }
    if width > MAX_SIDE || height > MAX_SIDE {
        return Err(Error::Capacity(format!("canvas side exceeds {MAX_SIDE} pixels")));
    }
    let mut data = vec![0u32; width * height];
    let mut skipped = Vec::new();
    let mut placed = 0u32;
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut ok = false;
        for _ in 0..MAX_ATTEMPTS {
            let pixels = candidate(&mut rng, width, height);
            if pixels.len() >= MIN_CELL_AREA && fits(&data, width, height, &pixels, min_gap) {
                placed += 1;
                for &p in &pixels {
                    data[p] = placed;
                }
                ok = true;
                break;
            }
        }
        if !ok {
            log::warn!("cell {i} could not be placed after {MAX_ATTEMPTS} attempts; packing has fewer cells");
            skipped.push(i);
        }
    }
    let mask = InstanceMask::new(width, height, data)?.relabel();
    Ok(Packing { mask, requested: n, placed: placed as usize, skipped })
}

/// Pixels of one random ellipse, reduced to its largest 4-connected piece.
fn candidate(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Vec<usize> {
    let a = rng.gen_range(AXIS_RANGE.0..=AXIS_RANGE.1) / 2.0;
    let b = rng.gen_range(AXIS_RANGE.0..=AXIS_RANGE.1) / 2.0;
    let theta = rng.gen_range(0.0..std::f64::consts::PI);
    let cx = rng.gen_range(0.0..width as f64);
    let cy = rng.gen_range(0.0..height as f64);
    let (sin, cos) = theta.sin_cos();
    let r = a.max(b).ceil() as isize + 1;
    let (x_lo, x_hi) = ((cx as isize - r).max(0), (cx as isize + r).min(width as isize - 1));
    let (y_lo, y_hi) = ((cy as isize - r).max(0), (cy as isize + r).min(height as isize - 1));
    let mut inside = Vec::new();
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            let u = dx * cos + dy * sin;
            let v = -dx * sin + dy * cos;
            if (u / a).powi(2) + (v / b).powi(2) <= 1.0 {
                inside.push(y as usize * width + x as usize);
            }
        }
    }
    largest_component(inside, width)
}

fn largest_component(mut pixels: Vec<usize>, width: usize) -> Vec<usize> {
    pixels.sort_unstable();
    let mut label = vec![usize::MAX; pixels.len()];
    let find = |p: usize, pixels: &[usize]| pixels.binary_search(&p).ok();
    let mut best: Vec<usize> = Vec::new();
    for start in 0..pixels.len() {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = start;
        let mut comp = vec![pixels[start]];
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            let p = pixels[i];
            let (x, y) = (p % width, p / width);
            let mut nbrs = Vec::with_capacity(4);
            if x > 0 {
                nbrs.push(p - 1);
            }
            if x + 1 < width {
                nbrs.push(p + 1);
            }
            if y > 0 {
                nbrs.push(p - width);
            }
            nbrs.push(p + width);
            for q in nbrs {
                if let Some(j) = find(q, &pixels) {
                    if label[j] == usize::MAX {
                        label[j] = start;
                        comp.push(q);
                        stack.push(j);
                    }
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best.sort_unstable();
    best
}

fn fits(data: &[u32], width: usize, height: usize, pixels: &[usize], min_gap: usize) -> bool {
    pixels.iter().all(|&p| {
        let (x, y) = (p % width, p / width);
        let (x_lo, x_hi) = (x.saturating_sub(min_gap), (x + min_gap).min(width - 1));
        let (y_lo, y_hi) = (y.saturating_sub(min_gap), (y + min_gap).min(height - 1));
        (y_lo..=y_hi).all(|yy| data[yy * width + x_lo..=yy * width + x_hi].iter().all(|&v| v == 0))
    })
}

/// Color usage of one encoded image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageColorUsage {
    pub cells: usize,
    pub colors_used: usize,
    /// Cells holding color 1, 2, 3, 4.
    pub cells_per_color: [u64; 4],
    pub used_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorUsageSummary {
    pub images: usize,
    /// Images using exactly 0, 1, 2, 3, 4 colors.
    pub images_by_colors_used: [u64; 5],
    pub fraction_by_colors_used: [f64; 5],
    /// Images in which color 1, 2, 3, 4 appears.
    pub images_using_color: [u64; 4],
    pub fraction_images_using_color: [f64; 4],
    pub fraction_more_than_two_colors: f64,
    pub cells_per_color: [u64; 4],
    pub fraction_cells_per_color: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorUsageReport {
    pub images: Vec<ImageColorUsage>,
    pub summary: ColorUsageSummary,
}

pub fn image_color_usage(mask: &InstanceMask, delta: u32, order: OrderingStrategy) -> Result<ImageColorUsage> {
    let enc = encode_mask_detailed(mask, delta, order)?;
    let mut cells_per_color = [0u64; 4];
    for (_, c) in enc.assignment.iter() {
        cells_per_color[c as usize - 1] += 1;
    }
    Ok(ImageColorUsage {
        cells: enc.graph.node_count(),
        colors_used: enc.assignment.colors_used(),
        cells_per_color,
        used_fallback: enc.used_fallback,
    })
}

/// Per-image color usage of the codec over a corpus, with fractions.
pub fn color_usage_stats(masks: &[InstanceMask], delta: u32, order: OrderingStrategy) -> Result<ColorUsageReport> {
    if masks.is_empty() {
        return Err(Error::Empty("color usage needs at least one image".into()));
    }
    let images = masks
        .par_iter()
        .map(|m| image_color_usage(m, delta, order))
        .collect::<Result<Vec<_>>>()?;
    let n = images.len() as f64;
    let mut by_used = [0u64; 5];
    let mut using = [0u64; 4];
    let mut cells = [0u64; 4];
    for img in &images {
        by_used[img.colors_used] += 1;
        for c in 0..4 {
            using[c] += (img.cells_per_color[c] > 0) as u64;
            cells[c] += img.cells_per_color[c];
        }
    }
    let total_cells: u64 = cells.iter().sum();
    let summary = ColorUsageSummary {
        images: images.len(),
        images_by_colors_used: by_used,
        fraction_by_colors_used: by_used.map(|v| v as f64 / n),
        images_using_color: using,
        fraction_images_using_color: using.map(|v| v as f64 / n),
        fraction_more_than_two_colors: (by_used[3] + by_used[4]) as f64 / n,
        cells_per_color: cells,
        fraction_cells_per_color: cells.map(|v| if total_cells == 0 { 0.0 } else { v as f64 / total_cells as f64 }),
    };
    Ok(ColorUsageReport { images, summary })
}

/// True when every instance of `mask` is a single 4-connected region.
pub fn instances_are_4_connected(mask: &InstanceMask) -> bool {
    let ids = mask.instance_ids();
    let components = {
        let (w, h) = mask.dims();
        let mut seen = vec![false; w * h];
        let mut count = 0usize;
        for start in 0..w * h {
            let id = mask.data()[start];
            if id == 0 || seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(p) = stack.pop() {
                let (x, y) = (p % w, p / w);
                let nbrs = [
                    (x > 0).then(|| p - 1),
                    (x + 1 < w).then(|| p + 1),
                    (y > 0).then(|| p - w),
                    (y + 1 < h).then(|| p + w),
                ];
                for q in nbrs.into_iter().flatten() {
                    if !seen[q] && mask.data()[q] == id {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        count
    };
    components == ids.len()
}

/// Encode-then-decode check used by generator tests.
pub fn round_trips(mask: &InstanceMask, delta: u32, order: OrderingStrategy) -> Result<(bool, FourColorMask)> {
    let enc = encode_mask_detailed(mask, delta, order)?;
    let back = decode_mask(&enc.mask, Connectivity::Four);
    Ok((back.equivalent(mask)?, enc.mask))
}
