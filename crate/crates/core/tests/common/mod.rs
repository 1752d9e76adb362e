//! Helpers shared by the integration tests: encoding transformations,
//! random graphs and independent metric oracles.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use fourcolor::coloring::greedy_color_in_order;
use fourcolor::{CellGraph, ColorAssignment, InstanceMask, Rational};
use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::Rng;

/// Renames colors through a random injection into `1..=palette`.
pub fn substitute<R: Rng>(a: &ColorAssignment, palette: u32, rng: &mut R) -> ColorAssignment {
    let used: BTreeSet<u32> = a.iter().map(|(_, c)| c).collect();
    assert!(used.len() as u32 <= palette);
    let mut targets: Vec<u32> = (1..=palette).collect();
    targets.shuffle(rng);
    let map: BTreeMap<u32, u32> = used.into_iter().zip(targets).collect();
    ColorAssignment::from_pairs(a.iter().map(|(id, c)| (id, map[&c]))).unwrap()
}

/// Swaps two colors on one Kempe chain (connected two-colored component)
/// starting from a random node.
pub fn exchange<R: Rng>(a: &ColorAssignment, graph: &CellGraph, palette: u32, rng: &mut R) -> ColorAssignment {
    if graph.node_count() == 0 || palette < 2 {
        return a.clone();
    }
    let start = rng.gen_range(0..graph.node_count());
    let ca = a.get(graph.nodes()[start]).unwrap();
    let mut cb = rng.gen_range(1..palette);
    if cb >= ca {
        cb += 1;
    }
    let mut colors: BTreeMap<u32, u32> = a.iter().collect();
    let mut seen = vec![false; graph.node_count()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(i) = queue.pop_front() {
        let id = graph.nodes()[i];
        let c = colors[&id];
        colors.insert(id, if c == ca { cb } else { ca });
        for &j in graph.neighbors(i) {
            let cj = a.get(graph.nodes()[j]).unwrap();
            if !seen[j] && (cj == ca || cj == cb) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    ColorAssignment::new(colors).unwrap()
}

/// Greedy coloring along a random node order.
pub fn rule_modification<R: Rng>(graph: &CellGraph, rng: &mut R) -> ColorAssignment {
    let mut order = graph.nodes().to_vec();
    order.shuffle(rng);
    greedy_color_in_order(graph, &order).unwrap()
}

/// A random composition of one to three transformations of `start`,
/// keeping at most `palette` colors.
pub fn random_recoloring<R: Rng>(
    start: &ColorAssignment,
    graph: &CellGraph,
    palette: u32,
    rng: &mut R,
) -> ColorAssignment {
    let mut a = start.clone();
    for _ in 0..rng.gen_range(1..=3) {
        a = match rng.gen_range(0..3) {
            0 => substitute(&a, palette, rng),
            1 => exchange(&a, graph, palette, rng),
            _ => {
                let b = rule_modification(graph, rng);
                if b.max_color() <= palette {
                    b
                } else {
                    a
                }
            }
        };
    }
    a
}

/// Erdős–Rényi graph on ids `1..=n`.
pub fn random_graph<R: Rng>(n: u32, p: f64, rng: &mut R) -> CellGraph {
    let mut edges = Vec::new();
    for a in 1..=n {
        for b in a + 1..=n {
            if rng.gen_bool(p) {
                edges.push((a, b));
            }
        }
    }
    CellGraph::new(1..=n, edges).unwrap()
}

pub fn proper(graph: &CellGraph, a: &ColorAssignment) -> bool {
    graph.edges().iter().all(|&(x, y)| a.get(x) != a.get(y))
}

fn ratio(n: u64, d: u64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Panoptic counts and quality from the best matching found by trying
/// every partial injection of GT instances into predictions.
pub struct ExhaustivePanoptic {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub dq: Rational,
    pub sq: Rational,
    pub pq: Rational,
}

pub fn exhaustive_panoptic(gt: &InstanceMask, pred: &InstanceMask) -> ExhaustivePanoptic {
    let g_ids = gt.instance_ids();
    let p_ids = pred.instance_ids();
    let mut inter: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    for (&g, &p) in gt.data().iter().zip(pred.data()) {
        if g != 0 && p != 0 {
            *inter.entry((g, p)).or_default() += 1;
        }
    }
    let ga = gt.areas();
    let pa = pred.areas();
    let iou = |g: u32, p: u32| {
        let i = inter.get(&(g, p)).copied().unwrap_or(0);
        (i, ga[&g] + pa[&p] - i)
    };

    // Best (matches, Σ IoU) over all matchings restricted to IoU > 1/2.
    #[allow(clippy::too_many_arguments)]
    fn search(
        k: usize,
        g_ids: &[u32],
        p_ids: &[u32],
        used: &mut Vec<bool>,
        iou: &dyn Fn(u32, u32) -> (u64, u64),
        count: u64,
        sum: Rational,
        best: &mut (u64, Rational),
    ) {
        if k == g_ids.len() {
            if count > best.0 || (count == best.0 && sum > best.1) {
                *best = (count, sum);
            }
            return;
        }
        search(k + 1, g_ids, p_ids, used, iou, count, sum.clone(), best);
        for j in 0..p_ids.len() {
            if used[j] {
                continue;
            }
            let (i, u) = iou(g_ids[k], p_ids[j]);
            if 2 * i > u {
                used[j] = true;
                search(k + 1, g_ids, p_ids, used, iou, count + 1, sum.clone() + ratio(i, u), best);
                used[j] = false;
            }
        }
    }
    let mut best = (0u64, ratio(0, 1));
    search(0, &g_ids, &p_ids, &mut vec![false; p_ids.len()], &iou, 0, ratio(0, 1), &mut best);
    let tp = best.0;
    let fp = p_ids.len() as u64 - tp;
    let fn_ = g_ids.len() as u64 - tp;
    let (dq, sq) = if tp == 0 {
        let v = if fp == 0 && fn_ == 0 { 1 } else { 0 };
        (ratio(v, 1), ratio(v, 1))
    } else {
        (ratio(2 * tp, 2 * tp + fp + fn_), best.1 / ratio(tp, 1))
    };
    ExhaustivePanoptic { tp, fp, fn_, pq: dq.clone() * sq.clone(), dq, sq }
}

/// Paints up to `rects` axis-aligned rectangles, later ones on top, and
/// relabels so every id is present.
pub fn rect_mask<R: Rng>(w: usize, h: usize, rects: usize, rng: &mut R) -> InstanceMask {
    let mut data = vec![0u32; w * h];
    for id in 1..=rects as u32 {
        let x0 = rng.gen_range(0..w);
        let y0 = rng.gen_range(0..h);
        let x1 = rng.gen_range(x0..w) + 1;
        let y1 = rng.gen_range(y0..h) + 1;
        for y in y0..y1 {
            for x in x0..x1 {
                data[y * w + x] = id;
            }
        }
    }
    InstanceMask::new(w, h, data).unwrap().relabel()
}

/// `mask` with each pixel replaced by a random label in `0..=max_id` with
/// probability `p`.
pub fn perturb<R: Rng>(mask: &InstanceMask, p: f64, max_id: u32, rng: &mut R) -> InstanceMask {
    let data = mask
        .data()
        .iter()
        .map(|&v| if rng.gen_bool(p) { rng.gen_range(0..=max_id) } else { v })
        .collect();
    InstanceMask::new(mask.width(), mask.height(), data).unwrap()
}

/// `mask` moved by `(dx, dy)` pixels, background filling the gap.
pub fn shift(mask: &InstanceMask, dx: isize, dy: isize) -> InstanceMask {
    let (w, h) = mask.dims();
    let mut data = vec![0u32; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (sx, sy) = (x - dx, y - dy);
            if sx >= 0 && sy >= 0 && sx < w as isize && sy < h as isize {
                data[(y * w as isize + x) as usize] = mask.data()[(sy * w as isize + sx) as usize];
            }
        }
    }
    InstanceMask::new(w, h, data).unwrap()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
