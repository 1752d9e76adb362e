//! Segmentation quality metrics: DICE, AJI, DQ/SQ/PQ and pixel error maps.
//!
//! Every metric is a ratio of counts, so results are generic over
//! [`Scalar`]; use [`crate::Rational`] to compare against hand counts
//! exactly. Instance matching compares IoUs by cross-multiplying integer
//! counts and never depends on the scalar type.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{mean, Scalar};
use crate::types::InstanceMask;

/// Per-instance areas and pairwise intersections of two masks.
#[derive(Debug, Clone, Default)]
pub struct Overlap {
    pub gt_areas: BTreeMap<u32, u64>,
    pub pred_areas: BTreeMap<u32, u64>,
    /// `(gt id, pred id) → intersecting pixels`, nonzero entries only.
    pub intersections: BTreeMap<(u32, u32), u64>,
}

impl Overlap {
    pub fn new(gt: &InstanceMask, pred: &InstanceMask) -> Result<Self> {
        check_dims(gt, pred)?;
        let mut gt_areas: HashMap<u32, u64> = HashMap::new();
        let mut pred_areas: HashMap<u32, u64> = HashMap::new();
        let mut inter: HashMap<(u32, u32), u64> = HashMap::new();
        for (&g, &p) in gt.data().iter().zip(pred.data()) {
            if g != 0 {
                *gt_areas.entry(g).or_insert(0) += 1;
            }
            if p != 0 {
                *pred_areas.entry(p).or_insert(0) += 1;
            }
            if g != 0 && p != 0 {
                *inter.entry((g, p)).or_insert(0) += 1;
            }
        }
        Ok(Self {
            gt_areas: gt_areas.into_iter().collect(),
            pred_areas: pred_areas.into_iter().collect(),
            intersections: inter.into_iter().collect(),
        })
    }

    pub fn union(&self, g: u32, p: u32) -> u64 {
        self.gt_areas[&g] + self.pred_areas[&p] - self.intersection(g, p)
    }

    pub fn intersection(&self, g: u32, p: u32) -> u64 {
        self.intersections.get(&(g, p)).copied().unwrap_or(0)
    }
}

fn check_dims(a: &InstanceMask, b: &InstanceMask) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::dims(a.dims(), b.dims()));
    }
    Ok(())
}

/// `a.0 / a.1` vs `b.0 / b.1` for nonzero denominators.
fn cmp_ratio(a: (u64, u64), b: (u64, u64)) -> Ordering {
    (a.0 as u128 * b.1 as u128).cmp(&(b.0 as u128 * a.1 as u128))
}

/// Binary-foreground DICE; 1 when both foregrounds are empty.
pub fn dice<T: Scalar>(gt: &InstanceMask, pred: &InstanceMask) -> Result<T> {
    check_dims(gt, pred)?;
    let (mut both, mut g, mut p) = (0u64, 0u64, 0u64);
    for (&a, &b) in gt.data().iter().zip(pred.data()) {
        g += (a != 0) as u64;
        p += (b != 0) as u64;
        both += (a != 0 && b != 0) as u64;
    }
    Ok(if g + p == 0 { T::one() } else { T::from_ratio(2 * both, g + p) })
}

/// Aggregated Jaccard Index.
///
/// Ground-truth instances are visited in ascending id; each takes the
/// still-unused prediction with the highest IoU (ties to the lower pred id).
/// Unused predictions add their area to the union. 1 when both masks are empty.
pub fn aji<T: Scalar>(gt: &InstanceMask, pred: &InstanceMask) -> Result<T> {
    let ov = Overlap::new(gt, pred)?;
    Ok(aji_from_overlap(&ov))
}

fn aji_from_overlap<T: Scalar>(ov: &Overlap) -> T {
    if ov.gt_areas.is_empty() && ov.pred_areas.is_empty() {
        return T::one();
    }
    let mut candidates: BTreeMap<u32, Vec<(u32, u64)>> = BTreeMap::new();
    for (&(g, p), &n) in &ov.intersections {
        candidates.entry(g).or_default().push((p, n));
    }
    let mut used: HashMap<u32, bool> = HashMap::new();
    let (mut inter_sum, mut union_sum) = (0u64, 0u64);
    for (&g, &g_area) in &ov.gt_areas {
        let mut best: Option<(u32, u64, u64)> = None;
        for &(p, inter) in candidates.get(&g).map(Vec::as_slice).unwrap_or(&[]) {
            if used.get(&p).copied().unwrap_or(false) {
                continue;
            }
            let union = g_area + ov.pred_areas[&p] - inter;
            // candidates are in ascending pred id, so only a strictly better IoU replaces
            if best.is_none_or(|(_, bi, bu)| cmp_ratio((inter, union), (bi, bu)) == Ordering::Greater) {
                best = Some((p, inter, union));
            }
        }
        match best {
            Some((p, inter, union)) => {
                used.insert(p, true);
                inter_sum += inter;
                union_sum += union;
            }
            None => union_sum += g_area,
        }
    }
    union_sum += ov
        .pred_areas
        .iter()
        .filter(|(p, _)| !used.contains_key(p))
        .map(|(_, &a)| a)
        .sum::<u64>();
    T::from_ratio(inter_sum, union_sum)
}

/// Detection, segmentation and panoptic quality with their match counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panoptic<T> {
    pub dq: T,
    pub sq: T,
    pub pq: T,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    /// Matched `(gt, pred)` pairs, ascending gt id.
    pub matches: Vec<(u32, u32)>,
}

/// Panoptic quality at the IoU > 0.5 threshold.
///
/// Pairs above one half are unique matches, so no assignment search is
/// needed. SQ is the mean matched IoU; when nothing matches it is 1 if
/// there is also nothing to miss (both masks empty) and 0 otherwise, and
/// DQ follows the same convention.
pub fn panoptic<T: Scalar>(gt: &InstanceMask, pred: &InstanceMask) -> Result<Panoptic<T>> {
    let ov = Overlap::new(gt, pred)?;
    Ok(panoptic_from_overlap(&ov))
}

fn panoptic_from_overlap<T: Scalar>(ov: &Overlap) -> Panoptic<T> {
    let mut matches = Vec::new();
    let mut iou_sum = T::zero();
    for (&(g, p), &inter) in &ov.intersections {
        let union = ov.union(g, p);
        if 2 * inter > union {
            matches.push((g, p));
            iou_sum = iou_sum + T::from_ratio(inter, union);
        }
    }
    let tp = matches.len() as u64;
    let fp = ov.pred_areas.len() as u64 - tp;
    let fn_ = ov.gt_areas.len() as u64 - tp;
    let (dq, sq) = if tp == 0 {
        if fp == 0 && fn_ == 0 {
            (T::one(), T::one())
        } else {
            (T::zero(), T::zero())
        }
    } else {
        (T::from_ratio(2 * tp, 2 * tp + fp + fn_), iou_sum / T::from_count(tp))
    };
    let pq = dq.clone() * sq.clone();
    Panoptic { dq, sq, pq, tp, fp, fn_, matches }
}

/// Foreground/background confusion class of one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PixelClass {
    TruePositive,
    FalsePositive,
    FalseNegative,
    TrueNegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

/// Per-pixel foreground confusion labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<PixelClass>,
    pub counts: ConfusionCounts,
}

pub fn error_map(gt: &InstanceMask, pred: &InstanceMask) -> Result<ErrorMap> {
    check_dims(gt, pred)?;
    let mut counts = ConfusionCounts::default();
    let labels = gt
        .data()
        .iter()
        .zip(pred.data())
        .map(|(&g, &p)| match (g != 0, p != 0) {
            (true, true) => {
                counts.tp += 1;
                PixelClass::TruePositive
            }
            (false, true) => {
                counts.fp += 1;
                PixelClass::FalsePositive
            }
            (true, false) => {
                counts.fn_ += 1;
                PixelClass::FalseNegative
            }
            (false, false) => {
                counts.tn += 1;
                PixelClass::TrueNegative
            }
        })
        .collect();
    Ok(ErrorMap { width: gt.width(), height: gt.height(), labels, counts })
}

/// The full metric suite for one image pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport<T> {
    pub dice: T,
    pub aji: T,
    pub dq: T,
    pub sq: T,
    pub pq: T,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl<T: Scalar> MetricsReport<T> {
    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> MetricsReport<U> {
        MetricsReport {
            dice: f(&self.dice),
            aji: f(&self.aji),
            dq: f(&self.dq),
            sq: f(&self.sq),
            pq: f(&self.pq),
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
        }
    }

    pub fn to_f64(&self) -> MetricsReport<f64> {
        self.map(Scalar::to_f64)
    }
}

pub fn evaluate_pair<T: Scalar>(gt: &InstanceMask, pred: &InstanceMask) -> Result<MetricsReport<T>> {
    let ov = Overlap::new(gt, pred)?;
    let pan = panoptic_from_overlap::<T>(&ov);
    Ok(MetricsReport {
        dice: dice(gt, pred)?,
        aji: aji_from_overlap(&ov),
        dq: pan.dq,
        sq: pan.sq,
        pq: pan.pq,
        tp: pan.tp,
        fp: pan.fp,
        fn_: pan.fn_,
    })
}

/// Per-image reports plus their aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport<T> {
    pub images: Vec<MetricsReport<T>>,
    /// Unweighted mean of each per-image metric; counts are summed.
    pub aggregate: MetricsReport<T>,
}

pub fn evaluate_corpus<T: Scalar>(pairs: &[(InstanceMask, InstanceMask)]) -> Result<CorpusReport<T>> {
    let images = pairs
        .iter()
        .map(|(gt, pred)| evaluate_pair(gt, pred))
        .collect::<Result<Vec<_>>>()?;
    aggregate(images)
}

/// Folds per-image reports in the given order.
pub fn aggregate<T: Scalar>(images: Vec<MetricsReport<T>>) -> Result<CorpusReport<T>> {
    if images.is_empty() {
        return Err(Error::Empty("corpus has no image pairs".into()));
    }
    let avg = |f: fn(&MetricsReport<T>) -> &T| mean(images.iter().map(|r| f(r).clone())).expect("nonempty");
    let aggregate = MetricsReport {
        dice: avg(|r| &r.dice),
        aji: avg(|r| &r.aji),
        dq: avg(|r| &r.dq),
        sq: avg(|r| &r.sq),
        pq: avg(|r| &r.pq),
        tp: images.iter().map(|r| r.tp).sum(),
        fp: images.iter().map(|r| r.fp).sum(),
        fn_: images.iter().map(|r| r.fn_).sum(),
    };
    Ok(CorpusReport { images, aggregate })
}
