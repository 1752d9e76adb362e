//! Training loss formulas as pure functions over probability maps.
//!
//! Nothing here differentiates or trains; the functions evaluate the
//! semantic, orthogonality, classification and total losses for supplied
//! predictions so they can be checked and reused elsewhere.

use std::collections::BTreeMap;

use num_traits::{Float, FromPrimitive};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{CellGraph, FourColorMask, InstanceMask};

/// Soft-Dice smoothing term.
pub const DICE_EPSILON: f64 = 1e-6;

/// Allowed deviation of the background/foreground pair from summing to one.
pub const PARTITION_TOLERANCE: f64 = 1e-6;

/// Floor applied inside logarithms so a confident miss stays finite.
const LOG_FLOOR: f64 = 1e-12;

fn cast<T: Float + FromPrimitive>(v: f64) -> T {
    T::from_f64(v).expect("representable constant")
}

fn check_probabilities<T: Float>(values: &[T]) -> Result<()> {
    for (index, v) in values.iter().enumerate() {
        if !(*v >= T::zero() && *v <= T::one()) {
            return Err(Error::ProbabilityOutOfRange { index, value: v.to_f64().unwrap_or(f64::NAN) });
        }
    }
    Ok(())
}

/// Five-channel per-pixel probabilities, channel-major.
///
/// Channel 0 is background, channels 1–4 the four colors. The foreground
/// probability is the sum of the color channels, and background plus
/// foreground must equal one per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMaps<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Float + FromPrimitive> PredictionMaps<T> {
    pub const CHANNELS: usize = 5;

    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        let plane = width * height;
        if data.len() != Self::CHANNELS * plane {
            return Err(Error::DataLength { width, height, len: data.len() });
        }
        check_probabilities(&data)?;
        let maps = Self { width, height, data };
        let tol = cast::<T>(PARTITION_TOLERANCE);
        for p in 0..plane {
            if (maps.background(p) + maps.foreground(p) - T::one()).abs() > tol {
                return Err(Error::InvalidParameter(format!(
                    "background + foreground at pixel {p} does not sum to 1"
                )));
            }
        }
        Ok(maps)
    }

    /// Builds maps from a background plane and four color planes.
    pub fn from_planes(width: usize, height: usize, background: &[T], colors: [&[T]; 4]) -> Result<Self> {
        let mut data = Vec::with_capacity(5 * width * height);
        data.extend_from_slice(background);
        for c in colors {
            data.extend_from_slice(c);
        }
        Self::new(width, height, data)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let plane = self.width * self.height;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn background(&self, pixel: usize) -> T {
        self.channel(0)[pixel]
    }

    pub fn foreground(&self, pixel: usize) -> T {
        (1..5).fold(T::zero(), |acc, c| acc + self.channel(c)[pixel])
    }

    /// The four color channels as their own probability maps.
    pub fn color_probabilities(&self) -> ColorProbabilities<T> {
        ColorProbabilities {
            width: self.width,
            height: self.height,
            data: self.data[self.width * self.height..].to_vec(),
        }
    }
}

/// Four-channel color probabilities, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorProbabilities<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Float> ColorProbabilities<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != 4 * width * height {
            return Err(Error::DataLength { width, height, len: data.len() });
        }
        check_probabilities(&data)?;
        Ok(Self { width, height, data })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Probability of color `c` (1-based) at `pixel`.
    pub fn get(&self, c: usize, pixel: usize) -> T {
        self.data[(c - 1) * self.width * self.height + pixel]
    }
}

/// Cross-entropy and soft-Dice parts of a loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms<T> {
    pub ce: T,
    pub dice: T,
}

impl<T: Float> LossTerms<T> {
    pub fn total(&self) -> T {
        self.ce + self.dice
    }
}

/// `1 − (2Σpq + ε) / (Σp + Σq + ε)`; 0 when both sides are empty.
fn soft_dice<T: Float + FromPrimitive>(intersection: T, pred_sum: T, target_sum: T) -> T {
    let eps = cast::<T>(DICE_EPSILON);
    let two = cast::<T>(2.0);
    T::one() - (two * intersection + eps) / (pred_sum + target_sum + eps)
}

fn neg_ln<T: Float + FromPrimitive>(p: T) -> T {
    -p.max(cast(LOG_FLOOR)).ln()
}

/// Binary semantic loss: mean pixel cross-entropy of the background and
/// foreground pair against the binarized ground truth, plus soft Dice on
/// the foreground probability.
pub fn semantic_loss<T: Float + FromPrimitive>(pred: &PredictionMaps<T>, gt: &InstanceMask) -> Result<LossTerms<T>> {
    if pred.dims() != gt.dims() {
        return Err(Error::dims(pred.dims(), gt.dims()));
    }
    let n = gt.data().len();
    if n == 0 {
        return Ok(LossTerms { ce: T::zero(), dice: T::zero() });
    }
    let (mut ce, mut inter, mut psum, mut qsum) = (T::zero(), T::zero(), T::zero(), T::zero());
    for (p, &id) in gt.data().iter().enumerate() {
        let fg = pred.foreground(p);
        if id != 0 {
            ce = ce + neg_ln(fg);
            inter = inter + fg;
            qsum = qsum + T::one();
        } else {
            ce = ce + neg_ln(pred.background(p));
        }
        psum = psum + fg;
    }
    Ok(LossTerms { ce: ce / cast(n as f64), dice: soft_dice(inter, psum, qsum) })
}

/// Classification loss on ground-truth foreground pixels only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationLoss<T> {
    pub terms: LossTerms<T>,
    /// Set when the ground truth has no foreground; the loss is then 0.
    pub empty_foreground: bool,
}

/// Cross-entropy over the four color classes plus the mean per-class soft
/// Dice, both restricted to pixels where `gt_fc > 0`.
pub fn classification_loss<T: Float + FromPrimitive>(
    pred: &ColorProbabilities<T>,
    gt_fc: &FourColorMask,
) -> Result<ClassificationLoss<T>> {
    if pred.dims() != gt_fc.dims() {
        return Err(Error::dims(pred.dims(), gt_fc.dims()));
    }
    let fg: Vec<usize> = (0..gt_fc.data().len()).filter(|&p| gt_fc.data()[p] != 0).collect();
    if fg.is_empty() {
        log::warn!("classification loss on an image without foreground is defined as 0");
        return Ok(ClassificationLoss {
            terms: LossTerms { ce: T::zero(), dice: T::zero() },
            empty_foreground: true,
        });
    }
    let mut ce = T::zero();
    let mut inter = [T::zero(); 4];
    let mut psum = [T::zero(); 4];
    let mut qsum = [T::zero(); 4];
    for &p in &fg {
        let target = gt_fc.data()[p] as usize;
        ce = ce + neg_ln(pred.get(target, p));
        for c in 1..=4 {
            let prob = pred.get(c, p);
            psum[c - 1] = psum[c - 1] + prob;
            if c == target {
                inter[c - 1] = inter[c - 1] + prob;
                qsum[c - 1] = qsum[c - 1] + T::one();
            }
        }
    }
    let dice = (0..4).fold(T::zero(), |acc, c| acc + soft_dice(inter[c], psum[c], qsum[c])) / cast(4.0);
    Ok(ClassificationLoss {
        terms: LossTerms { ce: ce / cast(fg.len() as f64), dice },
        empty_foreground: false,
    })
}

/// Weights of the orthogonality and classification terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights<T> {
    pub orthogonality: T,
    pub classification: T,
}

impl<T: Float + FromPrimitive> Default for LossWeights<T> {
    fn default() -> Self {
        Self { orthogonality: cast(2.0), classification: cast(1.0) }
    }
}

impl<T: Float> LossWeights<T> {
    pub fn new(orthogonality: T, classification: T) -> Result<Self> {
        if !(orthogonality >= T::zero() && classification >= T::zero()) {
            return Err(Error::InvalidParameter("loss weights must be non-negative".into()));
        }
        Ok(Self { orthogonality, classification })
    }
}

pub fn total_loss<T: Float>(semantic: T, orthogonality: T, classification: T, weights: LossWeights<T>) -> T {
    semantic + weights.orthogonality * orthogonality + weights.classification * classification
}

/// Per-pixel feature vectors of dimension `dim`, pixel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid<T> {
    width: usize,
    height: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Float> FeatureGrid<T> {
    pub fn new(width: usize, height: usize, dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("feature dimension must be positive".into()));
        }
        if data.len() != width * height * dim {
            return Err(Error::DataLength { width, height, len: data.len() / dim });
        }
        Ok(Self { width, height, dim, data })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn vector(&self, pixel: usize) -> &[T] {
        &self.data[pixel * self.dim..(pixel + 1) * self.dim]
    }
}

/// Feature samples drawn from one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSampleSet<T> {
    pub cell: u32,
    pub rate: f64,
    /// Sampled pixel indices, ascending.
    pub pixels: Vec<usize>,
    pub vectors: Vec<Vec<T>>,
}

/// Samples for both cells of one adjacency edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSamples<T> {
    pub first: FeatureSampleSet<T>,
    pub second: FeatureSampleSet<T>,
}

/// Number of samples drawn from a cell of `pixels` pixels at `rate`.
pub fn sample_count(pixels: usize, rate: f64) -> usize {
    ((rate * pixels as f64).ceil() as usize).min(pixels)
}

/// Samples features from both cells of every edge of `graph`.
///
/// Each side draws `ceil(rate × area)` distinct pixels uniformly at random.
/// The generator is seeded once and consumed in edge order, first cell
/// before second, so identical inputs give identical samples.
pub fn sample_adjacent_features<T: Float>(
    features: &FeatureGrid<T>,
    mask: &InstanceMask,
    graph: &CellGraph,
    rate: f64,
    seed: u64,
) -> Result<Vec<EdgeSamples<T>>> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidParameter(format!("sampling rate {rate} outside (0, 1]")));
    }
    if features.dims() != mask.dims() {
        return Err(Error::dims(features.dims(), mask.dims()));
    }
    let mut pixels: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (p, &id) in mask.data().iter().enumerate() {
        if id != 0 {
            pixels.entry(id).or_default().push(p);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |cell: u32, rng: &mut ChaCha8Rng| -> Result<FeatureSampleSet<T>> {
        let own = pixels.get(&cell).filter(|v| !v.is_empty()).ok_or(Error::EmptyCell(cell))?;
        let k = sample_count(own.len(), rate);
        let mut chosen: Vec<usize> = sample(rng, own.len(), k).into_iter().map(|i| own[i]).collect();
        chosen.sort_unstable();
        let vectors = chosen.iter().map(|&p| features.vector(p).to_vec()).collect();
        Ok(FeatureSampleSet { cell, rate, pixels: chosen, vectors })
    };
    graph
        .edges()
        .iter()
        .map(|&(a, b)| {
            let first = draw(a, &mut rng)?;
            let second = draw(b, &mut rng)?;
            Ok(EdgeSamples { first, second })
        })
        .collect()
}

/// How the similarity of two sample sets is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetCosine {
    /// Mean of all pairwise cosines between the two sets.
    #[default]
    MeanPairwise,
    /// Cosine between the mean vectors of the two sets.
    MeanPooled,
}

fn norm<T: Float>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

fn dot<T: Float>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn set_cosine<T: Float + FromPrimitive>(edge: &EdgeSamples<T>, mode: SetCosine) -> Result<T> {
    let (fa, fb) = (&edge.first, &edge.second);
    if fa.vectors.is_empty() || fb.vectors.is_empty() {
        return Err(Error::EmptyCell(if fa.vectors.is_empty() { fa.cell } else { fb.cell }));
    }
    let dim = fa.vectors[0].len();
    if fa.vectors.iter().chain(&fb.vectors).any(|v| v.len() != dim) {
        return Err(Error::InvalidParameter("feature vectors differ in dimension".into()));
    }
    fn normed<T: Float>(set: &FeatureSampleSet<T>) -> Result<Vec<(T, &[T])>> {
        set.vectors
            .iter()
            .map(|v| {
                let n = norm(v);
                if n > T::zero() {
                    Ok((n, v.as_slice()))
                } else {
                    Err(Error::ZeroNorm(set.cell))
                }
            })
            .collect()
    }
    let a = normed(fa)?;
    let b = normed(fb)?;
    match mode {
        SetCosine::MeanPairwise => {
            let mut sum = T::zero();
            for &(na, va) in &a {
                for &(nb, vb) in &b {
                    sum = sum + dot(va, vb) / (na * nb);
                }
            }
            Ok(sum / cast((a.len() * b.len()) as f64))
        }
        SetCosine::MeanPooled => {
            let pool = |set: &[(T, &[T])]| {
                let mut m = vec![T::zero(); dim];
                for (_, v) in set {
                    for (acc, &x) in m.iter_mut().zip(*v) {
                        *acc = *acc + x;
                    }
                }
                m
            };
            let (ma, mb) = (pool(&a), pool(&b));
            let (na, nb) = (norm(&ma), norm(&mb));
            if na == T::zero() {
                return Err(Error::ZeroNorm(fa.cell));
            }
            if nb == T::zero() {
                return Err(Error::ZeroNorm(fb.cell));
            }
            Ok(dot(&ma, &mb) / (na * nb))
        }
    }
}

/// Mean over edges of the similarity between the two cells' samples.
/// Negative similarities are kept as they are, so the range is `[-1, 1]`.
pub fn orthogonality_loss<T: Float + FromPrimitive>(pairs: &[EdgeSamples<T>], mode: SetCosine) -> Result<T> {
    if pairs.is_empty() {
        return Err(Error::Empty("orthogonality loss needs at least one edge".into()));
    }
    let mut sum = T::zero();
    for edge in pairs {
        sum = sum + set_cosine(edge, mode)?;
    }
    Ok(sum / cast(pairs.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_maps(w: usize, h: usize, fg: &[f64]) -> PredictionMaps<f64> {
        let bg: Vec<f64> = fg.iter().map(|f| 1.0 - f).collect();
        let quarter: Vec<f64> = fg.iter().map(|f| f / 4.0).collect();
        PredictionMaps::from_planes(w, h, &bg, [&quarter, &quarter, &quarter, &quarter]).unwrap()
    }

    fn gt() -> InstanceMask {
        InstanceMask::from_rows(&[[0, 1, 1], [0, 2, 0]]).unwrap()
    }

    #[test]
    fn perfect_semantic_prediction() {
        let fg: Vec<f64> = gt().data().iter().map(|&v| (v != 0) as u8 as f64).collect();
        let l = semantic_loss(&binary_maps(3, 2, &fg), &gt()).unwrap();
        assert_eq!(l.ce, 0.0);
        assert!(l.dice >= 0.0 && l.dice <= 1e-5);
    }

    #[test]
    fn uniform_semantic_prediction_is_ln2() {
        let l = semantic_loss(&binary_maps(3, 2, &[0.5; 6]), &gt()).unwrap();
        assert!((l.ce - std::f64::consts::LN_2).abs() <= 1e-12);
    }

    #[test]
    fn inverted_foreground_dice_is_one() {
        let fg: Vec<f64> = gt().data().iter().map(|&v| (v == 0) as u8 as f64).collect();
        let l = semantic_loss(&binary_maps(3, 2, &fg), &gt()).unwrap();
        assert!((l.dice - 1.0).abs() <= DICE_EPSILON);
    }

    #[test]
    fn maps_validate_probabilities() {
        let bad = PredictionMaps::<f64>::new(1, 1, vec![1.5, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(bad, Err(Error::ProbabilityOutOfRange { index: 0, .. })));
        let unnormalized = PredictionMaps::<f64>::new(1, 1, vec![0.5, 0.5, 0.5, 0.0, 0.0]);
        assert!(unnormalized.is_err());
        assert!(ColorProbabilities::<f32>::new(1, 1, vec![0.2, -0.1, 0.0, 0.0]).is_err());
    }

    #[test]
    fn classification_examples() {
        let fc = FourColorMask::from_rows(&[[0, 1, 2], [3, 4, 0]]).unwrap();
        let mut onehot = vec![0.0f64; 24];
        for (p, &c) in fc.data().iter().enumerate() {
            if c != 0 {
                onehot[(c as usize - 1) * 6 + p] = 1.0;
            }
        }
        let perfect = classification_loss(&ColorProbabilities::new(3, 2, onehot.clone()).unwrap(), &fc).unwrap();
        assert!(perfect.terms.total() <= 1e-5);
        // background pixels 0 and 5 changed
        let mut noisy = onehot.clone();
        noisy[0] = 0.7;
        noisy[6 + 5] = 0.3;
        let changed = classification_loss(&ColorProbabilities::new(3, 2, noisy).unwrap(), &fc).unwrap();
        assert_eq!(changed, perfect);

        let uniform = ColorProbabilities::new(3, 2, vec![0.25f64; 24]).unwrap();
        let u = classification_loss(&uniform, &fc).unwrap();
        assert!((u.terms.ce - 4f64.ln()).abs() <= 1e-12);

        let empty = FourColorMask::new(3, 2, vec![0; 6]).unwrap();
        let e = classification_loss(&uniform, &empty).unwrap();
        assert!(e.empty_foreground);
        assert_eq!(e.terms.total(), 0.0);
    }

    #[test]
    fn total_loss_examples() {
        let w = LossWeights::<f64>::default();
        assert_eq!(total_loss(0.0, 0.0, 0.0, w), 0.0);
        assert_eq!(total_loss(1.0, 1.0, 1.0, w), 4.0);
        assert_eq!(total_loss(0.5, 0.0, 0.25, w), 0.75);
        assert!(LossWeights::new(-1.0f64, 1.0).is_err());
    }

    fn edge(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> EdgeSamples<f64> {
        let set = |cell, vectors: Vec<Vec<f64>>| FeatureSampleSet { cell, rate: 1.0, pixels: vec![], vectors };
        EdgeSamples { first: set(1, a), second: set(2, b) }
    }

    #[test]
    fn orthogonality_examples() {
        let ortho = edge(vec![vec![1.0, 0.0], vec![2.0, 0.0]], vec![vec![0.0, 3.0]]);
        assert_eq!(orthogonality_loss(std::slice::from_ref(&ortho), SetCosine::MeanPairwise).unwrap(), 0.0);
        let same = edge(vec![vec![0.6, 0.8]], vec![vec![0.6, 0.8]]);
        assert!((orthogonality_loss(std::slice::from_ref(&same), SetCosine::MeanPairwise).unwrap() - 1.0).abs() < 1e-15);
        let mean = orthogonality_loss(&[same, ortho], SetCosine::MeanPairwise).unwrap();
        assert!((mean - 0.5).abs() < 1e-15);
        let opposite = edge(vec![vec![1.0, 0.0]], vec![vec![-1.0, 0.0]]);
        assert_eq!(orthogonality_loss(&[opposite], SetCosine::MeanPooled).unwrap(), -1.0);
        let zero = edge(vec![vec![0.0, 0.0]], vec![vec![1.0, 0.0]]);
        assert!(matches!(orthogonality_loss(&[zero], SetCosine::MeanPairwise), Err(Error::ZeroNorm(1))));
        assert!(orthogonality_loss::<f64>(&[], SetCosine::MeanPairwise).is_err());
    }

    #[test]
    fn sampling_counts_and_determinism() {
        // two 10-pixel cells side by side
        let row: Vec<u32> = (0..10).map(|x| if x < 5 { 1 } else { 2 }).collect();
        let mask = InstanceMask::from_rows(&[row.clone(), row]).unwrap();
        let graph = crate::graph::build_cell_graph(&mask, 1).unwrap();
        let feats = FeatureGrid::new(10, 2, 3, (0..60).map(|v| v as f64 + 1.0).collect()).unwrap();
        let half = sample_adjacent_features(&feats, &mask, &graph, 0.5, 7).unwrap();
        assert_eq!(half.len(), 1);
        assert_eq!(half[0].first.vectors.len(), 5);
        assert_eq!(half[0].second.vectors.len(), 5);
        assert_eq!(half, sample_adjacent_features(&feats, &mask, &graph, 0.5, 7).unwrap());
        let all = sample_adjacent_features(&feats, &mask, &graph, 1.0, 0).unwrap();
        assert_eq!(all[0].first.pixels, vec![0, 1, 2, 3, 4, 10, 11, 12, 13, 14]);
        assert!(sample_adjacent_features(&feats, &mask, &graph, 0.0, 0).is_err());
        let stray = CellGraph::new([1, 9], [(1, 9)]).unwrap();
        assert!(matches!(
            sample_adjacent_features(&feats, &mask, &stray, 1.0, 0),
            Err(Error::EmptyCell(9))
        ));
    }

    #[test]
    fn sample_count_rounds_up() {
        assert_eq!(sample_count(10, 0.5), 5);
        assert_eq!(sample_count(3, 0.5), 2);
        assert_eq!(sample_count(7, 1.0), 7);
    }
}
