mod common;

use common::*;
use fourcolor::codec::{paint, NormalizeOptions};
use fourcolor::losses::{classification_loss, semantic_loss, ColorProbabilities, PredictionMaps};
use fourcolor::metrics::{aji, dice, evaluate_pair, panoptic};
use fourcolor::synth::gen_random_packing;
use fourcolor::types::masks_equivalent;
use fourcolor::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn packing(n: usize, side: usize, seed: u64) -> InstanceMask {
    gen_random_packing(n, side, side, seed, 0).unwrap().mask
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn packings_round_trip(n in 0usize..80, side in 32usize..128, seed in any::<u64>()) {
        let mask = packing(n, side, seed);
        for order in OrderingStrategy::ALL {
            let fc = encode_mask(&mask, DEFAULT_DELTA, order).unwrap();
            prop_assert!(fc.colors_present().iter().all(|&c| c <= 4));
            let back = decode_mask(&fc, Connectivity::Four);
            prop_assert!(masks_equivalent(&back, &mask).unwrap());
        }
    }

    #[test]
    fn recolorings_normalize_to_the_greedy_encoding(n in 1usize..40, seed in any::<u64>()) {
        let mask = packing(n, 72, seed);
        let graph = build_cell_graph(&mask, DEFAULT_DELTA).unwrap();
        let direct = encode_mask(&mask, DEFAULT_DELTA, OrderingStrategy::AscendingId).unwrap();
        let greedy = greedy_color(&graph, OrderingStrategy::AscendingId);
        prop_assume!(greedy.max_color() <= 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pred = random_recoloring(&greedy, &graph, 4, &mut rng);
        prop_assert!(proper(&graph, &pred));
        let fc = paint(&mask, &graph, &pred);
        let (instances, canonical) = normalize_prediction(&fc, DEFAULT_DELTA, NormalizeOptions::default()).unwrap();
        prop_assert_eq!(&instances, &mask);
        prop_assert_eq!(canonical.data(), direct.data());
    }

    #[test]
    fn panoptic_matches_exhaustive_matching(
        w in 1usize..=16,
        h in 1usize..=16,
        g_rects in 0usize..=4,
        p_rects in 0usize..=4,
        noise in 0.0f64..0.3,
        independent in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = rect_mask(w, h, g_rects, &mut rng);
        let pred = if independent {
            rect_mask(w, h, p_rects, &mut rng)
        } else {
            perturb(&gt, noise, 0, &mut rng)
        };
        let fast = panoptic::<Rational>(&gt, &pred).unwrap();
        let oracle = exhaustive_panoptic(&gt, &pred);
        prop_assert_eq!((fast.tp, fast.fp, fast.fn_), (oracle.tp, oracle.fp, oracle.fn_));
        prop_assert_eq!(fast.dq, oracle.dq);
        prop_assert_eq!(fast.sq, oracle.sq);
        prop_assert_eq!(fast.pq, oracle.pq);
    }

    #[test]
    fn metrics_ignore_id_relabeling(seed in any::<u64>(), noise in 0.0f64..0.2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = rect_mask(12, 10, 5, &mut rng);
        let pred = perturb(&gt, noise, 3, &mut rng);
        let shuffle = |m: &InstanceMask, k: u32| {
            let data = m.data().iter().map(|&v| if v == 0 { 0 } else { v * 7 + k }).collect();
            InstanceMask::new(m.width(), m.height(), data).unwrap()
        };
        let base = evaluate_pair::<Rational>(&gt, &pred).unwrap();
        prop_assert_eq!(&evaluate_pair::<Rational>(&shuffle(&gt, 3), &pred).unwrap(), &base);
        prop_assert_eq!(&evaluate_pair::<Rational>(&gt, &shuffle(&pred, 11)).unwrap(), &base);
        prop_assert_eq!(dice::<Rational>(&gt, &pred).unwrap(), dice::<Rational>(&pred, &gt).unwrap());
        let one = Rational::from_integer(1.into());
        let zero = Rational::from_integer(0.into());
        for v in [&base.dice, &base.aji, &base.dq, &base.sq, &base.pq] {
            prop_assert!(*v >= zero && *v <= one);
        }
        if base.tp > 0 {
            prop_assert_eq!(base.pq.clone(), base.dq.clone() * base.sq.clone());
        }
    }
}

/// Every relabeling of the greedy colors by a permutation of {1,2,3,4}
/// collapses back to the greedy encoding.
#[test]
fn all_color_permutations_canonicalize() {
    let mask = packing(120, 128, 5);
    let graph = build_cell_graph(&mask, DEFAULT_DELTA).unwrap();
    let greedy = greedy_color(&graph, OrderingStrategy::AscendingId);
    assert!(greedy.max_color() <= 4);
    let direct = encode_mask(&mask, DEFAULT_DELTA, OrderingStrategy::AscendingId).unwrap();
    let expected = EncodingMatrix::from_assignment(&greedy, &graph).unwrap();
    let mut seen = std::collections::BTreeSet::new();
    let mut perm = [1u32, 2, 3, 4];
    let mut count = 0;
    permute(&mut perm, 0, &mut |p| {
        count += 1;
        let a = ColorAssignment::from_pairs(greedy.iter().map(|(id, c)| (id, p[c as usize - 1]))).unwrap();
        let fc = paint(&mask, &graph, &a);
        seen.insert(fc.data().to_vec());
        let (_, canonical) = normalize_prediction(&fc, DEFAULT_DELTA, NormalizeOptions::default()).unwrap();
        assert_eq!(canonical.data(), direct.data());
        let padded = {
            let m = EncodingMatrix::from_assignment(&a, &graph).unwrap();
            let mut data = Vec::new();
            for r in 0..m.rows() {
                let mut row = m.row(r).to_vec();
                row.resize(4, 0);
                data.extend(row);
            }
            EncodingMatrix::new(m.rows(), 4, data).unwrap()
        };
        let c = canonicalize_encoding(&padded, &graph).unwrap();
        assert!(c.was_proper());
        assert_eq!(c.matrix, expected);
    });
    assert_eq!(count, 24);
    assert!(seen.len() > 1);
}

fn permute(p: &mut [u32; 4], k: usize, f: &mut impl FnMut(&[u32; 4])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

/// Aggregated Jaccard never exceeds binary Dice on the random corpus.
#[test]
fn aji_never_exceeds_dice() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    for i in 0..300u64 {
        let gt = if i % 2 == 0 { rect_mask(16, 16, 6, &mut rng) } else { packing(25, 48, i) };
        let pred = match i % 3 {
            0 => perturb(&gt, 0.15, 6, &mut rng),
            1 => shift(&gt, rng.gen_range(-2..=2), rng.gen_range(-2..=2)),
            _ => rect_mask(gt.width(), gt.height(), 6, &mut rng),
        };
        let a = aji::<Rational>(&gt, &pred).unwrap();
        let d = dice::<Rational>(&gt, &pred).unwrap();
        assert!(a <= d, "aji {a} > dice {d} on pair {i}");
        checked += 1;
    }
    assert_eq!(checked, 300);
}

fn kahan(values: impl DoubleEndedIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values.rev() {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

fn oracle_dice(inter: f64, p: f64, q: f64) -> f64 {
    1.0 - (2.0 * inter + 1e-6) / (p + q + 1e-6)
}

/// Compensated, reverse-order reference sums agree with the losses to 1e-9.
#[test]
fn losses_match_compensated_reference() {
    let (w, h) = (32, 32);
    let n = w * h;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bg = Vec::with_capacity(n);
        let mut colors: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(n)).collect();
        for _ in 0..n {
            let raw: Vec<f64> = (0..5).map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = raw.iter().sum();
            bg.push(raw[0] / total);
            for c in 0..4 {
                colors[c].push(raw[c + 1] / total);
            }
        }
        let maps = PredictionMaps::from_planes(w, h, &bg, [&colors[0], &colors[1], &colors[2], &colors[3]]).unwrap();
        let gt = rect_mask(w, h, 8, &mut rng);
        let sem = semantic_loss(&maps, &gt).unwrap();

        let fg: Vec<f64> = (0..n).map(|p| colors.iter().map(|c| c[p]).sum()).collect();
        let is_fg = |p: usize| gt.data()[p] != 0;
        let ce = kahan((0..n).map(|p| -(if is_fg(p) { fg[p] } else { bg[p] }).ln())) / n as f64;
        let inter = kahan((0..n).map(|p| if is_fg(p) { fg[p] } else { 0.0 }));
        let psum = kahan(fg.iter().copied());
        let qsum = (0..n).filter(|&p| is_fg(p)).count() as f64;
        assert!((sem.ce - ce).abs() < 1e-9, "seed {seed}: ce {} vs {ce}", sem.ce);
        assert!((sem.dice - oracle_dice(inter, psum, qsum)).abs() < 1e-9);

        let fc = encode_mask(&gt, DEFAULT_DELTA, OrderingStrategy::AscendingId).unwrap();
        let probs: Vec<f64> = (0..4)
            .flat_map(|c| (0..n).map(|p| colors[c][p] / fg[p]).collect::<Vec<_>>())
            .collect();
        let cp = ColorProbabilities::new(w, h, probs.clone()).unwrap();
        let cls = classification_loss(&cp, &fc).unwrap();
        let fgp: Vec<usize> = (0..n).filter(|&p| fc.data()[p] != 0).collect();
        if fgp.is_empty() {
            assert!(cls.empty_foreground);
            continue;
        }
        let prob = |c: usize, p: usize| probs[(c - 1) * n + p];
        let ce = kahan(fgp.iter().map(|&p| -prob(fc.data()[p] as usize, p).ln())) / fgp.len() as f64;
        let mut d = Vec::new();
        for c in 1..=4 {
            let inter = kahan(fgp.iter().map(|&p| if fc.data()[p] as usize == c { prob(c, p) } else { 0.0 }));
            let ps = kahan(fgp.iter().map(|&p| prob(c, p)));
            let qs = fgp.iter().filter(|&&p| fc.data()[p] as usize == c).count() as f64;
            d.push(oracle_dice(inter, ps, qs));
        }
        assert!((cls.terms.ce - ce).abs() < 1e-9);
        assert!((cls.terms.dice - kahan(d.into_iter()) / 4.0).abs() < 1e-9);

        let maps32 = PredictionMaps::<f32>::new(w, h, maps_data(&bg, &colors)).unwrap();
        let sem32 = semantic_loss(&maps32, &gt).unwrap();
        assert!((sem32.ce as f64 - sem.ce).abs() < 1e-4);
    }
}

fn maps_data(bg: &[f64], colors: &[Vec<f64>]) -> Vec<f32> {
    bg.iter().chain(colors.iter().flatten()).map(|&v| v as f32).collect()
}

/// Changing the prediction on background pixels leaves the
/// classification loss unchanged.
#[test]
fn classification_ignores_background() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gt = rect_mask(10, 10, 4, &mut rng);
    let fc = encode_mask(&gt, DEFAULT_DELTA, OrderingStrategy::AscendingId).unwrap();
    let n = 100;
    let mut probs = vec![0.25f64; 4 * n];
    let base = classification_loss(&ColorProbabilities::new(10, 10, probs.clone()).unwrap(), &fc).unwrap();
    for p in (0..n).filter(|&p| fc.data()[p] == 0) {
        probs[p] = 1.0;
        probs[n + p] = 0.0;
        probs[2 * n + p] = 0.0;
        probs[3 * n + p] = 0.0;
    }
    let changed = classification_loss(&ColorProbabilities::new(10, 10, probs).unwrap(), &fc).unwrap();
    assert_eq!(base, changed);
}
