//! Gain ratio, best split and tree fitting against brute-force enumeration.

use crtx_core::tree::{best_split, classify, entropy, fit, gain_ratio, TreeNode, TreeParams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn counts_entropy(labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    let mut counts = std::collections::BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    counts.values().map(|&c| c as f64 / n).map(|p| -p * p.log2()).sum()
}

/// Textbook gain ratio of a two-way partition, computed from scratch.
fn oracle_ratio(parent: &[usize], left: &[usize], right: &[usize]) -> (f64, f64) {
    let n = parent.len() as f64;
    let (wl, wr) = (left.len() as f64 / n, right.len() as f64 / n);
    let gain = counts_entropy(parent) - wl * counts_entropy(left) - wr * counts_entropy(right);
    let split_info = -wl * wl.log2() - wr * wr.log2();
    (gain, gain / split_info)
}

/// Every midpoint between consecutive distinct values; keeps the first
/// strictly better ratio, so ties go to the smallest threshold.
fn oracle_split(xs: &[f64], ys: &[usize]) -> Option<(f64, f64)> {
    let mut values: Vec<f64> = xs.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut best: Option<(f64, f64)> = None;
    for w in values.windows(2) {
        let theta = w[0] + (w[1] - w[0]) / 2.0;
        let left: Vec<usize> = xs.iter().zip(ys).filter(|(x, _)| **x < theta).map(|(_, &y)| y).collect();
        let right: Vec<usize> = xs.iter().zip(ys).filter(|(x, _)| **x >= theta).map(|(_, &y)| y).collect();
        let (gain, ratio) = oracle_ratio(ys, &left, &right);
        if gain <= 1e-12 {
            continue;
        }
        if best.is_none_or(|(_, r)| ratio > r + 1e-12) {
            best = Some((theta, ratio));
        }
    }
    best
}

/// Small 1-D binary-label datasets; values come from a short integer grid
/// so duplicate values and tied splits are common.
fn generated_cases() -> Vec<(Vec<f64>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7472_6565);
    (0..2000)
        .map(|_| {
            let n = rng.random_range(2..=8);
            let grid = rng.random_range(2..=9);
            let xs = (0..n).map(|_| rng.random_range(0..grid) as f64 * 0.5).collect();
            let ys = (0..n).map(|_| rng.random_range(0..2)).collect();
            (xs, ys)
        })
        .collect()
}

#[test]
fn best_split_matches_enumeration() {
    let cases = generated_cases();
    let mut with_split = 0;
    for (xs, ys) in &cases {
        let points: Vec<[f64; 1]> = xs.iter().map(|&x| [x]).collect();
        let got = best_split(&points, ys).unwrap();
        let want = oracle_split(xs, ys);
        match (got, want) {
            (None, None) => {}
            (Some(s), Some((theta, ratio))) => {
                with_split += 1;
                assert_eq!(s.feature, 0);
                assert_eq!(s.threshold, theta, "xs {xs:?} ys {ys:?}");
                assert!((s.gain_ratio - ratio).abs() < 1e-12, "xs {xs:?} ys {ys:?}");
            }
            (g, w) => panic!("xs {xs:?} ys {ys:?}: got {g:?}, want {w:?}"),
        }
    }
    assert!(cases.len() >= 500 && with_split >= 500, "{with_split} cases had a split");
}

#[test]
fn gain_ratio_matches_enumeration() {
    for (xs, ys) in generated_cases() {
        let mut values = xs.clone();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let theta = (w[0] + w[1]) / 2.0;
            let left: Vec<usize> = xs.iter().zip(&ys).filter(|(x, _)| **x < theta).map(|(_, &y)| y).collect();
            let right: Vec<usize> = xs.iter().zip(&ys).filter(|(x, _)| **x >= theta).map(|(_, &y)| y).collect();
            let got = gain_ratio(&ys, &[left.clone(), right.clone()]).unwrap();
            let (_, want) = oracle_ratio(&ys, &left, &right);
            assert!((got - want).abs() < 1e-12, "ys {ys:?} | {left:?} {right:?}: {got} vs {want}");
            assert!((-1e-12..=1.0 + 1e-12).contains(&got));
        }
    }
}

#[test]
fn entropy_hand_values() {
    assert_eq!(entropy(&[0, 0, 1, 1]).unwrap(), 1.0);
    assert_eq!(entropy(&[7, 7, 7]).unwrap(), 0.0);
    assert!((entropy(&[0, 0, 0, 1]).unwrap() - 0.811278).abs() < 1e-6);
}

#[test]
fn two_pieces_need_one_threshold() {
    let xs: Vec<[f64; 1]> = (0..200).map(|i| [-1.0 + 2.0 * i as f64 / 200.0]).collect();
    let ys: Vec<usize> = xs.iter().map(|x| usize::from(x[0] >= 0.0)).collect();
    let tc = fit(&xs, &ys, &TreeParams::default()).unwrap();
    assert!(tc.root.node_count() <= 3);
    for (x, &y) in xs.iter().zip(&ys) {
        assert_eq!(classify(&tc, x).unwrap(), y);
    }
    assert_eq!(classify(&tc, &[-0.5]).unwrap(), 0);
    assert_eq!(classify(&tc, &[0.5]).unwrap(), 1);
}

#[test]
fn xor_is_separable_at_depth_two() {
    // A balanced XOR has zero gain on every single split and the greedy
    // tree stops at the root; one extra sample breaks the symmetry.
    let xs = [[0.0, 0.0], [0.0, 0.1], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
    let ys = [0, 0, 1, 1, 0];
    let tc = fit(&xs, &ys, &TreeParams { max_depth: 2, min_samples_leaf: 1 }).unwrap();
    for (x, &y) in xs.iter().zip(&ys) {
        assert_eq!(classify(&tc, x).unwrap(), y);
    }
}

/// Grid-valued inputs, so duplicates and tied thresholds occur.
fn grid_dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (1usize..4, 1usize..40).prop_flat_map(|(dim, n)| {
        (prop::collection::vec(prop::collection::vec(-5i32..5, dim), n), prop::collection::vec(0usize..4, n))
            .prop_map(|(xs, ys)| (xs.into_iter().map(|v| v.into_iter().map(f64::from).collect()).collect(), ys))
    })
}

/// Continuous inputs: distinct values almost surely, so a node holding
/// several labels can always split off its extreme point with positive gain.
fn continuous_dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (1usize..4, 1usize..40).prop_flat_map(|(dim, n)| {
        (prop::collection::vec(prop::collection::vec(-5.0f64..5.0, dim), n), prop::collection::vec(0usize..4, n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn fitting_is_deterministic((xs, ys) in grid_dataset()) {
        let params = TreeParams { max_depth: 6, min_samples_leaf: 1 };
        prop_assert_eq!(fit(&xs, &ys, &params).unwrap(), fit(&xs, &ys, &params).unwrap());
    }

    #[test]
    fn consistent_data_is_memorised((xs, ys) in continuous_dataset()) {
        let tc = fit(&xs, &ys, &TreeParams { max_depth: 64, min_samples_leaf: 1 }).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            prop_assert_eq!(classify(&tc, x).unwrap(), y);
        }
        let leaves = tc.root.leaf_ids();
        prop_assert!(leaves.iter().all(|id| ys.contains(id)));
    }

    #[test]
    fn binary_gain_ratio_is_a_fraction(labels in prop::collection::vec(0usize..2, 2..30), cut in 1usize..29) {
        prop_assume!(cut < labels.len());
        let r = gain_ratio(&labels, &[&labels[..cut], &labels[cut..]]).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&r));
    }
}

#[test]
fn single_leaf_for_pure_labels() {
    let tc = fit(&[[1.0], [2.0], [3.0]], &[4, 4, 4], &TreeParams::default()).unwrap();
    assert!(matches!(tc.root, TreeNode::Leaf { id: 4 }));
}
