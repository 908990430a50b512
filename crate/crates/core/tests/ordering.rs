use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use proptest::prelude::*;
use sord_core::diffcore::grad_check;
use sord_core::diffcore::loss::entropy;
use sord_core::ordering_search::{dominant_index, weighted_total_loss_grad};
use sord_core::{
    dominant_ordering, encode_onehot, enumerate_orderings, per_ordering_losses,
    weighted_total_loss, DistanceSpec, Error, Geometry, OrderingCandidateSet, OrderingWeights,
    RankAssignment,
};

fn equally_spaced(k: usize) -> Vec<f64> {
    RankAssignment::equally_spaced_circular(k)
        .unwrap()
        .ranks()
        .to_vec()
}

fn slots(ranks: &[f64], k: usize) -> Vec<usize> {
    ranks
        .iter()
        .map(|r| (r / (TAU / k as f64)).round() as usize % k)
        .collect()
}

/// Smallest image of a class-to-slot map under the dihedral group of the
/// K-gon.
fn dihedral_canonical(slot: &[usize], k: usize) -> Vec<usize> {
    let mut best: Option<Vec<usize>> = None;
    for shift in 0..k {
        for flip in [false, true] {
            let image: Vec<usize> = slot
                .iter()
                .map(|&s| {
                    let s = if flip { (k - s) % k } else { s };
                    (s + shift) % k
                })
                .collect();
            if best.as_ref().is_none_or(|b| image < *b) {
                best = Some(image);
            }
        }
    }
    best.unwrap()
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, k - 1);
            out.push(q);
        }
    }
    out
}

fn brute_force_classes(k: usize) -> BTreeSet<Vec<usize>> {
    permutations(k)
        .iter()
        .map(|p| dihedral_canonical(p, k))
        .collect()
}

fn candidate_classes(set: &OrderingCandidateSet, k: usize) -> BTreeSet<Vec<usize>> {
    set.candidates()
        .iter()
        .map(|c| dihedral_canonical(&slots(c.ranks(), k), k))
        .collect()
}

#[test]
fn four_quarter_positions() {
    let set = enumerate_orderings(4, &equally_spaced(4), Geometry::Circular).unwrap();
    let got: BTreeSet<Vec<u64>> = set
        .candidates()
        .iter()
        .map(|c| c.ranks().iter().map(|r| r.to_bits()).collect())
        .collect();
    let want: BTreeSet<Vec<u64>> = [
        [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2],
        [0.0, PI, FRAC_PI_2, 3.0 * FRAC_PI_2],
        [0.0, FRAC_PI_2, 3.0 * FRAC_PI_2, PI],
    ]
    .iter()
    .map(|c| c.iter().map(|r| r.to_bits()).collect())
    .collect();
    assert_eq!(got, want);
}

#[test]
fn two_positions_single_candidate() {
    let set = enumerate_orderings(2, &[0.0, PI], Geometry::Circular).unwrap();
    assert_eq!(set.len(), 1);
}

#[test]
fn five_classes_match_brute_force() {
    let set = enumerate_orderings(5, &equally_spaced(5), Geometry::Circular).unwrap();
    assert_eq!(set.len(), 12);
    let classes = candidate_classes(&set, 5);
    assert_eq!(classes.len(), 12, "two candidates share a class");
    assert_eq!(classes, brute_force_classes(5));
}

#[test]
fn counts_follow_half_factorial() {
    for k in 3..=7 {
        let set = enumerate_orderings(k, &equally_spaced(k), Geometry::Circular).unwrap();
        let expected: usize = (1..k).product::<usize>() / 2;
        assert_eq!(set.len(), expected, "K = {k}");
        assert_eq!(brute_force_classes(k).len(), expected);
        assert_eq!(candidate_classes(&set, k).len(), expected);
    }
}

#[test]
fn candidates_use_each_position_once() {
    let positions = [0.0, 0.7, 1.9, 2.5, 4.0, 5.5];
    let set = enumerate_orderings(4, &positions, Geometry::Circular).unwrap();
    assert!(!set.is_empty());
    for c in set.candidates() {
        assert!(c.ranks().iter().all(|r| positions.contains(r)));
        let unique: BTreeSet<u64> = c.ranks().iter().map(|r| r.to_bits()).collect();
        assert_eq!(unique.len(), 4);
    }
    for (i, a) in set.candidates().iter().enumerate() {
        for b in &set.candidates()[i + 1..] {
            assert!(!sord_core::ordering_search::orderings_equivalent(a, b));
        }
    }
}

#[test]
fn too_few_positions_is_infeasible() {
    assert!(matches!(
        enumerate_orderings(4, &[0.0, 1.0, 2.0], Geometry::Circular),
        Err(Error::Infeasible(_))
    ));
}

#[test]
fn loss_examples() {
    let set = enumerate_orderings(4, &equally_spaced(4), Geometry::Circular).unwrap();
    let spec = DistanceSpec::circular(1.0).unwrap();
    let encodings = set.encodings(&spec).unwrap();

    let uniform = [0.25; 4];
    for l in per_ordering_losses(&uniform, 2, &set, &spec).unwrap() {
        assert!((l - 4f64.ln()).abs() < 1e-10);
    }

    for (j, enc) in encodings.iter().enumerate() {
        let row = enc.row(1);
        let losses = per_ordering_losses(row, 1, &set, &spec).unwrap();
        assert!((losses[j] - entropy(row)).abs() < 1e-9);
        assert!(losses.iter().all(|&l| l >= losses[j] - 1e-12));
    }

    let limit = DistanceSpec::circular(f64::INFINITY).unwrap();
    let prediction = [0.1, 0.6, 0.2, 0.1];
    let onehot = encode_onehot(4).unwrap();
    let standard = -(prediction[1] + 1e-12f64).ln();
    for l in per_ordering_losses(&prediction, 1, &set, &limit).unwrap() {
        assert!((l - standard).abs() < 1e-12);
        assert_eq!(onehot.row(1)[1], 1.0);
    }

    assert!(matches!(
        per_ordering_losses(&uniform, 4, &set, &spec),
        Err(Error::Index { index: 4, len: 4 })
    ));
}

#[test]
fn weighting_examples() {
    let losses = [0.3, 1.2, 2.1];
    let even = weighted_total_loss(&losses, &OrderingWeights::zeros(3)).unwrap();
    assert!((even - 1.2).abs() < 1e-15);
    let peaked = OrderingWeights::from_logits(vec![60.0, 0.0, 0.0]).unwrap();
    assert!((weighted_total_loss(&losses, &peaked).unwrap() - 0.3).abs() < 1e-12);
    assert!(matches!(
        weighted_total_loss(&losses, &OrderingWeights::zeros(2)),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn dominant_examples() {
    let set = enumerate_orderings(4, &equally_spaced(4), Geometry::Circular).unwrap();
    let w = OrderingWeights::from_logits(vec![5.0, 0.0, 0.0]).unwrap();
    assert_eq!(dominant_ordering(&w, &set).unwrap(), &set.candidates()[0]);
    assert_eq!(dominant_index(&OrderingWeights::zeros(3)), 0);
    assert_eq!(
        dominant_index(&OrderingWeights::from_logits(vec![0.0, 2.0, 2.0]).unwrap()),
        1
    );
    assert!(dominant_ordering(&OrderingWeights::zeros(2), &set).is_err());
}

#[test]
fn descent_from_skewed_weights_can_shrink_best() {
    let losses = [0.0, 0.1, 10.0];
    let mut w =
        OrderingWeights::from_logits(vec![1e-3f64.ln(), 0.9f64.ln(), 0.099f64.ln()]).unwrap();
    let before = w.probabilities()[0];
    let (_, g) = weighted_total_loss_grad(&losses, &w).unwrap();
    for (l, d) in w.logits_mut().iter_mut().zip(&g) {
        *l -= 0.01 * d;
    }
    assert!(w.probabilities()[0] < before);
}

fn losses_and_logits() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..13).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..5.0, n),
            prop::collection::vec(-4.0f64..4.0, n),
        )
    })
}

proptest! {
    #[test]
    fn total_between_extremes((losses, logits) in losses_and_logits()) {
        let w = OrderingWeights::from_logits(logits).unwrap();
        let total = weighted_total_loss(&losses, &w).unwrap();
        let lo = losses.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = losses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(total >= lo - 1e-12 && total <= hi + 1e-12);
        let p = w.probabilities();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn lambda_gradient_matches_differences((losses, logits) in losses_and_logits()) {
        let err = grad_check(
            |lambda| {
                let w = OrderingWeights::from_logits(lambda.to_vec()).unwrap();
                weighted_total_loss_grad(&losses, &w).unwrap()
            },
            &logits,
        ).unwrap();
        prop_assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn descent_on_lambda_favours_the_best_loss(
        (mut losses, _) in losses_and_logits(),
        best in 0usize..12,
    ) {
        let n = losses.len();
        let best = best % n;
        let lo = losses.iter().cloned().fold(f64::INFINITY, f64::min);
        losses[best] = lo - 0.5;
        // Starts from uniform weights: from an arbitrary λ the best weight can
        // shrink at first (see `descent_from_skewed_weights_can_shrink_best`).
        let mut w = OrderingWeights::zeros(n);
        let mut previous = w.probabilities()[best];
        let mut previous_total = weighted_total_loss(&losses, &w).unwrap();
        for _ in 0..300 {
            let (_, g) = weighted_total_loss_grad(&losses, &w).unwrap();
            for (l, d) in w.logits_mut().iter_mut().zip(&g) {
                *l -= 0.05 * d;
            }
            let current = w.probabilities()[best];
            let total = weighted_total_loss(&losses, &w).unwrap();
            prop_assert!(current >= previous);
            prop_assert!(current > previous || current > 1.0 - 1e-9);
            prop_assert!(total <= previous_total + 1e-12);
            previous = current;
            previous_total = total;
        }
    }

    #[test]
    fn canonicalization_is_idempotent(
        k in 3usize..7,
        offsets in prop::collection::vec(0.0..TAU, 60),
        reflect in prop::collection::vec(any::<bool>(), 60),
    ) {
        let set = enumerate_orderings(k, &equally_spaced(k), Geometry::Circular).unwrap();
        let mut again = Vec::new();
        for (j, c) in set.candidates().iter().enumerate() {
            let mut moved = c.rotated(offsets[j % 60]).unwrap();
            if reflect[j % 60] {
                moved = moved.reflected().unwrap();
            }
            let canon = set.canonical_form(&moved).unwrap();
            prop_assert_eq!(set.find_equivalent(&moved), Some(j));
            again.push(canon.clone());
        }
        prop_assert_eq!(again.as_slice(), set.candidates());
    }
}
