//! Permutation-learned orderings.
//!
//! A set of candidate rank assignments is enumerated from a pool of available
//! positions. Each candidate induces its own SORD encoding and therefore its
//! own loss for a prediction; the losses are mixed by a softmax over learnable
//! logits `λ`, one per candidate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diffcore::loss::soft_cross_entropy_row;
use crate::error::{Error, Result};
use crate::label_codec::{encode_sord, DistanceSpec, Geometry, LabelMatrix, RankAssignment};
use crate::numeric::softmax;

/// Upper bound on `M!/(M-K)!` accepted by [`enumerate_orderings`].
pub const MAX_PERMUTATIONS: u128 = 5_000_000;

const KEY_RESOLUTION: f64 = 1e9;
const EQUIVALENCE_TOLERANCE: f64 = 1e-9;

/// Canonical candidate orderings over a pool of rank positions.
///
/// Two assignments are equivalent when they give every pair of classes the
/// same distance, which is exactly when they produce the same encoding for
/// every scale. On the circle this is congruence under rotation and
/// reflection; on the line it is reversal (and translation, when there are
/// more positions than classes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCandidateSet {
    candidates: Vec<RankAssignment>,
    positions: Vec<f64>,
    geometry: Geometry,
}

impl OrderingCandidateSet {
    pub fn candidates(&self) -> &[RankAssignment] {
        &self.candidates
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.candidates[0].num_classes()
    }

    /// Index of the candidate equivalent to `ranks`, if any.
    pub fn find_equivalent(&self, ranks: &RankAssignment) -> Option<usize> {
        self.candidates
            .iter()
            .position(|c| orderings_equivalent(c, ranks))
    }

    /// Maps any assignment to its canonical representative in this set.
    pub fn canonical_form(&self, ranks: &RankAssignment) -> Option<&RankAssignment> {
        self.find_equivalent(ranks).map(|j| &self.candidates[j])
    }

    /// One SORD encoding per candidate, in candidate order.
    pub fn encodings(&self, spec: &DistanceSpec) -> Result<Vec<LabelMatrix>> {
        self.candidates
            .iter()
            .map(|c| encode_sord(c, spec))
            .collect()
    }
}

/// True when both assignments give every class pair the same distance.
pub fn orderings_equivalent(a: &RankAssignment, b: &RankAssignment) -> bool {
    if a.geometry() != b.geometry() || a.num_classes() != b.num_classes() {
        return false;
    }
    let da = a.raw_distance_matrix();
    let db = b.raw_distance_matrix();
    da.iter()
        .flatten()
        .zip(db.iter().flatten())
        .all(|(x, y)| (x - y).abs() <= EQUIVALENCE_TOLERANCE)
}

fn distance_key(ranks: &[f64], geometry: Geometry) -> Vec<i64> {
    let mut key = Vec::with_capacity(ranks.len() * (ranks.len() - 1) / 2);
    for (i, &a) in ranks.iter().enumerate() {
        for &b in &ranks[i + 1..] {
            let d = match geometry {
                Geometry::Circular => crate::numeric::arc_distance(a, b),
                Geometry::Linear => (b - a).abs(),
            };
            key.push((d * KEY_RESOLUTION).round() as i64);
        }
    }
    key
}

fn permutation_count(m: usize, k: usize) -> u128 {
    ((m - k + 1)..=m).map(|x| x as u128).product()
}

/// Visits every ordered selection of `k` indices out of `0..m` in
/// lexicographic order.
fn for_each_selection(m: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    fn recurse(
        m: usize,
        k: usize,
        used: &mut [bool],
        current: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if current.len() == k {
            visit(current);
            return;
        }
        for idx in 0..m {
            if used[idx] {
                continue;
            }
            used[idx] = true;
            current.push(idx);
            recurse(m, k, used, current, visit);
            current.pop();
            used[idx] = false;
        }
    }
    let mut used = vec![false; m];
    let mut current = Vec::with_capacity(k);
    recurse(m, k, &mut used, &mut current, &mut visit);
}

/// All size-K assignments of the available positions, one per equivalence
/// class.
///
/// Each class is represented by its lexicographically smallest position
/// sequence, and the output is sorted by that sequence, so the first class is
/// anchored at the smallest position it can take.
pub fn enumerate_orderings(
    num_classes: usize,
    positions: &[f64],
    geometry: Geometry,
) -> Result<OrderingCandidateSet> {
    if num_classes < 2 {
        return Err(Error::InvalidDimension(format!(
            "need at least 2 classes, got {num_classes}"
        )));
    }
    if positions.len() < num_classes {
        return Err(Error::Infeasible(format!(
            "{} positions cannot host {num_classes} classes",
            positions.len()
        )));
    }
    // Validates domain and distinctness of the pool.
    RankAssignment::new(positions.to_vec(), geometry)?;

    let count = permutation_count(positions.len(), num_classes);
    if count > MAX_PERMUTATIONS {
        return Err(Error::Infeasible(format!(
            "{count} permutations exceed the enumeration limit of {MAX_PERMUTATIONS}"
        )));
    }

    let mut sorted = positions.to_vec();
    sorted.sort_by(f64::total_cmp);

    // Selections arrive in lexicographic order, so the first member seen of
    // each class is its smallest.
    let mut classes: BTreeMap<Vec<i64>, Vec<f64>> = BTreeMap::new();
    let mut order: Vec<Vec<i64>> = Vec::new();
    for_each_selection(sorted.len(), num_classes, |sel| {
        let ranks: Vec<f64> = sel.iter().map(|&i| sorted[i]).collect();
        let key = distance_key(&ranks, geometry);
        classes.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            ranks
        });
    });

    let candidates = order
        .into_iter()
        .map(|key| RankAssignment::new(classes.remove(&key).expect("key recorded"), geometry))
        .collect::<Result<Vec<_>>>()?;

    Ok(OrderingCandidateSet {
        candidates,
        positions: positions.to_vec(),
        geometry,
    })
}

/// Learnable logits over the candidate orderings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingWeights {
    lambda: Vec<f64>,
}

impl OrderingWeights {
    /// Uniform weights.
    pub fn zeros(n: usize) -> Self {
        Self {
            lambda: vec![0.0; n],
        }
    }

    pub fn from_logits(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::InvalidDimension("no ordering logits".into()));
        }
        if lambda.iter().any(|l| l.is_nan()) {
            return Err(Error::Numeric("ordering logit is NaN".into()));
        }
        Ok(Self { lambda })
    }

    pub fn logits(&self) -> &[f64] {
        &self.lambda
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.lambda
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// `σ(λ)`.
    pub fn probabilities(&self) -> Vec<f64> {
        softmax(&self.lambda)
    }
}

/// Cross-entropy of `prediction` against row `target_class` of every
/// candidate's encoding.
pub fn per_ordering_losses(
    prediction: &[f64],
    target_class: usize,
    candidates: &OrderingCandidateSet,
    spec: &DistanceSpec,
) -> Result<Vec<f64>> {
    let encodings = candidates.encodings(spec)?;
    per_ordering_losses_with(prediction, target_class, &encodings)
}

/// Same as [`per_ordering_losses`] with the encodings already materialized.
pub fn per_ordering_losses_with(
    prediction: &[f64],
    target_class: usize,
    encodings: &[LabelMatrix],
) -> Result<Vec<f64>> {
    let k = prediction.len();
    if target_class >= k {
        return Err(Error::Index {
            index: target_class,
            len: k,
        });
    }
    let sum: f64 = prediction.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::Domain(format!("prediction sums to {sum}, not 1")));
    }
    encodings
        .iter()
        .map(|enc| {
            if enc.num_classes() != k {
                return Err(Error::DimensionMismatch(format!(
                    "encoding has {} classes, prediction has {k}",
                    enc.num_classes()
                )));
            }
            soft_cross_entropy_row(prediction, enc.row(target_class))
        })
        .collect()
}

fn check_lengths(losses: &[f64], weights: &OrderingWeights) -> Result<()> {
    if losses.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} losses but {} ordering weights",
            losses.len(),
            weights.len()
        )));
    }
    Ok(())
}

/// `Σ_j σ_j(λ) L_j`.
pub fn weighted_total_loss(losses: &[f64], weights: &OrderingWeights) -> Result<f64> {
    check_lengths(losses, weights)?;
    Ok(weights
        .probabilities()
        .iter()
        .zip(losses)
        .map(|(w, l)| w * l)
        .sum())
}

/// Total loss and its gradient with respect to `λ`:
/// `∂/∂λ_j = σ_j (L_j − total)`.
///
/// The gradient with respect to each `L_j` is `σ_j`.
pub fn weighted_total_loss_grad(
    losses: &[f64],
    weights: &OrderingWeights,
) -> Result<(f64, Vec<f64>)> {
    check_lengths(losses, weights)?;
    let sigma = weights.probabilities();
    let total: f64 = sigma.iter().zip(losses).map(|(w, l)| w * l).sum();
    let grad = sigma
        .iter()
        .zip(losses)
        .map(|(w, l)| w * (l - total))
        .collect();
    Ok((total, grad))
}

/// Index of the largest `σ_j(λ)`; ties resolve to the lowest index.
pub fn dominant_index(weights: &OrderingWeights) -> usize {
    let mut best = 0;
    for (j, &l) in weights.logits().iter().enumerate().skip(1) {
        if l > weights.logits()[best] {
            best = j;
        }
    }
    best
}

pub fn dominant_ordering<'a>(
    weights: &OrderingWeights,
    candidates: &'a OrderingCandidateSet,
) -> Result<&'a RankAssignment> {
    if weights.len() != candidates.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} ordering weights for {} candidates",
            weights.len(),
            candidates.len()
        )));
    }
    Ok(&candidates.candidates()[dominant_index(weights)])
}
