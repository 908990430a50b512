//! Directly-learned label encoding.
//!
//! The ground-truth entry of each row is pinned to the target mass `s`; the
//! remaining `1 − s` is spread over the other classes by a softmax of free
//! per-row logits `α_t`. Off-target slots are taken in ascending class index
//! with the target skipped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label_codec::LabelMatrix;
use crate::numeric::softmax;

pub const DEFAULT_TARGET_MASS: f64 = 0.855;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingParams {
    /// K rows of K−1 logits.
    alpha: Vec<Vec<f64>>,
    target_mass: f64,
}

impl EncodingParams {
    /// All-zero logits: uniform off-target mass.
    pub fn zeros(num_classes: usize, target_mass: f64) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidDimension(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        Self::new(vec![vec![0.0; num_classes - 1]; num_classes], target_mass)
    }

    pub fn new(alpha: Vec<Vec<f64>>, target_mass: f64) -> Result<Self> {
        let k = alpha.len();
        if k < 2 {
            return Err(Error::InvalidDimension(format!(
                "need at least 2 classes, got {k}"
            )));
        }
        if let Some((t, row)) = alpha.iter().enumerate().find(|(_, r)| r.len() != k - 1) {
            return Err(Error::DimensionMismatch(format!(
                "alpha row {t} has {} entries, expected {}",
                row.len(),
                k - 1
            )));
        }
        if alpha.iter().flatten().any(|a| !a.is_finite()) {
            return Err(Error::Numeric("alpha contains a non-finite value".into()));
        }
        if !(target_mass > 0.0 && target_mass < 1.0) {
            return Err(Error::Domain(format!(
                "target mass must lie in (0, 1), got {target_mass}"
            )));
        }
        Ok(Self { alpha, target_mass })
    }

    pub fn num_classes(&self) -> usize {
        self.alpha.len()
    }

    pub fn target_mass(&self) -> f64 {
        self.target_mass
    }

    pub fn alpha(&self) -> &[Vec<f64>] {
        &self.alpha
    }

    /// Row-major view of the logits, for the optimizer.
    pub fn alpha_flat(&self) -> Vec<f64> {
        self.alpha.iter().flatten().copied().collect()
    }

    pub fn set_alpha_flat(&mut self, flat: &[f64]) -> Result<()> {
        let k = self.num_classes();
        if flat.len() != k * (k - 1) {
            return Err(Error::DimensionMismatch(format!(
                "expected {} alpha values, got {}",
                k * (k - 1),
                flat.len()
            )));
        }
        for (row, chunk) in self.alpha.iter_mut().zip(flat.chunks(k - 1)) {
            row.copy_from_slice(chunk);
        }
        Ok(())
    }

    /// Backpropagates `∂L/∂y_{i|t}` (a K×K row-major gradient over the
    /// materialized matrix) into a gradient over the flattened logits.
    ///
    /// The diagonal of the incoming gradient is ignored since `y_{t|t} = s`
    /// does not depend on `α`.
    pub fn backward(&self, grad_labels: &[f64]) -> Result<Vec<f64>> {
        let k = self.num_classes();
        if grad_labels.len() != k * k {
            return Err(Error::DimensionMismatch(format!(
                "label gradient has {} entries, expected {}",
                grad_labels.len(),
                k * k
            )));
        }
        let off_mass = 1.0 - self.target_mass;
        let mut out = Vec::with_capacity(k * (k - 1));
        for (t, logits) in self.alpha.iter().enumerate() {
            let sigma = softmax(logits);
            let g: Vec<f64> = off_target_slots(k, t)
                .map(|i| grad_labels[t * k + i])
                .collect();
            let mean: f64 = sigma.iter().zip(&g).map(|(s, g)| s * g).sum();
            out.extend(
                sigma
                    .iter()
                    .zip(&g)
                    .map(|(s, gi)| off_mass * s * (gi - mean)),
            );
        }
        Ok(out)
    }
}

/// Class indices of the K−1 off-target slots of row `target`.
pub fn off_target_slots(num_classes: usize, target: usize) -> impl Iterator<Item = usize> {
    (0..num_classes).filter(move |&i| i != target)
}

/// Row `t`: `s` at position `t`, `(1 − s)·softmax(α_t)` elsewhere.
pub fn materialize(params: &EncodingParams) -> LabelMatrix {
    let k = params.num_classes();
    let s = params.target_mass;
    let mut data = vec![0.0; k * k];
    for (t, logits) in params.alpha.iter().enumerate() {
        let sigma = softmax(logits);
        data[t * k + t] = s;
        for (i, w) in off_target_slots(k, t).zip(sigma) {
            data[t * k + i] = (1.0 - s) * w;
        }
    }
    LabelMatrix::from_flat_unchecked(k, data)
}

/// Antisymmetric part of an encoding: entry `(t, i)` is `y_{i|t} − y_{t|i}`.
pub fn asymmetry_of(matrix: &LabelMatrix) -> Vec<Vec<f64>> {
    let k = matrix.num_classes();
    (0..k)
        .map(|t| {
            (0..k)
                .map(|i| matrix.get(t, i) - matrix.get(i, t))
                .collect()
        })
        .collect()
}

pub fn asymmetry_report(params: &EncodingParams) -> Vec<Vec<f64>> {
    asymmetry_of(&materialize(params))
}
