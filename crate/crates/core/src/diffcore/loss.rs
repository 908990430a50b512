//! Soft-target cross-entropy.
//!
//! `L = mean_b −Σ_i y_bi · ln(ŷ_bi + ε)` with `ε = 1e-12`. The clamp sits
//! inside the logarithm so the loss and its gradients stay finite when a
//! predicted probability underflows to zero.

use crate::diffcore::tensor::Matrix;
use crate::error::{Error, Result};

pub const LOG_EPSILON: f64 = 1e-12;
const ROW_SUM_TOLERANCE: f64 = 1e-6;

fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    if let Some(v) = row.iter().find(|v| **v < 0.0 || v.is_nan()) {
        return Err(Error::Domain(format!("{what} has invalid entry {v}")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(Error::Domain(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

/// Cross-entropy of a single prediction against a single target row.
pub fn soft_cross_entropy_row(prediction: &[f64], target: &[f64]) -> Result<f64> {
    if prediction.len() != target.len() {
        return Err(Error::DimensionMismatch(format!(
            "prediction has {} classes, target has {}",
            prediction.len(),
            target.len()
        )));
    }
    check_distribution(prediction, "prediction")?;
    check_distribution(target, "target")?;
    Ok(row_loss(prediction, target))
}

fn row_loss(prediction: &[f64], target: &[f64]) -> f64 {
    -prediction
        .iter()
        .zip(target)
        .map(|(&p, &y)| {
            if y == 0.0 {
                0.0
            } else {
                y * (p + LOG_EPSILON).ln()
            }
        })
        .sum::<f64>()
}

/// Shannon entropy (natural log) of a distribution, with the same clamp.
pub fn entropy(dist: &[f64]) -> f64 {
    row_loss(dist, dist)
}

fn check_batch(prediction: &Matrix, target: &Matrix) -> Result<()> {
    if prediction.shape() != target.shape() {
        return Err(Error::DimensionMismatch(format!(
            "prediction is {:?}, target is {:?}",
            prediction.shape(),
            target.shape()
        )));
    }
    if prediction.rows() == 0 {
        return Err(Error::InvalidDimension("empty batch".into()));
    }
    Ok(())
}

/// Batch-mean soft-target cross-entropy.
pub fn cross_entropy(prediction: &Matrix, target: &Matrix) -> Result<f64> {
    check_batch(prediction, target)?;
    let mut total = 0.0;
    for (p, y) in prediction.iter_rows().zip(target.iter_rows()) {
        check_distribution(p, "prediction")?;
        check_distribution(y, "target")?;
        total += row_loss(p, y);
    }
    Ok(total / prediction.rows() as f64)
}

/// Gradient of [`cross_entropy`] with respect to the logits that produced
/// `prediction` through a softmax.
///
/// Equals `(ŷ − y)/B` up to terms of order `ε/ŷ`; the exact form is used so
/// finite-difference checks see no clamp bias.
pub fn cross_entropy_grad_logits(prediction: &Matrix, target: &Matrix) -> Result<Matrix> {
    check_batch(prediction, target)?;
    let b = prediction.rows() as f64;
    let mut grad = Matrix::zeros(prediction.rows(), prediction.cols());
    for r in 0..prediction.rows() {
        let p = prediction.row(r);
        let y = target.row(r);
        // u_i = y_i ŷ_i / (ŷ_i + ε); dL/dz_j = ŷ_j Σu − u_j
        let u: Vec<f64> = p
            .iter()
            .zip(y)
            .map(|(&pi, &yi)| yi * pi / (pi + LOG_EPSILON))
            .collect();
        let su: f64 = u.iter().sum();
        for (j, g) in grad.row_mut(r).iter_mut().enumerate() {
            *g = (p[j] * su - u[j]) / b;
        }
    }
    Ok(grad)
}

/// Gradient of [`cross_entropy`] with respect to the target entries:
/// `−ln(ŷ + ε)/B`.
pub fn cross_entropy_grad_target(prediction: &Matrix) -> Matrix {
    let b = prediction.rows() as f64;
    let data = prediction
        .as_slice()
        .iter()
        .map(|&p| -(p + LOG_EPSILON).ln() / b)
        .collect();
    Matrix::from_vec(prediction.rows(), prediction.cols(), data).expect("same shape")
}
