//! Central-difference gradient checker.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Gradients smaller than this are compared in absolute rather than relative
/// terms, since central differences carry roughly `1e-11` of rounding noise
/// for O(1) losses.
pub const RELATIVE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    pub max_coordinates: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            max_coordinates: 200,
            seed: 0,
        }
    }
}

/// Compares the analytic gradient returned by `loss_fn` at `point` against
/// central differences on up to 200 randomly chosen coordinates and returns
/// the largest relative error.
pub fn grad_check<F>(loss_fn: F, point: &[f64]) -> Result<f64>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    grad_check_with(loss_fn, point, GradCheckOptions::default())
}

pub fn grad_check_with<F>(mut loss_fn: F, point: &[f64], opts: GradCheckOptions) -> Result<f64>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (value, analytic) = loss_fn(point);
    if !value.is_finite() {
        return Err(Error::Numeric(format!(
            "loss is {value} at the check point"
        )));
    }
    if analytic.len() != point.len() {
        return Err(Error::DimensionMismatch(format!(
            "gradient has {} entries for {} parameters",
            analytic.len(),
            point.len()
        )));
    }

    let coords: Vec<usize> = if point.len() <= opts.max_coordinates {
        (0..point.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut picked = sample(&mut rng, point.len(), opts.max_coordinates).into_vec();
        picked.sort_unstable();
        picked
    };

    let mut probe = point.to_vec();
    let mut worst: f64 = 0.0;
    for i in coords {
        let original = probe[i];
        probe[i] = original + opts.step;
        let (plus, _) = loss_fn(&probe);
        probe[i] = original - opts.step;
        let (minus, _) = loss_fn(&probe);
        probe[i] = original;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "loss is not finite near coordinate {i}"
            )));
        }
        let numeric = (plus - minus) / (2.0 * opts.step);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}
