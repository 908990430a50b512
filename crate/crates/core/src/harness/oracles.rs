//! Finite-difference checks of every analytic gradient used in training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::diffcore::loss::{cross_entropy, cross_entropy_grad_logits, cross_entropy_grad_target};
use crate::diffcore::{grad_check_with, Activation, GradCheckOptions, Matrix, ModelParams};
use crate::error::Result;
use crate::label_codec::{encode_sord, DistanceSpec, LabelMatrix, RankAssignment};
use crate::learned_codec::{materialize, EncodingParams};
use crate::ordering_search::{
    enumerate_orderings, per_ordering_losses_with, weighted_total_loss_grad, OrderingWeights,
};
use crate::Geometry;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub name: &'static str,
    pub parameters: usize,
    pub relative_error: f64,
}

fn normal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("shape matches data")
}

fn gather(matrix: &LabelMatrix, labels: &[usize]) -> Matrix {
    let rows: Vec<Vec<f64>> = labels.iter().map(|&l| matrix.row(l).to_vec()).collect();
    Matrix::from_rows(&rows).expect("rows share a width")
}

/// Model weights under circular SORD cross-entropy.
pub fn check_model(activation: Activation, seed: u64) -> Result<OracleResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = 4;
    let model = ModelParams::init(&[6, 7, 5, k], activation, &mut rng)?;
    let x = normal_matrix(9, 6, &mut rng);
    let labels: Vec<usize> = (0..9).map(|_| rng.random_range(0..k)).collect();
    let spec = DistanceSpec::circular(1.0)?;
    let y = gather(
        &encode_sord(&RankAssignment::equally_spaced_circular(k)?, &spec)?,
        &labels,
    );
    // Nonzero biases keep ReLU pre-activations away from the kink at 0.
    let point: Vec<f64> = model
        .to_flat()
        .iter()
        .map(|v| v + 0.1 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut probe = model.clone();
    let err = grad_check_with(
        |theta| {
            probe.set_flat(theta).expect("flat length is fixed");
            let cache = probe.forward_with_cache(&x).expect("shapes agree");
            let loss = cross_entropy(&cache.probabilities, &y).expect("shapes agree");
            let g = cross_entropy_grad_logits(&cache.probabilities, &y).expect("shapes agree");
            (
                loss,
                probe.backward(&cache, &g).expect("shapes agree").to_flat(),
            )
        },
        &point,
        GradCheckOptions {
            seed,
            ..GradCheckOptions::default()
        },
    )?;
    Ok(OracleResult {
        name: match activation {
            Activation::Relu => "model weights (relu)",
            Activation::Tanh => "model weights (tanh)",
        },
        parameters: point.len(),
        relative_error: err,
    })
}

/// Ordering logits `λ` under the weighted total loss.
pub fn check_ordering_weights(seed: u64) -> Result<OracleResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = 5;
    let positions = RankAssignment::equally_spaced_circular(k)?.ranks().to_vec();
    let set = enumerate_orderings(k, &positions, Geometry::Circular)?;
    let encodings = set.encodings(&DistanceSpec::circular(0.8)?)?;
    let logits = normal_matrix(1, k, &mut rng);
    let prediction = crate::numeric::softmax(logits.as_slice());
    let losses = per_ordering_losses_with(&prediction, rng.random_range(0..k), &encodings)?;
    let point: Vec<f64> = (0..set.len()).map(|_| rng.sample(StandardNormal)).collect();
    let err = grad_check_with(
        |lambda| {
            let w = OrderingWeights::from_logits(lambda.to_vec()).expect("finite logits");
            weighted_total_loss_grad(&losses, &w).expect("lengths agree")
        },
        &point,
        GradCheckOptions {
            seed,
            ..GradCheckOptions::default()
        },
    )?;
    Ok(OracleResult {
        name: "ordering weights",
        parameters: point.len(),
        relative_error: err,
    })
}

/// Learned-encoding logits `α` under cross-entropy with a fixed prediction.
pub fn check_learned_encoding(seed: u64) -> Result<OracleResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = 5;
    let b = 12;
    let logits = normal_matrix(b, k, &mut rng);
    let mut probs = Matrix::zeros(b, k);
    for r in 0..b {
        probs
            .row_mut(r)
            .copy_from_slice(&crate::numeric::softmax(logits.row(r)));
    }
    let labels: Vec<usize> = (0..b).map(|_| rng.random_range(0..k)).collect();
    let mut params = EncodingParams::zeros(k, 0.855)?;
    let point: Vec<f64> = (0..params.alpha_flat().len())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let per_sample = cross_entropy_grad_target(&probs);
    let err = grad_check_with(
        |alpha| {
            params.set_alpha_flat(alpha).expect("flat length is fixed");
            let y = gather(&materialize(&params), &labels);
            let loss = cross_entropy(&probs, &y).expect("shapes agree");
            let mut grad_labels = vec![0.0; k * k];
            for (row, &l) in labels.iter().enumerate() {
                for (g, v) in grad_labels[l * k..(l + 1) * k]
                    .iter_mut()
                    .zip(per_sample.row(row))
                {
                    *g += v;
                }
            }
            (loss, params.backward(&grad_labels).expect("shape is K×K"))
        },
        &point,
        GradCheckOptions {
            seed,
            ..GradCheckOptions::default()
        },
    )?;
    Ok(OracleResult {
        name: "learned encoding",
        parameters: point.len(),
        relative_error: err,
    })
}

/// All checks, in a fixed order.
pub fn run_all(seed: u64) -> Result<Vec<OracleResult>> {
    Ok(vec![
        check_model(Activation::Tanh, seed)?,
        check_model(Activation::Relu, seed)?,
        check_ordering_weights(seed)?,
        check_learned_encoding(seed)?,
    ])
}
