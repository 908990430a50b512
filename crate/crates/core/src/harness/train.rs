//! One training run: data split, scheme-specific targets, the optimization
//! loop with validation checkpoints, and the final test evaluation.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffcore::checkpoint::Checkpoint;
use crate::diffcore::loss::{cross_entropy, cross_entropy_grad_logits, cross_entropy_grad_target};
use crate::diffcore::{Adam, Matrix, ModelParams};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Scheme};
use crate::harness::report::{
    CheckpointRecord, LearnedOutcome, OrderingOutcome, RunReport, RunStatus, REPORT_VERSION,
};
use crate::label_codec::{
    encode_onehot, encode_sord, DistanceSpec, Geometry, LabelMatrix, RankAssignment,
};
use crate::learned_codec::{asymmetry_report, materialize, EncodingParams};
use crate::ordering_search::{
    dominant_index, enumerate_orderings, weighted_total_loss_grad, OrderingCandidateSet,
    OrderingWeights,
};
use crate::synthdata::{generate, Dataset};

const STREAM_POOL: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_BATCH: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Fixed validation and test splits plus the shuffled training pool, all
/// derived from one generated dataset.
#[derive(Debug, Clone)]
pub struct Splits {
    pub data: Dataset,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    /// Per clean class, pool indices in a seed-dependent order.
    pub pool: Vec<Vec<usize>>,
}

impl Splits {
    pub fn new(config: &ExperimentConfig, seed: u64) -> Result<Self> {
        let data = generate(&config.synth_config(seed))?;
        let mut rng = stream(seed, STREAM_POOL);
        let mut validation = Vec::new();
        let mut test = Vec::new();
        let mut pool = Vec::new();
        for group in data.indices_by_clean_class() {
            let (val, rest) = group.split_at(config.val_per_class);
            let (tst, rest) = rest.split_at(config.test_per_class);
            validation.extend_from_slice(val);
            test.extend_from_slice(tst);
            let mut rest = rest.to_vec();
            rest.shuffle(&mut rng);
            pool.push(rest);
        }
        Ok(Self {
            data,
            validation,
            test,
            pool,
        })
    }

    /// Training indices for a subset of `size` examples: the first
    /// `⌊size/K⌋` (plus one for the lowest `size mod K` classes) of each
    /// class's shuffled pool. A smaller subset is always contained in a
    /// larger one.
    pub fn training_subset(&self, size: usize) -> Result<Vec<usize>> {
        let k = self.pool.len();
        let mut out = Vec::with_capacity(size);
        for (c, group) in self.pool.iter().enumerate() {
            let take = size / k + usize::from(c < size % k);
            if take > group.len() {
                return Err(Error::Config(format!(
                    "training size {size} needs {take} examples of class {c}, pool has {}",
                    group.len()
                )));
            }
            out.extend_from_slice(&group[..take]);
        }
        Ok(out)
    }
}

enum Targets {
    Fixed(LabelMatrix),
    Orderings {
        candidates: OrderingCandidateSet,
        encodings: Vec<LabelMatrix>,
        weights: OrderingWeights,
    },
    Learned(EncodingParams),
}

impl Targets {
    fn new(
        config: &ExperimentConfig,
        scheme: Scheme,
        true_ordering: &RankAssignment,
    ) -> Result<Self> {
        let k = config.num_classes;
        let scale = || {
            config
                .scale
                .ok_or_else(|| Error::Config(format!("missing required key `s` for {scheme}")))
        };
        Ok(match scheme {
            Scheme::Onehot => Targets::Fixed(encode_onehot(k)?),
            Scheme::SordCircular | Scheme::SordLinear => {
                let geometry = if scheme == Scheme::SordCircular {
                    Geometry::Circular
                } else {
                    Geometry::Linear
                };
                let values = config
                    .ranks
                    .clone()
                    .unwrap_or_else(|| true_ordering.ranks().to_vec());
                let ranks = RankAssignment::new(values, geometry)?;
                Targets::Fixed(encode_sord(
                    &ranks,
                    &DistanceSpec::new(geometry, scale()?)?,
                )?)
            }
            Scheme::Plsord => {
                let positions = match &config.positions {
                    Some(p) => p.clone(),
                    None => RankAssignment::equally_spaced_circular(k)?.ranks().to_vec(),
                };
                let candidates = enumerate_orderings(k, &positions, Geometry::Circular)?;
                let encodings = candidates.encodings(&DistanceSpec::circular(scale()?)?)?;
                let weights = OrderingWeights::zeros(candidates.len());
                Targets::Orderings {
                    candidates,
                    encodings,
                    weights,
                }
            }
            Scheme::Learned => Targets::Learned(EncodingParams::zeros(k, config.target_mass)?),
        })
    }

    fn extra_len(&self) -> usize {
        match self {
            Targets::Fixed(_) => 0,
            Targets::Orderings { weights, .. } => weights.len(),
            Targets::Learned(p) => p.alpha_flat().len(),
        }
    }

    fn record(&self, rec: &mut CheckpointRecord) {
        match self {
            Targets::Fixed(_) => {}
            Targets::Orderings { weights, .. } => {
                rec.ordering_weights = Some(weights.probabilities());
            }
            Targets::Learned(p) => rec.learned_encoding = Some(materialize(p).to_text()),
        }
    }
}

fn target_rows(matrix: &LabelMatrix, labels: &[usize]) -> Matrix {
    let k = matrix.num_classes();
    let mut out = Matrix::zeros(labels.len(), k);
    for (b, &l) in labels.iter().enumerate() {
        out.row_mut(b).copy_from_slice(matrix.row(l));
    }
    out
}

/// Loss and the gradients for one batch: `∂L/∂logits` and the gradient of
/// the scheme's own parameters (`λ` or `α`).
fn batch_gradients(
    targets: &Targets,
    probs: &Matrix,
    labels: &[usize],
) -> Result<(f64, Matrix, Vec<f64>)> {
    match targets {
        Targets::Fixed(m) => {
            let y = target_rows(m, labels);
            Ok((
                cross_entropy(probs, &y)?,
                cross_entropy_grad_logits(probs, &y)?,
                Vec::new(),
            ))
        }
        Targets::Orderings {
            encodings, weights, ..
        } => {
            let per_target: Vec<Matrix> =
                encodings.iter().map(|e| target_rows(e, labels)).collect();
            let losses = per_target
                .iter()
                .map(|y| cross_entropy(probs, y))
                .collect::<Result<Vec<f64>>>()?;
            let (total, grad_lambda) = weighted_total_loss_grad(&losses, weights)?;
            // Cross-entropy is linear in the target, so the σ-weighted sum of
            // per-ordering logit gradients equals the gradient for the
            // σ-weighted target.
            let sigma = weights.probabilities();
            let mut mixed = Matrix::zeros(probs.rows(), probs.cols());
            for (w, y) in sigma.iter().zip(&per_target) {
                for (m, v) in mixed.as_mut_slice().iter_mut().zip(y.as_slice()) {
                    *m += w * v;
                }
            }
            Ok((
                total,
                cross_entropy_grad_logits(probs, &mixed)?,
                grad_lambda,
            ))
        }
        Targets::Learned(params) => {
            let m = materialize(params);
            let y = target_rows(&m, labels);
            let loss = cross_entropy(probs, &y)?;
            let grad_logits = cross_entropy_grad_logits(probs, &y)?;
            let k = m.num_classes();
            let per_sample = cross_entropy_grad_target(probs);
            let mut grad_labels = vec![0.0; k * k];
            for (b, &l) in labels.iter().enumerate() {
                for (g, v) in grad_labels[l * k..(l + 1) * k]
                    .iter_mut()
                    .zip(per_sample.row(b))
                {
                    *g += v;
                }
            }
            Ok((loss, grad_logits, params.backward(&grad_labels)?))
        }
    }
}

/// Draws a batch with equal representation of every emitted label present
/// in the training subset. The remainder of `batch_size / K` rotates across
/// labels from step to step.
fn sample_batch(
    by_label: &[Vec<usize>],
    batch_size: usize,
    step: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let present: Vec<&Vec<usize>> = by_label.iter().filter(|g| !g.is_empty()).collect();
    let k = present.len();
    let mut out = Vec::with_capacity(batch_size);
    for (j, group) in present.iter().enumerate() {
        let quota = batch_size / k + usize::from((j + k - step % k) % k < batch_size % k);
        for _ in 0..quota {
            out.push(group[rng.random_range(0..group.len())]);
        }
    }
    out
}

fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

fn apply_update(
    model: &mut ModelParams,
    targets: &mut Targets,
    adam: &mut Adam,
    model_grads: &ModelParams,
    extra_grad: &[f64],
) -> Result<()> {
    let grads = model_grads.tensors();
    match targets {
        Targets::Fixed(_) => {
            let mut params = model.tensors_mut();
            adam.step(&mut params, &grads)
        }
        Targets::Orderings { weights, .. } => {
            let mut params = model.tensors_mut();
            params.push(weights.logits_mut());
            let mut all = grads;
            all.push(extra_grad);
            adam.step(&mut params, &all)
        }
        Targets::Learned(p) => {
            let mut alpha = p.alpha_flat();
            {
                let mut params = model.tensors_mut();
                params.push(alpha.as_mut_slice());
                let mut all = grads;
                all.push(extra_grad);
                adam.step(&mut params, &all)?;
            }
            p.set_alpha_flat(&alpha)
        }
    }
}

/// Output of [`train_run`]: the report plus the best model.
pub struct RunOutput {
    pub report: RunReport,
    pub best_model: Checkpoint,
}

/// Trains one `(scheme, size, seed)` cell.
pub fn train_run(
    config: &ExperimentConfig,
    scheme: Scheme,
    size: usize,
    seed: u64,
) -> Result<RunOutput> {
    let splits = Splits::new(config, seed)?;
    train_on_splits(config, &splits, scheme, size, seed)
}

pub fn train_on_splits(
    config: &ExperimentConfig,
    splits: &Splits,
    scheme: Scheme,
    size: usize,
    seed: u64,
) -> Result<RunOutput> {
    config.validate()?;
    let started = Instant::now();
    let data = &splits.data;
    let k = config.num_classes;

    let train_idx = splits.training_subset(size)?;
    let mut by_label = vec![Vec::new(); k];
    for &i in &train_idx {
        by_label[data.labels[i]].push(i);
    }
    let val_x = data.features.select_rows(&splits.validation);
    let val_y: Vec<usize> = splits.validation.iter().map(|&i| data.labels[i]).collect();

    let mut dims = vec![data.config.feature_dim()];
    dims.extend(&config.hidden);
    dims.push(k);
    let mut model = ModelParams::init(&dims, config.activation, &mut stream(seed, STREAM_INIT))?;
    let mut targets = Targets::new(config, scheme, &data.true_ordering)?;

    let mut shapes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    if targets.extra_len() > 0 {
        shapes.push(targets.extra_len());
    }
    let mut adam = Adam::new(config.adam, &shapes)?;
    let mut batch_rng = stream(seed, STREAM_BATCH);

    let evaluate =
        |model: &ModelParams| -> Result<f64> { Ok(accuracy(&model.predict(&val_x)?, &val_y)) };

    let mut checkpoints = Vec::new();
    let mut first = CheckpointRecord {
        step: 0,
        train_loss: None,
        validation_accuracy: evaluate(&model)?,
        ordering_weights: None,
        learned_encoding: None,
    };
    targets.record(&mut first);
    let mut best = (0usize, first.validation_accuracy, model.clone());
    checkpoints.push(first);

    let mut status = RunStatus::Completed;
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;
    for step in 1..=config.steps {
        let batch = sample_batch(&by_label, config.batch_size, step - 1, &mut batch_rng);
        let x = data.features.select_rows(&batch);
        let labels: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();

        let cache = model.forward_with_cache(&x)?;
        let (loss, grad_logits, extra_grad) =
            match batch_gradients(&targets, &cache.probabilities, &labels) {
                Ok(v) => v,
                Err(Error::Domain(msg)) => {
                    status = RunStatus::Failed { step, reason: msg };
                    break;
                }
                Err(e) => return Err(e),
            };
        if !loss.is_finite() {
            status = RunStatus::Failed {
                step,
                reason: format!("loss became {loss}"),
            };
            break;
        }
        let model_grads = model.backward(&cache, &grad_logits)?;
        apply_update(
            &mut model,
            &mut targets,
            &mut adam,
            &model_grads,
            &extra_grad,
        )?;
        if !model.all_finite() {
            status = RunStatus::Failed {
                step,
                reason: "parameters became non-finite".into(),
            };
            break;
        }
        loss_sum += loss;
        loss_count += 1;

        if step % config.checkpoint_interval == 0 || step == config.steps {
            let mut rec = CheckpointRecord {
                step,
                train_loss: Some(loss_sum / loss_count as f64),
                validation_accuracy: evaluate(&model)?,
                ordering_weights: None,
                learned_encoding: None,
            };
            targets.record(&mut rec);
            if rec.validation_accuracy > best.1 {
                best = (step, rec.validation_accuracy, model.clone());
            }
            checkpoints.push(rec);
            loss_sum = 0.0;
            loss_count = 0;
        }
    }

    let (best_step, best_validation_accuracy, best_model) = best;
    let test_x = data.features.select_rows(&splits.test);
    let test_y: Vec<usize> = splits.test.iter().map(|&i| data.clean_labels[i]).collect();
    let predicted = best_model.predict(&test_x)?;
    let mut confusion = vec![vec![0usize; k]; k];
    for (&t, &p) in test_y.iter().zip(&predicted) {
        confusion[t][p] += 1;
    }

    let ordering = match &targets {
        Targets::Orderings {
            candidates,
            weights,
            ..
        } => {
            let dom = dominant_index(weights);
            let true_index = candidates.find_equivalent(&data.true_ordering);
            Some(OrderingOutcome {
                candidates: candidates
                    .candidates()
                    .iter()
                    .map(|c| c.ranks().to_vec())
                    .collect(),
                final_weights: weights.probabilities(),
                dominant_index: dom,
                dominant_ordering: candidates.candidates()[dom].ranks().to_vec(),
                true_index,
                recovered: true_index == Some(dom),
            })
        }
        _ => None,
    };
    let learned = match &targets {
        Targets::Learned(p) => Some(LearnedOutcome {
            target_mass: p.target_mass(),
            encoding: materialize(p).to_text(),
            asymmetry: asymmetry_report(p),
        }),
        _ => None,
    };

    let report = RunReport {
        version: REPORT_VERSION,
        scheme,
        label: config.series_label(scheme),
        size,
        seed,
        // The output location is not part of the experiment.
        config: config
            .to_pairs()
            .into_iter()
            .filter(|(k, _)| k != "out_dir")
            .collect(),
        true_ordering: data.true_ordering.ranks().to_vec(),
        status,
        checkpoints,
        best_step,
        best_validation_accuracy,
        test_accuracy: accuracy(&predicted, &test_y),
        confusion,
        ordering,
        learned,
        wall_clock_ms: config
            .record_timing
            .then(|| started.elapsed().as_millis() as u64),
    };
    Ok(RunOutput {
        report,
        best_model: Checkpoint {
            seed,
            model: best_model,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            sizes: vec![20, 40, 81],
            val_per_class: 10,
            test_per_class: 10,
            steps: 20,
            checkpoint_interval: 5,
            hidden: vec![8],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn subsets_are_nested_and_balanced() {
        let cfg = small_config();
        let splits = Splits::new(&cfg, 4).unwrap();
        let a = splits.training_subset(20).unwrap();
        let b = splits.training_subset(81).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(b.len(), 81);
        assert!(a.iter().all(|i| b.contains(i)));
        for c in 0..4 {
            let n = a
                .iter()
                .filter(|&&i| splits.data.clean_labels[i] == c)
                .count();
            assert_eq!(n, 5);
        }
    }

    #[test]
    fn splits_are_disjoint() {
        let cfg = small_config();
        let s = Splits::new(&cfg, 1).unwrap();
        let train = s.training_subset(81).unwrap();
        for i in &s.validation {
            assert!(!s.test.contains(i) && !train.contains(i));
        }
        for i in &s.test {
            assert!(!train.contains(i));
        }
    }

    #[test]
    fn batches_are_stratified() {
        let by_label = vec![vec![0, 1], vec![2, 3], vec![4], vec![5, 6, 7]];
        let mut rng = stream(0, 9);
        for step in 0..8 {
            let batch = sample_batch(&by_label, 10, step, &mut rng);
            assert_eq!(batch.len(), 10);
            for group in &by_label {
                let n = batch.iter().filter(|i| group.contains(i)).count();
                assert!(n == 2 || n == 3);
            }
        }
    }

    #[test]
    fn every_scheme_runs() {
        let mut cfg = small_config();
        cfg.scale = Some(1.0);
        for scheme in Scheme::ALL {
            let out = train_run(&cfg, scheme, 40, 2).unwrap();
            let r = &out.report;
            assert!(r.is_completed(), "{scheme}: {:?}", r.status);
            assert_eq!(r.checkpoints.len(), 5);
            let total: usize = r.confusion.iter().flatten().sum();
            assert_eq!(total, 40);
            assert_eq!(r.ordering.is_some(), scheme == Scheme::Plsord);
            assert_eq!(r.learned.is_some(), scheme == Scheme::Learned);
        }
    }
}
