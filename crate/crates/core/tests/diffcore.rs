use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sord_core::diffcore::gradcheck::grad_check;
use sord_core::diffcore::loss::{cross_entropy_grad_logits, entropy};
use sord_core::diffcore::{
    cross_entropy, Activation, Adam, AdamConfig, Checkpoint, Matrix, ModelParams,
};
use sord_core::{
    encode_onehot, encode_sord, generate, DistanceSpec, Error, LabelMatrix, SynthConfig,
};

fn targets(matrix: &LabelMatrix, labels: &[usize]) -> Matrix {
    let rows: Vec<Vec<f64>> = labels.iter().map(|&l| matrix.row(l).to_vec()).collect();
    Matrix::from_rows(&rows).unwrap()
}

fn distribution(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, len).prop_map(|v| {
        let z: f64 = v.iter().sum();
        v.iter().map(|x| x / z).collect()
    })
}

#[test]
fn zero_model_predicts_uniform() {
    let model = ModelParams::zeros(&[3, 5], Activation::Relu).unwrap();
    let x = Matrix::from_rows(&[vec![1.0, -2.0, 0.5], vec![0.0, 9.0, 3.0]]).unwrap();
    let p = model.forward(&x).unwrap();
    assert!(p.as_slice().iter().all(|&v| v == 0.2));
    let wrong = Matrix::zeros(2, 4);
    assert!(matches!(
        model.forward(&wrong),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn forward_rows_sum_to_one_and_repeat_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = ModelParams::init(&[10, 64, 64, 4], Activation::Tanh, &mut rng).unwrap();
    let (x, _) = batch(40, 1);
    let a = model.forward(&x).unwrap();
    let b = model.forward(&x).unwrap();
    assert_eq!(a, b);
    for row in a.iter_rows() {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
    let mut again = ChaCha8Rng::seed_from_u64(3);
    let same = ModelParams::init(&[10, 64, 64, 4], Activation::Tanh, &mut again).unwrap();
    assert_eq!(same, model);
}

#[test]
fn cross_entropy_examples() {
    let onehot = Matrix::from_rows(&[vec![0.0, 1.0, 0.0, 0.0]]).unwrap();
    assert!(cross_entropy(&onehot, &onehot).unwrap().abs() < 1e-11);
    let uniform = Matrix::from_rows(&[vec![0.25; 4]]).unwrap();
    let y = Matrix::from_rows(&[vec![0.1, 0.2, 0.3, 0.4]]).unwrap();
    assert!((cross_entropy(&uniform, &y).unwrap() - 1.3862943611198906).abs() < 1e-10);
    let negative = Matrix::from_rows(&[vec![-0.1, 0.6, 0.3, 0.2]]).unwrap();
    assert!(matches!(
        cross_entropy(&uniform, &negative),
        Err(Error::Domain(_))
    ));
}

#[test]
fn quadratic_is_exact() {
    let point: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
    let err = grad_check(
        |x| (x.iter().map(|v| v * v).sum::<f64>() / 2.0, x.to_vec()),
        &point,
    )
    .unwrap();
    assert!(err < 1e-7, "{err}");
}

#[test]
fn non_finite_loss_is_numeric_error() {
    let r = grad_check(|x| (f64::NAN, x.to_vec()), &[1.0, 2.0]);
    assert!(matches!(r, Err(Error::Numeric(_))));
}

#[test]
fn model_gradient_under_sord_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for activation in [Activation::Tanh, Activation::Relu] {
        let mut model = ModelParams::init(&[10, 16, 12, 4], activation, &mut rng).unwrap();
        // Nonzero biases keep ReLU away from exact kinks.
        let shifted: Vec<f64> = model
            .to_flat()
            .iter()
            .enumerate()
            .map(|(i, v)| v + 0.01 * ((i % 7) as f64 - 3.0))
            .collect();
        model.set_flat(&shifted).unwrap();
        let (x, labels) = batch(24, 5);
        let enc = encode_sord(
            &sord_core::RankAssignment::equally_spaced_circular(4).unwrap(),
            &DistanceSpec::circular(1.0).unwrap(),
        )
        .unwrap();
        let y = targets(&enc, &labels);
        let mut probe = model.clone();
        let err = grad_check(
            |theta| {
                probe.set_flat(theta).unwrap();
                let cache = probe.forward_with_cache(&x).unwrap();
                let loss = cross_entropy(&cache.probabilities, &y).unwrap();
                let g = cross_entropy_grad_logits(&cache.probabilities, &y).unwrap();
                (loss, probe.backward(&cache, &g).unwrap().to_flat())
            },
            &model.to_flat(),
        )
        .unwrap();
        assert!(err < 1e-5, "{activation:?}: {err}");
    }
}

#[test]
fn adam_zero_gradient_keeps_parameters() {
    let mut adam = Adam::new(AdamConfig::default(), &[3]).unwrap();
    let mut p = vec![1.0, -2.0, 0.5];
    adam.step(&mut [&mut p], &[&[0.0, 0.0, 0.0]]).unwrap();
    assert_eq!(p, vec![1.0, -2.0, 0.5]);
    assert_eq!(adam.step_count(), 1);
}

#[test]
fn adam_first_step_closed_form() {
    let config = AdamConfig::default();
    let mut adam = Adam::new(config, &[4]).unwrap();
    let g = [0.3, -2.0, 1e-9, 5.0];
    let mut p = vec![0.0; 4];
    adam.step(&mut [&mut p], &[&g]).unwrap();
    for (v, gi) in p.iter().zip(g) {
        let want = -config.learning_rate * gi / (gi.abs() + config.epsilon);
        assert!((v - want).abs() < 1e-15, "{v} vs {want}");
    }
}

#[test]
fn adam_constant_gradient_moves_by_learning_rate() {
    let config = AdamConfig {
        learning_rate: 1e-3,
        ..AdamConfig::default()
    };
    let mut adam = Adam::new(config, &[2]).unwrap();
    let mut p = vec![0.0, 0.0];
    let mut last = p.clone();
    for _ in 0..1000 {
        adam.step(&mut [&mut p], &[&[0.7, -40.0]]).unwrap();
        for (a, b) in p.iter().zip(&last) {
            let delta = (a - b).abs();
            assert!((delta - 1e-3).abs() <= 0.05 * 1e-3, "{delta}");
        }
        last = p.clone();
    }
}

#[test]
fn adam_rejects_shape_mismatch() {
    let mut adam = Adam::new(AdamConfig::default(), &[2]).unwrap();
    let mut p = vec![0.0; 3];
    assert!(matches!(
        adam.step(&mut [&mut p], &[&[1.0, 1.0, 1.0]]),
        Err(Error::DimensionMismatch(_))
    ));
    assert_eq!(adam.step_count(), 0);
}

#[test]
fn checkpoint_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = ModelParams::init(&[10, 8, 4], Activation::Relu, &mut rng).unwrap();
    let ckpt = Checkpoint { seed: 9, model };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    ckpt.save(&path).unwrap();
    assert_eq!(Checkpoint::load(&path).unwrap(), ckpt);
    assert!(Checkpoint::from_text("sord-checkpoint 2\n").is_err());
}

fn batch(n: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let data = generate(&SynthConfig {
        samples_per_class: n.div_ceil(4),
        seed,
        ..SynthConfig::default()
    })
    .unwrap();
    let rows: Vec<usize> = (0..n).collect();
    (
        data.features.select_rows(&rows),
        rows.iter().map(|&i| data.labels[i]).collect(),
    )
}

/// Full-batch training with a fixed encoding; returns the loss after each
/// step and the final model.
fn train(
    x: &Matrix,
    labels: &[usize],
    encoding: &LabelMatrix,
    steps: usize,
    seed: u64,
) -> (Vec<f64>, ModelParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = ModelParams::init(&[x.cols(), 64, 64, 4], Activation::Tanh, &mut rng).unwrap();
    let shapes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let mut adam = Adam::new(
        AdamConfig {
            learning_rate: 1e-3,
            ..AdamConfig::default()
        },
        &shapes,
    )
    .unwrap();
    let y = targets(encoding, labels);
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        let cache = model.forward_with_cache(x).unwrap();
        losses.push(cross_entropy(&cache.probabilities, &y).unwrap());
        let g = cross_entropy_grad_logits(&cache.probabilities, &y).unwrap();
        let grads = model.backward(&cache, &g).unwrap();
        adam.step(&mut model.tensors_mut(), &grads.tensors())
            .unwrap();
    }
    (losses, model)
}

#[test]
fn separable_data_is_fit_exactly() {
    let data = generate(&SynthConfig {
        samples_per_class: 50,
        angular_stddev: 0.0,
        label_noise: 0.0,
        seed: 4,
        ..SynthConfig::default()
    })
    .unwrap();
    let (_, model) = train(
        &data.features,
        &data.labels,
        &encode_onehot(4).unwrap(),
        2000,
        1,
    );
    let predicted = model.predict(&data.features).unwrap();
    assert_eq!(predicted, data.labels);
}

#[test]
fn loss_decreases_over_windows() {
    let (x, labels) = batch(400, 8);
    for encoding in [
        encode_onehot(4).unwrap(),
        encode_sord(
            &sord_core::RankAssignment::equally_spaced_circular(4).unwrap(),
            &DistanceSpec::circular(1.0).unwrap(),
        )
        .unwrap(),
    ] {
        let (losses, _) = train(&x, &labels, &encoding, 1000, 2);
        let ends: Vec<f64> = losses.iter().step_by(50).copied().collect();
        let windows = ends.len() - 1;
        let non_increasing = ends.windows(2).filter(|w| w[1] <= w[0]).count();
        assert!(
            non_increasing * 10 >= windows * 9,
            "{non_increasing} of {windows} windows"
        );
    }
}

proptest! {
    #[test]
    fn cross_entropy_bounded_by_entropy(
        rows in prop::collection::vec((distribution(5), distribution(5)), 1..8),
    ) {
        let p = Matrix::from_rows(&rows.iter().map(|r| r.0.clone()).collect::<Vec<_>>()).unwrap();
        let y = Matrix::from_rows(&rows.iter().map(|r| r.1.clone()).collect::<Vec<_>>()).unwrap();
        let ce = cross_entropy(&p, &y).unwrap();
        let h: f64 = rows.iter().map(|r| entropy(&r.1)).sum::<f64>() / rows.len() as f64;
        prop_assert!(ce >= h - 1e-9);
    }

    #[test]
    fn logit_gradient_is_prediction_minus_target(
        rows in prop::collection::vec((distribution(4), distribution(4)), 1..8),
    ) {
        let b = rows.len() as f64;
        let p = Matrix::from_rows(&rows.iter().map(|r| r.0.clone()).collect::<Vec<_>>()).unwrap();
        let y = Matrix::from_rows(&rows.iter().map(|r| r.1.clone()).collect::<Vec<_>>()).unwrap();
        let g = cross_entropy_grad_logits(&p, &y).unwrap();
        for ((gi, pi), yi) in g.as_slice().iter().zip(p.as_slice()).zip(y.as_slice()) {
            let want = (pi - yi) / b;
            prop_assert!((gi - want).abs() <= 1e-6 * want.abs().max(1e-6));
        }
    }
}
