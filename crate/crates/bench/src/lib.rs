//! Criterion benchmarks for the encoders and the training step live in
//! `benches/`. This library only holds shared fixtures.

use sord_core::diffcore::Matrix;
use sord_core::{generate, NoiseStructure, SynthConfig};

/// A small noisy cyclic dataset used as a fixed benchmark input.
pub fn fixture_batch(batch: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let config = SynthConfig {
        num_classes: 4,
        samples_per_class: batch.div_ceil(4),
        angular_stddev: 0.35,
        distractors: 8,
        label_noise: 0.15,
        noise_structure: NoiseStructure::ForwardAdjacent,
        seed,
    };
    let data = generate(&config).expect("valid fixture config");
    let rows: Vec<usize> = (0..batch).collect();
    let labels = rows.iter().map(|&i| data.labels[i]).collect();
    (data.features.select_rows(&rows), labels)
}
