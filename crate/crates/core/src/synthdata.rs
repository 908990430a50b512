//! Synthetic cyclic-ordinal classification data.
//!
//! Each class sits at one of K equally spaced angles on the unit circle, but
//! the class-to-angle assignment is a hidden random shuffle, so the angular
//! order of the classes has to be discovered rather than read off the class
//! index. Samples are the point `(cos θ, sin θ)` for a jittered angle θ,
//! followed by standard-normal distractor features. Labels can be corrupted
//! towards angular neighbours.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diffcore::tensor::Matrix;
use crate::error::{Error, Result};
use crate::label_codec::{Geometry, RankAssignment};

const QUADRATURE_POINTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseStructure {
    /// Replace with either angular neighbour, equal odds.
    SymmetricAdjacent,
    /// Replace with the next class in angular order only.
    ForwardAdjacent,
}

impl fmt::Display for NoiseStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseStructure::SymmetricAdjacent => "symmetric_adjacent",
            NoiseStructure::ForwardAdjacent => "forward_adjacent",
        })
    }
}

impl FromStr for NoiseStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric_adjacent" => Ok(NoiseStructure::SymmetricAdjacent),
            "forward_adjacent" => Ok(NoiseStructure::ForwardAdjacent),
            other => Err(Error::Parse(format!("unknown noise structure `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub samples_per_class: usize,
    /// Standard deviation of the angular jitter, radians.
    pub angular_stddev: f64,
    pub distractors: usize,
    /// Probability that a label is replaced by a neighbour.
    pub label_noise: f64,
    pub noise_structure: NoiseStructure,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_classes: 4,
            samples_per_class: 500,
            angular_stddev: 0.35,
            distractors: 8,
            label_noise: 0.0,
            noise_structure: NoiseStructure::ForwardAdjacent,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 3 {
            return Err(Error::Config(format!(
                "cyclic data needs at least 3 classes, got {}",
                self.num_classes
            )));
        }
        if self.samples_per_class == 0 {
            return Err(Error::Config("samples_per_class must be positive".into()));
        }
        if !(self.angular_stddev >= 0.0 && self.angular_stddev.is_finite()) {
            return Err(Error::Config(format!(
                "angular stddev must be finite and non-negative, got {}",
                self.angular_stddev
            )));
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return Err(Error::Config(format!(
                "label noise must lie in [0, 1), got {}",
                self.label_noise
            )));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        2 + self.distractors
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: SynthConfig,
    pub features: Matrix,
    /// Emitted (possibly corrupted) labels.
    pub labels: Vec<usize>,
    pub clean_labels: Vec<usize>,
    /// Angle of each class centre, in class-index order.
    pub true_ordering: RankAssignment,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    /// Sample indices grouped by clean class, in generation order.
    pub fn indices_by_clean_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.num_classes()];
        for (i, &c) in self.clean_labels.iter().enumerate() {
            groups[c].push(i);
        }
        groups
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = String::from("# sord-dataset 1\n");
        out.push_str(&format!("# num_classes={}\n", c.num_classes));
        out.push_str(&format!("# samples_per_class={}\n", c.samples_per_class));
        out.push_str(&format!("# angular_stddev={}\n", c.angular_stddev));
        out.push_str(&format!("# distractors={}\n", c.distractors));
        out.push_str(&format!("# label_noise={}\n", c.label_noise));
        out.push_str(&format!("# noise_structure={}\n", c.noise_structure));
        out.push_str(&format!("# seed={}\n", c.seed));
        let ranks: Vec<String> = self
            .true_ordering
            .ranks()
            .iter()
            .map(|r| format!("{r}"))
            .collect();
        out.push_str(&format!("# true_ordering={}\n", ranks.join(" ")));
        let mut header = vec!["label".to_string(), "clean_label".to_string()];
        header.extend((0..c.feature_dim()).map(|j| format!("x{j}")));
        out.push_str(&header.join(" "));
        out.push('\n');
        for (i, row) in self.features.iter_rows().enumerate() {
            out.push_str(&format!("{} {}", self.labels[i], self.clean_labels[i]));
            for v in row {
                out.push_str(&format!(" {v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("# sord-dataset 1") {
            return Err(Error::Parse("missing `# sord-dataset 1` header".into()));
        }
        let mut header = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("dataset truncated before `{key}`")))?;
            line.strip_prefix("# ")
                .and_then(|l| l.strip_prefix(key))
                .and_then(|l| l.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| Error::Parse(format!("expected `# {key}=...`, found `{line}`")))
        };
        let parse_err = |key: &str, e: &dyn fmt::Display| Error::Parse(format!("bad {key}: {e}"));
        let config = SynthConfig {
            num_classes: header("num_classes")?
                .parse()
                .map_err(|e| parse_err("num_classes", &e))?,
            samples_per_class: header("samples_per_class")?
                .parse()
                .map_err(|e| parse_err("samples_per_class", &e))?,
            angular_stddev: header("angular_stddev")?
                .parse()
                .map_err(|e| parse_err("angular_stddev", &e))?,
            distractors: header("distractors")?
                .parse()
                .map_err(|e| parse_err("distractors", &e))?,
            label_noise: header("label_noise")?
                .parse()
                .map_err(|e| parse_err("label_noise", &e))?,
            noise_structure: header("noise_structure")?.parse()?,
            seed: header("seed")?.parse().map_err(|e| parse_err("seed", &e))?,
        };
        config.validate()?;
        let ranks = header("true_ordering")?
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| parse_err("true_ordering", &e)))
            .collect::<Result<Vec<_>>>()?;
        let true_ordering = RankAssignment::new(ranks, Geometry::Circular)?;

        let columns = lines
            .next()
            .ok_or_else(|| Error::Parse("missing column header".into()))?;
        let dim = config.feature_dim();
        if columns.split_whitespace().count() != dim + 2 {
            return Err(Error::Parse(format!(
                "column header has {} columns, expected {}",
                columns.split_whitespace().count(),
                dim + 2
            )));
        }

        let mut labels = Vec::new();
        let mut clean_labels = Vec::new();
        let mut data = Vec::new();
        for (n, line) in lines.enumerate() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != dim + 2 {
                return Err(Error::Parse(format!(
                    "sample {n} has {} columns, expected {}",
                    toks.len(),
                    dim + 2
                )));
            }
            let label: usize = toks[0].parse().map_err(|e| parse_err("label", &e))?;
            let clean: usize = toks[1].parse().map_err(|e| parse_err("clean_label", &e))?;
            if label >= config.num_classes || clean >= config.num_classes {
                return Err(Error::Parse(format!(
                    "sample {n} has an out-of-range label"
                )));
            }
            labels.push(label);
            clean_labels.push(clean);
            for t in &toks[2..] {
                data.push(t.parse::<f64>().map_err(|e| parse_err("feature", &e))?);
            }
        }
        let features = Matrix::from_vec(labels.len(), dim, data)?;
        Ok(Self {
            config,
            features,
            labels,
            clean_labels,
            true_ordering,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

/// Angular slot of each class under the hidden shuffle for `seed`.
fn hidden_slots(num_classes: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut slots: Vec<usize> = (0..num_classes).collect();
    slots.shuffle(rng);
    slots
}

pub fn generate(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let k = config.num_classes;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let slots = hidden_slots(k, &mut rng);
    let step = TAU / k as f64;
    let centers: Vec<f64> = slots.iter().map(|&s| s as f64 * step).collect();
    let mut class_at_slot = vec![0; k];
    for (c, &s) in slots.iter().enumerate() {
        class_at_slot[s] = c;
    }
    let jitter = (config.angular_stddev > 0.0)
        .then(|| Normal::new(0.0, config.angular_stddev).expect("validated stddev"));

    let n = k * config.samples_per_class;
    let dim = config.feature_dim();
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    let mut clean_labels = Vec::with_capacity(n);
    for (c, &center) in centers.iter().enumerate() {
        for _ in 0..config.samples_per_class {
            let theta = center + jitter.map_or(0.0, |d| d.sample(&mut rng));
            data.push(theta.cos());
            data.push(theta.sin());
            for _ in 0..config.distractors {
                data.push(StandardNormal.sample(&mut rng));
            }
            let flip = rng.random::<f64>() < config.label_noise;
            let label = if flip {
                let offset = match config.noise_structure {
                    NoiseStructure::ForwardAdjacent => 1,
                    NoiseStructure::SymmetricAdjacent => {
                        if rng.random::<bool>() {
                            1
                        } else {
                            k - 1
                        }
                    }
                };
                class_at_slot[(slots[c] + offset) % k]
            } else {
                c
            };
            labels.push(label);
            clean_labels.push(c);
        }
    }

    Ok(Dataset {
        config: config.clone(),
        features: Matrix::from_vec(n, dim, data)?,
        labels,
        clean_labels,
        true_ordering: RankAssignment::new(centers, Geometry::Circular)?,
    })
}

/// `T[c][l]`: probability that a sample in angular slot `c` is emitted with
/// the label of slot `l`.
fn slot_transitions(config: &SynthConfig) -> Vec<Vec<f64>> {
    let k = config.num_classes;
    let p = config.label_noise;
    let mut t = vec![vec![0.0; k]; k];
    for (c, row) in t.iter_mut().enumerate() {
        row[c] += 1.0 - p;
        match config.noise_structure {
            NoiseStructure::ForwardAdjacent => row[(c + 1) % k] += p,
            NoiseStructure::SymmetricAdjacent => {
                row[(c + 1) % k] += p / 2.0;
                row[(c + k - 1) % k] += p / 2.0;
            }
        }
    }
    t
}

fn wrapped_normal_density(x: f64, mean: f64, stddev: f64) -> f64 {
    let wraps = (6.0 * stddev / TAU).ceil() as i64 + 1;
    let norm = 1.0 / (stddev * TAU.sqrt());
    (-wraps..=wraps)
        .map(|j| {
            let z = (x - mean + j as f64 * TAU) / stddev;
            norm * (-0.5 * z * z).exp()
        })
        .sum()
}

/// Error rate of the optimal classifier for the emitted (noisy) labels,
/// given the angle of each sample. Distractor features carry no signal and
/// are ignored.
pub fn bayes_error(config: &SynthConfig) -> Result<f64> {
    config.validate()?;
    let k = config.num_classes;
    let transitions = slot_transitions(config);
    let prior = 1.0 / k as f64;

    if config.angular_stddev == 0.0 {
        let correct: f64 = transitions
            .iter()
            .map(|row| prior * row.iter().copied().fold(0.0, f64::max))
            .sum();
        return Ok((1.0 - correct).max(0.0));
    }

    let centers: Vec<f64> = (0..k).map(|s| s as f64 * TAU / k as f64).collect();
    let dx = TAU / QUADRATURE_POINTS as f64;
    let mut correct = 0.0;
    let mut density = vec![0.0; k];
    for q in 0..QUADRATURE_POINTS {
        let x = (q as f64 + 0.5) * dx;
        for (d, &m) in density.iter_mut().zip(&centers) {
            *d = prior * wrapped_normal_density(x, m, config.angular_stddev);
        }
        let best = (0..k)
            .map(|l| {
                density
                    .iter()
                    .zip(&transitions)
                    .map(|(d, row)| d * row[l])
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        correct += best * dx;
    }
    Ok((1.0 - correct).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(stddev: f64, noise: f64, structure: NoiseStructure) -> SynthConfig {
        SynthConfig {
            num_classes: 4,
            samples_per_class: 50,
            angular_stddev: stddev,
            distractors: 2,
            label_noise: noise,
            noise_structure: structure,
            seed: 11,
        }
    }

    #[test]
    fn rejects_invalid_configs() {
        let mut c = cfg(0.1, 0.0, NoiseStructure::ForwardAdjacent);
        c.num_classes = 2;
        assert!(matches!(generate(&c), Err(Error::Config(_))));
        let c = cfg(-0.1, 0.0, NoiseStructure::ForwardAdjacent);
        assert!(generate(&c).is_err());
        let c = cfg(0.1, 1.0, NoiseStructure::ForwardAdjacent);
        assert!(generate(&c).is_err());
    }

    #[test]
    fn same_seed_same_data() {
        let c = cfg(0.3, 0.2, NoiseStructure::SymmetricAdjacent);
        assert_eq!(generate(&c).unwrap(), generate(&c).unwrap());
    }

    #[test]
    fn features_lie_on_circle() {
        let d = generate(&cfg(0.3, 0.0, NoiseStructure::ForwardAdjacent)).unwrap();
        for row in d.features.iter_rows() {
            assert!((row[0].hypot(row[1]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_bayes_error_is_zero() {
        let c = cfg(0.0, 0.0, NoiseStructure::ForwardAdjacent);
        assert_eq!(bayes_error(&c).unwrap(), 0.0);
    }

    #[test]
    fn zero_spread_error_equals_flip_rate() {
        let c = cfg(0.0, 0.3, NoiseStructure::ForwardAdjacent);
        assert!((bayes_error(&c).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn text_round_trip() {
        let d = generate(&cfg(0.3, 0.2, NoiseStructure::ForwardAdjacent)).unwrap();
        assert_eq!(Dataset::from_text(&d.to_text()).unwrap(), d);
    }
}
