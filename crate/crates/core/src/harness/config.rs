//! Experiment configuration and its flat `key = value` text format.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Lists are comma-separated. Unknown or repeated keys are errors.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `scheme` | required | `onehot`, `sord_linear`, `sord_circular`, `plsord`, `learned`; comma list for a sweep |
//! | `s` | required for SORD schemes and `plsord` | distance scale, positive or `inf` |
//! | `ranks` | generator's true ordering | explicit class ranks for the SORD schemes |
//! | `positions` | K equally spaced angles | available positions for `plsord` |
//! | `target_mass` | 0.855 | pinned target entry for `learned` |
//! | `num_classes` | 4 | |
//! | `angular_stddev` | 0.35 | radians |
//! | `distractors` | 8 | noise feature count |
//! | `label_noise` | 0.0 | flip probability |
//! | `noise_structure` | `forward_adjacent` | or `symmetric_adjacent` |
//! | `sizes` | 200,400,800,1600,3200 | training-set sizes, ascending |
//! | `steps` | 3000 | optimizer steps per run |
//! | `checkpoint_interval` | 50 | steps between validation checks |
//! | `seeds` | 0,1,2,3,4 | |
//! | `val_per_class` | 100 | |
//! | `test_per_class` | 250 | |
//! | `batch_size` | 32 | |
//! | `learning_rate` | 0.001 | |
//! | `beta1`, `beta2`, `epsilon` | 0.9, 0.999, 1e-8 | |
//! | `hidden` | 64,64 | hidden layer widths |
//! | `activation` | `tanh` | or `relu` |
//! | `out_dir` | `runs` | |
//! | `record_timing` | false | add wall-clock time to reports |
//! | `save_checkpoints` | false | write the best model next to each report |

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diffcore::{Activation, AdamConfig};
use crate::error::{Error, Result};
use crate::learned_codec::DEFAULT_TARGET_MASS;
use crate::synthdata::{NoiseStructure, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Onehot,
    SordLinear,
    SordCircular,
    Plsord,
    Learned,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Onehot,
        Scheme::SordLinear,
        Scheme::SordCircular,
        Scheme::Plsord,
        Scheme::Learned,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Onehot => "onehot",
            Scheme::SordLinear => "sord_linear",
            Scheme::SordCircular => "sord_circular",
            Scheme::Plsord => "plsord",
            Scheme::Learned => "learned",
        }
    }

    pub fn needs_scale(self) -> bool {
        matches!(
            self,
            Scheme::SordLinear | Scheme::SordCircular | Scheme::Plsord
        )
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub schemes: Vec<Scheme>,
    pub scale: Option<f64>,
    pub ranks: Option<Vec<f64>>,
    pub positions: Option<Vec<f64>>,
    pub target_mass: f64,
    pub num_classes: usize,
    pub angular_stddev: f64,
    pub distractors: usize,
    pub label_noise: f64,
    pub noise_structure: NoiseStructure,
    pub sizes: Vec<usize>,
    pub steps: usize,
    pub checkpoint_interval: usize,
    pub seeds: Vec<u64>,
    pub val_per_class: usize,
    pub test_per_class: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub out_dir: PathBuf,
    pub record_timing: bool,
    pub save_checkpoints: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schemes: vec![Scheme::Onehot],
            scale: None,
            ranks: None,
            positions: None,
            target_mass: DEFAULT_TARGET_MASS,
            num_classes: 4,
            angular_stddev: 0.35,
            distractors: 8,
            label_noise: 0.0,
            noise_structure: NoiseStructure::ForwardAdjacent,
            sizes: vec![200, 400, 800, 1600, 3200],
            steps: 3000,
            checkpoint_interval: 50,
            seeds: vec![0, 1, 2, 3, 4],
            val_per_class: 100,
            test_per_class: 250,
            batch_size: 32,
            adam: AdamConfig {
                learning_rate: 1e-3,
                ..AdamConfig::default()
            },
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            out_dir: PathBuf::from("runs"),
            record_timing: false,
            save_checkpoints: false,
        }
    }
}

const KEYS: &[&str] = &[
    "scheme",
    "s",
    "ranks",
    "positions",
    "target_mass",
    "num_classes",
    "angular_stddev",
    "distractors",
    "label_noise",
    "noise_structure",
    "sizes",
    "steps",
    "checkpoint_interval",
    "seeds",
    "val_per_class",
    "test_per_class",
    "batch_size",
    "learning_rate",
    "beta1",
    "beta2",
    "epsilon",
    "hidden",
    "activation",
    "out_dir",
    "record_timing",
    "save_checkpoints",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("bad value `{value}` for `{key}`: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| parse_value(key, t))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::Config(format!(
            "bad value `{other}` for `{key}`: expected true or false"
        ))),
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    n + 1
                ))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("unknown config key `{key}`")));
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("config key `{key}` given twice")));
            }
            cfg.set(key, value)?;
        }
        if !seen.contains("scheme") {
            return Err(Error::Config("missing required key `scheme`".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scheme" => self.schemes = parse_list(key, value)?,
            "s" => self.scale = Some(parse_value(key, value)?),
            "ranks" => self.ranks = Some(parse_list(key, value)?),
            "positions" => self.positions = Some(parse_list(key, value)?),
            "target_mass" => self.target_mass = parse_value(key, value)?,
            "num_classes" => self.num_classes = parse_value(key, value)?,
            "angular_stddev" => self.angular_stddev = parse_value(key, value)?,
            "distractors" => self.distractors = parse_value(key, value)?,
            "label_noise" => self.label_noise = parse_value(key, value)?,
            "noise_structure" => self.noise_structure = value.parse()?,
            "sizes" => self.sizes = parse_list(key, value)?,
            "steps" => self.steps = parse_value(key, value)?,
            "checkpoint_interval" => self.checkpoint_interval = parse_value(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "val_per_class" => self.val_per_class = parse_value(key, value)?,
            "test_per_class" => self.test_per_class = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "learning_rate" => self.adam.learning_rate = parse_value(key, value)?,
            "beta1" => self.adam.beta1 = parse_value(key, value)?,
            "beta2" => self.adam.beta2 = parse_value(key, value)?,
            "epsilon" => self.adam.epsilon = parse_value(key, value)?,
            "hidden" => self.hidden = parse_list(key, value)?,
            "activation" => self.activation = value.parse()?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "record_timing" => self.record_timing = parse_bool(key, value)?,
            "save_checkpoints" => self.save_checkpoints = parse_bool(key, value)?,
            _ => unreachable!("key list checked by caller"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::Config("`scheme` lists no schemes".into()));
        }
        if self.schemes.iter().any(|s| s.needs_scale()) {
            match self.scale {
                None => {
                    let needing: Vec<&str> = self
                        .schemes
                        .iter()
                        .filter(|s| s.needs_scale())
                        .map(|s| s.name())
                        .collect();
                    return Err(Error::Config(format!(
                        "missing required key `s` for scheme {}",
                        needing.join(", ")
                    )));
                }
                Some(s) if s.is_nan() || s <= 0.0 => {
                    return Err(Error::Config(format!("`s` must be positive, got {s}")));
                }
                _ => {}
            }
        }
        if let Some(ranks) = &self.ranks {
            if ranks.len() != self.num_classes {
                return Err(Error::Config(format!(
                    "`ranks` has {} entries for {} classes",
                    ranks.len(),
                    self.num_classes
                )));
            }
        }
        if let Some(positions) = &self.positions {
            if positions.len() < self.num_classes {
                return Err(Error::Config(format!(
                    "`positions` has {} entries for {} classes",
                    positions.len(),
                    self.num_classes
                )));
            }
        }
        if !(self.target_mass > 0.0 && self.target_mass < 1.0) {
            return Err(Error::Config(format!(
                "`target_mass` must lie in (0, 1), got {}",
                self.target_mass
            )));
        }
        if self.sizes.is_empty() {
            return Err(Error::Config("`sizes` is empty".into()));
        }
        if self.sizes[0] == 0 || self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "`sizes` must be positive and strictly ascending, got {:?}",
                self.sizes
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` is empty".into()));
        }
        if self.checkpoint_interval == 0 {
            return Err(Error::Config(
                "`checkpoint_interval` must be positive".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("`batch_size` must be positive".into()));
        }
        if self.val_per_class == 0 || self.test_per_class == 0 {
            return Err(Error::Config(
                "`val_per_class` and `test_per_class` must be positive".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("`hidden` contains a zero width".into()));
        }
        self.adam.validate()?;
        self.synth_config(0).validate()
    }

    /// Examples drawn per class: the largest training subset plus the fixed
    /// validation and test splits.
    pub fn pool_per_class(&self) -> usize {
        let max = self.sizes.last().copied().unwrap_or(0);
        max.div_ceil(self.num_classes)
    }

    pub fn synth_config(&self, seed: u64) -> SynthConfig {
        SynthConfig {
            num_classes: self.num_classes,
            samples_per_class: self.pool_per_class() + self.val_per_class + self.test_per_class,
            angular_stddev: self.angular_stddev,
            distractors: self.distractors,
            label_noise: self.label_noise,
            noise_structure: self.noise_structure,
            seed,
        }
    }

    /// Every key with its effective value, in documentation order.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut pairs = vec![("scheme".to_string(), join(&self.schemes))];
        if let Some(s) = self.scale {
            pairs.push(("s".into(), s.to_string()));
        }
        if let Some(r) = &self.ranks {
            pairs.push(("ranks".into(), join(r)));
        }
        if let Some(p) = &self.positions {
            pairs.push(("positions".into(), join(p)));
        }
        pairs.extend([
            ("target_mass".into(), self.target_mass.to_string()),
            ("num_classes".into(), self.num_classes.to_string()),
            ("angular_stddev".into(), self.angular_stddev.to_string()),
            ("distractors".into(), self.distractors.to_string()),
            ("label_noise".into(), self.label_noise.to_string()),
            ("noise_structure".into(), self.noise_structure.to_string()),
            ("sizes".into(), join(&self.sizes)),
            ("steps".into(), self.steps.to_string()),
            (
                "checkpoint_interval".into(),
                self.checkpoint_interval.to_string(),
            ),
            ("seeds".into(), join(&self.seeds)),
            ("val_per_class".into(), self.val_per_class.to_string()),
            ("test_per_class".into(), self.test_per_class.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("learning_rate".into(), self.adam.learning_rate.to_string()),
            ("beta1".into(), self.adam.beta1.to_string()),
            ("beta2".into(), self.adam.beta2.to_string()),
            ("epsilon".into(), self.adam.epsilon.to_string()),
            ("hidden".into(), join(&self.hidden)),
            ("activation".into(), self.activation.name().to_string()),
            ("out_dir".into(), self.out_dir.display().to_string()),
            ("record_timing".into(), self.record_timing.to_string()),
            ("save_checkpoints".into(), self.save_checkpoints.to_string()),
        ]);
        pairs
    }

    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Series label used in summaries, e.g. `sord_circular(s=1)`.
    pub fn series_label(&self, scheme: Scheme) -> String {
        match scheme {
            Scheme::Onehot => "onehot".to_string(),
            Scheme::Learned => format!("learned(target_mass={})", self.target_mass),
            s => format!("{}(s={})", s.name(), self.scale.unwrap_or(f64::NAN)),
        }
    }
}
