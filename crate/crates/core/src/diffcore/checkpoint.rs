//! Plain-text model checkpoints.
//!
//! ```text
//! sord-checkpoint 1
//! seed <u64>
//! activation <relu|tanh>
//! dims <input> <hidden>... <classes>
//! layer <i> weight <rows> <cols>
//! <one line per weight row>
//! layer <i> bias <len>
//! <one line>
//! end
//! ```
//!
//! Values are written with the shortest decimal form that parses back to the
//! same `f64`, so a save/load cycle is exact.

use std::path::Path;

use crate::diffcore::model::{Activation, Dense, ModelParams};
use crate::diffcore::tensor::Matrix;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "sord-checkpoint";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub model: ModelParams,
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {FORMAT_VERSION}\n");
        out.push_str(&format!("seed {}\n", self.seed));
        out.push_str(&format!("activation {}\n", self.model.activation().name()));
        let dims: Vec<String> = self.model.dims().iter().map(usize::to_string).collect();
        out.push_str(&format!("dims {}\n", dims.join(" ")));
        for (i, layer) in self.model.layers().iter().enumerate() {
            let (r, c) = layer.weight.shape();
            out.push_str(&format!("layer {i} weight {r} {c}\n"));
            for row in layer.weight.iter_rows() {
                out.push_str(&join(row));
                out.push('\n');
            }
            out.push_str(&format!("layer {i} bias {}\n", layer.bias.len()));
            out.push_str(&join(&layer.bias));
            out.push('\n');
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("checkpoint truncated before {what}")))
        };

        let header = next("header")?;
        let version = header
            .strip_prefix(MAGIC)
            .map(str::trim)
            .ok_or_else(|| Error::Parse(format!("not a checkpoint: `{header}`")))?;
        if version != FORMAT_VERSION.to_string() {
            return Err(Error::Parse(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let seed = field(next("seed")?, "seed")?
            .parse::<u64>()
            .map_err(|e| Error::Parse(format!("bad seed: {e}")))?;
        let activation: Activation = field(next("activation")?, "activation")?.parse()?;
        let dims = parse_usizes(field(next("dims")?, "dims")?)?;
        if dims.len() < 2 {
            return Err(Error::Parse("checkpoint needs at least two dims".into()));
        }

        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (i, pair) in dims.windows(2).enumerate() {
            let (rows, cols) = (pair[0], pair[1]);
            expect_line(
                next("layer header")?,
                &format!("layer {i} weight {rows} {cols}"),
            )?;
            let mut weight = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let row = parse_f64s(next("weight row")?)?;
                if row.len() != cols {
                    return Err(Error::Parse(format!(
                        "layer {i} weight row has {} values, expected {cols}",
                        row.len()
                    )));
                }
                weight.extend(row);
            }
            expect_line(next("bias header")?, &format!("layer {i} bias {cols}"))?;
            let bias = parse_f64s(next("bias")?)?;
            if bias.len() != cols {
                return Err(Error::Parse(format!(
                    "layer {i} bias has {} values, expected {cols}",
                    bias.len()
                )));
            }
            layers.push(Dense {
                weight: Matrix::from_vec(rows, cols, weight)?,
                bias,
            });
        }
        expect_line(next("end marker")?, "end")?;
        Ok(Self {
            seed,
            model: ModelParams::from_layers(layers, activation)?,
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

fn field<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| Error::Parse(format!("expected `{key} ...`, found `{line}`")))
}

fn expect_line(line: &str, want: &str) -> Result<()> {
    if line != want {
        return Err(Error::Parse(format!("expected `{want}`, found `{line}`")));
    }
    Ok(())
}

fn parse_usizes(s: &str) -> Result<Vec<usize>> {
    s.split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|e| Error::Parse(format!("bad integer `{t}`: {e}")))
        })
        .collect()
}

fn parse_f64s(s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|e| Error::Parse(format!("bad number `{t}`: {e}")))
        })
        .collect()
}
