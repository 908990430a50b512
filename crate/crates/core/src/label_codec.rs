//! Fixed label encodings: one-hot, linear SORD and circular SORD.
//!
//! Every encoding is a [`LabelMatrix`]: row `t` is the target distribution
//! used when the ground-truth class is `t`. SORD rows are a softmax over the
//! negated squared, scaled distances between the rank of `t` and the rank of
//! every other class.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{arc_distance, softmax_in_place, wrap_angle};

/// Row sums of a [`LabelMatrix`] must match 1 within this tolerance.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Linear,
    Circular,
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Geometry::Linear => f.write_str("linear"),
            Geometry::Circular => f.write_str("circular"),
        }
    }
}

impl FromStr for Geometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Geometry::Linear),
            "circular" => Ok(Geometry::Circular),
            other => Err(Error::Parse(format!("unknown geometry `{other}`"))),
        }
    }
}

fn check_rank(rank: f64, geometry: Geometry) -> Result<()> {
    if !rank.is_finite() {
        return Err(Error::Domain(format!("rank {rank} is not finite")));
    }
    if rank < 0.0 {
        return Err(Error::Domain(format!("rank {rank} is negative")));
    }
    if geometry == Geometry::Circular && rank >= TAU {
        return Err(Error::Domain(format!(
            "circular rank {rank} is outside [0, 2π)"
        )));
    }
    Ok(())
}

/// Rank positions assigned to the K classes, in class-index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankAssignment {
    ranks: Vec<f64>,
    geometry: Geometry,
}

impl RankAssignment {
    /// Validates length (K ≥ 2), distinctness and the geometry's domain.
    pub fn new(ranks: Vec<f64>, geometry: Geometry) -> Result<Self> {
        if ranks.len() < 2 {
            return Err(Error::InvalidDimension(format!(
                "need at least 2 ranks, got {}",
                ranks.len()
            )));
        }
        for &r in &ranks {
            check_rank(r, geometry)?;
        }
        for (i, a) in ranks.iter().enumerate() {
            if ranks[i + 1..].contains(a) {
                return Err(Error::Domain(format!("duplicate rank {a}")));
            }
        }
        Ok(Self { ranks, geometry })
    }

    /// `K` angles `2πi/K`, assigned in class-index order.
    pub fn equally_spaced_circular(num_classes: usize) -> Result<Self> {
        let step = TAU / num_classes as f64;
        Self::new(
            (0..num_classes).map(|i| i as f64 * step).collect(),
            Geometry::Circular,
        )
    }

    /// Ranks `0, 1, ..., K-1` on a line.
    pub fn equally_spaced_linear(num_classes: usize) -> Result<Self> {
        Self::new(
            (0..num_classes).map(|i| i as f64).collect(),
            Geometry::Linear,
        )
    }

    pub fn ranks(&self) -> &[f64] {
        &self.ranks
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn num_classes(&self) -> usize {
        self.ranks.len()
    }

    /// Adds `offset` to every rank, modulo 2π. Circular geometry only.
    pub fn rotated(&self, offset: f64) -> Result<Self> {
        self.require_circular("rotation")?;
        Self::new(
            self.ranks.iter().map(|&r| wrap_angle(r + offset)).collect(),
            Geometry::Circular,
        )
    }

    /// Negates every rank, modulo 2π. Circular geometry only.
    pub fn reflected(&self) -> Result<Self> {
        self.require_circular("reflection")?;
        Self::new(
            self.ranks.iter().map(|&r| wrap_angle(-r)).collect(),
            Geometry::Circular,
        )
    }

    fn require_circular(&self, what: &str) -> Result<()> {
        if self.geometry != Geometry::Circular {
            return Err(Error::Config(format!("{what} requires circular ranks")));
        }
        Ok(())
    }

    /// Unscaled class-to-class distances (arc length or absolute difference).
    pub fn raw_distance_matrix(&self) -> Vec<Vec<f64>> {
        self.ranks
            .iter()
            .map(|&a| {
                self.ranks
                    .iter()
                    .map(|&b| match self.geometry {
                        Geometry::Circular => arc_distance(a, b),
                        Geometry::Linear => (b - a).abs(),
                    })
                    .collect()
            })
            .collect()
    }
}

/// Geometry of the rank space plus the scale factor `s`.
///
/// `s = +inf` is accepted and means the one-hot limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceSpec {
    geometry: Geometry,
    scale: f64,
}

impl DistanceSpec {
    pub fn new(geometry: Geometry, scale: f64) -> Result<Self> {
        if scale.is_nan() || scale <= 0.0 {
            return Err(Error::Domain(format!(
                "scale must be positive or +inf, got {scale}"
            )));
        }
        Ok(Self { geometry, scale })
    }

    pub fn circular(scale: f64) -> Result<Self> {
        Self::new(Geometry::Circular, scale)
    }

    pub fn linear(scale: f64) -> Result<Self> {
        Self::new(Geometry::Linear, scale)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_one_hot_limit(&self) -> bool {
        self.scale == f64::INFINITY
    }
}

/// Ordinal distance `(s · d)²`, where `d` is the shortest arc (circular) or
/// the absolute difference (linear).
pub fn pairwise_distance(rank_a: f64, rank_b: f64, spec: &DistanceSpec) -> Result<f64> {
    check_rank(rank_a, spec.geometry)?;
    check_rank(rank_b, spec.geometry)?;
    let d = match spec.geometry {
        Geometry::Circular => arc_distance(rank_a, rank_b),
        Geometry::Linear => (rank_b - rank_a).abs(),
    };
    if d == 0.0 {
        return Ok(0.0);
    }
    let scaled = spec.scale * d;
    Ok(scaled * scaled)
}

/// K×K row-stochastic matrix. Entry `(t, i)` is the label mass on class `i`
/// when the ground truth is `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct LabelMatrix {
    k: usize,
    data: Vec<f64>,
}

impl LabelMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k < 2 {
            return Err(Error::InvalidDimension(format!(
                "label matrix needs at least 2 rows, got {k}"
            )));
        }
        let mut data = Vec::with_capacity(k * k);
        for (t, row) in rows.into_iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "row {t} has {} entries, expected {k}",
                    row.len()
                )));
            }
            let mut sum = 0.0;
            for &v in &row {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Domain(format!(
                        "entry {v} in row {t} is outside [0, 1]"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Domain(format!("row {t} sums to {sum}, not 1")));
            }
            data.extend(row);
        }
        Ok(Self { k, data })
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn row(&self, target: usize) -> &[f64] {
        &self.data[target * self.k..(target + 1) * self.k]
    }

    pub fn get(&self, target: usize, class: usize) -> f64 {
        self.data[target * self.k + class]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.k)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Largest elementwise absolute difference. Panics if sizes differ.
    pub fn max_abs_diff(&self, other: &LabelMatrix) -> f64 {
        assert_eq!(self.k, other.k, "label matrices differ in size");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Plain-text form: one row per line, entries separated by a single
    /// space, each printed with the shortest representation that parses
    /// back to the same `f64`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|line| {
                line.split_whitespace()
                    .map(|tok| {
                        tok.parse::<f64>()
                            .map_err(|e| Error::Parse(format!("bad matrix entry `{tok}`: {e}")))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows)
    }

    pub(crate) fn from_flat_unchecked(k: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), k * k);
        Self { k, data }
    }
}

impl TryFrom<Vec<Vec<f64>>> for LabelMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<LabelMatrix> for Vec<Vec<f64>> {
    fn from(m: LabelMatrix) -> Self {
        m.to_rows()
    }
}

/// Identity matrix of size `num_classes`.
pub fn encode_onehot(num_classes: usize) -> Result<LabelMatrix> {
    if num_classes < 2 {
        return Err(Error::InvalidDimension(format!(
            "one-hot encoding needs at least 2 classes, got {num_classes}"
        )));
    }
    let mut data = vec![0.0; num_classes * num_classes];
    for t in 0..num_classes {
        data[t * num_classes + t] = 1.0;
    }
    Ok(LabelMatrix::from_flat_unchecked(num_classes, data))
}

/// Soft ordinal encoding: row `t` is `softmax_i(-φ(r_t, r_i))`.
pub fn encode_sord(ranks: &RankAssignment, spec: &DistanceSpec) -> Result<LabelMatrix> {
    if ranks.geometry() != spec.geometry() {
        return Err(Error::Config(format!(
            "ranks are {} but distance spec is {}",
            ranks.geometry(),
            spec.geometry()
        )));
    }
    let k = ranks.num_classes();
    if spec.is_one_hot_limit() {
        return encode_onehot(k);
    }
    let r = ranks.ranks();
    let mut data = Vec::with_capacity(k * k);
    for &rt in r {
        let mut row = r
            .iter()
            .map(|&ri| pairwise_distance(rt, ri, spec).map(|phi| -phi))
            .collect::<Result<Vec<f64>>>()?;
        softmax_in_place(&mut row);
        data.extend(row);
    }
    Ok(LabelMatrix::from_flat_unchecked(k, data))
}
