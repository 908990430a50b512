//! Small numeric helpers shared by the encoders and the training core.

use std::f64::consts::TAU;

/// Softmax with max-subtraction. Entries equal to `-inf` map to exactly zero.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let mut out = scores.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        let uniform = 1.0 / values.len() as f64;
        values.iter_mut().for_each(|v| *v = uniform);
        return;
    }
    let mut total = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in values.iter_mut() {
        *v /= total;
    }
}

/// Maps an angle into `[0, 2π)`.
///
/// `rem_euclid` can round up to exactly `2π` for tiny negative inputs; that
/// case folds back to zero.
pub fn wrap_angle(theta: f64) -> f64 {
    let wrapped = theta.rem_euclid(TAU);
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// Shortest arc length between two angles, in `[0, π]`.
pub fn arc_distance(a: f64, b: f64) -> f64 {
    let d = (b - a).abs().rem_euclid(TAU);
    d.min(TAU - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn softmax_is_shift_invariant() {
        let a = softmax(&[1.0, 2.0, -3.0, 0.5]);
        let b = softmax(&[1001.0, 1002.0, 997.0, 1000.5]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15, "{x} vs {y}");
        }
    }

    #[test]
    fn softmax_handles_neg_infinity() {
        let p = softmax(&[0.0, f64::NEG_INFINITY, f64::NEG_INFINITY]);
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn wrap_angle_stays_in_range() {
        assert_eq!(wrap_angle(-1e-18), 0.0);
        assert!((wrap_angle(-PI / 2.0) - 1.5 * PI).abs() < 1e-15);
        assert!((wrap_angle(5.0 * PI) - PI).abs() < 1e-12);
    }

    #[test]
    fn arc_distance_wraps() {
        assert!((arc_distance(0.0, 1.5 * PI) - 0.5 * PI).abs() < 1e-15);
        assert!((arc_distance(0.1, 0.1)).abs() < 1e-15);
    }
}
