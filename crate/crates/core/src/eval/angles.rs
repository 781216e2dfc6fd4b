use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::geometry::wrap_angle;

/// Signed circular difference in `(-pi, pi]`.
pub fn circular_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleError {
    /// Mean absolute circular error after removing the global offset, degrees.
    pub mean_deg: f64,
    /// Global offset such that `est ~ truth + rotation` (or
    /// `rotation - truth` when reflected).
    pub best_rotation: f64,
    pub best_reflection: bool,
}

fn residual_error(residuals: &[f64]) -> (f64, f64) {
    let (s, c) = residuals
        .iter()
        .fold((0.0, 0.0), |(s, c), r| (s + r.sin(), c + r.cos()));
    let offset = if s == 0.0 && c == 0.0 {
        0.0
    } else {
        s.atan2(c)
    };
    let mean = residuals
        .iter()
        .map(|&r| circular_diff(r, offset).abs())
        .sum::<f64>()
        / residuals.len() as f64;
    (mean, wrap_angle(offset))
}

/// Mean circular angle error modulo a global rotation (circular mean of
/// residuals) and reflection.
pub fn angle_error(est: &[f64], truth: &[f64]) -> Result<AngleError> {
    if est.is_empty() {
        return Err(Error::invalid("no angles to compare"));
    }
    if est.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} estimates for {} true angles",
            est.len(),
            truth.len()
        )));
    }
    let direct: Vec<f64> = est.iter().zip(truth).map(|(e, t)| e - t).collect();
    let mirrored: Vec<f64> = est.iter().zip(truth).map(|(e, t)| e + t).collect();
    let (md, od) = residual_error(&direct);
    let (mm, om) = residual_error(&mirrored);
    let (mean, rotation, reflected) = if mm < md {
        (mm, om, true)
    } else {
        (md, od, false)
    };
    Ok(AngleError {
        mean_deg: mean.to_degrees(),
        best_rotation: rotation,
        best_reflection: reflected,
    })
}

/// Agreement between two cyclic orderings: the fraction of index triples
/// whose cyclic orientation matches, maximized over global reversal.
/// 1.0 for identical orders up to rotation/reflection, about 0.5 for
/// unrelated ones.
pub fn circular_order_agreement(est: &[f64], truth: &[f64]) -> Result<f64> {
    let n = est.len();
    if n != truth.len() {
        return Err(Error::invalid("length mismatch"));
    }
    if n < 3 {
        return Err(Error::invalid("order agreement needs at least 3 points"));
    }
    let orient = |v: &[f64], i: usize, j: usize, k: usize| -> i8 {
        let b = (v[j] - v[i]).rem_euclid(TAU);
        let c = (v[k] - v[i]).rem_euclid(TAU);
        if b == 0.0 || c == 0.0 || b == c {
            0
        } else if b < c {
            1
        } else {
            -1
        }
    };
    let (mut same, mut total) = (0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let a = orient(est, i, j, k);
                let b = orient(truth, i, j, k);
                if a != 0 && a == b {
                    same += 1;
                }
                if a != 0 && b != 0 {
                    total += 1;
                }
            }
        }
    }
    if total == 0 {
        return Err(Error::degenerate("all triples are tied"));
    }
    let frac = same as f64 / total as f64;
    Ok(frac.max(1.0 - frac))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftError {
    /// Mean `|est - true - fit|` in bins.
    pub mean_abs: f64,
    /// Fraction of estimates equal to `round(true + fit)`.
    pub exact_fraction: f64,
    /// Global translation `(a, b)` of the reconstruction frame; the fit is
    /// `-(a cos + b sin)` of the estimated angle.
    pub translation: (f64, f64),
}

/// Compares integer shift estimates with the true detector shifts after
/// removing the component explained by a global image translation in the
/// estimated frame.
pub fn shift_error(
    est_angles: &[f64],
    est_shifts: &[i32],
    true_shifts: &[f64],
) -> Result<ShiftError> {
    let n = est_shifts.len();
    if n == 0 || est_angles.len() != n || true_shifts.len() != n {
        return Err(Error::invalid(
            "shift comparison needs equal nonempty inputs",
        ));
    }
    // Least squares for r_i = c_i x + s_i y.
    let (mut cc, mut cs, mut ss, mut cr, mut sr) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let (s, c) = est_angles[i].sin_cos();
        let r = est_shifts[i] as f64 - true_shifts[i];
        cc += c * c;
        cs += c * s;
        ss += s * s;
        cr += c * r;
        sr += s * r;
    }
    let det = cc * ss - cs * cs;
    let (x, y) = if det.abs() > 1e-12 * (cc + ss).powi(2) {
        ((cr * ss - sr * cs) / det, (sr * cc - cr * cs) / det)
    } else {
        (0.0, 0.0)
    };
    let (mut abs_sum, mut exact) = (0.0, 0usize);
    for i in 0..n {
        let (s, c) = est_angles[i].sin_cos();
        let fit = c * x + s * y;
        abs_sum += (est_shifts[i] as f64 - true_shifts[i] - fit).abs();
        if (true_shifts[i] + fit).round() as i32 == est_shifts[i] {
            exact += 1;
        }
    }
    Ok(ShiftError {
        mean_abs: abs_sum / n as f64,
        exact_fraction: exact as f64 / n as f64,
        translation: (-x, -y),
    })
}
