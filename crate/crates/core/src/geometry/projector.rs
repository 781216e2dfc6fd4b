use rayon::prelude::*;

use super::{center_offset, wrap_angle, Image, Projection, Sinogram};
use crate::error::{Error, Result};

/// Fractional-offset resolution of the footprint table.
const TABLE_STEPS: usize = 128;

/// Detector footprint of a unit pixel at one angle.
///
/// A pixel is modelled as a unit square. Its line integrals along the
/// direction `theta` form a trapezoid of unit area (the convolution of two
/// boxes of widths `|cos|` and `|sin|`), and each detector bin integrates
/// that trapezoid over its unit width. A pixel center landing at fractional
/// bin coordinate `u` therefore spreads over the four bins
/// `floor(u)-1 ..= floor(u)+2` with weights that sum to one.
///
/// The weights are tabulated over the fractional part of `u` and linearly
/// interpolated, so the projector and its adjoint share them exactly.
#[derive(Debug, Clone)]
pub struct Footprint {
    cos: f64,
    sin: f64,
    // [step][bin] weights and forward differences.
    weights: Vec<[f64; 4]>,
    slopes: Vec<[f64; 4]>,
}

impl Footprint {
    pub fn new(theta: f64) -> Self {
        let theta = wrap_angle(theta);
        let (sin, cos) = theta.sin_cos();
        let (a, b) = if cos.abs() >= sin.abs() {
            (cos.abs(), sin.abs())
        } else {
            (sin.abs(), cos.abs())
        };
        let weights: Vec<[f64; 4]> = (0..=TABLE_STEPS)
            .map(|i| {
                let f = i as f64 / TABLE_STEPS as f64;
                let mut w = [0.0; 4];
                for (k, wk) in w.iter_mut().enumerate() {
                    let lo = k as f64 - 1.5 - f;
                    *wk = trapezoid_cdf(lo + 1.0, a, b) - trapezoid_cdf(lo, a, b);
                }
                w
            })
            .collect();
        let slopes = weights
            .windows(2)
            .map(|pair| {
                let mut d = [0.0; 4];
                for k in 0..4 {
                    d[k] = pair[1][k] - pair[0][k];
                }
                d
            })
            .collect();
        Footprint {
            cos,
            sin,
            weights,
            slopes,
        }
    }

    /// First bin index and the four weights for a pixel center at bin
    /// coordinate `u`.
    #[inline]
    fn locate(&self, u: f64) -> (isize, [f64; 4]) {
        let base = u.floor();
        let t = (u - base) * TABLE_STEPS as f64;
        let i = (t as usize).min(TABLE_STEPS - 1);
        let g = t - i as f64;
        let w0 = &self.weights[i];
        let d = &self.slopes[i];
        (
            base as isize - 1,
            [
                w0[0] + g * d[0],
                w0[1] + g * d[1],
                w0[2] + g * d[2],
                w0[3] + g * d[3],
            ],
        )
    }

    /// Accumulates the projection of `pixels` (row-major, side `size`) into
    /// `out`, which has `bins` samples.
    pub(crate) fn splat(&self, pixels: &[f64], size: usize, out: &mut [f64]) {
        let h = center_offset(size);
        let hd = center_offset(out.len());
        let bins = out.len() as isize;
        for row in 0..size {
            let t = row as f64 - h;
            let u_row = hd - h * self.cos + t * self.sin;
            let line = &pixels[row * size..(row + 1) * size];
            for (col, &v) in line.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let (j0, w) = self.locate(u_row + col as f64 * self.cos);
                if j0 >= 0 && j0 + 3 < bins {
                    let j = j0 as usize;
                    out[j] += v * w[0];
                    out[j + 1] += v * w[1];
                    out[j + 2] += v * w[2];
                    out[j + 3] += v * w[3];
                } else {
                    for (k, wk) in w.iter().enumerate() {
                        let j = j0 + k as isize;
                        if (0..bins).contains(&j) {
                            out[j as usize] += v * wk;
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Footprint::splat`] restricted to rows
    /// `first_row..first_row + rows.len() / size`: adds `scale` times the
    /// smeared projection into `rows`.
    pub(crate) fn smear_rows(
        &self,
        proj: &[f64],
        size: usize,
        first_row: usize,
        scale: f64,
        rows: &mut [f64],
    ) {
        let h = center_offset(size);
        let hd = center_offset(proj.len());
        let bins = proj.len() as isize;
        for (r, line) in rows.chunks_mut(size).enumerate() {
            let t = (first_row + r) as f64 - h;
            let u_row = hd - h * self.cos + t * self.sin;
            for (col, px) in line.iter_mut().enumerate() {
                let (j0, w) = self.locate(u_row + col as f64 * self.cos);
                let acc = if j0 >= 0 && j0 + 3 < bins {
                    let j = j0 as usize;
                    w[0] * proj[j] + w[1] * proj[j + 1] + w[2] * proj[j + 2] + w[3] * proj[j + 3]
                } else {
                    let mut acc = 0.0;
                    for (k, wk) in w.iter().enumerate() {
                        let j = j0 + k as isize;
                        if (0..bins).contains(&j) {
                            acc += wk * proj[j as usize];
                        }
                    }
                    acc
                };
                *px += scale * acc;
            }
        }
    }
}

/// CDF of the sum of two centered uniforms of widths `a >= b >= 0`.
fn trapezoid_cdf(x: f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (a + b);
    if x <= -half {
        return 0.0;
    }
    if x >= half {
        return 1.0;
    }
    if b < 1e-12 {
        return (x + 0.5 * a) / a;
    }
    let inner = 0.5 * (a - b);
    if x < -inner {
        let d = x + half;
        d * d / (2.0 * a * b)
    } else if x <= inner {
        b / (2.0 * a) + (x + inner) / a
    } else {
        let d = half - x;
        1.0 - d * d / (2.0 * a * b)
    }
}

/// Discrete line-integral projection of `image` at angle `theta`.
pub fn project(image: &Image, theta: f64) -> Result<Projection> {
    if !theta.is_finite() {
        return Err(Error::invalid(format!("non-finite angle {theta}")));
    }
    let size = image.size();
    let mut out = vec![0.0; size];
    Footprint::new(theta).splat(image.as_slice(), size, &mut out);
    Projection::from_vec(out)
}

/// Unfiltered back-projection, the exact adjoint of [`project`].
pub fn backproject(p: &Projection, theta: f64, size: usize) -> Result<Image> {
    if !theta.is_finite() {
        return Err(Error::invalid(format!("non-finite angle {theta}")));
    }
    let mut img = Image::zeros(size);
    Footprint::new(theta).smear_rows(p.as_slice(), size, 0, 1.0, img.as_slice_mut());
    Ok(img)
}

/// Projects `image` at every angle. No detector shifts are applied.
pub fn reproject_all(image: &Image, angles: &[f64]) -> Result<Sinogram> {
    if angles.is_empty() {
        return Err(Error::invalid("no angles to project"));
    }
    if let Some(a) = angles.iter().find(|a| !a.is_finite()) {
        return Err(Error::invalid(format!("non-finite angle {a}")));
    }
    let size = image.size();
    let rows: Vec<Vec<f64>> = angles
        .par_iter()
        .map(|&theta| {
            let mut out = vec![0.0; size];
            Footprint::new(theta).splat(image.as_slice(), size, &mut out);
            out
        })
        .collect();
    let data = ndarray::Array2::from_shape_vec((angles.len(), size), rows.concat())
        .expect("rows have equal length");
    Sinogram::new(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cdf_is_monotone_and_normalized() {
        for &(a, b) in &[(1.0, 0.0), (0.8, 0.6), (0.70710678, 0.70710678)] {
            let mut prev = 0.0;
            for i in 0..=200 {
                let x = -1.0 + i as f64 * 0.01;
                let v = trapezoid_cdf(x, a, b);
                assert!(v + 1e-15 >= prev);
                prev = v;
            }
            assert_eq!(trapezoid_cdf(-1.0, a, b), 0.0);
            assert_eq!(trapezoid_cdf(1.0, a, b), 1.0);
            assert!((trapezoid_cdf(0.0, a, b) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn footprint_weights_sum_to_one() {
        for theta in [0.0, 0.3, PI / 4.0, 2.0, 4.4] {
            let fp = Footprint::new(theta);
            for u in [3.0, 3.25, 3.5, 3.999] {
                let (_, w) = fp.locate(u);
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(w.iter().all(|&x| x >= -1e-15));
            }
        }
    }

    #[test]
    fn single_center_pixel_conserves_mass() {
        let mut img = Image::zeros(33);
        img.as_slice_mut()[16 * 33 + 16] = 1.0;
        let p = project(&img, 0.0).unwrap();
        assert!((p.sum() - 1.0).abs() < 1e-12);
        let peak = p
            .as_slice()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, 16);
    }

    #[test]
    fn rejects_non_finite_angle() {
        let img = Image::zeros(8);
        assert!(project(&img, f64::NAN).is_err());
        assert!(project(&img, f64::INFINITY).is_err());
    }

    #[test]
    fn reproject_rows_match_project() {
        let mut img = Image::zeros(16);
        for (i, v) in img.as_slice_mut().iter_mut().enumerate() {
            *v = ((i * 7) % 13) as f64;
        }
        let angles = [0.1, 1.0, 1.0, 5.0];
        let sino = reproject_all(&img, &angles).unwrap();
        for (i, &a) in angles.iter().enumerate() {
            assert_eq!(sino.projection(i), project(&img, a).unwrap());
        }
        assert_eq!(sino.projection(1), sino.projection(2));
    }
}
