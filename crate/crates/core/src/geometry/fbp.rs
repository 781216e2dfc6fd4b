use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{center_offset, wrap_angle, Image, Sinogram};
use crate::error::{Error, Result};

/// Apodization applied on top of the ramp response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RampWindow {
    #[default]
    None,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FbpOptions {
    pub window: RampWindow,
}

/// Ram-Lak ramp filter applied in the frequency domain.
///
/// The frequency response is the transform of the band-limited spatial
/// kernel `h[0] = 1/4`, `h[odd n] = -1/(pi n)^2`, `h[even n] = 0`, on a
/// zero-padded grid of the next power of two `>= 2S`. Building the response
/// from the spatial kernel keeps the DC term consistent with the discrete
/// convolution and avoids the offset of a naively sampled `|w|`.
pub struct RampFilter {
    len: usize,
    padded: usize,
    response: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    inverse_fine: Arc<dyn Fft<f64>>,
}

impl RampFilter {
    pub fn new(len: usize, window: RampWindow) -> Self {
        let padded = (2 * len).next_power_of_two().max(2);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(padded);
        let inverse = planner.plan_fft_inverse(padded);
        let inverse_fine = planner.plan_fft_inverse(padded * UPSAMPLE);

        let mut kernel = vec![Complex::new(0.0, 0.0); padded];
        kernel[0].re = 0.25;
        for n in 1..padded / 2 {
            if n % 2 == 1 {
                let v = -1.0 / (PI * n as f64).powi(2);
                kernel[n].re = v;
                kernel[padded - n].re = v;
            }
        }
        forward.process(&mut kernel);
        let response = kernel
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let freq = k.min(padded - k) as f64 / padded as f64;
                let w = match window {
                    RampWindow::None => 1.0,
                    RampWindow::Hann => (PI * freq).cos().powi(2),
                };
                c.re * w
            })
            .collect();
        RampFilter {
            len,
            padded,
            response,
            forward,
            inverse,
            inverse_fine,
        }
    }

    fn filtered_spectrum(&self, samples: &[f64]) -> Vec<Complex<f64>> {
        assert_eq!(samples.len(), self.len);
        let mut buf = vec![Complex::new(0.0, 0.0); self.padded];
        for (b, &v) in buf.iter_mut().zip(samples) {
            b.re = v;
        }
        self.forward.process(&mut buf);
        for (b, &r) in buf.iter_mut().zip(&self.response) {
            *b *= r;
        }
        buf
    }

    /// Filtered samples at the detector bins.
    pub fn apply(&self, samples: &[f64]) -> Vec<f64> {
        let mut buf = self.filtered_spectrum(samples);
        self.inverse.process(&mut buf);
        let norm = 1.0 / self.padded as f64;
        buf[..self.len].iter().map(|c| c.re * norm).collect()
    }

    /// Filtered samples band-limited-interpolated onto a grid `UPSAMPLE`
    /// times finer; entry `m` sits at bin coordinate `m / UPSAMPLE`.
    fn apply_fine(&self, samples: &[f64]) -> Vec<f64> {
        let p = self.padded;
        let buf = self.filtered_spectrum(samples);
        let big = p * UPSAMPLE;
        let mut up = vec![Complex::new(0.0, 0.0); big];
        up[..p / 2].copy_from_slice(&buf[..p / 2]);
        for k in 1..p / 2 {
            up[big - k] = buf[p - k];
        }
        // Split the Nyquist term between both signs.
        up[p / 2] = buf[p / 2] * 0.5;
        up[big - p / 2] = buf[p / 2] * 0.5;
        self.inverse_fine.process(&mut up);
        let norm = 1.0 / p as f64;
        up[..self.len * UPSAMPLE]
            .iter()
            .map(|c| c.re * norm)
            .collect()
    }
}

/// Filtered back-projection with the plain Ram-Lak filter.
pub fn fbp(sino: &Sinogram, angles: &[f64]) -> Result<Image> {
    fbp_with(sino, angles, &FbpOptions::default())
}

const ROWS_PER_TASK: usize = 8;
/// Oversampling of the filtered projections before linear interpolation.
const UPSAMPLE: usize = 4;

pub fn fbp_with(sino: &Sinogram, angles: &[f64], opts: &FbpOptions) -> Result<Image> {
    let n = angles.len();
    if n == 0 {
        return Err(Error::invalid(
            "filtered back-projection needs at least one angle",
        ));
    }
    if n != sino.count() {
        return Err(Error::invalid(format!(
            "{} projections but {n} angles",
            sino.count()
        )));
    }
    if let Some(a) = angles.iter().find(|a| !a.is_finite()) {
        return Err(Error::invalid(format!("non-finite angle {a}")));
    }
    let size = sino.size();
    let filter = RampFilter::new(size, opts.window);
    let filtered: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| filter.apply_fine(sino.row_slice(i)))
        .collect();
    let trig: Vec<(f64, f64)> = angles.iter().map(|&a| wrap_angle(a).sin_cos()).collect();

    // Full-circle sampling: (1/2) * (2pi/N) per view.
    let scale = PI / n as f64;
    let mut img = Image::zeros(size);
    img.as_slice_mut()
        .par_chunks_mut(ROWS_PER_TASK * size)
        .enumerate()
        .for_each(|(chunk, rows)| {
            let first_row = chunk * ROWS_PER_TASK;
            for (&(sin, cos), q) in trig.iter().zip(&filtered) {
                interp_rows(q, cos, sin, size, first_row, scale, rows);
            }
            mask_outside_disk(rows, size, first_row);
        });
    Ok(img)
}

/// Zeroes pixels outside the inscribed disk, where some views miss the
/// detector and the inversion is invalid.
fn mask_outside_disk(rows: &mut [f64], size: usize, first_row: usize) {
    let h = center_offset(size);
    let r2 = (size as f64 / 2.0).powi(2);
    for (r, line) in rows.chunks_mut(size).enumerate() {
        let t = (first_row + r) as f64 - h;
        for (col, px) in line.iter_mut().enumerate() {
            let s = col as f64 - h;
            if s * s + t * t > r2 {
                *px = 0.0;
            }
        }
    }
}

/// Pixel-driven back-projection, linearly interpolating the oversampled
/// filtered projection. The footprint adjoint would blur a second time.
fn interp_rows(
    proj: &[f64],
    cos: f64,
    sin: f64,
    size: usize,
    first_row: usize,
    scale: f64,
    rows: &mut [f64],
) {
    let h = center_offset(size);
    let hd = center_offset(proj.len() / UPSAMPLE);
    let last = proj.len() as isize - 1;
    let f = UPSAMPLE as f64;
    for (r, line) in rows.chunks_mut(size).enumerate() {
        let t = (first_row + r) as f64 - h;
        let u_row = hd - h * cos + t * sin;
        for (col, px) in line.iter_mut().enumerate() {
            let u = (u_row + col as f64 * cos) * f;
            let base = u.floor();
            let j = base as isize;
            let g = u - base;
            let v = if j >= 0 && j < last {
                let j = j as usize;
                proj[j] + g * (proj[j + 1] - proj[j])
            } else if j == last {
                (1.0 - g) * proj[j as usize]
            } else if j == -1 {
                g * proj[0]
            } else {
                0.0
            };
            *px += scale * v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_kills_constant_interior() {
        // A long constant run filters to ~0 away from its ends.
        let f = RampFilter::new(64, RampWindow::None);
        let mut p = vec![0.0; 64];
        p[8..56].fill(1.0);
        let q = f.apply(&p);
        assert!(q[32].abs() < 0.02, "{}", q[32]);
    }

    #[test]
    fn zero_sinogram_gives_zero_image() {
        let sino = Sinogram::zeros(5, 16);
        let img = fbp(&sino, &[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(img.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_empty_and_mismatched_angles() {
        let sino = Sinogram::zeros(3, 8);
        assert!(fbp(&sino, &[]).is_err());
        assert!(fbp(&sino, &[0.0, 1.0]).is_err());
    }
}
