use crate::error::{Error, Result};
use crate::geometry::Image;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSet {
    pub rrmse: f64,
    pub ssim: f64,
    pub cc: f64,
}

/// RRMSE, SSIM and CC of `aligned` against `truth`, over the full frame.
pub fn metrics(aligned: &Image, truth: &Image) -> Result<MetricSet> {
    check_same_size(aligned, truth)?;
    let range = truth.max() - truth.min();
    Ok(MetricSet {
        rrmse: rrmse(aligned, truth)?,
        ssim: ssim_with_range(aligned, truth, range)?,
        cc: correlation(aligned, truth)?,
    })
}

fn check_same_size(a: &Image, b: &Image) -> Result<()> {
    if a.size() != b.size() {
        return Err(Error::invalid(format!(
            "image sizes differ: {} vs {}",
            a.size(),
            b.size()
        )));
    }
    Ok(())
}

pub fn rrmse(estimate: &Image, truth: &Image) -> Result<f64> {
    check_same_size(estimate, truth)?;
    let denom = truth.norm();
    if denom == 0.0 {
        return Err(Error::invalid("RRMSE undefined for an all-zero reference"));
    }
    Ok(estimate.distance(truth) / denom)
}

/// Pearson correlation over all pixels. An error when `truth` is constant;
/// zero when only `estimate` is.
pub fn correlation(estimate: &Image, truth: &Image) -> Result<f64> {
    check_same_size(estimate, truth)?;
    let (a, b) = (estimate.as_slice(), truth.as_slice());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if sbb == 0.0 {
        return Err(Error::degenerate(
            "correlation undefined for a constant reference image",
        ));
    }
    if saa == 0.0 {
        return Ok(0.0);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - half).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Separable "valid" filtering of a `size x size` field.
fn filter_valid(data: &[f64], size: usize, w: &[f64]) -> Vec<f64> {
    let k = w.len();
    let out_n = size + 1 - k;
    let mut tmp = vec![0.0; size * out_n];
    for r in 0..size {
        let row = &data[r * size..(r + 1) * size];
        for c in 0..out_n {
            tmp[r * out_n + c] = w.iter().zip(&row[c..c + k]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; out_n * out_n];
    for r in 0..out_n {
        for c in 0..out_n {
            out[r * out_n + c] = (0..k).map(|i| w[i] * tmp[(r + i) * out_n + c]).sum();
        }
    }
    out
}

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03 and the given dynamic range. Only windows fully inside the
/// frame contribute.
pub fn ssim_with_range(a: &Image, b: &Image, range: f64) -> Result<f64> {
    check_same_size(a, b)?;
    let size = a.size();
    if size < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs images of at least {SSIM_WINDOW} pixels per side"
        )));
    }
    if !(range > 0.0) {
        return Err(Error::invalid("SSIM dynamic range must be positive"));
    }
    let w = gaussian_window();
    let (x, y) = (a.as_slice(), b.as_slice());
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();
    let mx = filter_valid(x, size, &w);
    let my = filter_valid(y, size, &w);
    let sxx = filter_valid(&xx, size, &w);
    let syy = filter_valid(&yy, size, &w);
    let sxy = filter_valid(&xy, size, &w);
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cxy = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}
