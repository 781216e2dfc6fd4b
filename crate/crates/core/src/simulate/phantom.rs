use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::geometry::{center_offset, Image};

/// Radius of the bundled phantoms as a fraction of half the grid side.
/// Leaves room for shifts of up to `0.27 S` - 2 pixels.
pub const PHANTOM_RADIUS_FRACTION: f64 = 0.7;

/// Subsamples per pixel side when rasterizing the ellipse phantom.
const SUPERSAMPLE: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum PhantomKind {
    /// The modified (high-contrast) Shepp-Logan head phantom.
    SheppLogan,
    /// Shepp-Logan with the original intensities: a bright skull around a
    /// nearly flat interior with 1-2% features.
    SheppLoganOriginal,
    /// Elongated, tilted, lopsided ellipse phantom with no mirror symmetry.
    Asymmetric,
    /// Three seeded, non-concentric disks of distinct intensities.
    Disks { seed: u64 },
    /// An 8- or 16-bit grayscale image file (PNG or PGM) of the right size.
    FromFile(PathBuf),
}

impl PhantomKind {
    pub const DEFAULT_DISK_SEED: u64 = 7;

    pub fn disks() -> Self {
        PhantomKind::Disks {
            seed: Self::DEFAULT_DISK_SEED,
        }
    }
}

pub fn make_phantom(kind: &PhantomKind, size: usize) -> Result<Image> {
    if size < 32 {
        return Err(Error::invalid(format!(
            "phantom size must be >= 32, got {size}"
        )));
    }
    match kind {
        PhantomKind::SheppLogan => Ok(render_ellipses(&SHEPP_LOGAN, size)),
        PhantomKind::SheppLoganOriginal => Ok(render_ellipses(&SHEPP_LOGAN_ORIGINAL, size)),
        PhantomKind::Asymmetric => Ok(render_ellipses(&ASYMMETRIC, size)),
        PhantomKind::Disks { seed } => Ok(disks(size, *seed)),
        PhantomKind::FromFile(path) => load_grayscale(path, size),
    }
}

// (x0, y0, semi-axis a, semi-axis b, tilt in degrees, additive intensity),
// in units of the phantom radius.
type Ellipse = (f64, f64, f64, f64, f64, f64);

const SHEPP_LOGAN: [Ellipse; 10] = [
    (0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8),
    (0.22, 0.0, 0.11, 0.31, -18.0, -0.2),
    (-0.22, 0.0, 0.16, 0.41, 18.0, -0.2),
    (0.0, 0.35, 0.21, 0.25, 0.0, 0.1),
    (0.0, 0.1, 0.046, 0.046, 0.0, 0.1),
    (0.0, -0.1, 0.046, 0.046, 0.0, 0.1),
    (-0.08, -0.605, 0.046, 0.023, 0.0, 0.1),
    (0.0, -0.606, 0.023, 0.023, 0.0, 0.1),
    (0.06, -0.605, 0.023, 0.046, 0.0, 0.1),
];

const SHEPP_LOGAN_ORIGINAL: [Ellipse; 10] = [
    (0.0, 0.0, 0.69, 0.92, 0.0, 2.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98),
    (0.22, 0.0, 0.11, 0.31, -18.0, -0.02),
    (-0.22, 0.0, 0.16, 0.41, 18.0, -0.02),
    (0.0, 0.35, 0.21, 0.25, 0.0, 0.01),
    (0.0, 0.1, 0.046, 0.046, 0.0, 0.01),
    (0.0, -0.1, 0.046, 0.046, 0.0, 0.01),
    (-0.08, -0.605, 0.046, 0.023, 0.0, 0.01),
    (0.0, -0.606, 0.023, 0.023, 0.0, 0.01),
    (0.06, -0.605, 0.023, 0.046, 0.0, 0.01),
];

const ASYMMETRIC: [Ellipse; 5] = [
    (0.05, -0.1, 0.45, 0.85, 25.0, 0.5),
    (0.3, 0.35, 0.2, 0.3, -40.0, 0.5),
    (-0.1, -0.3, 0.12, 0.12, 0.0, -0.3),
    (0.45, -0.2, 0.1, 0.22, 70.0, 0.4),
    (-0.2, 0.2, 0.08, 0.08, 0.0, 0.3),
];

fn render_ellipses(table: &[Ellipse], size: usize) -> Image {
    let h = center_offset(size);
    let radius = PHANTOM_RADIUS_FRACTION * size as f64 / 2.0;
    let ellipses: Vec<_> = table
        .iter()
        .map(|&(x0, y0, a, b, deg, v)| {
            let (sn, cs) = deg.to_radians().sin_cos();
            (x0, y0, a * a, b * b, sn, cs, v)
        })
        .collect();
    let step = 1.0 / SUPERSAMPLE as f64;
    let mut px = Array2::zeros((size, size));
    for ((row, col), out) in px.indexed_iter_mut() {
        let mut acc = 0.0;
        for sy in 0..SUPERSAMPLE {
            for sx in 0..SUPERSAMPLE {
                let s = col as f64 - h - 0.5 + (sx as f64 + 0.5) * step;
                let t = row as f64 - h - 0.5 + (sy as f64 + 0.5) * step;
                // Image rows grow downward; the phantom's y axis points up.
                let (x, y) = (s / radius, -t / radius);
                for &(x0, y0, a2, b2, sn, cs, v) in &ellipses {
                    let (dx, dy) = (x - x0, y - y0);
                    let u = dx * cs + dy * sn;
                    let w = -dx * sn + dy * cs;
                    if u * u / a2 + w * w / b2 <= 1.0 {
                        acc += v;
                    }
                }
            }
        }
        // Clamp float residue from cancelling layers.
        let v = acc / (SUPERSAMPLE * SUPERSAMPLE) as f64;
        *out = if v.abs() < 1e-12 { 0.0 } else { v };
    }
    let max = px.iter().copied().fold(0.0, f64::max);
    Image::new(px / max).expect("finite square phantom")
}

fn disks(size: usize, seed: u64) -> Image {
    let h = center_offset(size);
    let radius = PHANTOM_RADIUS_FRACTION * size as f64 / 2.0;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let intensities = [1.0, 0.6, 0.35];
    let mut disks = Vec::with_capacity(3);
    for &v in &intensities {
        let r = radius * rng.random_range(0.18..0.38);
        let reach = radius - r;
        let dist = reach * rng.random_range(0.2..1.0f64).sqrt();
        let dir = rng.random_range(0.0..std::f64::consts::TAU);
        disks.push((dist * dir.cos(), dist * dir.sin(), r, v));
    }
    let mut px = Array2::zeros((size, size));
    for ((row, col), out) in px.indexed_iter_mut() {
        let (s, t) = (col as f64 - h, row as f64 - h);
        for &(cx, cy, r, v) in &disks {
            if (s - cx).powi(2) + (t - cy).powi(2) <= r * r {
                *out = v;
            }
        }
    }
    Image::new(px).expect("finite square phantom")
}

/// Loads a grayscale image and scales it to `[0, 1]` by the full range of
/// its bit depth (`v / 255` or `v / 65535`).
pub fn load_grayscale(path: &Path, size: usize) -> Result<Image> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::Io(io),
        other => Error::Format(format!("{}: {other}", path.display())),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w != size || h != size {
        return Err(Error::Format(format!(
            "{}: expected {size}x{size}, found {w}x{h}",
            path.display()
        )));
    }
    let data: Vec<f64> = match img {
        image::DynamicImage::ImageLuma8(buf) => buf
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect(),
        other => other
            .into_luma16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect(),
    };
    Image::from_vec(size, data)
}
