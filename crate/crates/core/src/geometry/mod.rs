//! Discrete images, projections and sinograms, together with the
//! parallel-beam projector, the detector shift operator and filtered
//! back-projection.
//!
//! Coordinates: an image of side `S` is stored row-major as `[row, col]`.
//! Pixel `(col, row)` has its center at `s = col - (S-1)/2`,
//! `t = row - (S-1)/2`. Detector bin `j` has its center at
//! `rho = j - (S-1)/2`. A projection at angle `theta` integrates along the
//! lines `s cos(theta) + t sin(theta) = rho`.

mod fbp;
mod projector;
mod shift;

use ndarray::{Array1, Array2, ArrayView1};
use std::f64::consts::TAU;

use crate::error::{Error, Result};

pub use fbp::{fbp, fbp_with, FbpOptions, RampFilter, RampWindow};
pub use projector::{backproject, project, reproject_all, Footprint};
pub use shift::{shift_image, shift_projection};

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Offset of the grid center from index 0, `(S-1)/2`.
#[inline]
pub fn center_offset(size: usize) -> f64 {
    (size as f64 - 1.0) / 2.0
}

/// A square grid of real intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Array2<f64>,
}

impl Image {
    pub fn new(pixels: Array2<f64>) -> Result<Self> {
        let (rows, cols) = pixels.dim();
        if rows != cols || rows == 0 {
            return Err(Error::invalid(format!(
                "image must be square and nonempty, got {rows}x{cols}"
            )));
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("image contains non-finite values"));
        }
        let pixels = if pixels.is_standard_layout() {
            pixels
        } else {
            pixels.as_standard_layout().to_owned()
        };
        Ok(Image { pixels })
    }

    pub fn zeros(size: usize) -> Self {
        Image {
            pixels: Array2::zeros((size, size)),
        }
    }

    /// Builds an image from a row-major buffer of `size * size` values.
    pub fn from_vec(size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::invalid(format!(
                "expected {} pixels, got {}",
                size * size,
                data.len()
            )));
        }
        Image::new(Array2::from_shape_vec((size, size), data).expect("shape checked"))
    }

    pub fn size(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn pixels(&self) -> &Array2<f64> {
        &self.pixels
    }

    pub fn as_slice(&self) -> &[f64] {
        self.pixels.as_slice().expect("standard layout")
    }

    pub(crate) fn as_slice_mut(&mut self) -> &mut [f64] {
        self.pixels.as_slice_mut().expect("standard layout")
    }

    pub fn into_pixels(self) -> Array2<f64> {
        self.pixels
    }

    pub fn sum(&self) -> f64 {
        self.as_slice().iter().sum()
    }

    pub fn norm(&self) -> f64 {
        self.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max(&self) -> f64 {
        self.as_slice()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.as_slice()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, factor: f64) -> Image {
        Image {
            pixels: &self.pixels * factor,
        }
    }

    /// Frobenius norm of the pixelwise difference.
    pub fn distance(&self, other: &Image) -> f64 {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest distance from the grid center to the center of a nonzero
    /// pixel, plus half a pixel diagonal. Zero for an all-zero image.
    pub fn support_radius(&self) -> f64 {
        let h = center_offset(self.size());
        let mut r2: f64 = -1.0;
        for ((row, col), &v) in self.pixels.indexed_iter() {
            if v != 0.0 {
                let s = col as f64 - h;
                let t = row as f64 - h;
                r2 = r2.max(s * s + t * t);
            }
        }
        if r2 < 0.0 {
            0.0
        } else {
            r2.sqrt() + std::f64::consts::FRAC_1_SQRT_2
        }
    }
}

/// One 1D projection: `S` detector samples at unit spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    samples: Array1<f64>,
}

impl Projection {
    pub fn new(samples: Array1<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("projection must have at least one sample"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("projection contains non-finite values"));
        }
        Ok(Projection { samples })
    }

    pub fn from_vec(samples: Vec<f64>) -> Result<Self> {
        Projection::new(Array1::from(samples))
    }

    pub fn zeros(len: usize) -> Self {
        Projection {
            samples: Array1::zeros(len),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &Array1<f64> {
        &self.samples
    }

    pub fn as_slice(&self) -> &[f64] {
        self.samples.as_slice().expect("contiguous")
    }

    pub fn sum(&self) -> f64 {
        self.samples.sum()
    }

    pub fn norm(&self) -> f64 {
        self.samples.dot(&self.samples).sqrt()
    }

    pub fn dot(&self, other: &Projection) -> f64 {
        self.samples.dot(&other.samples)
    }

    pub fn reversed(&self) -> Projection {
        Projection {
            samples: self.samples.iter().rev().copied().collect(),
        }
    }
}

/// `N` projections of length `S`, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    data: Array2<f64>,
}

impl Sinogram {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (n, s) = data.dim();
        if n == 0 || s == 0 {
            return Err(Error::invalid("sinogram must be nonempty"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sinogram contains non-finite values"));
        }
        let data = if data.is_standard_layout() {
            data
        } else {
            data.as_standard_layout().to_owned()
        };
        Ok(Sinogram { data })
    }

    /// `n` rows of `size` samples from row-major `data`.
    pub fn from_flat(n: usize, size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * size {
            return Err(Error::invalid(format!(
                "{} samples do not fill a {n} x {size} sinogram",
                data.len()
            )));
        }
        Self::new(Array2::from_shape_vec((n, size), data).expect("length checked"))
    }

    pub fn from_projections(rows: &[Projection]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("sinogram must be nonempty"));
        }
        let s = rows[0].len();
        if rows.iter().any(|p| p.len() != s) {
            return Err(Error::invalid("all projections must have equal length"));
        }
        let mut data = Array2::zeros((n, s));
        for (mut row, p) in data.rows_mut().into_iter().zip(rows) {
            row.assign(p.samples());
        }
        Ok(Sinogram { data })
    }

    pub fn zeros(n: usize, size: usize) -> Self {
        Sinogram {
            data: Array2::zeros((n, size)),
        }
    }

    /// Number of projections.
    pub fn count(&self) -> usize {
        self.data.nrows()
    }

    /// Detector length.
    pub fn size(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice().expect("standard layout")
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn row_slice(&self, i: usize) -> &[f64] {
        let s = self.size();
        &self.as_slice()[i * s..(i + 1) * s]
    }

    pub fn projection(&self, i: usize) -> Projection {
        Projection {
            samples: self.data.row(i).to_owned(),
        }
    }

    pub fn projections(&self) -> Vec<Projection> {
        (0..self.count()).map(|i| self.projection(i)).collect()
    }

    pub fn scaled(&self, factor: f64) -> Sinogram {
        Sinogram {
            data: &self.data * factor,
        }
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }
}

/// Per-projection angle estimates (radians, in `[0, 2pi)`) and integer
/// detector shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryEstimate {
    angles: Vec<f64>,
    shifts: Vec<i32>,
}

impl GeometryEstimate {
    pub fn new(angles: Vec<f64>, shifts: Vec<i32>) -> Result<Self> {
        if angles.len() != shifts.len() {
            return Err(Error::invalid(format!(
                "{} angles but {} shifts",
                angles.len(),
                shifts.len()
            )));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("non-finite angle"));
        }
        Ok(GeometryEstimate {
            angles: angles.into_iter().map(wrap_angle).collect(),
            shifts,
        })
    }

    /// Angles with every shift set to zero.
    pub fn unshifted(angles: Vec<f64>) -> Result<Self> {
        let n = angles.len();
        GeometryEstimate::new(angles, vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn shifts(&self) -> &[i32] {
        &self.shifts
    }

    /// Checks `|shift| <= S/2` for a detector of length `size`.
    pub fn validate_for(&self, size: usize) -> Result<()> {
        let limit = (size / 2) as i32;
        match self.shifts.iter().find(|k| k.abs() > limit) {
            Some(k) => Err(Error::invalid(format!(
                "shift {k} exceeds half the detector ({limit})"
            ))),
            None => Ok(()),
        }
    }
}
