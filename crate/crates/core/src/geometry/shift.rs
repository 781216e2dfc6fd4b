use ndarray::Array2;

use super::{Image, Projection};
use crate::error::{Error, Result};

/// Translates the samples of `p` by `k` bins (`out[j] = p[j - k]`).
/// Vacated bins are zero and samples pushed past either end are dropped.
pub fn shift_projection(p: &Projection, k: i32) -> Result<Projection> {
    let n = p.len();
    if k.unsigned_abs() as usize > n {
        return Err(Error::invalid(format!(
            "shift {k} exceeds detector length {n}"
        )));
    }
    let mut out = vec![0.0; n];
    shift_into(p.as_slice(), k, &mut out);
    Projection::from_vec(out)
}

/// Zero-filled translation of `src` into `dst` (same length).
#[inline]
pub(crate) fn shift_into(src: &[f64], k: i32, dst: &mut [f64]) {
    let n = src.len() as isize;
    let k = k as isize;
    dst.fill(0.0);
    let lo = k.max(0);
    let hi = (n + k).min(n);
    if lo < hi {
        dst[lo as usize..hi as usize].copy_from_slice(&src[(lo - k) as usize..(hi - k) as usize]);
    }
}

/// Translates the image content by `s0` columns and `t0` rows, so the pixel
/// at `(col, row)` moves to `(col + s0, row + t0)`.
///
/// Fails with [`Error::Clipping`] when a nonzero pixel would leave the grid.
pub fn shift_image(image: &Image, s0: i32, t0: i32) -> Result<Image> {
    let size = image.size() as isize;
    let (ds, dt) = (s0 as isize, t0 as isize);
    let mut out = Array2::zeros((image.size(), image.size()));
    for ((row, col), &v) in image.pixels().indexed_iter() {
        if v == 0.0 {
            continue;
        }
        let (r, c) = (row as isize + dt, col as isize + ds);
        if r < 0 || c < 0 || r >= size || c >= size {
            return Err(Error::Clipping(format!(
                "pixel ({col}, {row}) shifted by ({s0}, {t0}) leaves a {size}x{size} grid"
            )));
        }
        out[[r as usize, c as usize]] = v;
    }
    Image::new(out)
}
