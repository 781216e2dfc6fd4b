use ndarray::Array2;

use crate::geometry::{center_offset, Image};

/// Mirrors the columns (`s -> -s`).
pub fn flip_horizontal(image: &Image) -> Image {
    let s = image.size();
    let px = image.pixels();
    Image::new(Array2::from_shape_fn((s, s), |(r, c)| px[[r, s - 1 - c]])).expect("same shape")
}

/// Rotates counterclockwise in `(s, t)` coordinates by `angle` radians about
/// the grid center, with bilinear interpolation and zero fill.
///
/// Rotating by `phi` turns a projection at `theta` into one at `theta + phi`.
pub fn rotate(image: &Image, angle: f64) -> Image {
    let size = image.size();
    let h = center_offset(size);
    let (sn, cs) = angle.sin_cos();
    let src = image.as_slice();
    let at = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= size as isize || c >= size as isize {
            0.0
        } else {
            src[r as usize * size + c as usize]
        }
    };
    let mut out = vec![0.0; size * size];
    for (row, line) in out.chunks_mut(size).enumerate() {
        let t = row as f64 - h;
        for (col, v) in line.iter_mut().enumerate() {
            let s = col as f64 - h;
            // Inverse rotation of the output coordinate.
            let xs = s * cs + t * sn + h;
            let xt = -s * sn + t * cs + h;
            let (c0, r0) = (xs.floor(), xt.floor());
            let (fx, fy) = (xs - c0, xt - r0);
            let (c0, r0) = (c0 as isize, r0 as isize);
            *v = (1.0 - fy) * ((1.0 - fx) * at(r0, c0) + fx * at(r0, c0 + 1))
                + fy * ((1.0 - fx) * at(r0 + 1, c0) + fx * at(r0 + 1, c0 + 1));
        }
    }
    Image::from_vec(size, out).expect("finite")
}

/// Integer translation moving content by `(ds, dt)`; pixels leaving the grid
/// are dropped.
pub fn translate(image: &Image, ds: i32, dt: i32) -> Image {
    let size = image.size() as isize;
    let src = image.pixels();
    let mut out = Array2::zeros((size as usize, size as usize));
    for ((r, c), v) in out.indexed_iter_mut() {
        let (sr, sc) = (r as isize - dt as isize, c as isize - ds as isize);
        if sr >= 0 && sc >= 0 && sr < size && sc < size {
            *v = src[[sr as usize, sc as usize]];
        }
    }
    Image::new(out).expect("finite")
}

/// Flip (optional), then rotation, then translation.
pub fn apply_transform(
    image: &Image,
    rotation: f64,
    reflected: bool,
    translation: (i32, i32),
) -> Image {
    let base = if reflected {
        flip_horizontal(image)
    } else {
        image.clone()
    };
    let rotated = if rotation == 0.0 {
        base
    } else {
        rotate(&base, rotation)
    };
    translate(&rotated, translation.0, translation.1)
}
