//! 16-bit grayscale previews.

use std::path::{Path, PathBuf};

use uvt::geometry::Image;

use crate::error::Result;
use crate::fsutil::write_atomic;

/// Min-max scales `image` to `0..=65535` as binary (`P5`) PGM with
/// big-endian samples. Returns the bytes
/// and the `(min, max)` used; a constant image maps to zero.
pub fn encode_pgm16(image: &Image) -> (Vec<u8>, (f64, f64)) {
    let (lo, hi) = (image.min(), image.max());
    let span = hi - lo;
    let s = image.size() as u32;
    let mut out = format!("P5\n{s} {s}\n65535\n").into_bytes();
    out.extend(
        image
            .as_slice()
            .iter()
            .map(|&v| {
                if span > 0.0 {
                    ((v - lo) / span * 65535.0).round() as u16
                } else {
                    0
                }
            })
            .flat_map(u16::to_be_bytes),
    );
    (out, (lo, hi))
}

/// Writes `path` and a `<path>.txt` sidecar holding the scaling.
pub fn write_pgm16(path: &Path, image: &Image) -> Result<PathBuf> {
    let (bytes, (lo, hi)) = encode_pgm16(image);
    write_atomic(path, &bytes)?;
    let mut side = path.as_os_str().to_owned();
    side.push(".txt");
    let side = PathBuf::from(side);
    let text = format!("scaling=min-max\nmin={lo}\nmax={hi}\nmaxval=65535\n");
    write_atomic(&side, text.as_bytes())?;
    Ok(side)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_scaling() {
        let img = Image::from_vec(2, vec![-1.0, 0.0, 0.5, 1.0]).unwrap();
        let (bytes, (lo, hi)) = encode_pgm16(&img);
        assert_eq!((lo, hi), (-1.0, 1.0));
        assert!(bytes.starts_with(b"P5"));
        let text = String::from_utf8_lossy(&bytes[..16]);
        assert!(text.contains("65535"), "{text}");
        // Big-endian samples at the end: 0 and 65535 at the extremes.
        let tail = &bytes[bytes.len() - 8..];
        assert_eq!(&tail[..2], &[0, 0]);
        assert_eq!(&tail[6..], &[255, 255]);
    }
}
