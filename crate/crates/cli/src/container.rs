//! Binary dataset (`UVT1`) and image (`UVTI`) containers.
//!
//! Everything is little-endian. A dataset is a fixed 36-byte header, the
//! noisy sinogram as `N x S` row-major `f64`, and optionally a truth block:
//! the `S x S` image, `N` angles, `N` image shift pairs `(i32, i32)` and the
//! clean sinogram.

use std::path::Path;

use uvt::geometry::{Image, Sinogram};
use uvt::simulate::{empirical_sigma, DistortionConfig, GroundTruth};

use crate::error::{CliError, Result};
use crate::fsutil::{read_file, write_atomic};

pub const DATASET_MAGIC: &[u8; 4] = b"UVT1";
pub const IMAGE_MAGIC: &[u8; 4] = b"UVTI";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 36;

pub const FLAG_HAS_TRUTH: u16 = 1;
/// The truth image was scaled to `[0, 1]` before projection.
pub const FLAG_NORMALIZED: u16 = 1 << 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub version: u16,
    pub size: u32,
    pub count: u32,
    pub flags: u16,
    pub gamma: f64,
    pub max_shift: i32,
    pub seed: u64,
}

impl Header {
    pub fn has_truth(&self) -> bool {
        self.flags & FLAG_HAS_TRUTH != 0
    }

    pub fn normalized(&self) -> bool {
        self.flags & FLAG_NORMALIZED != 0
    }

    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(DATASET_MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.size.to_le_bytes());
        out.extend_from_slice(&self.count.to_le_bytes());
        out.extend_from_slice(&self.flags.to_le_bytes());
        out.extend_from_slice(&self.gamma.to_le_bytes());
        out.extend_from_slice(&self.max_shift.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthBlock {
    pub image: Image,
    pub angles: Vec<f64>,
    pub image_shifts: Vec<(i32, i32)>,
    pub clean: Sinogram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: Header,
    pub noisy: Sinogram,
    pub truth: Option<TruthBlock>,
}

impl Dataset {
    pub fn from_ground_truth(gt: &GroundTruth, normalized: bool) -> Self {
        let mut flags = FLAG_HAS_TRUTH;
        if normalized {
            flags |= FLAG_NORMALIZED;
        }
        Dataset {
            header: Header {
                version: VERSION,
                size: gt.noisy.size() as u32,
                count: gt.noisy.count() as u32,
                flags,
                gamma: gt.config.gamma,
                max_shift: gt.config.max_shift,
                seed: gt.config.seed,
            },
            noisy: gt.noisy.clone(),
            truth: Some(TruthBlock {
                image: gt.image.clone(),
                angles: gt.angles.clone(),
                image_shifts: gt.image_shifts.clone(),
                clean: gt.clean.clone(),
            }),
        }
    }

    /// The simulation record, when the truth block is present. `sigma` is
    /// recomputed from the clean sinogram.
    pub fn ground_truth(&self) -> Result<Option<GroundTruth>> {
        let Some(t) = &self.truth else {
            return Ok(None);
        };
        let config = DistortionConfig {
            n: self.header.count as usize,
            max_shift: self.header.max_shift,
            gamma: self.header.gamma,
            seed: self.header.seed,
        };
        Ok(Some(GroundTruth {
            image: t.image.clone(),
            angles: t.angles.clone(),
            image_shifts: t.image_shifts.clone(),
            clean: t.clean.clone(),
            noisy: self.noisy.clone(),
            sigma: empirical_sigma(&t.clean, self.header.gamma)?,
            config,
        }))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (n, s) = (self.noisy.count(), self.noisy.size());
        let mut header = self.header;
        header.flags = if self.truth.is_some() {
            header.flags | FLAG_HAS_TRUTH
        } else {
            header.flags & !FLAG_HAS_TRUTH
        };
        let truth_len = if self.truth.is_some() {
            8 * (s * s + n + n * s) + 8 * n
        } else {
            0
        };
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * n * s + truth_len);
        header.encode(&mut out);
        put_f64s(&mut out, self.noisy.as_slice());
        if let Some(t) = &self.truth {
            put_f64s(&mut out, t.image.as_slice());
            put_f64s(&mut out, &t.angles);
            for &(a, b) in &t.image_shifts {
                out.extend_from_slice(&a.to_le_bytes());
                out.extend_from_slice(&b.to_le_bytes());
            }
            put_f64s(&mut out, t.clean.as_slice());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |msg: String| CliError::format(path, msg);
        if bytes.len() < HEADER_LEN {
            return Err(bad(format!(
                "file too short for a header ({} bytes)",
                bytes.len()
            )));
        }
        if &bytes[..4] != DATASET_MAGIC {
            return Err(bad("bad magic, expected UVT1".into()));
        }
        let mut r = Reader::new(&bytes[4..]);
        let header = Header {
            version: r.u16(),
            size: r.u32(),
            count: r.u32(),
            flags: r.u16(),
            gamma: r.f64(),
            max_shift: r.i32(),
            seed: r.u64(),
        };
        if header.version != VERSION {
            return Err(bad(format!("unsupported version {}", header.version)));
        }
        if header.flags & !(FLAG_HAS_TRUTH | FLAG_NORMALIZED) != 0 {
            return Err(bad(format!("unknown flag bits {:#06x}", header.flags)));
        }
        let (n, s) = (header.count as usize, header.size as usize);
        if n == 0 || s == 0 {
            return Err(bad("empty sinogram".into()));
        }
        let mut expected = HEADER_LEN as u128 + 8 * (n * s) as u128;
        if header.has_truth() {
            expected += 8 * (s * s + n + n * s) as u128 + 8 * n as u128;
        }
        if bytes.len() as u128 != expected {
            return Err(bad(format!(
                "payload length {} does not match the header (expected {expected})",
                bytes.len()
            )));
        }
        let mut r = Reader::new(&bytes[HEADER_LEN..]);
        let noisy = Sinogram::from_flat(n, s, r.f64s(n * s)).map_err(|e| bad(e.to_string()))?;
        let truth = if header.has_truth() {
            let image = Image::from_vec(s, r.f64s(s * s)).map_err(|e| bad(e.to_string()))?;
            let angles = r.f64s(n);
            let image_shifts = (0..n).map(|_| (r.i32(), r.i32())).collect();
            let clean = Sinogram::from_flat(n, s, r.f64s(n * s)).map_err(|e| bad(e.to_string()))?;
            Some(TruthBlock {
                image,
                angles,
                image_shifts,
                clean,
            })
        } else {
            None
        };
        Ok(Dataset {
            header,
            noisy,
            truth,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }
}

/// `UVTI`, version, `S`, then `S x S` row-major `f64`.
pub fn image_to_bytes(image: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(10 + 8 * image.as_slice().len());
    out.extend_from_slice(IMAGE_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(image.size() as u32).to_le_bytes());
    put_f64s(&mut out, image.as_slice());
    out
}

pub fn image_from_bytes(bytes: &[u8], path: &Path) -> Result<Image> {
    let bad = |msg: String| CliError::format(path, msg);
    if bytes.len() < 10 || &bytes[..4] != IMAGE_MAGIC {
        return Err(bad("not a UVTI image".into()));
    }
    let mut r = Reader::new(&bytes[4..]);
    let version = r.u16();
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let s = r.u32() as usize;
    if bytes.len() as u128 != 10 + 8 * (s as u128) * (s as u128) {
        return Err(bad(format!("payload length does not match size {s}")));
    }
    Image::from_vec(s, r.f64s(s * s)).map_err(|e| bad(e.to_string()))
}

pub fn read_image(path: &Path) -> Result<Image> {
    image_from_bytes(&read_file(path)?, path)
}

pub fn write_image(path: &Path, image: &Image) -> Result<()> {
    write_atomic(path, &image_to_bytes(image))
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Cursor over a buffer whose length was validated up front.
struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take<const K: usize>(&mut self) -> [u8; K] {
        let out = self.buf[self.pos..self.pos + K]
            .try_into()
            .expect("length checked");
        self.pos += K;
        out
    }

    fn u16(&mut self) -> u16 {
        u16::from_le_bytes(self.take())
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn i32(&mut self) -> i32 {
        i32::from_le_bytes(self.take())
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }

    fn f64s(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.f64()).collect()
    }
}
