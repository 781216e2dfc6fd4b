use std::f64::consts::TAU;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::metrics::correlation;
use super::transform::{apply_transform, flip_horizontal, rotate, translate};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Image};

const COARSE_STEP_DEG: f64 = 1.0;
const FINE_STEP_DEG: f64 = 0.1;
const FINE_SPAN_DEG: f64 = 1.0;
/// Coarse candidates carried from the decimated search to full resolution.
const COARSE_KEEP: usize = 3;
/// Below this side length the coarse search runs at full resolution.
const DECIMATE_ABOVE: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentResult {
    /// Counterclockwise rotation in `[0, 2pi)`, applied after the flip.
    pub rotation: f64,
    /// Whether the columns were mirrored first.
    pub reflected: bool,
    /// Integer `(ds, dt)` translation applied last.
    pub translation: (i32, i32),
    pub aligned_image: Image,
    /// Correlation of the aligned image with the reference.
    pub cc: f64,
}

/// Integer translation estimation by the peak of the zero-padded
/// cross-correlation against a fixed reference.
struct Correlator {
    size: usize,
    padded: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    reference: Vec<Complex<f64>>,
}

impl Correlator {
    fn new(reference: &Image) -> Self {
        let size = reference.size();
        let padded = (2 * size).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(padded);
        let inverse = planner.plan_fft_inverse(padded);
        let mut c = Correlator {
            size,
            padded,
            forward,
            inverse,
            reference: Vec::new(),
        };
        c.reference = c.spectrum(reference);
        c
    }

    fn spectrum(&self, img: &Image) -> Vec<Complex<f64>> {
        let p = self.padded;
        let mut buf = vec![Complex::new(0.0, 0.0); p * p];
        for (r, line) in img.as_slice().chunks(self.size).enumerate() {
            for (c, &v) in line.iter().enumerate() {
                buf[r * p + c].re = v;
            }
        }
        self.fft2(&mut buf, &*self.forward);
        buf
    }

    fn fft2(&self, buf: &mut [Complex<f64>], fft: &dyn Fft<f64>) {
        let p = self.padded;
        for row in buf.chunks_mut(p) {
            fft.process(row);
        }
        let mut col = vec![Complex::new(0.0, 0.0); p];
        for c in 0..p {
            for r in 0..p {
                col[r] = buf[r * p + c];
            }
            fft.process(&mut col);
            for r in 0..p {
                buf[r * p + c] = col[r];
            }
        }
    }

    /// Translation `d` maximizing `sum_x ref(x) img(x - d)`. Ties go to the
    /// first peak in row-major order of `(dt, ds)` starting from zero.
    fn best_shift(&self, img: &Image) -> (i32, i32) {
        let p = self.padded;
        let mut spec = self.spectrum(img);
        for (s, r) in spec.iter_mut().zip(&self.reference) {
            *s = r * s.conj();
        }
        self.fft2(&mut spec, &*self.inverse);
        let limit = self.size as isize / 2;
        let wrap = |i: usize| -> isize {
            if i >= p / 2 {
                i as isize - p as isize
            } else {
                i as isize
            }
        };
        let mut best = (0, 0);
        let mut best_val = f64::NEG_INFINITY;
        for r in 0..p {
            let dt = wrap(r);
            if dt.abs() > limit {
                continue;
            }
            for c in 0..p {
                let ds = wrap(c);
                if ds.abs() > limit {
                    continue;
                }
                let v = spec[r * p + c].re;
                if v > best_val {
                    best_val = v;
                    best = (ds as i32, dt as i32);
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    rotation: f64,
    reflected: bool,
    translation: (i32, i32),
    cc: f64,
}

fn evaluate(
    base: &Image,
    rotation: f64,
    reflected: bool,
    truth: &Image,
    corr: &Correlator,
) -> Candidate {
    let rotated = rotate(base, rotation);
    let translation = corr.best_shift(&rotated);
    let moved = translate(&rotated, translation.0, translation.1);
    let cc = correlation(&moved, truth).unwrap_or(f64::NEG_INFINITY);
    Candidate {
        rotation: wrap_angle(rotation),
        reflected,
        translation,
        cc,
    }
}

/// Picks the best candidate; ties go to the smaller rotation, identity
/// before flip.
fn best_of(cands: &[Candidate]) -> Candidate {
    let mut best = cands[0];
    for &c in &cands[1..] {
        let better = c.cc > best.cc
            || (c.cc == best.cc
                && (c.rotation < best.rotation
                    || (c.rotation == best.rotation && !c.reflected && best.reflected)));
        if better {
            best = c;
        }
    }
    best
}

fn decimate(img: &Image) -> Image {
    let half = img.size() / 2;
    let px = img.pixels();
    let data = (0..half * half)
        .map(|i| {
            let (r, c) = (2 * (i / half), 2 * (i % half));
            0.25 * (px[[r, c]] + px[[r + 1, c]] + px[[r, c + 1]] + px[[r + 1, c + 1]])
        })
        .collect();
    Image::from_vec(half, data).expect("finite")
}

fn refine(
    recon: &Image,
    truth: &Image,
    corr: &Correlator,
    starts: &[(f64, bool)],
    span_deg: f64,
    step_deg: f64,
) -> Candidate {
    let flipped = flip_horizontal(recon);
    let steps = (span_deg / step_deg).round() as i64;
    let grid: Vec<(f64, bool)> = starts
        .iter()
        .flat_map(|&(rot, refl)| {
            (-steps..=steps).map(move |k| (rot + (k as f64 * step_deg).to_radians(), refl))
        })
        .collect();
    let cands: Vec<Candidate> = grid
        .par_iter()
        .map(|&(rot, refl)| {
            let base = if refl { &flipped } else { recon };
            evaluate(base, rot, refl, truth, corr)
        })
        .collect();
    best_of(&cands)
}

fn finish(recon: &Image, best: Candidate) -> AlignmentResult {
    let aligned_image = apply_transform(recon, best.rotation, best.reflected, best.translation);
    AlignmentResult {
        rotation: best.rotation,
        reflected: best.reflected,
        translation: best.translation,
        aligned_image,
        cc: best.cc,
    }
}

/// Aligns `recon` to `truth` over rotation, reflection and integer
/// translation, maximizing the correlation coefficient.
///
/// Rotations are searched exhaustively on a 1 degree grid for both
/// orientations (on 2x decimated images when `S > 64`, carrying the best
/// three candidates to full resolution), then refined at 0.1 degree over
/// +-1 degree. Every candidate rotation gets its own cross-correlation
/// translation.
pub fn align(recon: &Image, truth: &Image) -> Result<AlignmentResult> {
    if recon.size() != truth.size() {
        return Err(Error::invalid(format!(
            "image sizes differ: {} vs {}",
            recon.size(),
            truth.size()
        )));
    }
    let corr = Correlator::new(truth);
    let coarse_n = (360.0 / COARSE_STEP_DEG).round() as usize;
    let grid: Vec<(f64, bool)> = [false, true]
        .iter()
        .flat_map(|&refl| {
            (0..coarse_n).map(move |k| ((k as f64 * COARSE_STEP_DEG).to_radians(), refl))
        })
        .collect();

    let starts: Vec<(f64, bool)> = if recon.size() > DECIMATE_ABOVE && recon.size() % 2 == 0 {
        let (small_recon, small_truth) = (decimate(recon), decimate(truth));
        let small_flipped = flip_horizontal(&small_recon);
        let small_corr = Correlator::new(&small_truth);
        let mut cands: Vec<Candidate> = grid
            .par_iter()
            .map(|&(rot, refl)| {
                let base = if refl { &small_flipped } else { &small_recon };
                evaluate(base, rot, refl, &small_truth, &small_corr)
            })
            .collect();
        cands.sort_by(|a, b| b.cc.total_cmp(&a.cc));
        cands
            .iter()
            .take(COARSE_KEEP)
            .map(|c| (c.rotation, c.reflected))
            .collect()
    } else {
        let best = refine(recon, truth, &corr, &grid, 0.0, COARSE_STEP_DEG);
        vec![(best.rotation, best.reflected)]
    };
    // Full-resolution pass over the kept coarse rotations and their
    // 0.1 degree neighbourhoods.
    let best = refine(recon, truth, &corr, &starts, FINE_SPAN_DEG, FINE_STEP_DEG);
    Ok(finish(recon, best))
}

/// Local alignment around a known orientation: rotations within
/// `span_deg` of `rotation` at `step_deg`, fixed reflection.
pub fn align_near(
    recon: &Image,
    truth: &Image,
    rotation: f64,
    reflected: bool,
    span_deg: f64,
    step_deg: f64,
) -> Result<AlignmentResult> {
    if recon.size() != truth.size() {
        return Err(Error::invalid("image sizes differ"));
    }
    if !(step_deg > 0.0) || !(span_deg >= 0.0) {
        return Err(Error::invalid("alignment span and step must be positive"));
    }
    let corr = Correlator::new(truth);
    let best = refine(
        recon,
        truth,
        &corr,
        &[(rotation, reflected)],
        span_deg,
        step_deg,
    );
    Ok(finish(recon, best))
}

/// Orientation that undoes a global angle offset: the reconstruction from
/// angles `theta + phi` (or `phi - theta` when reflected) is the truth
/// rotated by `phi` (or flipped, then rotated by `phi - pi`).
pub fn orientation_from_angles(angle_rotation: f64, reflected: bool) -> (f64, bool) {
    if reflected {
        (wrap_angle(angle_rotation - std::f64::consts::PI), true)
    } else {
        (wrap_angle(TAU - angle_rotation), false)
    }
}
