//! Moment-based angle and shift recovery.
//!
//! The first moment of a projection locates its centroid, which absorbs the
//! unknown detector shift. Centered second moments satisfy
//! `m2(theta) / m0 = A c^2 + 2B cs + C s^2` with `(A, B, C)` the normalized
//! central second moments of the image, which pins `theta` down to two
//! mirror-image candidates modulo `pi`. Third moments,
//! `m3(theta) / m0 = (mu30 c^3 + 3 mu21 c^2 s + 3 mu12 c s^2 + mu03 s^3) / M`,
//! then choose among the candidates and their `theta + pi` partners. The
//! image moments come from four noiseless reference projections at
//! `0, pi/4, pi/2, 3pi/4`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::circular_diff;
use crate::geometry::{
    center_offset, project, wrap_angle, GeometryEstimate, Image, Projection, Sinogram,
};

/// Reference view angles.
pub const REFERENCE_ANGLES: [f64; 4] = [0.0, FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4];

/// Slack, in squared bins, before a second moment counts as infeasible.
/// Covers the angle-dependent jitter of the detector spread.
const RANGE_SLACK: f64 = 0.05;

/// Standardized skewness below which third moments carry no parity signal.
const SKEW_TOL: f64 = 1e-2;

/// Variance the detector adds to a projection of point-mass pixels.
///
/// Off the axes each pixel's unit-area footprint contributes `1/12` and bin
/// integration another `1/12`. At multiples of `pi/2` a pixel maps exactly
/// onto one bin and nothing is added.
pub fn detector_spread(theta: f64) -> f64 {
    if (2.0 * theta).sin().abs() < 1e-9 {
        0.0
    } else {
        1.0 / 6.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionMoments {
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    /// `m1 / m0` in detector coordinates.
    pub centroid: f64,
    /// Moments about the centroid.
    pub centered2: f64,
    pub centered3: f64,
}

/// Raw and centered moments over bin-center coordinates
/// `rho_j = j - (S-1)/2`.
pub fn projection_moments(p: &Projection) -> Result<ProjectionMoments> {
    let h = center_offset(p.len());
    let y = p.as_slice();
    let m0: f64 = y.iter().sum();
    if !(m0 > 0.0) {
        return Err(Error::invalid(format!(
            "projection mass must be positive, got {m0}"
        )));
    }
    let (mut m1, mut m2, mut m3) = (0.0, 0.0, 0.0);
    for (j, &v) in y.iter().enumerate() {
        let r = j as f64 - h;
        m1 += r * v;
        m2 += r * r * v;
        m3 += r * r * r * v;
    }
    let c = m1 / m0;
    let (mut c2, mut c3) = (0.0, 0.0);
    for (j, &v) in y.iter().enumerate() {
        let d = j as f64 - h - c;
        c2 += d * d * v;
        c3 += d * d * d * v;
    }
    Ok(ProjectionMoments {
        m0,
        m1,
        m2,
        m3,
        centroid: c,
        centered2: c2,
        centered3: c3,
    })
}

/// Central image moments (mass weighted) in the `(s, t)` frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageMoments {
    pub mass: f64,
    pub mu20: f64,
    pub mu11: f64,
    pub mu02: f64,
    pub mu30: f64,
    pub mu21: f64,
    pub mu12: f64,
    pub mu03: f64,
}

impl ImageMoments {
    /// Predicted `m2 / m0` at `theta`.
    pub fn second(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        (self.mu20 * c * c + 2.0 * self.mu11 * c * s + self.mu02 * s * s) / self.mass
    }

    /// Predicted `m3 / m0` at `theta`.
    pub fn third(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        (self.mu30 * c * c * c
            + 3.0 * self.mu21 * c * c * s
            + 3.0 * self.mu12 * c * s * s
            + self.mu03 * s * s * s)
            / self.mass
    }

    /// `((A + C) / 2, R, phi)` with `m2 / m0 = mean + R cos(2 theta - phi)`.
    fn second_harmonic(&self) -> (f64, f64, f64) {
        let a = self.mu20 / self.mass;
        let b = self.mu11 / self.mass;
        let c = self.mu02 / self.mass;
        let half = 0.5 * (a - c);
        (0.5 * (a + c), half.hypot(b), b.atan2(half))
    }
}

fn lstsq(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let max = sv.max();
    if !(max > 0.0) || sv.min() <= 1e-10 * max {
        return Err(Error::degenerate("moment system is rank deficient"));
    }
    svd.solve(&b, 0.0)
        .map_err(|e| Error::degenerate(format!("moment solve failed: {e}")))
}

/// Fits image moments to centered projections at known angles (at least
/// four distinct angles modulo `pi`).
pub fn image_moments_from_projections(
    projs: &[Projection],
    angles: &[f64],
) -> Result<ImageMoments> {
    if projs.len() != angles.len() || projs.len() < 4 {
        return Err(Error::invalid(
            "need at least four projections with one angle each",
        ));
    }
    let moments = projs
        .iter()
        .map(projection_moments)
        .collect::<Result<Vec<_>>>()?;
    let mass = moments.iter().map(|m| m.m0).sum::<f64>() / moments.len() as f64;
    let n = projs.len();
    let a2 = DMatrix::from_fn(n, 3, |i, k| {
        let (s, c) = angles[i].sin_cos();
        [c * c, 2.0 * c * s, s * s][k]
    });
    let a3 = DMatrix::from_fn(n, 4, |i, k| {
        let (s, c) = angles[i].sin_cos();
        [c * c * c, 3.0 * c * c * s, 3.0 * c * s * s, s * s * s][k]
    });
    // Normalize each view by its own mass, then rescale to absolute units.
    let b2 = DVector::from_fn(n, |i, _| {
        (moments[i].centered2 / moments[i].m0 - detector_spread(angles[i])) * mass
    });
    let b3 = DVector::from_fn(n, |i, _| moments[i].centered3 / moments[i].m0 * mass);
    let x2 = lstsq(a2, b2)?;
    let x3 = lstsq(a3, b3)?;
    Ok(ImageMoments {
        mass,
        mu20: x2[0],
        mu11: x2[1],
        mu02: x2[2],
        mu30: x3[0],
        mu21: x3[1],
        mu12: x3[2],
        mu03: x3[3],
    })
}

/// Noiseless projections of `image` at [`REFERENCE_ANGLES`].
pub fn reference_projections(image: &Image) -> Result<[Projection; 4]> {
    let [a, b, c, d] = REFERENCE_ANGLES;
    Ok([
        project(image, a)?,
        project(image, b)?,
        project(image, c)?,
        project(image, d)?,
    ])
}

/// Image moments from projections at [`REFERENCE_ANGLES`].
pub fn image_moments_from_references(refs: &[Projection; 4]) -> Result<ImageMoments> {
    image_moments_from_projections(refs, &REFERENCE_ANGLES)
}

/// Solutions of the second-moment equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidates {
    /// In `[0, 2pi)`; equal when the root is double.
    pub first: f64,
    pub second: f64,
    /// The observed moment was outside the feasible range and was clamped.
    pub clamped: bool,
}

impl Candidates {
    pub fn is_double(&self) -> bool {
        self.first == self.second
    }

    fn list(&self) -> Vec<f64> {
        if self.is_double() {
            vec![self.first]
        } else {
            vec![self.first, self.second]
        }
    }
}

/// Angles (modulo `pi`) whose predicted second moment matches `p`'s.
///
/// With `clamp`, infeasible observations are pulled onto the nearest
/// extreme instead of failing.
pub fn candidate_angles(p: &Projection, im: &ImageMoments, clamp: bool) -> Result<Candidates> {
    let pm = projection_moments(p)?;
    candidates_from_moment(observed_second(&pm), im, clamp)
}

/// Normalized second moment with the generic detector spread removed.
fn observed_second(pm: &ProjectionMoments) -> f64 {
    pm.centered2 / pm.m0 - 1.0 / 6.0
}

fn candidates_from_moment(q: f64, im: &ImageMoments, clamp: bool) -> Result<Candidates> {
    let (mean, r, phi) = im.second_harmonic();
    if !(r > 1e-12 * mean.abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::degenerate(
            "image second moments are isotropic; every angle fits",
        ));
    }
    let mut u = (q - mean) / r;
    let mut clamped = false;
    if u.abs() > 1.0 {
        let beyond = (u.abs() - 1.0) * r > RANGE_SLACK;
        if beyond && !clamp {
            return Err(Error::OutOfRange {
                observed: q,
                min: mean - r,
                max: mean + r,
            });
        }
        clamped = beyond;
        u = u.clamp(-1.0, 1.0);
    }
    let w = u.acos();
    Ok(Candidates {
        first: wrap_angle(0.5 * (phi + w)),
        second: wrap_angle(0.5 * (phi - w)),
        clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub angle: f64,
    /// Third moments cannot tell the candidates apart.
    pub undecidable: bool,
}

/// Picks, among `cands` and their `+pi` partners, the angle whose predicted
/// third moment is closest to `p`'s. Ties go to the earlier candidate.
pub fn disambiguate_third_moment(
    p: &Projection,
    im: &ImageMoments,
    cands: &[f64],
) -> Result<Selection> {
    if cands.is_empty() {
        return Err(Error::invalid("no candidate angles"));
    }
    let pm = projection_moments(p)?;
    Ok(select_by_third(pm.centered3 / pm.m0, im, cands))
}

fn select_by_third(obs: f64, im: &ImageMoments, cands: &[f64]) -> Selection {
    let expanded: Vec<f64> = cands
        .iter()
        .flat_map(|&c| [wrap_angle(c), wrap_angle(c + PI)])
        .collect();
    let errs: Vec<f64> = expanded
        .iter()
        .map(|&t| (im.third(t) - obs).abs())
        .collect();
    let mut best = 0;
    for k in 1..expanded.len() {
        if errs[k] < errs[best] {
            best = k;
        }
    }
    let skew = expanded
        .iter()
        .map(|&t| im.third(t).abs() / im.second(t).max(f64::MIN_POSITIVE).powf(1.5))
        .fold(0.0, f64::max);
    let undecidable = skew < SKEW_TOL;
    Selection {
        angle: expanded[best],
        undecidable,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentsReport {
    pub image_moments: ImageMoments,
    /// Real centroid of each projection.
    pub centroids: Vec<f64>,
    /// Projections whose second moment had to be clamped.
    pub clamped: usize,
    pub undecidable: usize,
    /// Phase of the second-moment harmonic; the reflection pairs `theta`
    /// with `phi - theta`.
    pub phi: f64,
}

/// Full moment pipeline: centroid shifts, image moments from `refs`, and
/// per-projection candidate selection. Shifts are the rounded centroids.
pub fn moment_method_pipeline(
    sino: &Sinogram,
    refs: &[Projection; 4],
) -> Result<(GeometryEstimate, MomentsReport)> {
    let im = image_moments_from_references(refs)?;
    let per: Vec<(ProjectionMoments, Candidates, Selection)> = (0..sino.count())
        .into_par_iter()
        .map(|i| {
            let pm = projection_moments(&sino.projection(i))?;
            let cands = candidates_from_moment(observed_second(&pm), &im, true)?;
            let sel = select_by_third(pm.centered3 / pm.m0, &im, &cands.list());
            Ok((pm, cands, sel))
        })
        .collect::<Result<_>>()?;
    let half = (sino.size() / 2) as f64;
    let shifts = per
        .iter()
        .map(|(pm, _, _)| pm.centroid.round().clamp(-half, half) as i32)
        .collect();
    let angles = per.iter().map(|p| p.2.angle).collect();
    let report = MomentsReport {
        image_moments: im,
        centroids: per.iter().map(|p| p.0.centroid).collect(),
        clamped: per.iter().filter(|p| p.1.clamped).count(),
        undecidable: per.iter().filter(|p| p.2.undecidable).count(),
        phi: im.second_harmonic().2,
    };
    Ok((GeometryEstimate::new(angles, shifts)?, report))
}

/// Which family an estimate falls nearest to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `theta` itself.
    True,
    /// `theta + pi`.
    Parity,
    /// `phi - theta` or `phi - theta + pi`.
    Reflected,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::True => "true",
            Branch::Parity => "parity",
            Branch::Reflected => "reflected",
        }
    }
}

/// Classifies an estimate against the truth for the scatter plot.
pub fn classify_branch(est: f64, truth: f64, phi: f64) -> Branch {
    let d = |a: f64| circular_diff(est, a).abs();
    let dt = d(truth);
    let dp = d(truth + PI);
    let dr = d(phi - truth).min(d(phi - truth + PI));
    if dr < dt.min(dp) {
        Branch::Reflected
    } else if dp < dt {
        Branch::Parity
    } else {
        Branch::True
    }
}

/// Fraction of estimates nearer the reflected family than the true
/// `{theta, theta + pi}` family.
pub fn reflected_fraction(est: &[f64], truth: &[f64], phi: f64) -> Result<f64> {
    if est.is_empty() || est.len() != truth.len() {
        return Err(Error::invalid("need equal nonempty angle lists"));
    }
    let n = est
        .iter()
        .zip(truth)
        .filter(|(&e, &t)| classify_branch(e, t, phi) == Branch::Reflected)
        .count();
    Ok(n as f64 / est.len() as f64)
}
