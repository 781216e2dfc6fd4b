//! Three-way alternating minimization over detector shifts, the image and
//! the view angles.
//!
//! Each iteration runs, in this order:
//! 1. shifts: `a_i = argmax_k y_i . shift_k(P_{theta_i} f)`,
//! 2. image: FBP of the unshifted rows at the previous angles,
//! 3. angles: a local grid search minimizing `|y_i - shift_{a_i}(P_theta f)|^2`.
//!
//! Iteration stops after `max_iter` rounds or once the image changes by
//! less than the tolerance.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{align, angle_error, metrics, shift_error};
use crate::geometry::{
    fbp_with, project, shift_projection, wrap_angle, FbpOptions, GeometryEstimate, Image, Sinogram,
};
use crate::graphinit::{best_shift_slices, shifted_dist2, shifted_dot};
use crate::simulate::GroundTruth;

/// Stopping tolerance on `|f_t - f_{t-1}|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    /// Fraction of the first iterate's norm.
    Relative(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AltMinConfig {
    pub max_iter: usize,
    /// Angle grid step in radians.
    pub delta: f64,
    /// Candidate angles per projection (odd).
    pub trials: usize,
    pub epsilon: Tolerance,
    pub k_max: usize,
    pub fbp: FbpOptions,
    /// Keep a copy of the image every this many iterations.
    pub snapshot_every: Option<usize>,
}

impl AltMinConfig {
    /// Defaults with the given shift search range.
    pub fn with_k_max(k_max: usize) -> Self {
        AltMinConfig {
            max_iter: 30,
            delta: 0.5f64.to_radians(),
            trials: 11,
            epsilon: Tolerance::Relative(1e-3),
            k_max,
            fbp: FbpOptions::default(),
            snapshot_every: None,
        }
    }

    /// `2M` when the shift bound is known, `S/8` otherwise.
    pub fn default_k_max(max_shift: Option<i32>, size: usize) -> usize {
        match max_shift {
            Some(m) => (2 * m.max(0) as usize).min(size / 2),
            None => size / 8,
        }
    }

    pub fn validate(&self, size: usize) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::Configuration("need at least one iteration".into()));
        }
        if self.trials == 0 || self.trials % 2 == 0 {
            return Err(Error::Configuration(format!(
                "angle trials must be odd, got {}",
                self.trials
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Configuration(format!(
                "angle step must be positive, got {}",
                self.delta
            )));
        }
        let eps = match self.epsilon {
            Tolerance::Relative(e) | Tolerance::Absolute(e) => e,
        };
        if !(eps >= 0.0) {
            return Err(Error::Configuration(format!(
                "tolerance must be >= 0, got {eps}"
            )));
        }
        if self.k_max > size / 2 {
            return Err(Error::Configuration(format!(
                "shift range {} exceeds half the detector ({})",
                self.k_max,
                size / 2
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Shift,
    Image,
    Angle,
}

impl Step {
    pub fn name(self) -> &'static str {
        match self {
            Step::Shift => "shift",
            Step::Image => "fbp",
            Step::Angle => "angle",
        }
    }
}

/// Ground-truth comparison of one iterate, after global alignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthMetrics {
    pub rrmse: f64,
    pub ssim: f64,
    pub cc: f64,
    pub mean_angle_err_deg: f64,
    pub mean_shift_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// SHA-256 of the little-endian pixel bytes.
    pub image_hash: String,
    pub image_delta: f64,
    /// `sum_i y_i . shift_{a_i}(P f_{t-1})` before and after the shift step.
    pub shift_score_before: f64,
    pub shift_score_after: f64,
    /// Summed angle loss at the current angles and at the selected ones.
    pub angle_loss_current: f64,
    pub angle_loss_best: f64,
    /// Projections whose best candidate sits at either end of the grid.
    pub edge_hits: usize,
    pub truth: Option<TruthMetrics>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    /// `(iteration, step)` in execution order.
    pub steps: Vec<(usize, Step)>,
    pub warnings: Vec<String>,
    pub converged: bool,
    pub tolerance: f64,
    pub snapshots: Vec<(usize, Image)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AltMinResult {
    pub image: Image,
    pub geometry: GeometryEstimate,
    pub trace: IterationTrace,
}

/// Hex SHA-256 of an image's pixels.
pub fn image_hash(image: &Image) -> String {
    let mut h = Sha256::new();
    for v in image.as_slice() {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn check_geometry(sino: &Sinogram, angles: &[f64]) -> Result<()> {
    if angles.len() != sino.count() {
        return Err(Error::invalid(format!(
            "{} angles for {} projections",
            angles.len(),
            sino.count()
        )));
    }
    Ok(())
}

fn reprojections(image: &Image, angles: &[f64]) -> Result<Vec<Vec<f64>>> {
    angles
        .par_iter()
        .map(|&a| Ok(project(image, a)?.as_slice().to_vec()))
        .collect()
}

/// Per-projection shift maximizing `y_i . shift_k(P_{theta_i} image)`.
pub fn estimate_shifts(
    sino: &Sinogram,
    image: &Image,
    angles: &[f64],
    k_max: usize,
) -> Result<Vec<i32>> {
    check_geometry(sino, angles)?;
    if image.size() != sino.size() {
        return Err(Error::invalid("image and detector sizes differ"));
    }
    if k_max > sino.size() / 2 {
        return Err(Error::invalid("shift range exceeds half the detector"));
    }
    let reproj = reprojections(image, angles)?;
    Ok(reproj
        .par_iter()
        .enumerate()
        .map(|(i, r)| best_shift_slices(sino.row_slice(i), r, k_max as i32))
        .collect())
}

fn shift_score(sino: &Sinogram, reproj: &[Vec<f64>], shifts: &[i32]) -> f64 {
    reproj
        .iter()
        .enumerate()
        .map(|(i, r)| shifted_dot(sino.row_slice(i), r, shifts[i]))
        .sum()
}

/// Unshifts each row by its estimate and reconstructs at `angles`.
pub fn reconstruct_step(
    sino: &Sinogram,
    shifts: &[i32],
    angles: &[f64],
    fbp: &FbpOptions,
) -> Result<Image> {
    check_geometry(sino, angles)?;
    if shifts.len() != sino.count() {
        return Err(Error::invalid("one shift per projection required"));
    }
    let rows = (0..sino.count())
        .map(|i| shift_projection(&sino.projection(i), -shifts[i]))
        .collect::<Result<Vec<_>>>()?;
    fbp_with(&Sinogram::from_projections(&rows)?, angles, fbp)
}

/// Outcome of the angle step.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleUpdate {
    pub angles: Vec<f64>,
    /// Index of the chosen candidate per projection.
    pub chosen: Vec<usize>,
    pub loss_current: f64,
    pub loss_best: f64,
    pub edge_hits: usize,
}

/// Candidate angle `j` of the grid around `theta`.
pub fn candidate_angle(theta: f64, delta: f64, trials: usize, j: usize) -> f64 {
    theta + delta * (j as f64 - (trials / 2) as f64)
}

/// Loss `|y - shift_a(P_theta image)|^2` of one candidate.
pub fn candidate_loss(y: &[f64], image: &Image, theta: f64, shift: i32) -> Result<f64> {
    let r = project(image, theta)?;
    Ok(shifted_dist2(y, r.as_slice(), shift))
}

/// Grid search of `trials` angles spaced `delta` around each current angle.
/// Ties go to the candidate closest to the current angle, then the smaller
/// index.
pub fn update_angles(
    sino: &Sinogram,
    image: &Image,
    angles: &[f64],
    shifts: &[i32],
    delta: f64,
    trials: usize,
) -> Result<AngleUpdate> {
    check_geometry(sino, angles)?;
    if shifts.len() != sino.count() {
        return Err(Error::invalid("one shift per projection required"));
    }
    if trials == 0 || trials % 2 == 0 {
        return Err(Error::invalid(format!("trials must be odd, got {trials}")));
    }
    let center = trials / 2;
    let per: Vec<(usize, f64, f64)> = (0..sino.count())
        .into_par_iter()
        .map(|i| {
            let y = sino.row_slice(i);
            let losses = (0..trials)
                .map(|j| {
                    candidate_loss(
                        y,
                        image,
                        candidate_angle(angles[i], delta, trials, j),
                        shifts[i],
                    )
                })
                .collect::<Result<Vec<f64>>>()?;
            // Visit center, center-1, center+1, ... and keep strict improvements.
            let mut best = center;
            for d in 1..=center {
                for j in [center - d, center + d] {
                    if losses[j] < losses[best] {
                        best = j;
                    }
                }
            }
            Ok((best, losses[center], losses[best]))
        })
        .collect::<Result<_>>()?;
    let chosen: Vec<usize> = per.iter().map(|p| p.0).collect();
    Ok(AngleUpdate {
        angles: chosen
            .iter()
            .zip(angles)
            .map(|(&j, &a)| wrap_angle(candidate_angle(a, delta, trials, j)))
            .collect(),
        loss_current: per.iter().map(|p| p.1).sum(),
        loss_best: per.iter().map(|p| p.2).sum(),
        edge_hits: if trials > 1 {
            chosen
                .iter()
                .filter(|&&j| j == 0 || j == trials - 1)
                .count()
        } else {
            0
        },
        chosen,
    })
}

/// Ground-truth metrics of an iterate: images are compared after a full
/// rotation/reflection/translation search.
pub fn truth_metrics(
    image: &Image,
    angles: &[f64],
    shifts: &[i32],
    truth: &GroundTruth,
) -> Result<TruthMetrics> {
    let aligned = align(image, &truth.image)?;
    let m = metrics(&aligned.aligned_image, &truth.image)?;
    let ae = angle_error(angles, &truth.angles)?;
    let se = shift_error(angles, shifts, &truth.projection_shifts())?;
    Ok(TruthMetrics {
        rrmse: m.rrmse,
        ssim: m.ssim,
        cc: m.cc,
        mean_angle_err_deg: ae.mean_deg,
        mean_shift_err: se.mean_abs,
    })
}

/// Runs the alternating minimization from `init`.
pub fn run_altmin(
    sino: &Sinogram,
    init: &GeometryEstimate,
    cfg: &AltMinConfig,
    truth: Option<&GroundTruth>,
) -> Result<AltMinResult> {
    cfg.validate(sino.size())?;
    check_geometry(sino, init.angles())?;
    init.validate_for(sino.size())?;
    let mut trace = IterationTrace::default();
    if init.shifts().iter().any(|&k| k != 0) {
        trace
            .warnings
            .push("initial shifts are not all zero".to_string());
    }

    let mut angles = init.angles().to_vec();
    let mut shifts = init.shifts().to_vec();
    let mut image = reconstruct_step(sino, &shifts, &angles, &cfg.fbp)?;
    let mut tolerance = match cfg.epsilon {
        Tolerance::Absolute(e) => Some(e),
        Tolerance::Relative(_) => None,
    };

    for t in 1..=cfg.max_iter {
        let reproj = reprojections(&image, &angles)?;
        let score_before = shift_score(sino, &reproj, &shifts);
        shifts = reproj
            .par_iter()
            .enumerate()
            .map(|(i, r)| best_shift_slices(sino.row_slice(i), r, cfg.k_max as i32))
            .collect();
        let score_after = shift_score(sino, &reproj, &shifts);
        trace.steps.push((t, Step::Shift));

        let next = reconstruct_step(sino, &shifts, &angles, &cfg.fbp)?;
        trace.steps.push((t, Step::Image));
        let delta = next.distance(&image);
        image = next;
        let tol = *tolerance.get_or_insert_with(|| match cfg.epsilon {
            Tolerance::Relative(r) => r * image.norm(),
            Tolerance::Absolute(e) => e,
        });

        let upd = update_angles(sino, &image, &angles, &shifts, cfg.delta, cfg.trials)?;
        angles = upd.angles;
        trace.steps.push((t, Step::Angle));
        if upd.edge_hits > 0 {
            trace.warnings.push(format!(
                "iteration {t}: {} projections chose an edge of the angle grid",
                upd.edge_hits
            ));
        }

        let truth_m = match truth {
            Some(gt) => match truth_metrics(&image, &angles, &shifts, gt) {
                Ok(m) => Some(m),
                Err(e) if e.is_numerical() => {
                    trace
                        .warnings
                        .push(format!("iteration {t}: metrics unavailable: {e}"));
                    None
                }
                Err(e) => return Err(e),
            },
            None => None,
        };
        trace.records.push(IterationRecord {
            iteration: t,
            image_hash: image_hash(&image),
            image_delta: delta,
            shift_score_before: score_before,
            shift_score_after: score_after,
            angle_loss_current: upd.loss_current,
            angle_loss_best: upd.loss_best,
            edge_hits: upd.edge_hits,
            truth: truth_m,
        });
        if let Some(k) = cfg.snapshot_every {
            if k > 0 && t % k == 0 {
                trace.snapshots.push((t, image.clone()));
            }
        }
        if delta < tol {
            trace.converged = true;
            break;
        }
    }
    trace.tolerance = tolerance.unwrap_or(0.0);
    Ok(AltMinResult {
        image,
        geometry: GeometryEstimate::new(angles, shifts)?,
        trace,
    })
}
