//! End-to-end reconstruction methods.
//!
//! * `Blind`: no-shift Laplacian initialization, then FBP.
//! * `Ours`: shift-aware initialization, then alternating minimization.
//! * `Oracle`: FBP at the true angles after undoing the rounded true shifts.
//! * `Moments`: moment-based angle and shift estimates, then FBP.

use std::fmt;
use std::str::FromStr;

use crate::altmin::{reconstruct_step, run_altmin, AltMinConfig, IterationTrace};
use crate::error::{Error, Result};
use crate::geometry::{FbpOptions, GeometryEstimate, Image, Sinogram};
use crate::graphinit::{init_geometry_with, InitReport, KappaMode, SimilarityOptions, DEFAULT_KNN};
use crate::moments::{moment_method_pipeline, reference_projections, MomentsReport};
use crate::simulate::GroundTruth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Blind,
    Ours,
    Oracle,
    Moments,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Blind, Method::Ours, Method::Oracle, Method::Moments];

    pub fn name(self) -> &'static str {
        match self {
            Method::Blind => "blind",
            Method::Ours => "ours",
            Method::Oracle => "oracle",
            Method::Moments => "moments",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub kappa: KappaMode,
    pub knn: Option<usize>,
    pub altmin: AltMinConfig,
}

impl PipelineOptions {
    /// Defaults for a detector of `size` bins and, when known, the shift
    /// bound `max_shift`.
    pub fn new(size: usize, max_shift: Option<i32>) -> Self {
        PipelineOptions {
            kappa: KappaMode::default(),
            knn: Some(DEFAULT_KNN),
            altmin: AltMinConfig::with_k_max(AltMinConfig::default_k_max(max_shift, size)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub method: Method,
    pub image: Image,
    pub geometry: GeometryEstimate,
    pub init: Option<InitReport>,
    pub trace: Option<IterationTrace>,
    pub moments: Option<MomentsReport>,
}

fn initial(
    sino: &Sinogram,
    opts: &PipelineOptions,
    k_max: usize,
) -> Result<(GeometryEstimate, InitReport)> {
    init_geometry_with(
        sino,
        &SimilarityOptions {
            kappa: opts.kappa,
            k_max,
            knn: opts.knn,
        },
    )
}

pub fn blind(sino: &Sinogram, opts: &PipelineOptions) -> Result<Reconstruction> {
    let (geom, report) = initial(sino, opts, 0)?;
    let image = reconstruct_step(sino, geom.shifts(), geom.angles(), &opts.altmin.fbp)?;
    Ok(Reconstruction {
        method: Method::Blind,
        image,
        geometry: geom,
        init: Some(report),
        trace: None,
        moments: None,
    })
}

pub fn ours(
    sino: &Sinogram,
    opts: &PipelineOptions,
    truth: Option<&GroundTruth>,
) -> Result<Reconstruction> {
    let (geom, report) = initial(sino, opts, opts.altmin.k_max)?;
    let result = run_altmin(sino, &geom, &opts.altmin, truth)?;
    Ok(Reconstruction {
        method: Method::Ours,
        image: result.image,
        geometry: result.geometry,
        init: Some(report),
        trace: Some(result.trace),
        moments: None,
    })
}

/// True angles and rounded true detector shifts.
pub fn oracle_geometry(truth: &GroundTruth) -> Result<GeometryEstimate> {
    let shifts = truth
        .projection_shifts()
        .iter()
        .map(|a| a.round() as i32)
        .collect();
    GeometryEstimate::new(truth.angles.clone(), shifts)
}

pub fn oracle(truth: &GroundTruth, fbp: &FbpOptions) -> Result<Reconstruction> {
    let geom = oracle_geometry(truth)?;
    let image = reconstruct_step(&truth.noisy, geom.shifts(), geom.angles(), fbp)?;
    Ok(Reconstruction {
        method: Method::Oracle,
        image,
        geometry: geom,
        init: None,
        trace: None,
        moments: None,
    })
}

/// Moment baseline with noiseless references projected from `reference`.
pub fn moments(sino: &Sinogram, reference: &Image, fbp: &FbpOptions) -> Result<Reconstruction> {
    let refs = reference_projections(reference)?;
    let (geom, report) = moment_method_pipeline(sino, &refs)?;
    let image = reconstruct_step(sino, geom.shifts(), geom.angles(), fbp)?;
    Ok(Reconstruction {
        method: Method::Moments,
        image,
        geometry: geom,
        init: None,
        trace: None,
        moments: Some(report),
    })
}

fn require(truth: Option<&GroundTruth>, method: Method) -> Result<&GroundTruth> {
    truth.ok_or_else(|| Error::MissingTruth(format!("{method} requires ground truth")))
}

/// Runs `method`; `Oracle` and `Moments` require ground truth.
pub fn run(
    method: Method,
    sino: &Sinogram,
    opts: &PipelineOptions,
    truth: Option<&GroundTruth>,
) -> Result<Reconstruction> {
    match method {
        Method::Blind => blind(sino, opts),
        Method::Ours => ours(sino, opts, truth),
        Method::Oracle => oracle(require(truth, method)?, &opts.altmin.fbp),
        Method::Moments => moments(sino, &require(truth, method)?.image, &opts.altmin.fbp),
    }
}
