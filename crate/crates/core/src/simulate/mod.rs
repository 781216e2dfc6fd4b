//! Ground-truth phantoms and the distorted measurement model: uniformly
//! random view angles, random integer image-domain shifts applied before
//! projection, and additive Gaussian noise scaled to the clean data.

mod phantom;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::geometry::{project, shift_image, wrap_angle, Image, Sinogram};

pub use phantom::{load_grayscale, make_phantom, PhantomKind, PHANTOM_RADIUS_FRACTION};

// Stream layout of the ChaCha generator. Angles, then shifts, then one
// stream per noisy row.
const ANGLE_STREAM: u64 = 0;
const SHIFT_STREAM: u64 = 1;
const NOISE_STREAM_BASE: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionConfig {
    /// Number of projections.
    pub n: usize,
    /// Largest image shift magnitude per axis, in pixels.
    pub max_shift: i32,
    /// Noise standard deviation as a fraction of the mean absolute clean sample.
    pub gamma: f64,
    pub seed: u64,
}

impl DistortionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::Configuration(format!(
                "need at least 3 projections, got {}",
                self.n
            )));
        }
        if self.max_shift < 0 {
            return Err(Error::Configuration(format!(
                "max shift must be >= 0, got {}",
                self.max_shift
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Configuration(format!(
                "noise fraction must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Checks `S/2 - M - 2 >= support radius` for `image`.
    pub fn check_support(&self, image: &Image) -> Result<()> {
        let margin = image.size() as f64 / 2.0 - self.max_shift as f64 - 2.0;
        let radius = image.support_radius();
        if radius > margin {
            return Err(Error::Configuration(format!(
                "object support radius {radius:.2} exceeds the shift margin {margin:.2} \
                 (S = {}, M = {})",
                image.size(),
                self.max_shift
            )));
        }
        Ok(())
    }
}

/// A simulated acquisition together with everything used to produce it.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub image: Image,
    pub angles: Vec<f64>,
    /// Image-domain shift `(s0, t0)` applied before each projection.
    pub image_shifts: Vec<(i32, i32)>,
    pub clean: Sinogram,
    pub noisy: Sinogram,
    /// The `sigma` actually used for the noise.
    pub sigma: f64,
    pub config: DistortionConfig,
}

impl GroundTruth {
    /// Detector-domain shifts `alpha_i = s0 cos(theta_i) + t0 sin(theta_i)`.
    pub fn projection_shifts(&self) -> Vec<f64> {
        projection_shifts(&self.angles, &self.image_shifts)
    }
}

pub fn projection_shifts(angles: &[f64], image_shifts: &[(i32, i32)]) -> Vec<f64> {
    angles
        .iter()
        .zip(image_shifts)
        .map(|(&a, &(s0, t0))| s0 as f64 * a.cos() + t0 as f64 * a.sin())
        .collect()
}

/// Draws the geometry for `cfg` (angles, then shifts) without projecting.
pub fn draw_geometry(cfg: &DistortionConfig) -> (Vec<f64>, Vec<(i32, i32)>) {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(ANGLE_STREAM);
    let angles = (0..cfg.n)
        .map(|_| wrap_angle(rng.random::<f64>() * TAU))
        .collect();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SHIFT_STREAM);
    let m = cfg.max_shift;
    let shifts = (0..cfg.n)
        .map(|_| {
            let s0 = rng.random_range(-m..=m);
            let t0 = rng.random_range(-m..=m);
            (s0, t0)
        })
        .collect();
    (angles, shifts)
}

/// Produces the clean and noisy sinograms of `image` under `cfg`.
pub fn synthesize(image: &Image, cfg: &DistortionConfig) -> Result<GroundTruth> {
    cfg.validate()?;
    cfg.check_support(image)?;
    let (angles, image_shifts) = draw_geometry(cfg);

    let rows: Vec<Vec<f64>> = angles
        .par_iter()
        .zip(&image_shifts)
        .map(|(&theta, &(s0, t0))| {
            let moved = shift_image(image, s0, t0)?;
            Ok(project(&moved, theta)?.as_slice().to_vec())
        })
        .collect::<Result<_>>()?;
    let size = image.size();
    let clean = Sinogram::new(
        Array2::from_shape_vec((cfg.n, size), rows.concat()).expect("rows have length S"),
    )?;

    let sigma = empirical_sigma(&clean, cfg.gamma)?;
    let noisy = if cfg.gamma == 0.0 {
        clean.clone()
    } else {
        add_noise(&clean, sigma, cfg.seed)?
    };
    Ok(GroundTruth {
        image: image.clone(),
        angles,
        image_shifts,
        clean,
        noisy,
        sigma,
        config: *cfg,
    })
}

/// Adds i.i.d. `N(0, sigma^2)` noise; each row draws from its own stream,
/// so the result does not depend on evaluation order.
pub fn add_noise(clean: &Sinogram, sigma: f64, seed: u64) -> Result<Sinogram> {
    let size = clean.size();
    let rows: Vec<Vec<f64>> = (0..clean.count())
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(NOISE_STREAM_BASE + i as u64);
            clean
                .row_slice(i)
                .iter()
                .map(|&v| v + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    Sinogram::new(Array2::from_shape_vec((clean.count(), size), rows.concat()).expect("shape"))
}

/// `gamma` times the mean absolute sample of `sino`.
pub fn empirical_sigma(sino: &Sinogram, gamma: f64) -> Result<f64> {
    let data = sino.as_slice();
    if data.is_empty() {
        return Err(Error::invalid("empty sinogram"));
    }
    let mean_abs = data.iter().map(|v| v.abs()).sum::<f64>() / data.len() as f64;
    Ok(gamma * mean_abs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, m: i32, gamma: f64) -> DistortionConfig {
        DistortionConfig {
            n,
            max_shift: m,
            gamma,
            seed: 11,
        }
    }

    #[test]
    fn sigma_examples() {
        let ones = Sinogram::new(Array2::from_elem((4, 8), 1.0)).unwrap();
        assert!((empirical_sigma(&ones, 0.05).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(empirical_sigma(&ones, 0.0).unwrap(), 0.0);
        let base =
            Sinogram::new(Array2::from_shape_fn((3, 5), |(i, j)| i as f64 - j as f64)).unwrap();
        let a = empirical_sigma(&base, 0.1).unwrap();
        let b = empirical_sigma(&base.scaled(3.0), 0.1).unwrap();
        assert!((b - 3.0 * a).abs() < 1e-12);
    }

    #[test]
    fn noiseless_keeps_clean() {
        let img = make_phantom(&PhantomKind::SheppLogan, 32).unwrap();
        let gt = synthesize(&img, &cfg(5, 2, 0.0)).unwrap();
        assert_eq!(gt.noisy, gt.clean);
        assert_eq!(gt.sigma, 0.0);
    }

    #[test]
    fn zero_shift_rows_are_plain_projections() {
        let img = make_phantom(&PhantomKind::SheppLogan, 32).unwrap();
        let gt = synthesize(&img, &cfg(6, 0, 0.02)).unwrap();
        assert!(gt.projection_shifts().iter().all(|&a| a == 0.0));
        for (i, &a) in gt.angles.iter().enumerate() {
            assert_eq!(gt.clean.projection(i), project(&img, a).unwrap());
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let img = make_phantom(&PhantomKind::SheppLogan, 32).unwrap();
        let a = synthesize(&img, &cfg(10, 2, 0.05)).unwrap();
        let b = synthesize(&img, &cfg(10, 2, 0.05)).unwrap();
        assert_eq!(a, b);
        let mut other = cfg(10, 2, 0.05);
        other.seed = 12;
        assert_ne!(synthesize(&img, &other).unwrap().angles, a.angles);
    }

    #[test]
    fn support_violation_is_configuration_error() {
        let img = make_phantom(&PhantomKind::SheppLogan, 32).unwrap();
        assert!(matches!(
            synthesize(&img, &cfg(5, 8, 0.0)),
            Err(Error::Configuration(_))
        ));
        assert!(synthesize(&img, &cfg(2, 0, 0.0)).is_err());
        assert!(synthesize(&img, &cfg(5, 0, -1.0)).is_err());
    }

    #[test]
    fn shifts_stay_in_range() {
        let (angles, shifts) = draw_geometry(&cfg(500, 4, 0.0));
        assert!(angles.iter().all(|a| (0.0..TAU).contains(a)));
        assert!(shifts.iter().all(|&(s, t)| s.abs() <= 4 && t.abs() <= 4));
        assert!(shifts.iter().any(|&(s, _)| s == -4));
        assert!(shifts.iter().any(|&(_, t)| t == 4));
    }
}
