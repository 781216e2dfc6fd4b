//! Brute-force oracles and the small-instance checks built on them. Shared
//! by the `derived` tests and the acceptance runner.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uvt::altmin::{estimate_shifts, update_angles};
use uvt::eval::{align, angle_error, circular_diff, circular_order_agreement, rotate, translate};
use uvt::geometry::{
    fbp, project, reproject_all, shift_image, shift_projection, wrap_angle, Image, Sinogram,
};
use uvt::graphinit::{
    assign_angles, best_alignment_shift, build_similarity, circular_sort, init_geometry_with,
    laplacian_embed, KappaMode, SimilarityMatrix, SimilarityOptions,
};
use uvt::moments::{
    candidate_angles, classify_branch, disambiguate_third_moment, image_moments_from_references,
    moment_method_pipeline, projection_moments, reference_projections, Branch, ImageMoments,
};
use uvt::pipeline::oracle;
use uvt::simulate::{make_phantom, synthesize, DistortionConfig, PhantomKind};

/// Outcome of one check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &'static str, pass: bool, detail: impl Into<String>) -> Check {
        Check {
            name,
            pass,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }

    pub fn assert(&self) {
        assert!(self.pass, "{}", self.line());
    }
}

pub fn phantom(kind: PhantomKind, size: usize) -> Image {
    make_phantom(&kind, size).unwrap()
}

pub fn dataset(
    kind: PhantomKind,
    size: usize,
    n: usize,
    m: i32,
    gamma: f64,
    seed: u64,
) -> uvt::simulate::GroundTruth {
    let img = phantom(kind, size);
    synthesize(
        &img,
        &DistortionConfig {
            n,
            max_shift: m,
            gamma,
            seed,
        },
    )
    .unwrap()
}

fn half(size: usize) -> f64 {
    (size as f64 - 1.0) / 2.0
}

/// Keeps the part of a convex polygon where `n . p <= c`.
fn clip(poly: &[(f64, f64)], n: (f64, f64), c: f64) -> Vec<(f64, f64)> {
    let side = |p: (f64, f64)| n.0 * p.0 + n.1 * p.1 - c;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let (da, db) = (side(a), side(b));
        if da <= 0.0 {
            out.push(a);
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            let t = da / (da - db);
            out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
        }
    }
    out
}

fn area(poly: &[(f64, f64)]) -> f64 {
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        twice += a.0 * b.1 - b.0 * a.1;
    }
    0.5 * twice.abs()
}

/// Line integrals of the unit-square pixel model integrated over each unit
/// detector bin: the exact area of every pixel inside every bin's strip,
/// by polygon clipping.
pub fn brute_project(img: &Image, theta: f64) -> Vec<f64> {
    let s = img.size();
    let h = half(s);
    let (sn, cs) = theta.sin_cos();
    let mut out = vec![0.0; s];
    for ((r, c), &v) in img.pixels().indexed_iter() {
        if v == 0.0 {
            continue;
        }
        let (x, y) = (c as f64 - h, r as f64 - h);
        let square = [
            (x - 0.5, y - 0.5),
            (x + 0.5, y - 0.5),
            (x + 0.5, y + 0.5),
            (x - 0.5, y + 0.5),
        ];
        let center = x * cs + y * sn + h;
        let lo = (center - 1.5).floor().max(0.0) as usize;
        let hi = ((center + 1.5).ceil() as usize).min(s - 1);
        for (j, o) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let rho = j as f64 - h;
            let upper = clip(&square, (cs, sn), rho + 0.5);
            let strip = clip(&upper, (-cs, -sn), -(rho - 0.5));
            if strip.len() >= 3 {
                *o += v * area(&strip);
            }
        }
    }
    out
}

/// Translation by a real number of bins with linear interpolation and zero
/// fill: `out[j] = p(j - alpha)`.
pub fn fractional_shift(p: &[f64], alpha: f64) -> Vec<f64> {
    let n = p.len() as isize;
    let at = |k: isize| if k < 0 || k >= n { 0.0 } else { p[k as usize] };
    (0..n)
        .map(|j| {
            let x = j as f64 - alpha;
            let k = x.floor();
            let f = x - k;
            (1.0 - f) * at(k as isize) + f * at(k as isize + 1)
        })
        .collect()
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `sum_j a[j] b[j - k]`, zero outside.
fn shifted_dot(a: &[f64], b: &[f64], k: i32) -> f64 {
    let n = a.len() as i32;
    (0..n)
        .filter(|j| (0..n).contains(&(j - k)))
        .map(|j| a[j as usize] * b[(j - k) as usize])
        .sum()
}

/// Scans every shift in `[-k_max, k_max]`; ties go to the smaller `|k|`,
/// then the negative one.
pub fn scan_best_shift(a: &[f64], b: &[f64], k_max: i32) -> i32 {
    let mut order: Vec<i32> = (-k_max..=k_max).collect();
    order.sort_by_key(|&k| (k.abs(), k > 0));
    let mut best = order[0];
    let mut best_score = shifted_dot(a, b, best);
    for &k in &order[1..] {
        let s = shifted_dot(a, b, k);
        if s > best_score {
            best = k;
            best_score = s;
        }
    }
    best
}

/// Image-domain central moments about the centroid, pixel centers as
/// sample points, mass weighted.
pub fn direct_moments(img: &Image) -> (ImageMoments, (f64, f64)) {
    let h = half(img.size());
    let (mut m, mut ms, mut mt) = (0.0, 0.0, 0.0);
    for ((r, c), &v) in img.pixels().indexed_iter() {
        m += v;
        ms += v * (c as f64 - h);
        mt += v * (r as f64 - h);
    }
    let (cs, ct) = (ms / m, mt / m);
    let mut mu = [0.0; 7];
    for ((r, c), &v) in img.pixels().indexed_iter() {
        let (s, t) = (c as f64 - h - cs, r as f64 - h - ct);
        mu[0] += v * s * s;
        mu[1] += v * s * t;
        mu[2] += v * t * t;
        mu[3] += v * s * s * s;
        mu[4] += v * s * s * t;
        mu[5] += v * s * t * t;
        mu[6] += v * t * t * t;
    }
    (
        ImageMoments {
            mass: m,
            mu20: mu[0],
            mu11: mu[1],
            mu02: mu[2],
            mu30: mu[3],
            mu21: mu[4],
            mu12: mu[5],
            mu03: mu[6],
        },
        (cs, ct),
    )
}

/// Indices of the `k` nearest angles to `i` on the circle.
pub fn angular_neighbors(angles: &[f64], i: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..angles.len()).filter(|&j| j != i).collect();
    idx.sort_by(|&a, &b| {
        circular_diff(angles[a], angles[i])
            .abs()
            .total_cmp(&circular_diff(angles[b], angles[i]).abs())
    });
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Indices of the `k` largest off-diagonal weights in row `i`.
pub fn strongest(w: &Array2<f64>, i: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..w.ncols()).filter(|&j| j != i).collect();
    idx.sort_by(|&a, &b| w[[i, b]].total_cmp(&w[[i, a]]));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// A disk of radius `r` centered on the grid, each pixel holding the
/// fraction of its area inside the disk.
pub fn disk_image(size: usize, r: f64) -> Image {
    let h = half(size);
    let q = 16;
    let img = Array2::from_shape_fn((size, size), |(row, col)| {
        let mut inside = 0;
        for a in 0..q {
            for b in 0..q {
                let x = col as f64 - h - 0.5 + (a as f64 + 0.5) / q as f64;
                let y = row as f64 - h - 0.5 + (b as f64 + 0.5) / q as f64;
                if x * x + y * y < r * r {
                    inside += 1;
                }
            }
        }
        inside as f64 / (q * q) as f64
    });
    Image::new(img).unwrap()
}

/// Unit point masses at the given `(row, col)` pixels.
pub fn points(size: usize, at: &[(usize, usize)]) -> Image {
    let mut v = vec![0.0; size * size];
    for &(r, c) in at {
        v[r * size + c] = 1.0;
    }
    Image::from_vec(size, v).unwrap()
}

/// Random anti-aliased ellipses (1 to 5) inside the disk of radius
/// `radius` about the grid center.
pub fn random_ellipses(rng: &mut impl Rng, size: usize, radius: f64) -> Image {
    let h = half(size);
    let count = rng.random_range(1..=5);
    let shapes: Vec<(f64, f64, f64, f64, f64, f64)> = (0..count)
        .map(|_| {
            let a = rng.random_range(3.0..radius / 2.0);
            let b = rng.random_range(3.0..radius / 2.0);
            let reach = radius - a.max(b);
            let (r, phi) = (rng.random_range(0.0..reach), rng.random_range(0.0..TAU));
            let tilt = rng.random_range(0.0..PI);
            (
                r * phi.cos(),
                r * phi.sin(),
                a,
                b,
                tilt,
                rng.random_range(0.1..1.0),
            )
        })
        .collect();
    let q = 4;
    let img = Array2::from_shape_fn((size, size), |(row, col)| {
        let mut v = 0.0;
        for i in 0..q {
            for k in 0..q {
                let x = col as f64 - h - 0.5 + (i as f64 + 0.5) / q as f64;
                let y = row as f64 - h - 0.5 + (k as f64 + 0.5) / q as f64;
                for &(cx, cy, a, b, tilt, w) in &shapes {
                    let (sn, cs) = f64::sin_cos(tilt);
                    let (dx, dy) = (x - cx, y - cy);
                    let (u, t) = (dx * cs + dy * sn, -dx * sn + dy * cs);
                    if (u / a).powi(2) + (t / b).powi(2) <= 1.0 {
                        v += w;
                    }
                }
            }
        }
        v / (q * q) as f64
    });
    Image::new(img).unwrap()
}

/// Relative L2 gap between projecting a shifted image and linearly
/// translating the projection by `s0 cos + t0 sin`.
pub fn shift_theorem_gap(img: &Image, theta: f64, s0: i32, t0: i32) -> f64 {
    let shifted = shift_image(img, s0, t0).unwrap();
    let alpha = s0 as f64 * theta.cos() + t0 as f64 * theta.sin();
    let lhs = project(&shifted, theta).unwrap();
    let base = project(img, theta).unwrap();
    let rhs = fractional_shift(base.as_slice(), alpha);
    l2_diff(lhs.as_slice(), &rhs) / base.norm()
}

pub fn uniform_angles(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * TAU / n as f64).collect()
}

// ---------------------------------------------------------------------
// Small-instance checks.

/// Projection of a centered disk against the chord length, and the
/// projector against the brute-force line integral.
pub fn disk_chord() -> Check {
    let (size, r) = (128, 32.0);
    let img = disk_image(size, r);
    let h = half(size);
    let mut worst_chord: f64 = 0.0;
    let mut worst_brute: f64 = 0.0;
    for theta in [0.0, 0.37, PI / 4.0, 2.1, 4.0] {
        let p = project(&img, theta).unwrap();
        let brute = brute_project(&img, theta);
        for (j, &v) in p.as_slice().iter().enumerate() {
            let rho = j as f64 - h;
            let chord = if rho.abs() < r {
                2.0 * (r * r - rho * rho).sqrt()
            } else {
                0.0
            };
            worst_chord = worst_chord.max((v - chord).abs() / (2.0 * r));
            worst_brute = worst_brute.max((v - brute[j]).abs() / (2.0 * r));
        }
    }
    Check::new(
        "disk projection matches chord length",
        worst_chord <= 0.02 && worst_brute <= 1e-4,
        format!(
            "max |p - chord| = {:.4} x 2r (<= 0.02), max |p - brute| = {:.2e} x 2r (<= 1e-4)",
            worst_chord, worst_brute
        ),
    )
}

/// Projecting a shifted image equals translating the projection by
/// `s0 cos + t0 sin`, both sides computed by brute-force line integrals.
pub fn shifted_image_projection() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for &(theta, s0, t0) in &[(0.3, 3, -2), (1.9, -4, 1), (PI / 4.0, 2, 2), (5.0, 0, -3)] {
        let img = random_ellipses(&mut rng, 128, 56.0);
        let shifted = shift_image(&img, s0, t0).unwrap();
        let alpha = s0 as f64 * f64::cos(theta) + t0 as f64 * f64::sin(theta);
        let lhs = brute_project(&shifted, theta);
        let base = brute_project(&img, theta);
        let rhs = fractional_shift(&base, alpha);
        worst = worst.max(l2_diff(&lhs, &rhs) / l2(&base));
        worst = worst.max(shift_theorem_gap(&img, theta, s0, t0));
    }
    Check::new(
        "shifted image projects to a shifted projection",
        worst <= 0.02,
        format!("worst relative L2 gap {worst:.4} (<= 0.02)"),
    )
}

/// Dense noiseless round trip through the projector and FBP.
pub fn fbp_round_trip() -> Check {
    let img = phantom(PhantomKind::SheppLoganOriginal, 128);
    let angles = uniform_angles(720);
    let sino = reproject_all(&img, &angles).unwrap();
    let rec = fbp(&sino, &angles).unwrap();
    let e = uvt::eval::rrmse(&rec, &img).unwrap();
    Check::new(
        "fbp round trip at 720 views",
        e <= 0.08,
        format!("RRMSE {e:.4} (<= 0.08)"),
    )
}

/// Alignment shift against an exhaustive scan, including the shifted-copy
/// example.
pub fn alignment_shift_scan() -> Check {
    let img = phantom(PhantomKind::SheppLogan, 64);
    let a = project(&img, 0.7).unwrap();
    let b = shift_projection(&a, 3).unwrap();
    let found = best_alignment_shift(&a, &b, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mismatches = 0;
    for _ in 0..200 {
        let a = project(&img, rng.random::<f64>() * TAU).unwrap();
        let b = shift_projection(
            &project(&img, rng.random::<f64>() * TAU).unwrap(),
            rng.random_range(-6..=6),
        )
        .unwrap();
        let k_max = rng.random_range(0..=10);
        let got = best_alignment_shift(&a, &b, k_max).unwrap();
        if got != scan_best_shift(a.as_slice(), b.as_slice(), k_max as i32) {
            mismatches += 1;
        }
    }
    Check::new(
        "alignment shift matches exhaustive scan",
        found == -3 && mismatches == 0,
        format!("shifted copy gives {found} (want -3); {mismatches}/200 random pairs disagree"),
    )
}

/// The five strongest affinities of each row are its five angular
/// neighbours.
pub fn knn_neighbors() -> Check {
    let gt = dataset(PhantomKind::SheppLogan, 128, 200, 0, 0.0, 3);
    let sim = build_similarity(
        &gt.noisy,
        &SimilarityOptions {
            kappa: KappaMode::MedianHeuristic,
            k_max: 0,
            knn: None,
        },
    )
    .unwrap();
    let n = gt.angles.len();
    let matched = (0..n)
        .filter(|&i| strongest(&sim.weights, i, 5) == angular_neighbors(&gt.angles, i, 5))
        .count();
    let frac = matched as f64 / n as f64;
    Check::new(
        "5-NN affinities are angular neighbours",
        frac >= 0.95,
        format!("{matched}/{n} rows match ({frac:.3}, need >= 0.95)"),
    )
}

fn ring(n: usize) -> SimilarityMatrix {
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        w[[i, i]] = 1.0;
        w[[i, (i + 1) % n]] = 1.0;
        w[[(i + 1) % n, i]] = 1.0;
    }
    SimilarityMatrix {
        weights: w,
        kappa: 1.0,
        aligned_shift: Array2::zeros((n, n)),
    }
}

/// Ring graph: the embedding is a circle spanned by the first Fourier
/// pair, and sorting it recovers the angles up to rotation and reflection.
pub fn ring_graph() -> Check {
    let n = 60;
    let emb = laplacian_embed(&ring(n)).unwrap();
    let radii: Vec<f64> = (0..n)
        .map(|i| emb.psi[[i, 0]].hypot(emb.psi[[i, 1]]))
        .collect();
    let r = radii.iter().sum::<f64>() / n as f64;
    let spread = radii.iter().map(|x| (x - r).abs()).fold(0.0, f64::max);
    // Residual of each column after projecting onto span{cos, sin}.
    let basis: Vec<Vec<f64>> = [f64::cos, f64::sin]
        .iter()
        .map(|f| (0..n).map(|i| f(TAU * i as f64 / n as f64)).collect())
        .collect();
    let mut resid: f64 = 0.0;
    for col in 0..2 {
        let v: Vec<f64> = (0..n).map(|i| emb.psi[[i, col]]).collect();
        let mut rest = v.clone();
        for b in &basis {
            let c = v.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
                / b.iter().map(|y| y * y).sum::<f64>();
            for (x, y) in rest.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
        resid = resid.max(l2(&rest) / l2(&v));
    }
    let truth = uniform_angles(n);
    let order = circular_sort(&emb).unwrap();
    let est = assign_angles(&order, n).unwrap();
    let err = angle_error(&est, &truth).unwrap();
    let max_err = est
        .iter()
        .zip(&truth)
        .map(|(&e, &t)| {
            let t = if err.best_reflection { -t } else { t };
            circular_diff(e, t + err.best_rotation).abs()
        })
        .fold(0.0, f64::max);
    Check::new(
        "ring graph embeds on a circle",
        spread <= 1e-6 && resid <= 1e-6 && max_err <= TAU / n as f64,
        format!(
            "radius spread {spread:.2e} (<= 1e-6), off-span residual {resid:.2e}, max angle error {:.3} deg (<= {:.3})",
            max_err.to_degrees(),
            360.0 / n as f64
        ),
    )
}

/// Noiseless centered ordering of the Laplacian initializer.
pub fn centered_ordering() -> Check {
    let gt = dataset(PhantomKind::SheppLogan, 128, 200, 0, 0.0, 5);
    let (g, _) = init_geometry_with(&gt.noisy, &SimilarityOptions::default()).unwrap();
    let a = circular_order_agreement(g.angles(), &gt.angles).unwrap();
    Check::new(
        "centered Laplacian ordering",
        a >= 0.98,
        format!("agreement {a:.3} (>= 0.98)"),
    )
}

/// Shift estimation with the true image and angles against round(alpha)
/// and an exhaustive scan.
pub fn shift_estimates_exact() -> Check {
    let gt = dataset(PhantomKind::SheppLogan, 128, 120, 5, 0.0, 2);
    let k_max = 10;
    let est = estimate_shifts(&gt.noisy, &gt.image, &gt.angles, k_max).unwrap();
    let alpha = gt.projection_shifts();
    let rounded = est
        .iter()
        .zip(&alpha)
        .filter(|(&k, &a)| k == a.round() as i32)
        .count();
    let scanned = (0..gt.angles.len())
        .filter(|&i| {
            let r = project(&gt.image, gt.angles[i]).unwrap();
            est[i] == scan_best_shift(gt.noisy.row_slice(i), r.as_slice(), k_max as i32)
        })
        .count();
    let n = est.len();
    Check::new(
        "shift estimates recover round(alpha)",
        rounded == n && scanned == n,
        format!("{rounded}/{n} equal round(alpha), {scanned}/{n} equal the scan"),
    )
}

/// An angle offset by one grid step returns to the truth.
pub fn angle_step_returns() -> Check {
    // Without shifts the rounded α is the exact model α.
    let gt = dataset(PhantomKind::SheppLogan, 128, 60, 0, 0.0, 8);
    let delta = 0.5f64.to_radians();
    let trials = 11;
    let shifts: Vec<i32> = gt
        .projection_shifts()
        .iter()
        .map(|a| a.round() as i32)
        .collect();
    let start: Vec<f64> = gt.angles.iter().map(|a| a + delta).collect();
    let upd = update_angles(&gt.noisy, &gt.image, &start, &shifts, delta, trials).unwrap();
    let mut hit = 0;
    let mut scan_agree = 0;
    for i in 0..start.len() {
        if circular_diff(upd.angles[i], gt.angles[i]).abs() < 1e-9 {
            hit += 1;
        }
        let losses: Vec<f64> = (0..trials)
            .map(|j| {
                let th = start[i] + delta * (j as f64 - (trials / 2) as f64);
                let r = project(&gt.image, th).unwrap();
                let moved = shift_projection(&r, shifts[i]).unwrap();
                l2_diff(gt.noisy.row_slice(i), moved.as_slice()).powi(2)
            })
            .collect();
        let best = (0..trials)
            .min_by(|&a, &b| losses[a].total_cmp(&losses[b]))
            .unwrap();
        let want = wrap_angle(start[i] + delta * (best as f64 - (trials / 2) as f64));
        if circular_diff(upd.angles[i], want).abs() < 1e-12 {
            scan_agree += 1;
        }
    }
    let n = start.len();
    Check::new(
        "angle step returns to the truth",
        hit == n && scan_agree == n,
        format!("{hit}/{n} returned to the true angle, {scan_agree}/{n} equal the candidate scan"),
    )
}

/// Oracle reconstruction from noiseless data is limited by FBP only.
pub fn oracle_noiseless_floor() -> Check {
    let gt = dataset(PhantomKind::SheppLoganOriginal, 128, 720, 0, 0.0, 1);
    let rec = oracle(&gt, &Default::default()).unwrap();
    let e = uvt::eval::rrmse(&rec.image, &gt.image).unwrap();
    Check::new(
        "oracle on noiseless data",
        e <= 0.08,
        format!("RRMSE {e:.4} (<= 0.08)"),
    )
}

/// Centroid of a projected point mass.
pub fn point_mass_centroid() -> Check {
    let size = 64;
    let h = half(size);
    let mut worst: f64 = 0.0;
    for &(row, col) in &[(20usize, 40usize), (45, 10), (31, 33)] {
        let img = points(size, &[(row, col)]);
        let (a, b) = (col as f64 - h, row as f64 - h);
        for theta in [0.0, 0.4, 1.3, 2.9, 4.7] {
            let want = a * f64::cos(theta) + b * f64::sin(theta);
            let pm = projection_moments(&project(&img, theta).unwrap()).unwrap();
            let brute = brute_project(&img, theta);
            let bc = brute
                .iter()
                .enumerate()
                .map(|(j, v)| (j as f64 - h) * v)
                .sum::<f64>()
                / brute.iter().sum::<f64>();
            worst = worst.max((pm.centroid - want).abs()).max((bc - want).abs());
        }
    }
    Check::new(
        "point-mass centroid follows a cos + b sin",
        worst <= 0.05,
        format!("worst centroid error {worst:.2e} bins (<= 0.05)"),
    )
}

fn moment_vector(m: &ImageMoments) -> [f64; 7] {
    [m.mu20, m.mu11, m.mu02, m.mu30, m.mu21, m.mu12, m.mu03]
}

/// Worst component error relative to the norm of the oracle moment vector.
pub fn moment_gap(got: &ImageMoments, want: &ImageMoments) -> f64 {
    let (g, w) = (moment_vector(got), moment_vector(want));
    let scale = l2(&w[..3]).max(1e-300);
    let scale3 = l2(&w[3..]).max(1e-300);
    let second = (0..3)
        .map(|i| (g[i] - w[i]).abs() / scale)
        .fold(0.0, f64::max);
    let third = (3..7)
        .map(|i| (g[i] - w[i]).abs() / scale3)
        .fold(0.0, f64::max);
    second.max(third)
}

/// Two point masses at `(+-d, 0)`.
pub fn two_point_moments() -> Check {
    let size = 64;
    let d = 10;
    // Pixel columns 21 and 42 straddle the center 31.5 by 10.5.
    let img = points(size, &[(31, 21), (31, 42)]);
    let refs = reference_projections(&img).unwrap();
    let im = image_moments_from_references(&refs).unwrap();
    let (want, _) = direct_moments(&img);
    let dd = d as f64 + 0.5;
    let closed = (want.mu20 - 2.0 * dd * dd).abs() < 1e-9 && want.mu11 == 0.0 && want.mu02 == 0.0;
    let gap = moment_gap(&im, &want);
    let third = [im.mu30, im.mu21, im.mu12, im.mu03]
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        / (2.0 * dd.powi(3));
    Check::new(
        "two point masses",
        closed && (im.mu20 - want.mu20).abs() <= 0.01 * want.mu20
            && im.mu11.abs() <= 0.01 * want.mu20
            && im.mu02.abs() <= 0.01 * want.mu20
            && third <= 0.01,
        format!(
            "mu20 {:.3} vs {:.3}, mu11 {:.3}, mu02 {:.3}, third moments {:.4} x 2d^3; vector gap {:.4}",
            im.mu20, want.mu20, im.mu11, im.mu02, third, gap
        ),
    )
}

/// Reference-projection moments against the image-domain moments.
pub fn reference_moments(kind: PhantomKind, size: usize) -> (f64, String) {
    let img = phantom(kind, size);
    let im = image_moments_from_references(&reference_projections(&img).unwrap()).unwrap();
    let (want, _) = direct_moments(&img);
    let gap = moment_gap(&im, &want);
    (
        gap,
        format!(
            "mu20 {:.1}/{:.1}, mu11 {:.1}/{:.1}, mu02 {:.1}/{:.1}, mu30 {:.1}/{:.1}",
            im.mu20, want.mu20, im.mu11, want.mu11, im.mu02, want.mu02, im.mu30, want.mu30
        ),
    )
}

pub fn shepp_logan_moments() -> Check {
    let (gap, detail) = reference_moments(PhantomKind::SheppLogan, 256);
    Check::new(
        "Shepp-Logan moments from references",
        gap <= 0.01,
        format!("relative gap {gap:.5} (<= 0.01); {detail}"),
    )
}

/// One candidate reproduces the true angle modulo pi, and candidates are
/// minimizers of a fine scan of the predicted second moment.
pub fn candidate_scan() -> Check {
    let img = phantom(PhantomKind::Asymmetric, 128);
    let im = image_moments_from_references(&reference_projections(&img).unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    let mut scan_gap: f64 = 0.0;
    for k in 0..72 {
        let theta = 0.013 + k as f64 * 5.0f64.to_radians();
        let p = project(&img, theta).unwrap();
        let c = candidate_angles(&p, &im, true).unwrap();
        let mod_pi = |a: f64, b: f64| {
            let d = (a - b).rem_euclid(PI);
            d.min(PI - d)
        };
        let near = mod_pi(c.first, theta).min(mod_pi(c.second, theta));
        worst = worst.max(near);
        // The scan minimizer nearest theta (mod pi) should be a candidate.
        let pm = projection_moments(&p).unwrap();
        let obs = pm.centered2 / pm.m0 - uvt::moments::detector_spread(theta);
        let grid = 36000;
        let mut best = (f64::INFINITY, 0.0);
        for g in 0..grid {
            let th = g as f64 * PI / grid as f64;
            if mod_pi(th, theta) > 0.1 {
                continue;
            }
            let v = (im.second(th) - obs).abs();
            if v < best.0 {
                best = (v, th);
            }
        }
        scan_gap = scan_gap.max(mod_pi(c.first, best.1).min(mod_pi(c.second, best.1)));
    }
    Check::new(
        "second-moment candidates",
        worst.to_degrees() <= 0.5 && scan_gap.to_degrees() <= 0.05,
        format!(
            "worst candidate error mod pi {:.3} deg (<= 0.5); scan minimizer gap {:.3} deg",
            worst.to_degrees(),
            scan_gap.to_degrees()
        ),
    )
}

/// Third-moment selection on noiseless data picks the true branch.
pub fn third_moment_branch() -> Check {
    let img = phantom(PhantomKind::Asymmetric, 128);
    let im = image_moments_from_references(&reference_projections(&img).unwrap()).unwrap();
    let phi = {
        let (a, b, c) = (im.mu20, im.mu11, im.mu02);
        b.atan2(0.5 * (a - c))
    };
    let mut correct = 0;
    for k in 0..360 {
        let theta = (k as f64 + 0.5).to_radians();
        let p = project(&img, theta).unwrap();
        let c = candidate_angles(&p, &im, true).unwrap();
        let list = if c.is_double() {
            vec![c.first]
        } else {
            vec![c.first, c.second]
        };
        let sel = disambiguate_third_moment(&p, &im, &list).unwrap();
        if classify_branch(sel.angle, theta, phi) == Branch::True
            && circular_diff(sel.angle, theta).abs() < 0.5f64.to_radians()
        {
            correct += 1;
        }
    }
    Check::new(
        "third moments select the true branch",
        correct as f64 >= 0.99 * 360.0,
        format!("{correct}/360 correct (>= 357)"),
    )
}

/// Centroid shift estimates on noiseless, unshifted data follow the
/// image centroid.
pub fn centroid_shifts() -> Check {
    let gt = dataset(PhantomKind::Asymmetric, 128, 120, 0, 0.0, 6);
    let refs = reference_projections(&gt.image).unwrap();
    let (geom, _) = moment_method_pipeline(&gt.noisy, &refs).unwrap();
    let (_, (cs, ct)) = direct_moments(&gt.image);
    let matched = gt
        .angles
        .iter()
        .zip(geom.shifts())
        .filter(|(&a, &k)| {
            let c = cs * a.cos() + ct * a.sin();
            k == c.round() as i32 || ((c - c.trunc()).abs() - 0.5).abs() < 1e-3
        })
        .count();
    let n = gt.angles.len();
    // A point-symmetric copy has its centroid at the origin.
    let moved = Image::from_vec(
        128,
        gt.image
            .as_slice()
            .iter()
            .zip(gt.image.as_slice().iter().rev())
            .map(|(a, b)| a + b)
            .collect(),
    )
    .unwrap();
    let (_, (mcs, mct)) = direct_moments(&moved);
    let centered = synthesize(
        &moved,
        &DistortionConfig {
            n: 60,
            max_shift: 0,
            gamma: 0.0,
            seed: 6,
        },
    )
    .unwrap();
    let (g2, _) =
        moment_method_pipeline(&centered.noisy, &reference_projections(&moved).unwrap()).unwrap();
    let constant = g2.shifts().iter().all(|&k| k == g2.shifts()[0]);
    Check::new(
        "centroid shifts follow the image centroid",
        matched == n && constant,
        format!(
            "{matched}/{n} equal round(c_s cos + c_t sin) with centroid ({cs:.2}, {ct:.2}); centered copy ({mcs:.2}, {mct:.2}) constant: {constant}"
        ),
    )
}

/// Known rotation and translation are undone by the alignment.
pub fn align_known_transform() -> Check {
    // Bilinear rotation costs about 0.002 of CC at S=128.
    let truth = phantom(PhantomKind::Asymmetric, 256);
    let recon = rotate(&translate(&truth, 3, -2), 30f64.to_radians());
    let a = align(&recon, &truth).unwrap();
    let rot_err = circular_diff(a.rotation, (-30f64).to_radians())
        .abs()
        .to_degrees();
    let pass = !a.reflected && rot_err <= 0.1 + 1e-9 && a.translation == (-3, 2) && a.cc >= 0.999;
    Check::new(
        "alignment undoes a known transform",
        pass,
        format!(
            "rotation error {rot_err:.3} deg (<= 0.1), translation {:?} (want (-3, 2)), reflected {}, CC {:.5} (>= 0.999)",
            a.translation, a.reflected, a.cc
        ),
    )
}

/// Unrelated uniform angle sets differ by about 90 degrees on average.
pub fn random_angle_error() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 1000;
    let est: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * TAU).collect();
    let truth: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * TAU).collect();
    let e = angle_error(&est, &truth).unwrap().mean_deg;
    // Monte Carlo expectation of the raw circular distance.
    let mc = est
        .iter()
        .zip(&truth)
        .map(|(&a, &b)| circular_diff(a, b).abs())
        .sum::<f64>()
        / n as f64;
    Check::new(
        "random angles err by about 90 degrees",
        (e - 90.0).abs() <= 5.0 && (mc.to_degrees() - 90.0).abs() <= 5.0,
        format!(
            "aligned mean {e:.2} deg, unaligned {:.2} deg (90 +- 5)",
            mc.to_degrees()
        ),
    )
}

/// Noisy rows correlate best with the true fractional shift.
pub fn noisy_rows_prefer_true_shift() -> Check {
    let gt = dataset(PhantomKind::SheppLogan, 128, 80, 5, 0.07, 9);
    let alpha = gt.projection_shifts();
    let corr = |a: &[f64], b: &[f64]| {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    };
    let mut ok = 0;
    for i in 0..alpha.len() {
        let base = project(&gt.image, gt.angles[i]).unwrap();
        let y = gt.noisy.row_slice(i);
        let at_true = corr(y, &fractional_shift(base.as_slice(), alpha[i]));
        let beaten = (3..=12).any(|d| {
            [-1.0, 1.0].iter().any(|s| {
                corr(
                    y,
                    &fractional_shift(base.as_slice(), alpha[i] + s * d as f64),
                ) >= at_true
            })
        });
        if !beaten {
            ok += 1;
        }
    }
    let n = alpha.len();
    Check::new(
        "noisy rows prefer the true shift",
        ok == n,
        format!("{ok}/{n} rows peak within 3 bins of alpha"),
    )
}

pub fn all_small_instance_checks() -> Vec<fn() -> Check> {
    vec![
        disk_chord,
        shifted_image_projection,
        fbp_round_trip,
        alignment_shift_scan,
        knn_neighbors,
        ring_graph,
        centered_ordering,
        shift_estimates_exact,
        angle_step_returns,
        oracle_noiseless_floor,
        point_mass_centroid,
        two_point_moments,
        shepp_logan_moments,
        candidate_scan,
        third_moment_branch,
        centroid_shifts,
        align_known_transform,
        random_angle_error,
        noisy_rows_prefer_true_shift,
    ]
}

pub fn sinogram_bits(s: &Sinogram) -> Vec<u64> {
    s.as_slice().iter().map(|v| v.to_bits()).collect()
}
