//! Shift-aware graph-Laplacian initialization of the view angles.
//!
//! Every pair of projections is first aligned by the integer detector shift
//! that maximizes their dot product, and compared through a Gaussian kernel
//! of the aligned distance. The two leading nontrivial eigenvectors of the
//! random-walk Laplacian of that affinity matrix embed the projections on a
//! closed curve in the plane; sorting by polar angle recovers their cyclic
//! order, and the `r`-th projection in that order is assigned the expected
//! `r`-th order statistic of `Uniform(0, 2pi)`, i.e. `2 pi r / N`.
//!
//! With `k_max = 0` no alignment happens and this reduces to the classic
//! centered-projection method.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{GeometryEstimate, Projection, Sinogram};

/// Sinograms whose aligned pairwise distances are all below this fraction
/// of the largest projection norm are treated as views of a rotationally
/// symmetric object.
pub const DEGENERACY_REL_TOL: f64 = 1e-3;

/// Relative eigenvalue gap below which the embedding pair is flagged.
const EIGEN_GAP_WARN: f64 = 1e-6;

/// Kernel bandwidth selection for `W_ij = exp(-kappa d_ij^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaMode {
    /// `kappa = 1 / (scale * m)` where `m` is the median over rows of the
    /// squared aligned distance to the `neighbors`-th nearest projection.
    LocalMedian {
        neighbors: usize,
        scale: f64,
    },
    /// `kappa = 1 / median_{i<j} d_ij^2`.
    MedianHeuristic,
    Fixed(f64),
    /// Per-projection bandwidths: `W_ij = exp(-d_ij^2 / (sigma_i sigma_j))`
    /// with `sigma_i` the aligned distance to the `neighbors`-th nearest
    /// projection. `kappa` is reported as `1 / median(sigma_i^2)`.
    SelfTuning {
        neighbors: usize,
    },
}

impl Default for KappaMode {
    fn default() -> Self {
        KappaMode::MedianHeuristic
    }
}

/// Neighbours kept per projection by default. A dense kernel lets the many
/// weak long-range affinities swamp the local circle structure.
pub const DEFAULT_KNN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityOptions {
    pub kappa: KappaMode,
    /// Alignment search range in detector bins.
    pub k_max: usize,
    /// Keep only each row's `k` strongest affinities (union-symmetrized).
    pub knn: Option<usize>,
}

impl Default for SimilarityOptions {
    fn default() -> Self {
        SimilarityOptions {
            kappa: KappaMode::default(),
            k_max: 0,
            knn: Some(DEFAULT_KNN),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    /// Symmetric affinities in `(0, 1]` with a unit diagonal (zeros only
    /// where sparsified).
    pub weights: Array2<f64>,
    pub kappa: f64,
    /// `aligned_shift[[i, j]]` maximizes `y_i . shift_k(y_j)`.
    pub aligned_shift: Array2<i32>,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Shift preference order: 0, -1, 1, -2, 2, ...
fn preference_order(k_max: i32) -> impl Iterator<Item = i32> {
    (0..=2 * k_max).map(|i| if i % 2 == 1 { -(i + 1) / 2 } else { i / 2 })
}

/// `sum_m a[m] b[m - k]` over the overlap (zero-filled shift of `b`).
#[inline]
pub(crate) fn shifted_dot(a: &[f64], b: &[f64], k: i32) -> f64 {
    let n = a.len() as isize;
    let k = k as isize;
    let lo = k.max(0);
    let hi = (n + k).min(n);
    if lo >= hi {
        return 0.0;
    }
    a[lo as usize..hi as usize]
        .iter()
        .zip(&b[(lo - k) as usize..(hi - k) as usize])
        .map(|(x, y)| x * y)
        .sum()
}

/// `|a - shift_k(b)|^2`.
#[inline]
pub(crate) fn shifted_dist2(a: &[f64], b: &[f64], k: i32) -> f64 {
    let n = a.len() as isize;
    let k = k as isize;
    let mut acc = 0.0;
    for m in 0..n {
        let src = m - k;
        let bv = if src >= 0 && src < n {
            b[src as usize]
        } else {
            0.0
        };
        let d = a[m as usize] - bv;
        acc += d * d;
    }
    acc
}

fn argmax_preferred(scores: impl Fn(i32) -> f64, k_max: i32) -> i32 {
    let mut best_k = 0;
    let mut best = f64::NEG_INFINITY;
    for k in preference_order(k_max) {
        let v = scores(k);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    best_k
}

/// Integer shift in `[-k_max, k_max]` maximizing `a . shift_k(b)`; ties go
/// to the smallest `|k|`, then to the negative side.
pub fn best_alignment_shift(a: &Projection, b: &Projection, k_max: usize) -> Result<i32> {
    if a.len() != b.len() {
        return Err(Error::invalid("projections differ in length"));
    }
    if k_max > a.len() / 2 {
        return Err(Error::invalid(format!(
            "alignment range {k_max} exceeds half the detector ({})",
            a.len() / 2
        )));
    }
    Ok(best_shift_slices(a.as_slice(), b.as_slice(), k_max as i32))
}

pub(crate) fn best_shift_slices(a: &[f64], b: &[f64], k_max: i32) -> i32 {
    argmax_preferred(|k| shifted_dot(a, b, k), k_max)
}

struct PairResult {
    k_ij: i32,
    k_ji: i32,
    d2_ij: f64,
    d2_ji: f64,
}

fn align_pair(a: &[f64], b: &[f64], k_max: i32) -> PairResult {
    // score_ji(k) = score_ij(-k) exactly, so one scan serves both orders.
    let width = (2 * k_max + 1) as usize;
    let mut scores = vec![0.0; width];
    for k in -k_max..=k_max {
        scores[(k + k_max) as usize] = shifted_dot(a, b, k);
    }
    let k_ij = argmax_preferred(|k| scores[(k + k_max) as usize], k_max);
    let k_ji = argmax_preferred(|k| scores[(k_max - k) as usize], k_max);
    PairResult {
        k_ij,
        k_ji,
        d2_ij: shifted_dist2(a, b, k_ij),
        d2_ji: shifted_dist2(b, a, k_ji),
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Builds the symmetrized shift-aware affinity matrix.
pub fn build_similarity(sino: &Sinogram, opts: &SimilarityOptions) -> Result<SimilarityMatrix> {
    let n = sino.count();
    let size = sino.size();
    if n < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 projections, got {n}"
        )));
    }
    if opts.k_max > size / 2 {
        return Err(Error::invalid(format!(
            "alignment range {} exceeds half the detector ({})",
            opts.k_max,
            size / 2
        )));
    }
    let k_max = opts.k_max as i32;

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let results: Vec<PairResult> = pairs
        .par_iter()
        .map(|&(i, j)| align_pair(sino.row_slice(i), sino.row_slice(j), k_max))
        .collect();

    let mut shifts = Array2::zeros((n, n));
    // Symmetrizing W by elementwise max keeps the smaller distance.
    let mut dist2 = Array2::zeros((n, n));
    for (&(i, j), r) in pairs.iter().zip(&results) {
        shifts[[i, j]] = r.k_ij;
        shifts[[j, i]] = r.k_ji;
        let d = r.d2_ij.min(r.d2_ji);
        dist2[[i, j]] = d;
        dist2[[j, i]] = d;
    }

    let max_norm2 = (0..n)
        .map(|i| sino.row_slice(i).iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max);
    let max_d2 = results
        .iter()
        .map(|r| r.d2_ij.min(r.d2_ji))
        .fold(0.0, f64::max);
    if max_d2 <= DEGENERACY_REL_TOL * DEGENERACY_REL_TOL * max_norm2 {
        return Err(Error::degenerate(
            "all aligned projections are identical; the object looks rotationally symmetric",
        ));
    }

    let mut local_scale: Option<Vec<f64>> = None;
    let kappa = match opts.kappa {
        KappaMode::Fixed(k) => {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::invalid(format!("kappa must be positive, got {k}")));
            }
            k
        }
        KappaMode::MedianHeuristic => {
            let mut all: Vec<f64> = results.iter().map(|r| r.d2_ij.min(r.d2_ji)).collect();
            scale_to_kappa(median(&mut all), 1.0)?
        }
        KappaMode::LocalMedian { neighbors, scale } => {
            let mut kth = kth_neighbor_dist2(&dist2, neighbors)?;
            scale_to_kappa(median(&mut kth), scale)?
        }
        KappaMode::SelfTuning { neighbors } => {
            let kth = kth_neighbor_dist2(&dist2, neighbors)?;
            if kth.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::degenerate(
                    "a projection has identical neighbors; local bandwidth undefined",
                ));
            }
            let sigma: Vec<f64> = kth.iter().map(|v| v.sqrt()).collect();
            let k = scale_to_kappa(median(&mut kth.clone()), 1.0)?;
            local_scale = Some(sigma);
            k
        }
    };

    let mut weights = match &local_scale {
        None => dist2.mapv(|d: f64| (-kappa * d).exp()),
        Some(sigma) => Array2::from_shape_fn((n, n), |(i, j)| {
            (-dist2[[i, j]] / (sigma[i] * sigma[j])).exp()
        }),
    };
    for i in 0..n {
        weights[[i, i]] = 1.0;
    }
    if let Some(k) = opts.knn {
        weights = sparsify(&weights, k);
    }
    Ok(SimilarityMatrix {
        weights,
        kappa,
        aligned_shift: shifts,
    })
}

fn kth_neighbor_dist2(dist2: &Array2<f64>, neighbors: usize) -> Result<Vec<f64>> {
    let n = dist2.nrows();
    if neighbors == 0 || neighbors >= n {
        return Err(Error::invalid(format!(
            "neighbor count must be in 1..{n}, got {neighbors}"
        )));
    }
    Ok((0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist2[[i, j]]).collect();
            row.select_nth_unstable_by(neighbors - 1, |a, b| a.total_cmp(b));
            row[neighbors - 1]
        })
        .collect())
}

fn scale_to_kappa(m: f64, scale: f64) -> Result<f64> {
    if !(m > 0.0) || !(scale > 0.0) {
        return Err(Error::degenerate(
            "median aligned distance is zero; kernel bandwidth undefined",
        ));
    }
    Ok(1.0 / (scale * m))
}

fn sparsify(w: &Array2<f64>, k: usize) -> Array2<f64> {
    let n = w.nrows();
    let mut keep = Array2::from_elem((n, n), false);
    for i in 0..n {
        let mut idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        idx.sort_by(|&a, &b| w[[i, b]].total_cmp(&w[[i, a]]).then(a.cmp(&b)));
        for &j in idx.iter().take(k) {
            keep[[i, j]] = true;
            keep[[j, i]] = true;
        }
        keep[[i, i]] = true;
    }
    Array2::from_shape_fn((n, n), |(i, j)| if keep[[i, j]] { w[[i, j]] } else { 0.0 })
}

fn components(w: &Array2<f64>) -> usize {
    let n = w.nrows();
    let mut seen = vec![false; n];
    let mut count = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if !seen[j] && w[[i, j]] > 0.0 {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding2D {
    /// `N x 2` coordinates in the two selected eigenvectors.
    pub psi: Array2<f64>,
    /// Random-walk Laplacian eigenvalues of the two columns.
    pub eigenvalues: [f64; 2],
    /// The next eigenvalue, for judging separation.
    pub next_eigenvalue: f64,
    pub warnings: Vec<String>,
}

/// Embeds with eigenvectors 2 and 3 of `L = I - D^-1 W`.
///
/// Columns are `D`-orthonormal and sign-canonicalized so that their first
/// non-negligible coordinate is positive.
pub fn laplacian_embed(sim: &SimilarityMatrix) -> Result<Embedding2D> {
    let w = &sim.weights;
    let n = w.nrows();
    if n < 4 {
        return Err(Error::invalid(format!(
            "embedding needs at least 4 projections, got {n}"
        )));
    }
    let parts = components(w);
    if parts > 1 {
        return Err(Error::Disconnected { components: parts });
    }
    let deg: Vec<f64> = w.rows().into_iter().map(|r| r.sum()).collect();
    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    // D^-1/2 W D^-1/2 shares eigenvalues 1 - lambda with L_rw.
    let sym = DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * w[[i, j]] * inv_sqrt[j]);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let lambda = |r: usize| 1.0 - eig.eigenvalues[order[r]];

    let mut psi = Array2::zeros((n, 2));
    for col in 0..2 {
        let v = eig.eigenvectors.column(order[col + 1]);
        let scaled: Vec<f64> = (0..n).map(|i| v[i] * inv_sqrt[i]).collect();
        let peak = scaled.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let sign = scaled
            .iter()
            .find(|x| x.abs() > 1e-9 * peak)
            .map_or(1.0, |x| x.signum());
        for i in 0..n {
            psi[[i, col]] = sign * scaled[i];
        }
    }

    let (l2, l3, l4) = (lambda(1), lambda(2), lambda(3));
    let mut warnings = Vec::new();
    if (l4 - l3).abs() <= EIGEN_GAP_WARN * l4.abs().max(f64::MIN_POSITIVE) {
        warnings.push(format!(
            "eigenvalues 3 and 4 are nearly degenerate ({l3:.6e}, {l4:.6e}); \
             the embedding plane is ill-defined"
        ));
    }
    if l2 <= EIGEN_GAP_WARN {
        warnings.push(format!("second eigenvalue {l2:.3e} is nearly zero"));
    }
    Ok(Embedding2D {
        psi,
        eigenvalues: [l2, l3],
        next_eigenvalue: l4,
        warnings,
    })
}

/// Indices sorted by `atan2(psi_1, psi_2)`; ties keep index order.
pub fn circular_sort(emb: &Embedding2D) -> Result<Vec<usize>> {
    let n = emb.psi.nrows();
    let keys: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (emb.psi[[i, 0]], emb.psi[[i, 1]]);
            if a == 0.0 && b == 0.0 {
                Err(Error::degenerate(format!(
                    "projection {i} embeds at the origin"
                )))
            } else {
                Ok(a.atan2(b))
            }
        })
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    Ok(order)
}

/// Gives the projection ranked `r` in `order` the angle `2 pi r / N`.
pub fn assign_angles(order: &[usize], n: usize) -> Result<Vec<f64>> {
    if order.len() != n {
        return Err(Error::invalid(format!(
            "order has {} entries, expected {n}",
            order.len()
        )));
    }
    let mut angles = vec![f64::NAN; n];
    for (rank, &idx) in order.iter().enumerate() {
        if idx >= n || !angles[idx].is_nan() {
            return Err(Error::invalid("order is not a permutation"));
        }
        angles[idx] = TAU * rank as f64 / n as f64;
    }
    Ok(angles)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitReport {
    pub kappa: f64,
    pub eigenvalues: [f64; 2],
    pub warnings: Vec<String>,
    pub order: Vec<usize>,
}

/// Initial geometry: Laplacian-eigenmap angles, all shifts zero.
pub fn init_geometry(sino: &Sinogram, k_max: usize) -> Result<GeometryEstimate> {
    let opts = SimilarityOptions {
        k_max,
        ..SimilarityOptions::default()
    };
    init_geometry_with(sino, &opts).map(|(g, _)| g)
}

pub fn init_geometry_with(
    sino: &Sinogram,
    opts: &SimilarityOptions,
) -> Result<(GeometryEstimate, InitReport)> {
    let sim = build_similarity(sino, opts)?;
    let emb = laplacian_embed(&sim)?;
    let order = circular_sort(&emb)?;
    let angles = assign_angles(&order, sino.count())?;
    let geom = GeometryEstimate::unshifted(angles)?;
    Ok((
        geom,
        InitReport {
            kappa: sim.kappa,
            eigenvalues: emb.eigenvalues,
            warnings: emb.warnings,
            order,
        },
    ))
}
