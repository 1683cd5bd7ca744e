//! Curvature landscapes: a shared 2-D PCA plane for every token at every
//! layer, per-layer frames coloured by turning angle, kernel-smoothed heat
//! grids, and the stacked (foliated) export that links a token across layers.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::bundle::{AnalysisConfig, TrajectoryBundle};
use crate::curvature::{step_vectors, turning_angles};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum LandscapeError {
    #[error("PCA needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("PCA needs dimension at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("points have inconsistent dimensions")]
    RaggedPoints,
    #[error("data is rank deficient: centered covariance has rank {rank}, need 2")]
    RankDeficient { rank: usize },
    #[error("frame has no token with a defined turning angle")]
    NoDefinedAngles,
    #[error("grid resolution must be at least 1")]
    ZeroResolution,
    #[error("bandwidth fraction must be positive and finite, got {0}")]
    BadBandwidth(f64),
}

/// Mean and top-2 principal axes of a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection<T> {
    pub mean: Vec<T>,
    pub basis: [Vec<T>; 2],
    pub explained_variance: [T; 2],
    pub total_variance: T,
}

impl<T: Scalar> Projection<T> {
    pub fn project(&self, x: &[T]) -> [T; 2] {
        let mut c = [T::zero(); 2];
        for (k, b) in self.basis.iter().enumerate() {
            c[k] = x
                .iter()
                .zip(&self.mean)
                .zip(b)
                .fold(T::zero(), |acc, ((&xi, &mi), &bi)| acc + (xi - mi) * bi);
        }
        c
    }

    /// Maps plane coordinates back into the ambient space.
    pub fn embed(&self, y: [T; 2]) -> Vec<T> {
        self.mean
            .iter()
            .zip(&self.basis[0])
            .zip(&self.basis[1])
            .map(|((&m, &b0), &b1)| m + y[0] * b0 + y[1] * b1)
            .collect()
    }

    /// Fraction of total variance captured by the plane.
    pub fn explained_ratio(&self) -> T {
        if self.total_variance <= T::zero() {
            return T::zero();
        }
        (self.explained_variance[0] + self.explained_variance[1]) / self.total_variance
    }
}

const RITZ_BLOCK: usize = 16;
const MAX_SWEEPS: usize = 20_000;

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix (row-major).
/// Returns eigenvalues descending and eigenvectors as columns of `v`.
fn jacobi_eigen<T: Scalar>(a: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    let mut a = a.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    for _ in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        let diag: T = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum();
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[j * n + j]
            .partial_cmp(&a[i * n + i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let vals = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vecs = vec![T::zero(); n * n];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + new] = v[k * n + old];
        }
    }
    (vals, vecs)
}

/// Orthonormalizes the `b` columns of the `d × b` row-major block in place
/// (two passes of modified Gram-Schmidt). Columns that collapse are replaced
/// with a coordinate direction orthogonal to the previous ones.
fn orthonormalize<T: Scalar>(q: &mut [T], d: usize, b: usize) {
    for j in 0..b {
        for _ in 0..2 {
            for k in 0..j {
                let proj: T = (0..d).map(|r| q[r * b + j] * q[r * b + k]).sum();
                for r in 0..d {
                    q[r * b + j] = q[r * b + j] - proj * q[r * b + k];
                }
            }
        }
        let nrm = (0..d).map(|r| q[r * b + j] * q[r * b + j]).sum::<T>().sqrt();
        if nrm > T::lit(1e-300) {
            for r in 0..d {
                q[r * b + j] = q[r * b + j] / nrm;
            }
        } else {
            // restart from the first coordinate axis that survives projection
            for axis in 0..d {
                for r in 0..d {
                    q[r * b + j] = if r == axis { T::one() } else { T::zero() };
                }
                for k in 0..j {
                    let proj = q[axis * b + k];
                    for r in 0..d {
                        q[r * b + j] = q[r * b + j] - proj * q[r * b + k];
                    }
                }
                let nrm = (0..d).map(|r| q[r * b + j] * q[r * b + j]).sum::<T>().sqrt();
                if nrm > T::lit(1e-8) {
                    for r in 0..d {
                        q[r * b + j] = q[r * b + j] / nrm;
                    }
                    break;
                }
            }
        }
    }
}

/// `C · Q` for symmetric `d × d` C and `d × b` Q.
fn sym_mul<T: Scalar>(c: &[T], q: &[T], d: usize, b: usize) -> Vec<T> {
    let mut out = vec![T::zero(); d * b];
    for i in 0..d {
        let row = &c[i * d..(i + 1) * d];
        let o = &mut out[i * b..(i + 1) * b];
        for (k, &cik) in row.iter().enumerate() {
            if cik == T::zero() {
                continue;
            }
            let qk = &q[k * b..(k + 1) * b];
            for (oj, &qkj) in o.iter_mut().zip(qk) {
                *oj = *oj + cik * qkj;
            }
        }
    }
    out
}

/// Deterministic pseudo-random start block (SplitMix64 stream, fixed seed).
fn start_block<T: Scalar>(d: usize, b: usize) -> Vec<T> {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    (0..d * b)
        .map(|_| {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            T::lit((z >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        })
        .collect()
}

/// Fits the 2-component PCA plane of `points` (sample covariance, `n - 1`).
///
/// The top-2 eigenpairs come from block subspace iteration with
/// Rayleigh-Ritz extraction, run until the leading 2-D subspace moves by less
/// than 1e-12 between sweeps. Each axis is signed so that its
/// largest-magnitude coordinate is positive.
pub fn fit_pca<T: Scalar, V: AsRef<[T]>>(points: &[V]) -> Result<Projection<T>, LandscapeError> {
    let n = points.len();
    if n < 3 {
        return Err(LandscapeError::TooFewPoints(n));
    }
    let d = points[0].as_ref().len();
    if d < 2 {
        return Err(LandscapeError::DimensionTooSmall(d));
    }
    if points.iter().any(|p| p.as_ref().len() != d) {
        return Err(LandscapeError::RaggedPoints);
    }

    let nf = T::from_usize_lossy(n);
    let mut mean = vec![T::zero(); d];
    for p in points {
        for (m, &x) in mean.iter_mut().zip(p.as_ref()) {
            *m = *m + x;
        }
    }
    mean.iter_mut().for_each(|m| *m = *m / nf);

    let mut cov = vec![T::zero(); d * d];
    let mut centered = vec![T::zero(); d];
    for p in points {
        for ((c, &x), &m) in centered.iter_mut().zip(p.as_ref()).zip(&mean) {
            *c = x - m;
        }
        for i in 0..d {
            let ci = centered[i];
            if ci == T::zero() {
                continue;
            }
            let row = &mut cov[i * d..(i + 1) * d];
            for j in i..d {
                row[j] = row[j] + ci * centered[j];
            }
        }
    }
    let denom = T::from_usize_lossy(n - 1);
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / denom;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    let total_variance: T = (0..d).map(|i| cov[i * d + i]).sum();

    let (values, axes) = top_two_eigenpairs(&cov, d);
    let scale = total_variance.max(T::min_positive_value());
    let tol = T::lit(1e-12) * scale;
    if total_variance <= T::zero() || values[0] <= tol {
        return Err(LandscapeError::RankDeficient { rank: 0 });
    }
    if values[1] <= tol {
        return Err(LandscapeError::RankDeficient { rank: 1 });
    }

    let basis = axes.map(|mut v| {
        let mut best = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[best].abs() {
                best = i;
            }
        }
        if v[best] < T::zero() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    });

    Ok(Projection {
        mean,
        basis,
        explained_variance: [values[0].max(T::zero()), values[1].max(T::zero())],
        total_variance,
    })
}

fn top_two_eigenpairs<T: Scalar>(cov: &[T], d: usize) -> ([T; 2], [Vec<T>; 2]) {
    let b = d.min(RITZ_BLOCK);
    let mut q = start_block::<T>(d, b);
    let mut ritz_values = vec![T::zero(); b];
    let mut prev: Option<Vec<T>> = None;

    let mut z = sym_mul(cov, &q, d, b);
    for _ in 0..MAX_SWEEPS {
        q.copy_from_slice(&z);
        orthonormalize(&mut q, d, b);
        let y = sym_mul(cov, &q, d, b);
        // H = Qᵀ C Q
        let mut h = vec![T::zero(); b * b];
        for r in 0..d {
            for i in 0..b {
                let qi = q[r * b + i];
                for j in 0..b {
                    h[i * b + j] = h[i * b + j] + qi * y[r * b + j];
                }
            }
        }
        for i in 0..b {
            for j in i + 1..b {
                let s = (h[i * b + j] + h[j * b + i]) / T::lit(2.0);
                h[i * b + j] = s;
                h[j * b + i] = s;
            }
        }
        let (vals, w) = jacobi_eigen(&h, b);
        ritz_values = vals;
        // rotate Q and CQ onto the Ritz basis
        let rotate = |m: &[T]| {
            let mut out = vec![T::zero(); d * b];
            for r in 0..d {
                for j in 0..b {
                    out[r * b + j] = (0..b).map(|k| m[r * b + k] * w[k * b + j]).sum();
                }
            }
            out
        };
        q = rotate(&q);
        z = rotate(&y);

        let lead: Vec<T> = (0..d).flat_map(|r| [q[r * b], q[r * b + 1.min(b - 1)]]).collect();
        if let Some(p) = &prev {
            if subspace_residual(p, &lead, d) < T::lit(1e-12) {
                break;
            }
        }
        prev = Some(lead);
    }

    let col = |j: usize| (0..d).map(|r| q[r * b + j]).collect::<Vec<T>>();
    ([ritz_values[0], ritz_values[1]], [col(0), col(1)])
}

/// `‖(I - P P ᵀ) Q‖_F` for `d × 2` blocks `P` and `Q` (row-major, 2 columns).
fn subspace_residual<T: Scalar>(p: &[T], q: &[T], d: usize) -> T {
    let mut m = [[T::zero(); 2]; 2];
    for r in 0..d {
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = m[i][j] + p[r * 2 + i] * q[r * 2 + j];
            }
        }
    }
    let mut acc = T::zero();
    for r in 0..d {
        for j in 0..2 {
            let proj = p[r * 2] * m[0][j] + p[r * 2 + 1] * m[1][j];
            let e = q[r * 2 + j] - proj;
            acc = acc + e * e;
        }
    }
    acc.sqrt()
}

/// Fits the shared plane over every token × layer point of a bundle.
/// Points enter in trajectory-id order so the fit does not depend on record
/// order in the file.
pub fn fit_bundle_pca(bundle: &TrajectoryBundle) -> Result<Projection<f64>, LandscapeError> {
    let mut trajs: Vec<_> = bundle.trajectories.iter().collect();
    trajs.sort_by(|a, b| a.id.cmp(&b.id));
    let points: Vec<Vec<f64>> = trajs.iter().flat_map(|t| t.polyline::<f64>()).collect();
    fit_pca(&points)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenPoint {
    pub trajectory_id: String,
    pub token_text: String,
    pub position: [f64; 2],
    /// Turning angle at this layer in radians.
    pub angle: Option<f64>,
}

/// Every token's projected position and turning angle at one internal layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeFrame {
    pub layer_index: usize,
    pub token_points: Vec<TokenPoint>,
}

/// One frame per internal layer `1..=L-1`; tokens in bundle order.
pub fn layer_frames(bundle: &TrajectoryBundle, cfg: &AnalysisConfig, proj: &Projection<f64>) -> Vec<LandscapeFrame> {
    type TokenTrack = (Vec<[f64; 2]>, Vec<Option<f64>>);
    let per_token: Vec<TokenTrack> = bundle
        .trajectories
        .iter()
        .map(|t| {
            let pts = t.polyline::<f64>();
            let angles = turning_angles(&step_vectors::<f64, _>(&pts), cfg.degenerate_eps);
            (pts.iter().map(|p| proj.project(p)).collect(), angles.values)
        })
        .collect();

    (1..bundle.points_per_trajectory.saturating_sub(1))
        .map(|layer| LandscapeFrame {
            layer_index: layer,
            token_points: bundle
                .trajectories
                .iter()
                .zip(&per_token)
                .map(|(t, (pos, angles))| TokenPoint {
                    trajectory_id: t.id.clone(),
                    token_text: t.token_text.clone(),
                    position: pos[layer],
                    angle: angles[layer - 1],
                })
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn diagonal(&self) -> f64 {
        (self.x_max - self.x_min).hypot(self.y_max - self.y_min)
    }

    /// Bounding box of `points`, padded by 5% per side. A zero-extent axis is
    /// widened to match the other axis (or to ±1 if both are zero).
    pub fn around<'a>(points: impl IntoIterator<Item = &'a [f64; 2]>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut x0, mut x1, mut y0, mut y1) = (first[0], first[0], first[1], first[1]);
        for p in it {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        let (mut wx, mut wy) = (x1 - x0, y1 - y0);
        if wx == 0.0 && wy == 0.0 {
            wx = 2.0;
            wy = 2.0;
        } else if wx == 0.0 {
            wx = wy;
        } else if wy == 0.0 {
            wy = wx;
        }
        let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
        let (hx, hy) = (wx * 0.55, wy * 0.55);
        Some(Self {
            x_min: cx - hx,
            x_max: cx + hx,
            y_min: cy - hy,
            y_max: cy + hy,
        })
    }
}

/// Kernel-smoothed turning angle in degrees on a `resolution²` grid.
/// `values[row * resolution + col]`, row 0 at `y_min`, col 0 at `x_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatGrid {
    pub resolution: usize,
    pub bounds: Bounds,
    pub bandwidth: f64,
    pub values: Vec<f64>,
}

impl HeatGrid {
    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        let b = &self.bounds;
        let r = self.resolution as f64;
        [
            b.x_min + (col as f64 + 0.5) * (b.x_max - b.x_min) / r,
            b.y_min + (row as f64 + 0.5) * (b.y_max - b.y_min) / r,
        ]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.resolution + col]
    }
}

pub const NEUTRAL_ANGLE_DEG: f64 = 90.0;
const MIN_WEIGHT: f64 = 1e-12;

/// Rasterizes a frame over its own padded bounding box.
pub fn rasterize(
    frame: &LandscapeFrame,
    resolution: usize,
    bandwidth_fraction: f64,
) -> Result<HeatGrid, LandscapeError> {
    let bounds =
        Bounds::around(frame.token_points.iter().map(|t| &t.position)).ok_or(LandscapeError::NoDefinedAngles)?;
    rasterize_in(frame, bounds, resolution, bandwidth_fraction)
}

/// `90 + Σ w_t (θ_t - 90) / Σ w_t` with Gaussian weights of bandwidth
/// `bandwidth_fraction × diagonal(bounds)`; cells with `Σ w < 1e-12` stay 90.
pub fn rasterize_in(
    frame: &LandscapeFrame,
    bounds: Bounds,
    resolution: usize,
    bandwidth_fraction: f64,
) -> Result<HeatGrid, LandscapeError> {
    if resolution == 0 {
        return Err(LandscapeError::ZeroResolution);
    }
    if !(bandwidth_fraction > 0.0 && bandwidth_fraction.is_finite()) {
        return Err(LandscapeError::BadBandwidth(bandwidth_fraction));
    }
    let sources: Vec<([f64; 2], f64)> = frame
        .token_points
        .iter()
        .filter_map(|t| Some((t.position, t.angle?.to_degrees() - NEUTRAL_ANGLE_DEG)))
        .collect();
    if sources.is_empty() {
        return Err(LandscapeError::NoDefinedAngles);
    }

    let bandwidth = bandwidth_fraction * bounds.diagonal();
    let inv_two_h2 = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut grid = HeatGrid {
        resolution,
        bounds,
        bandwidth,
        values: Vec::new(),
    };
    let rows: Vec<Vec<f64>> = (0..resolution)
        .into_par_iter()
        .map(|row| {
            (0..resolution)
                .map(|col| {
                    let c = grid.cell_center(row, col);
                    let (mut wsum, mut acc) = (0.0, 0.0);
                    for (p, dev) in &sources {
                        let r2 = (c[0] - p[0]).powi(2) + (c[1] - p[1]).powi(2);
                        let w = (-r2 * inv_two_h2).exp();
                        wsum += w;
                        acc += w * dev;
                    }
                    if wsum < MIN_WEIGHT {
                        NEUTRAL_ANGLE_DEG
                    } else {
                        NEUTRAL_ANGLE_DEG + acc / wsum
                    }
                })
                .collect()
        })
        .collect();
    grid.values = rows.concat();
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SheetRecord {
    pub token_id: String,
    pub position: [f64; 2],
    pub angle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sheet {
    pub layer_index: usize,
    pub records: Vec<SheetRecord>,
}

/// A token's path through the stacked sheets.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenThread {
    pub token_id: String,
    pub token_text: String,
    /// `(layer_index, position)` per sheet, ascending layer.
    pub path: Vec<(usize, [f64; 2])>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Foliation {
    pub sheets: Vec<Sheet>,
    pub threads: Vec<TokenThread>,
}

/// Layer-ordered sheets plus per-token threads, both keyed and sorted by
/// trajectory id.
pub fn foliation_export(bundle: &TrajectoryBundle, cfg: &AnalysisConfig, proj: &Projection<f64>) -> Foliation {
    let frames = layer_frames(bundle, cfg, proj);
    let mut order: Vec<usize> = (0..bundle.trajectories.len()).collect();
    order.sort_by(|&a, &b| bundle.trajectories[a].id.cmp(&bundle.trajectories[b].id));

    let sheets = frames
        .iter()
        .map(|f| Sheet {
            layer_index: f.layer_index,
            records: order
                .iter()
                .map(|&i| {
                    let tp = &f.token_points[i];
                    SheetRecord {
                        token_id: tp.trajectory_id.clone(),
                        position: tp.position,
                        angle: tp.angle,
                    }
                })
                .collect(),
        })
        .collect();
    let threads = order
        .iter()
        .map(|&i| TokenThread {
            token_id: bundle.trajectories[i].id.clone(),
            token_text: bundle.trajectories[i].token_text.clone(),
            path: frames
                .iter()
                .map(|f| (f.layer_index, f.token_points[i].position))
                .collect(),
        })
        .collect();
    Foliation { sheets, threads }
}

/// Blue below 90°, white at 90°, red above, linear over [60°, 120°].
pub fn angle_color(deg: f64) -> (u8, u8, u8) {
    let t = ((deg - 60.0) / 60.0).clamp(0.0, 1.0);
    if t < 0.5 {
        let s = t / 0.5;
        ((255.0 * s).round() as u8, (255.0 * s).round() as u8, 255)
    } else {
        let s = (1.0 - t) / 0.5;
        (255, (255.0 * s).round() as u8, (255.0 * s).round() as u8)
    }
}

/// Small-multiples SVG: one panel per frame with its heat grid and tokens.
pub fn render_svg(frames: &[LandscapeFrame], grids: &[HeatGrid]) -> String {
    const PANEL: f64 = 240.0;
    const GAP: f64 = 12.0;
    const COLS: usize = 3;
    let rows = frames.len().div_ceil(COLS).max(1);
    let width = COLS as f64 * (PANEL + GAP) + GAP;
    let height = rows as f64 * (PANEL + GAP + 16.0) + GAP;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    for (k, (frame, grid)) in frames.iter().zip(grids).enumerate() {
        let ox = GAP + (k % COLS) as f64 * (PANEL + GAP);
        let oy = GAP + 16.0 + (k / COLS) as f64 * (PANEL + GAP + 16.0);
        let _ = writeln!(
            s,
            r#"<text x="{ox}" y="{}" font-size="12" font-family="sans-serif">layer {}</text>"#,
            oy - 4.0,
            frame.layer_index
        );
        let stride = grid.resolution.div_ceil(60).max(1);
        let cells = grid.resolution.div_ceil(stride);
        let cell = PANEL / cells as f64;
        for (ri, row) in (0..grid.resolution).step_by(stride).enumerate() {
            for (ci, col) in (0..grid.resolution).step_by(stride).enumerate() {
                let (r, g, b) = angle_color(grid.value(row, col));
                let _ = writeln!(
                    s,
                    r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#{r:02x}{g:02x}{b:02x}"/>"##,
                    ox + ci as f64 * cell,
                    oy + PANEL - (ri + 1) as f64 * cell,
                    cell + 0.05,
                    cell + 0.05
                );
            }
        }
        let bx = &grid.bounds;
        for tp in &frame.token_points {
            let px = ox + (tp.position[0] - bx.x_min) / (bx.x_max - bx.x_min) * PANEL;
            let py = oy + PANEL - (tp.position[1] - bx.y_min) / (bx.y_max - bx.y_min) * PANEL;
            let _ = writeln!(
                s,
                r#"<circle cx="{px:.2}" cy="{py:.2}" r="2" fill="black"><title>{}</title></circle>"#,
                xml_escape(&tp.token_text)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(t: &str) -> String {
    t.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Sample variance of `points` along the orthonormal `axes`, summed.
pub fn captured_variance<T: Scalar, V: AsRef<[T]>>(points: &[V], mean: &[T], axes: &[Vec<T>]) -> T {
    let n = T::from_usize_lossy(points.len() - 1);
    axes.iter()
        .map(|a| {
            points
                .iter()
                .map(|p| {
                    let c: Vec<T> = p.as_ref().iter().zip(mean).map(|(&x, &m)| x - m).collect();
                    let v = dot(&c, a);
                    v * v
                })
                .sum::<T>()
                / n
        })
        .sum()
}
