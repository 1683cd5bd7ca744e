//! Deterministic synthetic bundles for fixtures, calibration and tests.
//!
//! The layered walks mimic the qualitative shape of encoder hidden-state
//! trajectories: step lengths grow with depth and consecutive step directions
//! are correlated, mostly negatively, with a minority of aligned steps. They
//! are stand-ins, not model outputs.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg64Mcg;

use crate::bundle::{BundleError, EmbeddingTrajectory, TrajectoryBundle};
use crate::null_model::{derive_stream, synthesize_null};
use crate::scalar::{dot, norm};

pub const SYNTHETIC_MODEL: &str = "synthetic/layered-walk-v1";

fn rng(seed: u64, stream: &str) -> Pcg64Mcg {
    derive_stream(seed, stream, 0)
}

fn gaussian(dim: usize, rng: &mut Pcg64Mcg) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit(dim: usize, rng: &mut Pcg64Mcg) -> Vec<f64> {
    let v = gaussian(dim, rng);
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// Unit vector at cosine `rho` to the unit vector `prev`.
fn correlated_unit(prev: &[f64], rho: f64, rng: &mut Pcg64Mcg) -> Vec<f64> {
    let mut z = gaussian(prev.len(), rng);
    let p = dot(&z, prev);
    z.iter_mut().zip(prev).for_each(|(zi, &pi)| *zi -= p * pi);
    let nz = norm(&z);
    let s = (1.0 - rho * rho).sqrt();
    prev.iter().zip(&z).map(|(&pi, &zi)| rho * pi + s * zi / nz).collect()
}

/// Step-direction cosine for one layer: aligned, reversing or near-orthogonal.
fn layer_rho(rng: &mut Pcg64Mcg) -> f64 {
    let u: f64 = rng.random();
    if u < 0.15 {
        rng.random_range(0.25..0.5)
    } else if u < 0.5 {
        rng.random_range(-0.45..-0.2)
    } else {
        rng.random_range(-0.15..0.1)
    }
}

fn to_f32(points: &[Vec<f64>]) -> Vec<Vec<f32>> {
    points.iter().map(|p| p.iter().map(|&x| x as f32).collect()).collect()
}

/// Steps of one layered walk.
fn walk_steps(dim: usize, steps: usize, rng: &mut Pcg64Mcg) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(steps);
    let mut dir = unit(dim, rng);
    for i in 0..steps {
        if i > 0 {
            dir = correlated_unit(&dir, layer_rho(rng), rng);
        }
        let z: f64 = rng.sample(StandardNormal);
        let base = if i + 1 == steps { 4.0 } else { 2.0 + 0.15 * i as f64 };
        let len = base * (0.2 * z).exp();
        out.push(dir.iter().map(|&d| d * len).collect());
    }
    out
}

fn integrate(start: &[f64], steps: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pts = vec![start.to_vec()];
    for s in steps {
        let next: Vec<f64> = pts
            .last()
            .expect("non-empty")
            .iter()
            .zip(s)
            .map(|(a, b)| a + b)
            .collect();
        pts.push(next);
    }
    pts
}

const WORDS: [&str; 16] = [
    "river", "bank", "house", "paper", "stone", "voice", "garden", "window", "market", "letter", "bridge", "forest",
    "table", "street", "cloud", "engine",
];

/// One target word per sentence: `sentences` trajectories of `points` layers.
pub fn sentence_bundle(
    seed: u64,
    sentences: usize,
    dim: usize,
    points: usize,
) -> Result<TrajectoryBundle, BundleError> {
    let mut r = rng(seed, "sentences");
    let anisotropy = gaussian(dim, &mut r);
    let trajectories = (0..sentences)
        .map(|s| {
            let start: Vec<f64> = gaussian(dim, &mut r)
                .iter()
                .zip(&anisotropy)
                .map(|(g, a)| 0.5 * g + 0.3 * a)
                .collect();
            let steps = walk_steps(dim, points - 1, &mut r);
            let word_index = r.random_range(1..12u64);
            let word = WORDS[s % WORDS.len()];
            EmbeddingTrajectory::new(
                format!("sent_{s:03}_tok_{word}"),
                word,
                format!("sent_{s:03}"),
                word_index,
                &to_f32(&integrate(&start, &steps)),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    TrajectoryBundle::new(SYNTHETIC_MODEL, dim, points, trajectories)
}

/// Every word of one passage, split between two topical clusters that drift
/// together through depth.
pub fn paragraph_bundle(seed: u64, words: usize, dim: usize, points: usize) -> Result<TrajectoryBundle, BundleError> {
    let mut r = rng(seed, "paragraph");
    let centers = [gaussian(dim, &mut r), gaussian(dim, &mut r)].map(|c| c.iter().map(|x| 2.0 * x).collect::<Vec<_>>());
    let drifts: Vec<Vec<Vec<f64>>> = (0..2).map(|_| walk_steps(dim, points - 1, &mut r)).collect();
    let trajectories = (0..words)
        .map(|w| {
            let k = usize::from(r.random::<f64>() < 0.45);
            let start: Vec<f64> = centers[k]
                .iter()
                .zip(gaussian(dim, &mut r))
                .map(|(c, g)| c + 0.6 * g)
                .collect();
            let own = walk_steps(dim, points - 1, &mut r);
            let steps: Vec<Vec<f64>> = drifts[k]
                .iter()
                .zip(&own)
                .map(|(d, o)| d.iter().zip(o).map(|(a, b)| 0.7 * a + 0.5 * b).collect())
                .collect();
            EmbeddingTrajectory::new(
                format!("p000:w{w:02}"),
                format!("{}{w:02}", WORDS[w % WORDS.len()]),
                "p000",
                w as u64,
                &to_f32(&integrate(&start, &steps)),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    TrajectoryBundle::new(SYNTHETIC_MODEL, dim, points, trajectories)
}

/// Aligned (with, without, base) bundles. `base` follows `with` up to small
/// step noise; `without` shares the first two steps and then mixes in an
/// independent walk.
pub fn lensing_bundles(
    seed: u64,
    triples: usize,
    dim: usize,
    points: usize,
) -> Result<[TrajectoryBundle; 3], BundleError> {
    let mut r = rng(seed, "lensing");
    let mut with = Vec::with_capacity(triples);
    let mut without = Vec::with_capacity(triples);
    let mut base = Vec::with_capacity(triples);
    for t in 0..triples {
        let id = format!("bank_river_{t:03}");
        let start: Vec<f64> = gaussian(dim, &mut r).iter().map(|x| 0.3 * x).collect();
        let steps = walk_steps(dim, points - 1, &mut r);
        let other = walk_steps(dim, points - 1, &mut r);
        let base_steps: Vec<Vec<f64>> = steps
            .iter()
            .map(|s| {
                let scale = 0.08 * norm(s) / (dim as f64).sqrt();
                s.iter()
                    .zip(gaussian(dim, &mut r))
                    .map(|(a, g)| a + scale * g)
                    .collect()
            })
            .collect();
        let without_steps: Vec<Vec<f64>> = steps
            .iter()
            .zip(&other)
            .enumerate()
            .map(|(i, (a, b))| {
                let w = if i < 2 { 0.0 } else { (0.15 * (i - 1) as f64).min(0.8) };
                a.iter().zip(b).map(|(x, y)| (1.0 - w) * x + w * y).collect()
            })
            .collect();
        let make = |steps: &[Vec<f64>], sentence: &str| {
            EmbeddingTrajectory::new(
                id.clone(),
                "bank",
                format!("{id}:{sentence}"),
                4,
                &to_f32(&integrate(&start, steps)),
            )
        };
        with.push(make(&steps, "with")?);
        without.push(make(&without_steps, "without")?);
        base.push(make(&base_steps, "base")?);
    }
    Ok([
        TrajectoryBundle::new(SYNTHETIC_MODEL, dim, points, with)?,
        TrajectoryBundle::new(SYNTHETIC_MODEL, dim, points, without)?,
        TrajectoryBundle::new(SYNTHETIC_MODEL, dim, points, base)?,
    ])
}

/// Trajectories drawn from the isotropic null itself, with step lengths taken
/// from a layered walk profile.
pub fn null_bundle(seed: u64, trajectories: usize, dim: usize, points: usize) -> Result<TrajectoryBundle, BundleError> {
    let mut r = Pcg64Mcg::seed_from_u64(seed);
    let trajs = (0..trajectories)
        .map(|t| {
            let lengths: Vec<f64> = (0..points - 1)
                .map(|i| (2.0 + 0.15 * i as f64) * (0.2 * r.sample::<f64, _>(StandardNormal)).exp())
                .collect();
            let mut stream = derive_stream(seed, &format!("null-bundle/{t}"), 0);
            let pts = synthesize_null(&lengths, dim, &mut stream);
            EmbeddingTrajectory::new(format!("n{t:03}"), "", format!("n{t:03}"), 0, &to_f32(&pts))
        })
        .collect::<Result<Vec<_>, _>>()?;
    TrajectoryBundle::new("synthetic/isotropic-null", dim, points, trajs)
}

/// Straight lines on the integer lattice, so `f32` storage is exact.
pub fn straight_bundle(
    seed: u64,
    trajectories: usize,
    dim: usize,
    points: usize,
) -> Result<TrajectoryBundle, BundleError> {
    let mut r = rng(seed, "straight");
    let trajs = (0..trajectories)
        .map(|t| {
            let start: Vec<f64> = (0..dim).map(|_| r.random_range(-5i32..=5) as f64).collect();
            let mut dir: Vec<f64> = (0..dim).map(|_| r.random_range(-3i32..=3) as f64).collect();
            if dir.iter().all(|&d| d == 0.0) {
                dir[0] = 1.0;
            }
            let pts: Vec<Vec<f64>> = (0..points)
                .map(|i| start.iter().zip(&dir).map(|(s, d)| s + i as f64 * d).collect())
                .collect();
            EmbeddingTrajectory::new(format!("l{t:03}"), "", format!("l{t:03}"), 0, &to_f32(&pts))
        })
        .collect::<Result<Vec<_>, _>>()?;
    TrajectoryBundle::new("synthetic/straight", dim, points, trajs)
}
