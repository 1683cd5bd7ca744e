//! Context-deflection metrics between trajectories of the same target token
//! under different sentence contexts.
//!
//! For a pair of trajectories `a`, `b` with equal shape:
//!
//! * `d_final`: cosine distance between final points,
//! * `d_layer`: mean Euclidean distance over all layers,
//! * `delta_curv`: mean `1 - cos` between second differences
//!   `Γ_i = Δ_{i+1} - Δ_i`, skipping zero-norm pairs,
//! * `delta_theta`: mean absolute turning-angle difference (radians) over
//!   indices where both angles are defined.

use thiserror::Error;

use crate::bundle::EmbeddingTrajectory;
use crate::curvature::{step_vectors, turning_angles};
use crate::scalar::{clamped_cosine, distance, sub, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum LensingError {
    #[error("shape mismatch: {a_points}x{a_dim} vs {b_points}x{b_dim}")]
    ShapeMismatch {
        a_points: usize,
        a_dim: usize,
        b_points: usize,
        b_dim: usize,
    },
    #[error("empty cohort")]
    EmptyCohort,
    #[error("triple ids are not aligned across bundles: {}", .0.join(", "))]
    Misaligned(Vec<String>),
}

fn check_shapes<T, V: AsRef<[T]>>(a: &[V], b: &[V]) -> Result<(), LensingError> {
    let dim = |p: &[V]| p.first().map_or(0, |x| x.as_ref().len());
    if a.len() != b.len() || dim(a) != dim(b) {
        return Err(LensingError::ShapeMismatch {
            a_points: a.len(),
            a_dim: dim(a),
            b_points: b.len(),
            b_dim: dim(b),
        });
    }
    Ok(())
}

/// A mean over the indices that survived degeneracy filtering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilteredMean<T> {
    /// `None` when no index was usable.
    pub value: Option<T>,
    pub included: usize,
    pub total: usize,
}

impl<T: Scalar> FilteredMean<T> {
    fn from_terms(terms: impl Iterator<Item = Option<T>>) -> Self {
        let (mut sum, mut included, mut total) = (T::zero(), 0, 0);
        for t in terms {
            total += 1;
            if let Some(v) = t {
                sum = sum + v;
                included += 1;
            }
        }
        Self {
            value: (included > 0).then(|| sum / T::from_usize_lossy(included)),
            included,
            total,
        }
    }
}

/// Cosine distance between the final points; `None` if either has zero norm.
pub fn final_separation<T: Scalar, V: AsRef<[T]>>(a: &[V], b: &[V], eps: T) -> Result<Option<T>, LensingError> {
    check_shapes(a, b)?;
    let (Some(x), Some(y)) = (a.last(), b.last()) else {
        return Ok(None);
    };
    Ok(clamped_cosine(x.as_ref(), y.as_ref(), eps).map(|c| T::one() - c))
}

/// `(1 / (N+1)) Σ_i ‖x_i^a - x_i^b‖`.
pub fn layer_separation<T: Scalar, V: AsRef<[T]>>(a: &[V], b: &[V]) -> Result<T, LensingError> {
    check_shapes(a, b)?;
    if a.is_empty() {
        return Ok(T::zero());
    }
    let total: T = a.iter().zip(b).map(|(x, y)| distance(x.as_ref(), y.as_ref())).sum();
    Ok(total / T::from_usize_lossy(a.len()))
}

fn second_differences<T: Scalar, V: AsRef<[T]>>(points: &[V]) -> Vec<Vec<T>> {
    step_vectors::<T, _>(points)
        .windows(2)
        .map(|w| sub(&w[1], &w[0]))
        .collect()
}

/// Mean cosine mismatch of second differences.
pub fn curvature_divergence<T: Scalar, V: AsRef<[T]>>(
    a: &[V],
    b: &[V],
    eps: T,
) -> Result<FilteredMean<T>, LensingError> {
    check_shapes(a, b)?;
    let ga = second_differences(a);
    let gb = second_differences(b);
    Ok(FilteredMean::from_terms(
        ga.iter()
            .zip(&gb)
            .map(|(x, y)| clamped_cosine(x, y, eps).map(|c| T::one() - c)),
    ))
}

/// Mean `|θ_i^a - θ_i^b|` over commonly defined angles.
pub fn turning_angle_gap<T: Scalar, V: AsRef<[T]>>(a: &[V], b: &[V], eps: T) -> Result<FilteredMean<T>, LensingError> {
    check_shapes(a, b)?;
    let ta = turning_angles(&step_vectors::<T, _>(a), eps);
    let tb = turning_angles(&step_vectors::<T, _>(b), eps);
    Ok(FilteredMean::from_terms(
        ta.values.iter().zip(&tb.values).map(|(&x, &y)| Some((x? - y?).abs())),
    ))
}

/// All four metrics for one pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMetrics<T> {
    pub d_final: Option<T>,
    pub d_layer: T,
    pub delta_curv: FilteredMean<T>,
    pub delta_theta: FilteredMean<T>,
}

pub fn compare_pair<T: Scalar, V: AsRef<[T]>>(a: &[V], b: &[V], eps: T) -> Result<PairMetrics<T>, LensingError> {
    Ok(PairMetrics {
        d_final: final_separation(a, b, eps)?,
        d_layer: layer_separation(a, b)?,
        delta_curv: curvature_divergence(a, b, eps)?,
        delta_theta: turning_angle_gap(a, b, eps)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pairing {
    WithVsWithout,
    WithoutVsBase,
    WithVsBase,
}

impl Pairing {
    pub const ALL: [Pairing; 3] = [Pairing::WithVsWithout, Pairing::WithoutVsBase, Pairing::WithVsBase];

    pub fn name(self) -> &'static str {
        match self {
            Pairing::WithVsWithout => "with_vs_without",
            Pairing::WithoutVsBase => "without_vs_base",
            Pairing::WithVsBase => "with_vs_base",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    DFinal,
    DLayer,
    DeltaCurv,
    DeltaTheta,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::DFinal, Metric::DLayer, Metric::DeltaCurv, Metric::DeltaTheta];

    pub fn name(self) -> &'static str {
        match self {
            Metric::DFinal => "d_final",
            Metric::DLayer => "d_layer",
            Metric::DeltaCurv => "delta_curv",
            Metric::DeltaTheta => "delta_theta",
        }
    }
}

impl<T: Scalar> PairMetrics<T> {
    pub fn get(&self, metric: Metric) -> Option<T> {
        match metric {
            Metric::DFinal => self.d_final,
            Metric::DLayer => Some(self.d_layer),
            Metric::DeltaCurv => self.delta_curv.value,
            Metric::DeltaTheta => self.delta_theta.value,
        }
    }
}

/// The same target token in three sentence variants.
#[derive(Debug, Clone)]
pub struct SentenceTriple {
    pub triple_id: String,
    pub with_traj: EmbeddingTrajectory,
    pub without_traj: EmbeddingTrajectory,
    pub base_traj: EmbeddingTrajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport<T> {
    pub triple_id: String,
    pub with_vs_without: PairMetrics<T>,
    pub without_vs_base: PairMetrics<T>,
    pub with_vs_base: PairMetrics<T>,
}

impl<T: Scalar> DivergenceReport<T> {
    pub fn pairing(&self, p: Pairing) -> &PairMetrics<T> {
        match p {
            Pairing::WithVsWithout => &self.with_vs_without,
            Pairing::WithoutVsBase => &self.without_vs_base,
            Pairing::WithVsBase => &self.with_vs_base,
        }
    }
}

pub fn compare_polylines<T: Scalar, V: AsRef<[T]>>(
    triple_id: &str,
    with: &[V],
    without: &[V],
    base: &[V],
    eps: T,
) -> Result<DivergenceReport<T>, LensingError> {
    Ok(DivergenceReport {
        triple_id: triple_id.to_owned(),
        with_vs_without: compare_pair(with, without, eps)?,
        without_vs_base: compare_pair(without, base, eps)?,
        with_vs_base: compare_pair(with, base, eps)?,
    })
}

/// Pairs trajectories of three bundles by id, in `with` order. Every id must
/// occur exactly once in each bundle.
pub fn align_triples(
    with: &[EmbeddingTrajectory],
    without: &[EmbeddingTrajectory],
    base: &[EmbeddingTrajectory],
) -> Result<Vec<SentenceTriple>, LensingError> {
    use std::collections::{BTreeMap, BTreeSet};
    let index = |ts: &[EmbeddingTrajectory]| -> BTreeMap<String, usize> {
        ts.iter().enumerate().map(|(i, t)| (t.id.clone(), i)).collect()
    };
    let (iw, io, ib) = (index(with), index(without), index(base));
    let all: BTreeSet<&String> = iw.keys().chain(io.keys()).chain(ib.keys()).collect();
    let bad: Vec<String> = all
        .into_iter()
        .filter(|id| !(iw.contains_key(*id) && io.contains_key(*id) && ib.contains_key(*id)))
        .cloned()
        .collect();
    if !bad.is_empty() || iw.len() != with.len() || io.len() != without.len() || ib.len() != base.len() {
        return Err(LensingError::Misaligned(bad));
    }
    Ok(with
        .iter()
        .map(|w| SentenceTriple {
            triple_id: w.id.clone(),
            with_traj: w.clone(),
            without_traj: without[io[&w.id]].clone(),
            base_traj: base[ib[&w.id]].clone(),
        })
        .collect())
}

pub fn compare_triple(t: &SentenceTriple, eps: f64) -> Result<DivergenceReport<f64>, LensingError> {
    compare_polylines(
        &t.triple_id,
        &t.with_traj.polyline::<f64>(),
        &t.without_traj.polyline::<f64>(),
        &t.base_traj.polyline::<f64>(),
        eps,
    )
}

/// Mean, spread and five-number summary of one metric over a cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; `None` for a single observation.
    pub sd: Option<f64>,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Reports whose value for this metric was degenerate.
    pub excluded: usize,
}

/// Linear-interpolation quantile of sorted data (`(n-1)p` position).
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

pub fn describe(values: &[f64], excluded: usize) -> Option<MetricStats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let (mean, squares) = crate::stats::mean_and_squares(values);
    let sd = (n > 1).then(|| (squares / (n - 1) as f64).sqrt());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(MetricStats {
        n,
        mean,
        sd,
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[n - 1],
        excluded,
    })
}

/// Per-pairing, per-metric statistics in `Pairing::ALL` × `Metric::ALL` order.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortSummary {
    pub triples: usize,
    pub cells: Vec<(Pairing, Metric, Option<MetricStats>)>,
}

impl CohortSummary {
    pub fn get(&self, p: Pairing, m: Metric) -> Option<&MetricStats> {
        self.cells
            .iter()
            .find(|(cp, cm, _)| *cp == p && *cm == m)
            .and_then(|(_, _, s)| s.as_ref())
    }

    /// True when both `with_vs_without` and `without_vs_base` means exceed the
    /// `with_vs_base` mean on every metric.
    pub fn pairing_order_holds(&self) -> bool {
        Metric::ALL.iter().all(|&m| {
            let mean = |p| self.get(p, m).map(|s| s.mean);
            match (
                mean(Pairing::WithVsWithout),
                mean(Pairing::WithoutVsBase),
                mean(Pairing::WithVsBase),
            ) {
                (Some(a), Some(b), Some(c)) => a > c && b > c,
                _ => false,
            }
        })
    }
}

pub fn summarize_cohort(reports: &[DivergenceReport<f64>]) -> Result<CohortSummary, LensingError> {
    if reports.is_empty() {
        return Err(LensingError::EmptyCohort);
    }
    let mut cells = Vec::with_capacity(12);
    for p in Pairing::ALL {
        for m in Metric::ALL {
            let values: Vec<f64> = reports.iter().filter_map(|r| r.pairing(p).get(m)).collect();
            let excluded = reports.len() - values.len();
            cells.push((p, m, describe(&values, excluded)));
        }
    }
    Ok(CohortSummary {
        triples: reports.len(),
        cells,
    })
}
