//! Local and global curvature proxies of a layerwise trajectory.
//!
//! Local curvature is the turning angle between consecutive step vectors;
//! global curvature is the ratio of polyline length to endpoint chord.
//! Angles are radians throughout. A turning angle is undefined when either
//! adjacent step is shorter than the degenerate tolerance; undefined angles
//! never enter counts or means.

use crate::bundle::{AnalysisConfig, EmbeddingTrajectory};
use crate::scalar::{angle_between, norm, sub, Scalar};

/// Turning angles of one trajectory, `points - 2` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSeries<T> {
    pub values: Vec<Option<T>>,
    pub defined_count: usize,
}

impl<T: Scalar> AngleSeries<T> {
    pub fn from_values(values: Vec<Option<T>>) -> Self {
        let defined_count = values.iter().filter(|v| v.is_some()).count();
        Self { values, defined_count }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn defined(&self) -> impl Iterator<Item = T> + '_ {
        self.values.iter().flatten().copied()
    }

    /// Mean of the defined angles, `None` if there are none.
    pub fn mean(&self) -> Option<T> {
        if self.defined_count == 0 {
            return None;
        }
        Some(self.defined().sum::<T>() / T::from_usize_lossy(self.defined_count))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TailCounts {
    pub flat: usize,
    pub sharp: usize,
}

impl TailCounts {
    /// Combined tail count `C = flat + sharp`.
    pub fn combined(&self) -> usize {
        self.flat + self.sharp
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSummary<T> {
    pub trajectory_id: String,
    pub angles: AngleSeries<T>,
    pub path_length: T,
    pub chord: T,
    /// Length-to-chord ratio; `None` when the chord is degenerate.
    pub ratio: Option<T>,
    pub flat_count: usize,
    pub sharp_count: usize,
    pub tail_count: usize,
}

/// `Δ_i = x_{i+1} - x_i` for consecutive points.
pub fn step_vectors<T: Scalar, V: AsRef<[T]>>(points: &[V]) -> Vec<Vec<T>> {
    points.windows(2).map(|w| sub(w[1].as_ref(), w[0].as_ref())).collect()
}

/// Angle between each pair of consecutive steps.
pub fn turning_angles<T: Scalar, V: AsRef<[T]>>(steps: &[V], eps: T) -> AngleSeries<T> {
    let values = steps
        .windows(2)
        .map(|w| angle_between(w[0].as_ref(), w[1].as_ref(), eps))
        .collect();
    AngleSeries::from_values(values)
}

/// Polyline arc length `Σ ‖Δ_i‖`.
pub fn path_length<T: Scalar, V: AsRef<[T]>>(steps: &[V]) -> T {
    steps.iter().map(|s| norm(s.as_ref())).sum()
}

/// Endpoint distance `‖x_N - x_0‖`.
pub fn chord<T: Scalar, V: AsRef<[T]>>(points: &[V]) -> T {
    match (points.first(), points.last()) {
        (Some(a), Some(b)) => norm(&sub(b.as_ref(), a.as_ref())),
        _ => T::zero(),
    }
}

/// Length-to-chord ratio of a polyline; `None` if the chord is below `eps`.
pub fn length_chord_ratio<T: Scalar, V: AsRef<[T]>>(points: &[V], eps: T) -> Option<T> {
    let steps = step_vectors(points);
    ratio_from_parts(path_length(&steps), chord(points), eps)
}

pub(crate) fn ratio_from_parts<T: Scalar>(length: T, chord: T, eps: T) -> Option<T> {
    (chord >= eps && chord > T::zero()).then(|| length / chord)
}

/// Strict-inequality tail counts over the defined angles.
pub fn tail_counts<T: Scalar>(angles: &AngleSeries<T>, cfg: &AnalysisConfig) -> TailCounts {
    let flat = T::lit(cfg.flat_threshold_rad());
    let sharp = T::lit(cfg.sharp_threshold_rad());
    angles.defined().fold(TailCounts::default(), |mut acc, a| {
        if a < flat {
            acc.flat += 1;
        } else if a > sharp {
            acc.sharp += 1;
        }
        acc
    })
}

/// Full summary of an arbitrary polyline.
pub fn summarize_polyline<T: Scalar, V: AsRef<[T]>>(
    id: &str,
    points: &[V],
    cfg: &AnalysisConfig,
) -> CurvatureSummary<T> {
    let eps = T::lit(cfg.degenerate_eps);
    let steps = step_vectors(points);
    let angles = turning_angles(&steps, eps);
    let length = path_length(&steps);
    let chord = chord(points);
    let tails = tail_counts(&angles, cfg);
    CurvatureSummary {
        trajectory_id: id.to_owned(),
        ratio: ratio_from_parts(length, chord, eps),
        path_length: length,
        chord,
        flat_count: tails.flat,
        sharp_count: tails.sharp,
        tail_count: tails.combined(),
        angles,
    }
}

/// Summary of a bundle trajectory, computed in `f64`.
pub fn summarize(traj: &EmbeddingTrajectory, cfg: &AnalysisConfig) -> CurvatureSummary<f64> {
    summarize_polyline(&traj.id, &traj.polyline::<f64>(), cfg)
}
