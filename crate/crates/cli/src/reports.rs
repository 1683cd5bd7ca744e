//! Report documents produced by each subcommand.

use serde::Serialize;

use semcurv::curvature::{summarize, CurvatureSummary};
use semcurv::geometry_check::GeometryReport;
use semcurv::landscape::{Bounds, Foliation, HeatGrid, LandscapeFrame, Projection};
use semcurv::lensing::{CohortSummary, DivergenceReport, FilteredMean, PairMetrics};
use semcurv::null_model::NullDraws;
use semcurv::stats::{PairedReport, PairedStat, PooledReport};
use semcurv::{AnalysisConfig, TrajectoryBundle};

use crate::manifest::RunManifest;

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdConfig {
    pub flat_deg: f64,
    pub sharp_deg: f64,
    pub degenerate_eps: f64,
}

impl From<&AnalysisConfig> for ThresholdConfig {
    fn from(c: &AnalysisConfig) -> Self {
        Self {
            flat_deg: c.flat_threshold_deg,
            sharp_deg: c.sharp_threshold_deg,
            degenerate_eps: c.degenerate_eps,
        }
    }
}

// --- analyze ---------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CorpusTotals {
    pub trajectories: usize,
    /// Defined turning angles.
    pub angles: usize,
    pub undefined_angles: usize,
    pub flat: usize,
    pub sharp: usize,
    pub tail: usize,
    pub mean_angle_deg: Option<f64>,
    /// Mean length-to-chord ratio over trajectories with a defined ratio.
    pub mean_r: Option<f64>,
    pub degenerate_r: usize,
}

impl CorpusTotals {
    pub fn from_summaries(summaries: &[CurvatureSummary<f64>]) -> Self {
        let angles: usize = summaries.iter().map(|s| s.angles.defined_count).sum();
        let all_angles: usize = summaries.iter().map(|s| s.angles.len()).sum();
        let angle_sum: f64 = summaries.iter().flat_map(|s| s.angles.defined()).sum();
        let ratios: Vec<f64> = summaries.iter().filter_map(|s| s.ratio).collect();
        Self {
            trajectories: summaries.len(),
            angles,
            undefined_angles: all_angles - angles,
            flat: summaries.iter().map(|s| s.flat_count).sum(),
            sharp: summaries.iter().map(|s| s.sharp_count).sum(),
            tail: summaries.iter().map(|s| s.tail_count).sum(),
            mean_angle_deg: (angles > 0).then(|| (angle_sum / angles as f64).to_degrees()),
            mean_r: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
            degenerate_r: summaries.len() - ratios.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRow {
    pub id: String,
    pub token_text: String,
    pub sentence_id: String,
    pub word_index: u64,
    pub turning_angles_deg: Vec<Option<f64>>,
    pub flat: usize,
    pub sharp: usize,
    pub tail: usize,
    pub path_length: f64,
    pub chord: f64,
    pub r: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeReport {
    pub manifest: RunManifest<ThresholdConfig>,
    pub model_name: String,
    pub dim: usize,
    pub points_per_trajectory: usize,
    pub totals: CorpusTotals,
    pub trajectories: Vec<TrajectoryRow>,
}

pub fn summaries(bundle: &TrajectoryBundle, cfg: &AnalysisConfig) -> Vec<CurvatureSummary<f64>> {
    bundle.trajectories.iter().map(|t| summarize(t, cfg)).collect()
}

pub fn analyze_report(
    bundle: &TrajectoryBundle,
    cfg: &AnalysisConfig,
    manifest: RunManifest<ThresholdConfig>,
) -> AnalyzeReport {
    let sums = summaries(bundle, cfg);
    AnalyzeReport {
        manifest,
        model_name: bundle.model_name.clone(),
        dim: bundle.dim,
        points_per_trajectory: bundle.points_per_trajectory,
        totals: CorpusTotals::from_summaries(&sums),
        trajectories: bundle
            .trajectories
            .iter()
            .zip(&sums)
            .map(|(t, s)| TrajectoryRow {
                id: t.id.clone(),
                token_text: t.token_text.clone(),
                sentence_id: t.sentence_id.clone(),
                word_index: t.word_index,
                turning_angles_deg: s.angles.values.iter().map(|a| a.map(f64::to_degrees)).collect(),
                flat: s.flat_count,
                sharp: s.sharp_count,
                tail: s.tail_count,
                path_length: s.path_length,
                chord: s.chord,
                r: s.ratio,
            })
            .collect(),
    }
}

// --- nulltest --------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct NullTestConfig {
    #[serde(flatten)]
    pub thresholds: ThresholdConfig,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NullSummary {
    /// Per-trajectory null means, summed over the corpus.
    pub flat: f64,
    pub sharp: f64,
    pub tail: f64,
    /// Mean over trajectories of the per-trajectory null mean ratio.
    pub mean_r: Option<f64>,
    pub degenerate_r_draws: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PooledRow {
    pub samples: usize,
    pub c_pool_obs: usize,
    pub mean_delta_c: f64,
    pub p_mc_c: f64,
    pub r_bar_obs: Option<f64>,
    pub mean_delta_r: Option<f64>,
    pub p_mc_r: f64,
    pub r_excluded_trajectories: usize,
    pub undefined_delta_r_samples: usize,
}

impl From<&PooledReport> for PooledRow {
    fn from(p: &PooledReport) -> Self {
        Self {
            samples: p.samples(),
            c_pool_obs: p.c_pool_obs,
            mean_delta_c: p.mean_delta_c(),
            p_mc_c: p.p_mc_c,
            r_bar_obs: p.r_bar_obs,
            mean_delta_r: p.mean_delta_r(),
            p_mc_r: p.p_mc_r,
            r_excluded_trajectories: p.r_excluded,
            undefined_delta_r_samples: p.delta_r_bar.iter().filter(|d| d.is_none()).count(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairedRow {
    pub n: usize,
    pub mean_difference: f64,
    pub sd: f64,
    /// `null` when the variance is zero and the mean is not.
    pub t: f64,
    pub dof: usize,
    pub p: f64,
    pub degenerate_variance: bool,
}

impl From<&PairedStat> for PairedRow {
    fn from(s: &PairedStat) -> Self {
        Self {
            n: s.n,
            mean_difference: s.d_bar,
            sd: s.sd,
            t: s.t,
            dof: s.dof,
            p: s.p,
            degenerate_variance: s.degenerate_variance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairedRows {
    pub c: PairedRow,
    pub r: PairedRow,
    pub r_excluded: usize,
}

impl From<&PairedReport> for PairedRows {
    fn from(p: &PairedReport) -> Self {
        Self {
            c: (&p.c).into(),
            r: (&p.r).into(),
            r_excluded: p.r_excluded,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NullTrajectoryRow {
    pub id: String,
    pub c_obs: usize,
    pub c_null_mean: f64,
    pub flat_null_mean: f64,
    pub sharp_null_mean: f64,
    pub r_obs: Option<f64>,
    pub r_null_mean: Option<f64>,
    pub r_null_degenerate: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct NullTestReport {
    pub manifest: RunManifest<NullTestConfig>,
    pub model_name: String,
    pub observed: CorpusTotals,
    pub null: NullSummary,
    pub pooled: PooledRow,
    pub paired: PairedRows,
    pub trajectories: Vec<NullTrajectoryRow>,
}

pub fn null_test_report(
    bundle: &TrajectoryBundle,
    sums: &[CurvatureSummary<f64>],
    nulls: &[NullDraws],
    pooled: &PooledReport,
    paired: &PairedReport,
    manifest: RunManifest<NullTestConfig>,
) -> NullTestReport {
    let null_r: Vec<f64> = nulls.iter().filter_map(NullDraws::mean_r).collect();
    NullTestReport {
        manifest,
        model_name: bundle.model_name.clone(),
        observed: CorpusTotals::from_summaries(sums),
        null: NullSummary {
            flat: nulls.iter().map(NullDraws::mean_flat).sum(),
            sharp: nulls.iter().map(NullDraws::mean_sharp).sum(),
            tail: nulls.iter().map(NullDraws::mean_c).sum(),
            mean_r: (!null_r.is_empty()).then(|| null_r.iter().sum::<f64>() / null_r.len() as f64),
            degenerate_r_draws: nulls.iter().map(NullDraws::degenerate_r_count).sum(),
        },
        pooled: pooled.into(),
        paired: paired.into(),
        trajectories: sums
            .iter()
            .zip(nulls)
            .map(|(s, n)| NullTrajectoryRow {
                id: s.trajectory_id.clone(),
                c_obs: s.tail_count,
                c_null_mean: n.mean_c(),
                flat_null_mean: n.mean_flat(),
                sharp_null_mean: n.mean_sharp(),
                r_obs: s.ratio,
                r_null_mean: n.mean_r(),
                r_null_degenerate: n.degenerate_r_count(),
            })
            .collect(),
    }
}

// --- lensing ---------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct LensingConfig {
    pub degenerate_eps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairRow {
    pub d_final: Option<f64>,
    pub d_layer: f64,
    pub delta_curv: Option<f64>,
    pub delta_curv_terms: usize,
    pub delta_theta_rad: Option<f64>,
    pub delta_theta_terms: usize,
    pub terms_total: usize,
}

impl From<&PairMetrics<f64>> for PairRow {
    fn from(m: &PairMetrics<f64>) -> Self {
        let FilteredMean {
            value: dc,
            included: nc,
            total,
        } = m.delta_curv;
        Self {
            d_final: m.d_final,
            d_layer: m.d_layer,
            delta_curv: dc,
            delta_curv_terms: nc,
            delta_theta_rad: m.delta_theta.value,
            delta_theta_terms: m.delta_theta.included,
            terms_total: total.max(m.delta_theta.total),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TripleRow {
    pub triple_id: String,
    pub with_vs_without: PairRow,
    pub without_vs_base: PairRow,
    pub with_vs_base: PairRow,
}

#[derive(Debug, Clone, Serialize)]
pub struct CohortCell {
    pub pairing: &'static str,
    pub metric: &'static str,
    pub n: usize,
    pub excluded: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CohortRow {
    pub triples: usize,
    pub delta_theta_unit: &'static str,
    pub cells: Vec<CohortCell>,
    /// Both `with_vs_without` and `without_vs_base` means exceed the
    /// `with_vs_base` mean on every metric.
    pub pairing_order_holds: bool,
    pub pairing_order: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct LensingReport {
    pub manifest: RunManifest<LensingConfig>,
    pub triples: Vec<TripleRow>,
    pub cohort: CohortRow,
}

pub fn lensing_report(
    reports: &[DivergenceReport<f64>],
    cohort: &CohortSummary,
    manifest: RunManifest<LensingConfig>,
) -> LensingReport {
    let holds = cohort.pairing_order_holds();
    LensingReport {
        manifest,
        triples: reports
            .iter()
            .map(|r| TripleRow {
                triple_id: r.triple_id.clone(),
                with_vs_without: (&r.with_vs_without).into(),
                without_vs_base: (&r.without_vs_base).into(),
                with_vs_base: (&r.with_vs_base).into(),
            })
            .collect(),
        cohort: CohortRow {
            triples: cohort.triples,
            delta_theta_unit: "radians",
            cells: cohort
                .cells
                .iter()
                .map(|(p, m, s)| CohortCell {
                    pairing: p.name(),
                    metric: m.name(),
                    n: s.as_ref().map_or(0, |s| s.n),
                    excluded: s.as_ref().map_or(cohort.triples, |s| s.excluded),
                    mean: s.as_ref().map(|s| s.mean),
                    sd: s.as_ref().and_then(|s| s.sd),
                    min: s.as_ref().map(|s| s.min),
                    q1: s.as_ref().map(|s| s.q1),
                    median: s.as_ref().map(|s| s.median),
                    q3: s.as_ref().map(|s| s.q3),
                    max: s.as_ref().map(|s| s.max),
                })
                .collect(),
            pairing_order_holds: holds,
            pairing_order: if holds {
                "paper-consistent"
            } else {
                "not-paper-consistent"
            },
        },
    }
}

// --- landscape -------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct LandscapeConfig {
    #[serde(flatten)]
    pub thresholds: ThresholdConfig,
    pub grid: usize,
    pub bandwidth: f64,
    pub render: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionRow {
    pub explained_variance: [f64; 2],
    pub total_variance: f64,
    pub explained_ratio: f64,
    pub mean: Vec<f64>,
    pub axis_1: Vec<f64>,
    pub axis_2: Vec<f64>,
}

impl From<&Projection<f64>> for ProjectionRow {
    fn from(p: &Projection<f64>) -> Self {
        Self {
            explained_variance: p.explained_variance,
            total_variance: p.total_variance,
            explained_ratio: p.explained_ratio(),
            mean: p.mean.clone(),
            axis_1: p.basis[0].clone(),
            axis_2: p.basis[1].clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TokenRow {
    pub id: String,
    pub token_text: String,
    pub x: f64,
    pub y: f64,
    pub angle_deg: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameRow {
    pub layer: usize,
    pub tokens: Vec<TokenRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThreadRow {
    pub id: String,
    pub token_text: String,
    /// `[layer, x, y]` per sheet.
    pub path: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FramesReport {
    pub manifest: RunManifest<LandscapeConfig>,
    pub projection: ProjectionRow,
    pub frames: Vec<FrameRow>,
    pub threads: Vec<ThreadRow>,
}

pub fn frames_report(
    proj: &Projection<f64>,
    frames: &[LandscapeFrame],
    foliation: &Foliation,
    manifest: RunManifest<LandscapeConfig>,
) -> FramesReport {
    FramesReport {
        manifest,
        projection: proj.into(),
        frames: frames
            .iter()
            .map(|f| FrameRow {
                layer: f.layer_index,
                tokens: f
                    .token_points
                    .iter()
                    .map(|t| TokenRow {
                        id: t.trajectory_id.clone(),
                        token_text: t.token_text.clone(),
                        x: t.position[0],
                        y: t.position[1],
                        angle_deg: t.angle.map(f64::to_degrees),
                    })
                    .collect(),
            })
            .collect(),
        threads: foliation
            .threads
            .iter()
            .map(|t| ThreadRow {
                id: t.token_id.clone(),
                token_text: t.token_text.clone(),
                path: t.path.iter().map(|&(l, p)| (l, p[0], p[1])).collect(),
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsRow {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl From<&Bounds> for BoundsRow {
    fn from(b: &Bounds) -> Self {
        Self {
            x_min: b.x_min,
            x_max: b.x_max,
            y_min: b.y_min,
            y_max: b.y_max,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridRow {
    pub layer: usize,
    /// `None` when no token has a defined angle at this layer.
    pub bandwidth: Option<f64>,
    /// Row-major, row 0 at `y_min`, degrees.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridsReport {
    pub manifest: RunManifest<LandscapeConfig>,
    pub resolution: usize,
    pub bounds: BoundsRow,
    pub grids: Vec<GridRow>,
}

pub fn grids_report(
    resolution: usize,
    bounds: &Bounds,
    layers: &[(usize, Option<HeatGrid>)],
    manifest: RunManifest<LandscapeConfig>,
) -> GridsReport {
    GridsReport {
        manifest,
        resolution,
        bounds: bounds.into(),
        grids: layers
            .iter()
            .map(|(layer, g)| GridRow {
                layer: *layer,
                bandwidth: g.as_ref().map(|g| g.bandwidth),
                values: g.as_ref().map_or_else(Vec::new, |g| g.values.clone()),
            })
            .collect(),
    }
}

// --- geometry-check --------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct GeometryConfig {
    pub seed: u64,
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: &'static str,
    pub passed: bool,
    pub tolerance: f64,
    pub max_residual: f64,
    pub worst_case_seed: u64,
    pub first_failing_seed: Option<u64>,
    pub cases: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryCheckReport {
    pub manifest: RunManifest<GeometryConfig>,
    pub passed: bool,
    pub checks: Vec<CheckRow>,
}

pub fn geometry_report(r: &GeometryReport, manifest: RunManifest<GeometryConfig>) -> GeometryCheckReport {
    GeometryCheckReport {
        manifest,
        passed: r.passed(),
        checks: r
            .checks
            .iter()
            .map(|c| CheckRow {
                name: c.name,
                passed: c.passed(),
                tolerance: c.tolerance,
                max_residual: c.max_residual,
                worst_case_seed: c.worst_seed,
                first_failing_seed: c.first_failure,
                cases: c.cases,
            })
            .collect(),
    }
}
