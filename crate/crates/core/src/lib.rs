//! Curvature analysis of layerwise token-embedding trajectories.
//!
//! Trajectory geometry (turning angles, length-to-chord ratios, lensing
//! divergences, PCA landscapes, toy attention geometry) is generic over
//! [`Scalar`] and works for `f32` and `f64`. The Monte-Carlo null model and
//! the hypothesis tests run in `f64`.

pub mod bundle;
pub mod curvature;
pub mod geometry_check;
pub mod landscape;
pub mod lensing;
pub mod null_model;
pub mod scalar;
pub mod stats;
pub mod synthetic;
pub mod toy_geometry;

pub use bundle::{load_bundle, save_bundle, AnalysisConfig, BundleError, EmbeddingTrajectory, TrajectoryBundle};
pub use scalar::Scalar;

pub type AngleSeries64 = curvature::AngleSeries<f64>;
pub type AngleSeries32 = curvature::AngleSeries<f32>;
pub type CurvatureSummary64 = curvature::CurvatureSummary<f64>;
pub type CurvatureSummary32 = curvature::CurvatureSummary<f32>;
pub type PairMetrics64 = lensing::PairMetrics<f64>;
pub type PairMetrics32 = lensing::PairMetrics<f32>;
pub type DivergenceReport64 = lensing::DivergenceReport<f64>;
pub type DivergenceReport32 = lensing::DivergenceReport<f32>;
pub type Projection64 = landscape::Projection<f64>;
pub type Projection32 = landscape::Projection<f32>;
pub type Mat64 = toy_geometry::Mat<f64>;
pub type Mat32 = toy_geometry::Mat<f32>;
pub type ToyLayer64 = toy_geometry::ToyLayer<f64>;
pub type ToyLayer32 = toy_geometry::ToyLayer<f32>;
