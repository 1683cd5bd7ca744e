//! The EMTJ trajectory bundle format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "EMTJ"                 4 bytes magic
//! schema_version         u16
//! header_len             u32
//! header                 header_len bytes of UTF-8 JSON
//! payload                f32 values, trajectories in header order,
//!                        each point-major then coordinate
//! ```
//!
//! The header carries `model_name`, `dim`, `points_per_trajectory` and the
//! ordered trajectory metadata. The payload length must equal
//! `trajectories × points_per_trajectory × dim × 4` bytes exactly.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"EMTJ";
pub const SCHEMA_VERSION: u16 = 1;
const PREFIX_LEN: usize = 4 + 2 + 4;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("bad magic: expected \"EMTJ\", found {0:?}")]
    BadMagic(Vec<u8>),
    #[error("unsupported schema version {0} (supported: {SCHEMA_VERSION})")]
    UnsupportedVersion(u16),
    #[error("truncated {section}: expected {expected} bytes, found {actual}")]
    Truncated {
        section: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("malformed header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("trajectory {id:?}: non-finite value at point {point}, coordinate {coord}")]
    NonFinite { id: String, point: usize, coord: usize },
    #[error("invalid bundle: {0}")]
    Invalid(String),
}

/// One token's hidden states across layers: `points_per_trajectory` points of
/// dimension `dim`, stored point-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTrajectory {
    pub id: String,
    pub token_text: String,
    pub sentence_id: String,
    pub word_index: u64,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingTrajectory {
    pub fn new(
        id: impl Into<String>,
        token_text: impl Into<String>,
        sentence_id: impl Into<String>,
        word_index: u64,
        points: &[Vec<f32>],
    ) -> Result<Self, BundleError> {
        let id = id.into();
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(BundleError::Invalid(format!(
                "trajectory {id:?}: points have differing dimensions"
            )));
        }
        let traj = Self {
            id,
            token_text: token_text.into(),
            sentence_id: sentence_id.into(),
            word_index,
            dim,
            data: points.concat(),
        };
        traj.validate()?;
        Ok(traj)
    }

    /// Builds a trajectory from a flat point-major buffer.
    pub fn from_flat(
        id: impl Into<String>,
        token_text: impl Into<String>,
        sentence_id: impl Into<String>,
        word_index: u64,
        dim: usize,
        data: Vec<f32>,
    ) -> Result<Self, BundleError> {
        let id = id.into();
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(BundleError::Invalid(format!(
                "trajectory {id:?}: buffer of {} values is not a multiple of dim {dim}",
                data.len()
            )));
        }
        let traj = Self {
            id,
            token_text: token_text.into(),
            sentence_id: sentence_id.into(),
            word_index,
            dim,
            data,
        };
        traj.validate()?;
        Ok(traj)
    }

    fn validate(&self) -> Result<(), BundleError> {
        if self.dim == 0 {
            return Err(BundleError::Invalid(format!(
                "trajectory {:?}: dimension must be at least 1",
                self.id
            )));
        }
        if self.num_points() < 2 {
            return Err(BundleError::Invalid(format!(
                "trajectory {:?}: needs at least 2 points, has {}",
                self.id,
                self.num_points()
            )));
        }
        if let Some(pos) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(BundleError::NonFinite {
                id: self.id.clone(),
                point: pos / self.dim,
                coord: pos % self.dim,
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_points(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    pub fn point(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }

    /// Points widened to the computation scalar.
    pub fn polyline<T: Scalar>(&self) -> Vec<Vec<T>> {
        self.points()
            .map(|p| p.iter().map(|&v| T::lit(v as f64)).collect())
            .collect()
    }
}

/// A rectangular set of trajectories sharing `(dim, points_per_trajectory)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBundle {
    pub schema_version: u16,
    pub model_name: String,
    pub dim: usize,
    pub points_per_trajectory: usize,
    pub trajectories: Vec<EmbeddingTrajectory>,
}

impl TrajectoryBundle {
    pub fn new(
        model_name: impl Into<String>,
        dim: usize,
        points_per_trajectory: usize,
        trajectories: Vec<EmbeddingTrajectory>,
    ) -> Result<Self, BundleError> {
        let bundle = Self {
            schema_version: SCHEMA_VERSION,
            model_name: model_name.into(),
            dim,
            points_per_trajectory,
            trajectories,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<(), BundleError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(BundleError::UnsupportedVersion(self.schema_version));
        }
        if self.dim == 0 {
            return Err(BundleError::Invalid("dim must be at least 1".into()));
        }
        if self.points_per_trajectory < 2 {
            return Err(BundleError::Invalid("points_per_trajectory must be at least 2".into()));
        }
        let mut seen = HashSet::with_capacity(self.trajectories.len());
        for t in &self.trajectories {
            if t.dim != self.dim {
                return Err(BundleError::Invalid(format!(
                    "trajectory {:?} has dim {}, bundle dim is {}",
                    t.id, t.dim, self.dim
                )));
            }
            if t.num_points() != self.points_per_trajectory {
                return Err(BundleError::Invalid(format!(
                    "trajectory {:?} has {} points, bundle expects {}",
                    t.id,
                    t.num_points(),
                    self.points_per_trajectory
                )));
            }
            if !seen.insert(t.id.as_str()) {
                return Err(BundleError::Invalid(format!("duplicate trajectory id {:?}", t.id)));
            }
            t.validate()?;
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingTrajectory> {
        self.trajectories.iter().find(|t| t.id == id)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    model_name: String,
    dim: usize,
    points_per_trajectory: usize,
    trajectories: Vec<TrajectoryMeta>,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryMeta {
    id: String,
    token_text: String,
    sentence_id: String,
    word_index: u64,
}

pub fn save_bundle(bundle: &TrajectoryBundle) -> Result<Vec<u8>, BundleError> {
    bundle.validate()?;
    let header = Header {
        model_name: bundle.model_name.clone(),
        dim: bundle.dim,
        points_per_trajectory: bundle.points_per_trajectory,
        trajectories: bundle
            .trajectories
            .iter()
            .map(|t| TrajectoryMeta {
                id: t.id.clone(),
                token_text: t.token_text.clone(),
                sentence_id: t.sentence_id.clone(),
                word_index: t.word_index,
            })
            .collect(),
    };
    let header = serde_json::to_vec(&header)?;
    let header_len = u32::try_from(header.len()).map_err(|_| BundleError::Invalid("header exceeds 4 GiB".into()))?;

    let payload_values = bundle.trajectories.len() * bundle.points_per_trajectory * bundle.dim;
    let mut out = Vec::with_capacity(PREFIX_LEN + header.len() + payload_values * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&bundle.schema_version.to_le_bytes());
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&header);
    for t in &bundle.trajectories {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn load_bundle(bytes: &[u8]) -> Result<TrajectoryBundle, BundleError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(BundleError::BadMagic(bytes[..bytes.len().min(4)].to_vec()));
    }
    if bytes.len() < PREFIX_LEN {
        return Err(BundleError::Truncated {
            section: "prefix",
            expected: PREFIX_LEN,
            actual: bytes.len(),
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != SCHEMA_VERSION {
        return Err(BundleError::UnsupportedVersion(version));
    }
    let header_len = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
    let rest = &bytes[PREFIX_LEN..];
    if rest.len() < header_len {
        return Err(BundleError::Truncated {
            section: "header",
            expected: header_len,
            actual: rest.len(),
        });
    }
    let header: Header = serde_json::from_slice(&rest[..header_len])?;
    if header.dim == 0 || header.points_per_trajectory < 2 {
        return Err(BundleError::Invalid(format!(
            "header declares dim {} and {} points per trajectory",
            header.dim, header.points_per_trajectory
        )));
    }

    let payload = &rest[header_len..];
    let per_traj = header
        .points_per_trajectory
        .checked_mul(header.dim)
        .ok_or_else(|| BundleError::Invalid("header sizes overflow".into()))?;
    let expected = header
        .trajectories
        .len()
        .checked_mul(per_traj)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| BundleError::Invalid("header sizes overflow".into()))?;
    if payload.len() != expected {
        return Err(BundleError::Truncated {
            section: "payload",
            expected,
            actual: payload.len(),
        });
    }

    let mut trajectories = Vec::with_capacity(header.trajectories.len());
    for (meta, chunk) in header.trajectories.into_iter().zip(payload.chunks_exact(per_traj * 4)) {
        let data: Vec<f32> = chunk
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        trajectories.push(EmbeddingTrajectory::from_flat(
            meta.id,
            meta.token_text,
            meta.sentence_id,
            meta.word_index,
            header.dim,
            data,
        )?);
    }

    let bundle = TrajectoryBundle {
        schema_version: version,
        model_name: header.model_name,
        dim: header.dim,
        points_per_trajectory: header.points_per_trajectory,
        trajectories,
    };
    bundle.validate()?;
    Ok(bundle)
}

/// Thresholds and tolerances for the curvature proxies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub flat_threshold_deg: f64,
    pub sharp_threshold_deg: f64,
    pub degenerate_eps: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            flat_threshold_deg: 80.0,
            sharp_threshold_deg: 100.0,
            degenerate_eps: 1e-12,
        }
    }
}

impl AnalysisConfig {
    pub fn new(flat_deg: f64, sharp_deg: f64, eps: f64) -> Result<Self, BundleError> {
        let cfg = Self {
            flat_threshold_deg: flat_deg,
            sharp_threshold_deg: sharp_deg,
            degenerate_eps: eps,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BundleError> {
        let (f, s) = (self.flat_threshold_deg, self.sharp_threshold_deg);
        if !(0.0 < f && f < s && s < 180.0) {
            return Err(BundleError::Invalid(format!(
                "thresholds must satisfy 0 < flat ({f}) < sharp ({s}) < 180"
            )));
        }
        if !self.degenerate_eps.is_finite() || self.degenerate_eps < 0.0 {
            return Err(BundleError::Invalid(format!(
                "degenerate_eps must be finite and non-negative, got {}",
                self.degenerate_eps
            )));
        }
        Ok(())
    }

    pub fn flat_threshold_rad(&self) -> f64 {
        self.flat_threshold_deg.to_radians()
    }

    pub fn sharp_threshold_rad(&self) -> f64 {
        self.sharp_threshold_deg.to_radians()
    }
}
