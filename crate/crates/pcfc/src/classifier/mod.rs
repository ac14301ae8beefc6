//! The point-cloud failure criterion query engine.
//!
//! Failure-surface points are indexed in a kd-tree. A stress state `q` is
//! classified by comparing its norm against the average norm of its k nearest
//! cloud points, shrunk by the safety margin α·σ_range:
//!
//! ```text
//! outside  ⇔  ‖q‖ ≥ mean_k(‖neighbor‖) − α·(σ_max − σ_min)
//! ```
//!
//! where σ_max/σ_min range over all components of all stored points. The
//! nearest-neighbor search itself is always Euclidean; the norms may use any
//! Minkowski order r ≥ 1 (default 2).

mod kdtree;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use kdtree::KdTree;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point {index} has a non-finite component")]
    NonFinitePoint { index: usize },
    #[error("k = {k} outside the valid range 1..={n}")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid query parameters: {0}")]
    InvalidParams(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Immutable kd-tree index over failure points with precomputed L2 norms and
/// the global component range. Safe to query concurrently once built.
#[derive(Debug, Clone)]
pub struct PointCloudDb {
    dim: usize,
    coords: Vec<f64>,
    norms_l2: Vec<f64>,
    sigma_min: f64,
    sigma_max: f64,
    tree: KdTree,
}

/// One reported neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// How the neighbor norms are combined into the comparison value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Aggregation {
    /// Unweighted mean of the k neighbor norms (the default).
    #[default]
    Mean,
    /// Inverse-distance weighted mean; exact hits dominate.
    DistanceWeighted,
}

/// Query parameters for [`PointCloudDb::classify`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryParams {
    /// Number of neighbors, ≥ 1.
    pub k: usize,
    /// Approximation bound ε ≥ 0; 0 searches exactly.
    pub epsilon: f64,
    /// Safety factor α ∈ (0, 1).
    pub alpha: f64,
    /// Minkowski order for the norms, ≥ 1.
    pub r: f64,
    pub aggregation: Aggregation,
}

impl QueryParams {
    pub fn new(k: usize, epsilon: f64, alpha: f64) -> Self {
        Self { k, epsilon, alpha, r: 2.0, aggregation: Aggregation::Mean }
    }

    fn validate(&self, n: usize) -> Result<(), ClassifierError> {
        if self.k == 0 || self.k > n {
            return Err(ClassifierError::KTooLarge { k: self.k, n });
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(ClassifierError::InvalidParams(format!(
                "epsilon must be ≥ 0, got {}",
                self.epsilon
            )));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 || self.alpha >= 1.0 {
            return Err(ClassifierError::InvalidParams(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !self.r.is_finite() || self.r < 1.0 {
            return Err(ClassifierError::InvalidParams(format!(
                "Minkowski order must be ≥ 1, got {}",
                self.r
            )));
        }
        Ok(())
    }
}

/// Inside/outside decision for one query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Inside,
    Outside,
}

/// Classification result with the quantities behind the decision.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub decision: Decision,
    /// Norm of the query point.
    pub l2_query: f64,
    /// Aggregated neighbor norm the query was compared against.
    pub l2_avg_neighbors: f64,
    pub neighbors: Vec<Neighbor>,
}

/// Minkowski norm `(Σ|vᵢ|^r)^(1/r)`; r = 2 is the Euclidean norm.
pub fn minkowski_norm(v: &[f64], r: f64) -> f64 {
    debug_assert!(r >= 1.0);
    if r == 2.0 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else if r == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else {
        v.iter().map(|x| x.abs().powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

impl PointCloudDb {
    /// Build the index from d-dimensional points.
    pub fn build(points: &[Vec<f64>]) -> Result<Self, ClassifierError> {
        let first = points.first().ok_or(ClassifierError::EmptyCloud)?;
        let dim = first.len();
        if dim == 0 {
            return Err(ClassifierError::DimensionMismatch { expected: 1, got: 0 });
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(ClassifierError::DimensionMismatch { expected: dim, got: p.len() });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(ClassifierError::NonFinitePoint { index });
            }
            coords.extend_from_slice(p);
        }
        Ok(Self::from_flat(coords, dim))
    }

    fn from_flat(coords: Vec<f64>, dim: usize) -> Self {
        let norms_l2 = coords.chunks(dim).map(|p| minkowski_norm(p, 2.0)).collect();
        let sigma_min = coords.iter().copied().fold(f64::INFINITY, f64::min);
        let sigma_max = coords.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tree = KdTree::build(&coords, dim);
        Self { dim, coords, norms_l2, sigma_min, sigma_max, tree }
    }

    pub fn len(&self) -> usize {
        self.norms_l2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms_l2.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// σ_range = σ_max − σ_min over all components of all points.
    pub fn sigma_range(&self) -> f64 {
        self.sigma_max - self.sigma_min
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.coords[index * self.dim..(index + 1) * self.dim]
    }

    /// The k nearest points to `q` by Euclidean distance, ascending, ties
    /// broken toward the lower index. With `epsilon > 0` each reported i-th
    /// distance is within (1+ε) of the true i-th distance.
    pub fn knn(&self, q: &[f64], k: usize, epsilon: f64) -> Result<Vec<Neighbor>, ClassifierError> {
        if q.len() != self.dim {
            return Err(ClassifierError::DimensionMismatch { expected: self.dim, got: q.len() });
        }
        if k == 0 || k > self.len() {
            return Err(ClassifierError::KTooLarge { k, n: self.len() });
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(ClassifierError::InvalidParams(format!(
                "epsilon must be ≥ 0, got {epsilon}"
            )));
        }
        Ok(self
            .tree
            .knn(&self.coords, q, k, epsilon)
            .into_iter()
            .map(|(index, dist2)| Neighbor { index: index as usize, distance: dist2.sqrt() })
            .collect())
    }

    fn norm_of_point(&self, index: usize, r: f64) -> f64 {
        if r == 2.0 {
            self.norms_l2[index]
        } else {
            minkowski_norm(self.point(index), r)
        }
    }

    /// Decide whether `q` lies inside or outside the failure envelope.
    pub fn classify(&self, q: &[f64], params: &QueryParams) -> Result<Verdict, ClassifierError> {
        params.validate(self.len())?;
        let neighbors = self.knn(q, params.k, params.epsilon)?;
        let l2_query = minkowski_norm(q, params.r);
        let l2_avg_neighbors = match params.aggregation {
            Aggregation::Mean => {
                neighbors.iter().map(|n| self.norm_of_point(n.index, params.r)).sum::<f64>()
                    / neighbors.len() as f64
            }
            Aggregation::DistanceWeighted => {
                let exact: Vec<&Neighbor> =
                    neighbors.iter().filter(|n| n.distance == 0.0).collect();
                if !exact.is_empty() {
                    exact.iter().map(|n| self.norm_of_point(n.index, params.r)).sum::<f64>()
                        / exact.len() as f64
                } else {
                    let mut wsum = 0.0;
                    let mut sum = 0.0;
                    for n in &neighbors {
                        let w = 1.0 / n.distance;
                        wsum += w;
                        sum += w * self.norm_of_point(n.index, params.r);
                    }
                    sum / wsum
                }
            }
        };
        let threshold = l2_avg_neighbors - params.alpha * self.sigma_range();
        let decision = if l2_query >= threshold { Decision::Outside } else { Decision::Inside };
        Ok(Verdict { decision, l2_query, l2_avg_neighbors, neighbors })
    }
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"PCDB";
const SNAPSHOT_VERSION: u32 = 1;

impl PointCloudDb {
    /// Serialize to the versioned, checksummed binary snapshot format.
    pub fn to_snapshot(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(24 + self.coords.len() * 8 + 32);
        buf.extend_from_slice(SNAPSHOT_MAGIC);
        buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for v in &self.coords {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let digest = Sha256::digest(&buf);
        buf.extend_from_slice(&digest);
        buf
    }

    /// Parse a snapshot, verifying version and checksum, and rebuild the index.
    pub fn from_snapshot(bytes: &[u8]) -> Result<Self, ClassifierError> {
        let fail = |msg: &str| ClassifierError::Snapshot(msg.to_string());
        if bytes.len() < 20 + 32 {
            return Err(fail("truncated snapshot"));
        }
        let (body, checksum) = bytes.split_at(bytes.len() - 32);
        let digest = Sha256::digest(body);
        if digest.as_slice() != checksum {
            return Err(fail("checksum mismatch"));
        }
        if &body[0..4] != SNAPSHOT_MAGIC {
            return Err(fail("bad magic"));
        }
        let version = u32::from_le_bytes(body[4..8].try_into().unwrap());
        if version != SNAPSHOT_VERSION {
            return Err(ClassifierError::Snapshot(format!(
                "unsupported version {version} (expected {SNAPSHOT_VERSION})"
            )));
        }
        let dim = u32::from_le_bytes(body[8..12].try_into().unwrap()) as usize;
        let n = u64::from_le_bytes(body[12..20].try_into().unwrap()) as usize;
        if dim == 0 || n == 0 {
            return Err(ClassifierError::EmptyCloud);
        }
        let payload = &body[20..];
        if payload.len() != n * dim * 8 {
            return Err(fail("payload length disagrees with the header"));
        }
        let coords: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(fail("non-finite coordinate"));
        }
        Ok(Self::from_flat(coords, dim))
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<(), ClassifierError> {
        std::fs::write(path, self.to_snapshot())?;
        Ok(())
    }

    pub fn load_snapshot(path: &Path) -> Result<Self, ClassifierError> {
        Self::from_snapshot(&std::fs::read(path)?)
    }
}
