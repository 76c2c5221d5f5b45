//! Spectral community detection on weighted graphs.
//!
//! The normalized Laplacian `L = I - D^{-1/2} W D^{-1/2}` has its spectrum in
//! `[0, 2]`, one zero eigenvalue per connected component, and a run of small
//! eigenvalues split off from the bulk when the graph has well separated
//! communities. The eigenvectors of that run localize on the communities;
//! their rows, projected on the unit sphere, form one branch per community.

mod branches;
mod lanczos;
mod laplacian;
mod tridiag;

use thiserror::Error;

pub use branches::{assign_branches, BranchOptions, CommunityAssignment};
pub use lanczos::{lanczos_smallest, EigenPairs, LanczosOptions};
pub use laplacian::{normalized_laplacian, CsrMatrix, LaplacianMatrix};

/// Eigenvalues below this are treated as zero.
pub const ZERO_EIGEN_TOL: f64 = 1e-9;
/// Guards relative gaps against division by near-zero eigenvalues.
pub const GAP_EPS: f64 = 1e-6;
/// A relative gap smaller than this is not considered dominant.
pub const MIN_DOMINANT_GAP: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("graph has no edges once isolated nodes are removed")]
    EmptyGraph,
    #[error("requested {requested} eigenpairs from a matrix of size {n}")]
    BadRequest { requested: usize, n: usize },
    #[error(
        "eigensolver stopped with {found} converged pairs; last residual estimates {residuals:?}"
    )]
    NoConvergence { found: usize, residuals: Vec<f64> },
    #[error("need at least {need} eigenvalues, got {got}")]
    TooFewEigenvalues { need: usize, got: usize },
    #[error("all eigenvalues are equal within tolerance: no gap")]
    NoGap,
    #[error("k must be at least 2 and at most the number of eigenvectors ({available}), got {k}")]
    BadK { k: usize, available: usize },
    #[error("only {nonempty} of {k} clusters are non-empty; try a smaller k")]
    EmptyClusters { k: usize, nonempty: usize },
    #[error("need {need} eigenvectors beyond the null space, have {have}")]
    TooFewVectors { need: usize, have: usize },
}

/// Lowest eigenpairs of a Laplacian, ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Node labels in matrix order.
    pub labels: Vec<String>,
    pub values: Vec<f64>,
    /// Unit eigenvectors, one per value.
    pub vectors: Vec<Vec<f64>>,
    /// `||L v - lambda v||` per pair.
    pub residuals: Vec<f64>,
}

impl Spectrum {
    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    /// Number of eigenvalues below [`ZERO_EIGEN_TOL`].
    pub fn zero_count(&self) -> usize {
        self.values.iter().filter(|&&v| v < ZERO_EIGEN_TOL).count()
    }
}

/// The `k_req` smallest eigenpairs of `l`, by Lanczos with locking.
pub fn smallest_eigenpairs(
    l: &LaplacianMatrix,
    k_req: usize,
    opts: &LanczosOptions,
) -> Result<Spectrum, SpectralError> {
    let n = l.n();
    if k_req == 0 || k_req > n {
        return Err(SpectralError::BadRequest {
            requested: k_req,
            n,
        });
    }
    let pairs = lanczos_smallest(n, k_req, |x, y| l.matvec(x, y), opts).map_err(|e| {
        SpectralError::NoConvergence {
            found: e.found,
            residuals: e.residuals,
        }
    })?;
    Ok(Spectrum {
        labels: l.labels().to_vec(),
        values: pairs.values,
        vectors: pairs.vectors,
        residuals: pairs.residuals,
    })
}

/// Result of the spectral-gap rule.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityCount {
    /// Eigenvalues below the dominant gap, zeros included.
    pub k: usize,
    /// Eigenvalues below [`ZERO_EIGEN_TOL`].
    pub zeros: usize,
    /// Largest relative gap among the scanned nonzero eigenvalues, if any.
    pub relative_gap: f64,
}

impl CommunityCount {
    /// Separated nonzero eigenvalues below the gap (the `k - 1` convention
    /// for a connected graph).
    pub fn nonzero_below_gap(&self) -> usize {
        self.k - self.zeros
    }
}

/// Counts communities from ascending eigenvalues.
///
/// Only gaps that start at a nonzero eigenvalue compete:
/// `(lambda[i+1] - lambda[i]) / max(lambda[i], GAP_EPS)` for `i` within the
/// first `m_scan` values. `k` is the position of the largest such gap. When
/// no gap reaches [`MIN_DOMINANT_GAP`] only the zero eigenvalues count, i.e.
/// one community per connected component.
pub fn detect_num_communities(
    eigenvalues: &[f64],
    m_scan: usize,
) -> Result<CommunityCount, SpectralError> {
    if eigenvalues.len() < 3 {
        return Err(SpectralError::TooFewEigenvalues {
            need: 3,
            got: eigenvalues.len(),
        });
    }
    if m_scan > eigenvalues.len() || m_scan < 2 {
        return Err(SpectralError::BadRequest {
            requested: m_scan,
            n: eigenvalues.len(),
        });
    }
    let vals = &eigenvalues[..m_scan];
    let (lo, hi) = vals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if hi - lo < ZERO_EIGEN_TOL {
        return Err(SpectralError::NoGap);
    }
    let zeros = vals.iter().filter(|&&v| v < ZERO_EIGEN_TOL).count();
    let mut best: Option<(usize, f64)> = None;
    for i in zeros..m_scan - 1 {
        let rel = (vals[i + 1] - vals[i]) / vals[i].max(GAP_EPS);
        if best.is_none_or(|(_, b)| rel > b) {
            best = Some((i, rel));
        }
    }
    let (k, relative_gap) = match best {
        Some((i, rel)) if rel >= MIN_DOMINANT_GAP => (i + 1, rel),
        Some((_, rel)) => (zeros.max(1), rel),
        None => (zeros.max(1), 0.0),
    };
    Ok(CommunityCount {
        k,
        zeros,
        relative_gap,
    })
}

/// One row of a scatter export.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub node: String,
    pub coords: Vec<f64>,
    pub label: Option<usize>,
}

/// Coordinates of every node along the first `dims` eigenvectors past the
/// null space, tagged with community labels.
pub fn scatter_export(
    spec: &Spectrum,
    dims: usize,
    assignment: &CommunityAssignment,
) -> Result<Vec<ScatterPoint>, SpectralError> {
    let z = spec.zero_count();
    let have = spec.vectors.len() - z;
    if !(2..=3).contains(&dims) || have < dims {
        return Err(SpectralError::TooFewVectors { need: dims, have });
    }
    Ok(spec
        .labels
        .iter()
        .enumerate()
        .map(|(i, node)| ScatterPoint {
            node: node.clone(),
            coords: (z..z + dims).map(|c| spec.vectors[c][i]).collect(),
            label: assignment.labels[i],
        })
        .collect())
}
