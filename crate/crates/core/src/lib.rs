//! Bipartite user/content networks, temporal statistics and spectral
//! community detection for blog discussion logs.
//!
//! The usual flow: parse an [`EventLog`], build a [`BipartiteGraph`], project
//! it onto users through the [`CommonsMatrix`], and look at the low end of the
//! normalized Laplacian spectrum to find communities. [`tempstats`] covers the
//! timing side: inter-event intervals, activity series, fluctuation scaling,
//! response times and their q-exponential fits.

// `!(a < b)` guards double as NaN rejection
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bigraph;
pub mod distribution;
pub mod formats;
pub mod ingest;
pub mod metrics;
pub mod qexp;
pub mod spectral;
pub mod synthgen;
pub mod tempstats;

pub use bigraph::{
    build_bipartite, build_user_post_weighted, commons_distribution, commons_matrix,
    degree_distribution, project_user_graph, BipartiteGraph, BuildMode, CommonsMatrix, Direction,
    GraphError, Partition, UserPostWeightedGraph, WeightedGraph, WeightedUserGraph,
};
pub use distribution::{fit_powerlaw, Distribution, DistributionError, PowerLawFit, DEFAULT_RATIO};
pub use ingest::{
    filter_events, parse_event_log, validate_log, write_event_log, EventKind, EventLog,
    EventRecord, FilterCriteria, IngestError, LogFormat, Strictness, ValidationReport,
};
pub use metrics::nmi;
pub use qexp::{fit_qexp, qexp_eval, QExpError, QExpFit};
pub use spectral::{
    assign_branches, detect_num_communities, normalized_laplacian, scatter_export,
    smallest_eigenpairs, BranchOptions, CommunityAssignment, CommunityCount, LanczosOptions,
    LaplacianMatrix, SpectralError, Spectrum,
};
pub use synthgen::{generate, Activity, GroundTruth, InterEvent, SynthConfig, SynthError, Timing};
pub use tempstats::{
    activity_series, fluctuation_scaling, interevent_distribution, power_spectrum,
    response_time_samples, Owner, Periodogram, ScalingFit, ScalingPoint, StatsError, TimeSeries,
};
