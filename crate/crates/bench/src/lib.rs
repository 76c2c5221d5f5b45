//! Fixed workloads shared by the benchmarks.

use blogspace::{
    build_bipartite, commons_matrix, generate, normalized_laplacian, project_user_graph,
    BipartiteGraph, BuildMode, EventLog, LaplacianMatrix, QExpFit, SynthConfig,
};

/// Planted log with `groups` groups of `users_per_group` users.
pub fn planted_log(groups: usize, users_per_group: usize) -> EventLog {
    let cfg = SynthConfig {
        n_groups: groups,
        users_per_group,
        ..SynthConfig::default()
    };
    generate(&cfg).expect("valid config").0
}

pub fn planted_graph(groups: usize, users_per_group: usize) -> BipartiteGraph {
    build_bipartite(
        &planted_log(groups, users_per_group),
        BuildMode::CommentTree,
    )
    .expect("generated logs are valid")
}

pub fn planted_laplacian(groups: usize, users_per_group: usize) -> LaplacianMatrix {
    let c = commons_matrix(&planted_graph(groups, users_per_group));
    normalized_laplacian(&project_user_graph(&c)).expect("nonempty projection")
}

/// `n` stratified quantiles of a normalized q-exponential.
pub fn qexp_quantiles(q: f64, t_star: f64, n: usize) -> Vec<f64> {
    let k = QExpFit::normalized(q, t_star).expect("valid parameters");
    (0..n)
        .map(|i| k.inverse_ccdf((i as f64 + 0.5) / n as f64))
        .collect()
}
