use blogspace::*;

fn user_spectrum(log: &EventLog, k_req: usize, seed: u64) -> Spectrum {
    let g = build_bipartite(log, BuildMode::CommentTree).unwrap();
    let c = commons_matrix(&g);
    let wg = project_user_graph(&c);
    let l = normalized_laplacian(&wg).unwrap();
    let opts = LanczosOptions {
        seed,
        ..Default::default()
    };
    smallest_eigenpairs(&l, k_req.min(l.n()), &opts).unwrap()
}

#[test]
fn planted_groups_are_recovered() {
    for seed in 1..=5 {
        let cfg = SynthConfig {
            seed,
            ..SynthConfig::default()
        };
        let (log, truth) = generate(&cfg).unwrap();
        let spec = user_spectrum(&log, 10, seed);
        let count = detect_num_communities(&spec.values, 10).unwrap();
        assert_eq!(count.k, 4);
        let a = assign_branches(
            &spec,
            count.k,
            &BranchOptions {
                seed,
                ..Default::default()
            },
        )
        .unwrap();
        let planted: Vec<usize> = spec.labels.iter().map(|u| truth.user_group[u]).collect();
        let score = nmi(&a.labels, &planted);
        assert!(score >= 0.9);
    }
}
