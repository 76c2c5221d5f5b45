use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use blogspace::formats::{
    write_labels, write_periodogram, write_scaling, write_scatter, write_series, write_spectrum,
    TripletGraph,
};
use blogspace::ingest::Ingested;
use blogspace::tempstats::{all_series, response_distribution, POST_TWIN, USER_TWIN};
use blogspace::*;
use serde_json::{json, Value};

use crate::{
    ActivityKind, CommunityArgs, Format, IngestArgs, InputArgs, IntervalArgs, NetArgs, ReportArgs,
    ResponseArgs, Sampler, ScalingArgs, SeriesArgs, SynthArgs, TimingKind,
};

pub fn run(cmd: crate::Command) -> Result<Value> {
    use crate::Command::*;
    match cmd {
        IngestValidate(a) => ingest_validate(a),
        NetBuild(a) => net_build(a),
        StatsIntervals(a) => stats_intervals(a),
        StatsActivity(a) => stats_activity(a),
        StatsScaling(a) => stats_scaling(a),
        StatsSpectrum(a) => stats_spectrum(a),
        StatsResponse(a) => stats_response(a),
        Communities(a) => communities(a),
        Synth(a) => synth(a),
        Report(a) => report(a),
    }
}

fn log_format(f: Format) -> LogFormat {
    match f {
        Format::Jsonl => LogFormat::JsonLines,
        Format::Tsv => LogFormat::Tsv,
    }
}

fn load(a: &InputArgs) -> Result<Ingested> {
    let format = a.format.map(log_format).unwrap_or_else(|| {
        match a.input.extension().and_then(|e| e.to_str()) {
            Some("tsv") => LogFormat::Tsv,
            _ => LogFormat::JsonLines,
        }
    });
    let strictness = if a.lenient {
        Strictness::Lenient
    } else {
        Strictness::Strict
    };
    let file = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    parse_event_log(BufReader::new(file), format, strictness)
        .with_context(|| format!("reading {}", a.input.display()))
}

fn load_nonempty(a: &InputArgs) -> Result<EventLog> {
    let log = load(a)?.log;
    if log.is_empty() {
        bail!("empty log");
    }
    Ok(log)
}

fn out_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
}

fn create(p: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(p).with_context(|| format!("creating {}", p.display()))?,
    ))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn counts(log: &EventLog) -> Value {
    json!({
        "events": log.len(),
        "users": log.n_users(),
        "posts": log.n_posts(),
        "comments": log.n_comments(),
    })
}

fn ingest_validate(a: IngestArgs) -> Result<Value> {
    let Ingested { log, report } = load(&a.input)?;
    if log.is_empty() {
        bail!("empty log");
    }
    let criteria = FilterCriteria {
        min_comments: a.filter.min_comments,
        max_comments: a.filter.max_comments,
        window: match (a.filter.window_start, a.filter.window_end) {
            (None, None) => None,
            (s, e) => Some((s.unwrap_or(0), e.unwrap_or(u64::MAX))),
        },
    };
    let log = if criteria == FilterCriteria::default() {
        log
    } else {
        filter_events(&log, &criteria)?
    };
    let mut out = json!({
        "command": "ingest-validate",
        "counts": counts(&log),
        "dropped": report.dropped.len(),
        "out_of_order": report.out_of_order,
        "valid": validate_log(&log).is_clean(),
    });
    if let Some(path) = &a.output {
        write_event_log(&log, log_format(a.out_format), create(path)?)?;
        out["output"] = json!(path_str(path));
    }
    Ok(out)
}

fn node_name(g: &BipartiteGraph, n: bigraph::Node) -> String {
    match n {
        bigraph::Node::User(_) => format!("user:{}", g.label(n)),
        bigraph::Node::Content(_) => format!("content:{}", g.label(n)),
    }
}

fn write_distribution(path: &Path, d: &Distribution, fit: Option<&PowerLawFit>) -> Result<()> {
    let meta = fit.map(PowerLawFit::header).unwrap_or_default();
    d.write_tsv(&meta, create(path)?)?;
    Ok(())
}

fn net_build(a: NetArgs) -> Result<Value> {
    let log = load_nonempty(&a.input)?;
    let mode = if a.flatten {
        BuildMode::FlattenToPost
    } else {
        BuildMode::CommentTree
    };
    let g = build_bipartite(&log, mode)?;
    out_dir(&a.output)?;
    let mut files = Vec::new();

    let triplets = TripletGraph {
        nodes: g.n_users() + g.n_content(),
        partitions: (g.n_users(), g.n_content()),
        edges: g
            .edges()
            .map(|e| {
                (
                    node_name(&g, e.src),
                    node_name(&g, e.dst),
                    e.multiplicity as f64,
                )
            })
            .collect(),
    };
    let p = a.output.join("bipartite.txt");
    triplets.write(create(&p)?)?;
    files.push(path_str(&p));

    let mut fits = serde_json::Map::new();
    for (name, part, dir) in [
        ("users_out", Partition::Users, Direction::Out),
        ("users_in", Partition::Users, Direction::In),
        ("content_in", Partition::Content, Direction::In),
        ("content_out", Partition::Content, Direction::Out),
    ] {
        let d = degree_distribution(&g, part, dir, true)?;
        let fit = fit_powerlaw(&d, None).ok();
        fits.insert(name.into(), json!(fit.map(|f| f.exponent)));
        let p = a.output.join(format!("degrees_{name}.tsv"));
        write_distribution(&p, &d, fit.as_ref())?;
        files.push(path_str(&p));
    }

    let c = commons_matrix(&g);
    let commons_pairs = c.nnz_pairs();
    if let Ok(d) = commons_distribution(&c) {
        let fit = fit_powerlaw(&d, None).ok();
        let p = a.output.join("commons.tsv");
        write_distribution(&p, &d, fit.as_ref())?;
        files.push(path_str(&p));
    }
    let wg = project_user_graph(&c);
    let users = wg.nodes();
    let proj = TripletGraph {
        nodes: users.len(),
        partitions: (users.len(), 0),
        edges: wg
            .weighted_edges()
            .into_iter()
            .map(|(i, j, w)| (users[i].clone(), users[j].clone(), w))
            .collect(),
    };
    let p = a.output.join("user_graph.txt");
    proj.write(create(&p)?)?;
    files.push(path_str(&p));

    let mut out = json!({
        "command": "net-build",
        "mode": if a.flatten { "flatten" } else { "comment-tree" },
        "users": g.n_users(),
        "content": g.n_content(),
        "edges": g.n_edges(),
        "commons_pairs": commons_pairs,
        "degree_exponents": fits,
    });
    if let Some(min) = a.min_comments {
        let up = build_user_post_weighted(&log, min)?;
        let labels: Vec<String> = (0..up.node_count()).map(|i| up.node_label(i)).collect();
        let t = TripletGraph {
            nodes: up.node_count(),
            partitions: (up.users().len(), up.posts().len()),
            edges: up
                .weighted_edges()
                .into_iter()
                .map(|(i, j, w)| (labels[i].clone(), labels[j].clone(), w))
                .collect(),
        };
        let p = a.output.join("user_post.txt");
        t.write(create(&p)?)?;
        files.push(path_str(&p));
        out["user_post"] = json!({
            "users": up.users().len(),
            "posts": up.posts().len(),
            "total_weight": up.total_weight(),
        });
    }
    out["files"] = json!(files);
    Ok(out)
}

fn fit_range(d: &Distribution, lo: Option<f64>, hi: Option<f64>) -> Option<(f64, f64)> {
    match (lo, hi) {
        (None, None) => None,
        (lo, hi) => Some((
            lo.or(d.median()).unwrap_or(0.0),
            hi.or(d.p99()).unwrap_or(f64::INFINITY),
        )),
    }
}

fn stats_intervals(a: IntervalArgs) -> Result<Value> {
    let log = load_nonempty(&a.input)?;
    let d = interevent_distribution(&log)?;
    let fit = fit_powerlaw(&d, fit_range(&d, a.fit.fit_min, a.fit.fit_max))?;
    out_dir(&a.output)?;
    let p = a.output.join("intervals.tsv");
    write_distribution(&p, &d, Some(&fit))?;
    Ok(json!({
        "command": "stats-intervals",
        "samples": d.n_samples(),
        "exponent": fit.exponent,
        "fit_range": [fit.x_min, fit.x_max],
        "fit_bins": fit.n_bins,
        "residual": fit.residual,
        "files": [path_str(&p)],
    }))
}

fn owner_of(a: &SeriesArgs) -> (Owner, u64, &'static str) {
    if a.post {
        (
            Owner::Post(a.owner.clone()),
            a.twin.unwrap_or(POST_TWIN),
            "post",
        )
    } else {
        (
            Owner::User(a.owner.clone()),
            a.twin.unwrap_or(USER_TWIN),
            "user",
        )
    }
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn stats_activity(a: SeriesArgs) -> Result<Value> {
    let log = load_nonempty(&a.input)?;
    let (owner, twin, kind) = owner_of(&a);
    let s = activity_series(&log, &owner, twin)?;
    out_dir(&a.output)?;
    let p = a
        .output
        .join(format!("series_{kind}_{}.tsv", file_safe(&a.owner)));
    write_series(create(&p)?, &s)?;
    let times: Vec<u64> = match &owner {
        Owner::User(u) => log.user_events(u).map(|e| e.ts).collect(),
        Owner::Post(id) => log.post_comments(id).map(|e| e.ts).collect(),
    };
    let e = a
        .output
        .join(format!("events_{kind}_{}.tsv", file_safe(&a.owner)));
    let mut w = create(&e)?;
    writeln!(w, "# owner={}\nts", a.owner)?;
    for t in &times {
        writeln!(w, "{t}")?;
    }
    w.flush()?;
    Ok(json!({
        "command": "stats-activity",
        "owner": a.owner,
        "kind": kind,
        "twin": twin,
        "bins": s.counts.len(),
        "total": s.total(),
        "mean": s.mean(),
        "sigma": s.std_dev(),
        "events": times.len(),
        "files": [path_str(&p), path_str(&e)],
    }))
}

fn stats_spectrum(a: SeriesArgs) -> Result<Value> {
    let log = load_nonempty(&a.input)?;
    let (owner, twin, kind) = owner_of(&a);
    let s = activity_series(&log, &owner, twin)?;
    let pg = power_spectrum(&s)?;
    out_dir(&a.output)?;
    let p = a
        .output
        .join(format!("periodogram_{kind}_{}.tsv", file_safe(&a.owner)));
    let meta = [
        ("owner", a.owner.clone()),
        ("twin", twin.to_string()),
        ("bins", s.counts.len().to_string()),
    ];
    write_periodogram(create(&p)?, &pg, &meta)?;
    let (peak, _) =
        pg.frequency
            .iter()
            .zip(&pg.power)
            .fold((0.0, f64::NEG_INFINITY), |best, (&f, &x)| {
                if x > best.1 {
                    (f, x)
                } else {
                    best
                }
            });
    Ok(json!({
        "command": "stats-spectrum",
        "owner": a.owner,
        "twin": twin,
        "frequencies": pg.frequency.len(),
        "total_power": pg.power.iter().sum::<f64>(),
        "peak_frequency": peak,
        "files": [path_str(&p)],
    }))
}

fn stats_scaling(a: ScalingArgs) -> Result<Value> {
    let log = load_nonempty(&a.input)?;
    let twin = a
        .twin
        .unwrap_or(if a.posts { POST_TWIN } else { USER_TWIN });
    let series = all_series(&log, a.posts, twin)?;
    let (points, fit) = fluctuation_scaling(&series)?;
    out_dir(&a.output)?;
    let name = if a.posts {
        "scaling_posts.tsv"
    } else {
        "scaling.tsv"
    };
    let p = a.output.join(name);
    write_scaling(create(&p)?, &points, &fit, twin)?;
    Ok(json!({
        "command": "stats-scaling",
        "owners": if a.posts { "posts" } else { "users" },
        "twin": twin,
        "points": fit.n_points,
        "excluded": fit.excluded.len(),
        "mu": fit.mu,
        "c": fit.c,
        "residual": fit.residual,
        "files": [path_str(&p)],
    }))
}

fn stats_response(a: ResponseArgs) -> Result<Value> {
    let log = load_nonempty(&a.input)?;
    let (d, fit) = response_distribution(&log)?;
    out_dir(&a.output)?;
    let p = a.output.join("response.tsv");
    let meta = [
        ("q", fit.q.to_string()),
        ("t_star", fit.t_star.to_string()),
        ("prefactor", fit.prefactor.to_string()),
        ("residual", fit.residual.to_string()),
        ("tail_exponent", fit.tail_exponent().to_string()),
    ];
    d.write_tsv(&meta, create(&p)?)?;
    Ok(json!({
        "command": "stats-response",
        "samples": d.n_samples(),
        "q": fit.q,
        "t_star": fit.t_star,
        "prefactor": fit.prefactor,
        "tail_exponent": fit.tail_exponent(),
        "residual": fit.residual,
        "files": [path_str(&p)],
    }))
}

fn communities(a: CommunityArgs) -> Result<Value> {
    let log = load_nonempty(&a.input)?;
    let l = match a.min_comments {
        Some(min) => normalized_laplacian(&build_user_post_weighted(&log, min)?)?,
        None => {
            let mode = if a.flatten {
                BuildMode::FlattenToPost
            } else {
                BuildMode::CommentTree
            };
            let g = build_bipartite(&log, mode)?;
            normalized_laplacian(&project_user_graph(&commons_matrix(&g)))?
        }
    };
    let k_req = a.eigs.min(l.n());
    let opts = LanczosOptions {
        seed: a.seed,
        ..Default::default()
    };
    let spec = smallest_eigenpairs(&l, k_req, &opts)?;
    let scan = a.scan.unwrap_or(k_req).min(k_req);
    let gap = detect_num_communities(&spec.values, scan);
    let k = match (a.k, &gap) {
        (Some(k), _) => k,
        (None, Ok(c)) => c.k,
        (None, Err(e)) => bail!("cannot count communities: {e}"),
    };

    let assignment = if k == 1 {
        CommunityAssignment {
            labels: vec![Some(1); spec.n_nodes()],
            k: 1,
            row_norms: vec![0.0; spec.n_nodes()],
            ring_eps: 0.0,
        }
    } else {
        let b = BranchOptions {
            ring_eps: a.ring_eps,
            seed: a.seed,
            ..Default::default()
        };
        assign_branches(&spec, k, &b)?
    };
    let mut dims = a.dims as usize;
    let points = loop {
        match scatter_export(&spec, dims, &assignment) {
            Ok(p) => break p,
            Err(_) if dims > 2 => dims -= 1,
            Err(e) => bail!("scatter export: {e}; compute more eigenpairs with --eigs"),
        }
    };

    out_dir(&a.output)?;
    let mut meta = vec![
        ("nodes", spec.n_nodes().to_string()),
        ("removed", l.removed().len().to_string()),
        ("k", k.to_string()),
        ("zeros", spec.zero_count().to_string()),
    ];
    if let Ok(c) = &gap {
        meta.push(("k_gap", c.k.to_string()));
        meta.push(("nonzero_below_gap", c.nonzero_below_gap().to_string()));
        meta.push(("relative_gap", c.relative_gap.to_string()));
    }
    let files = [
        a.output.join("spectrum.tsv"),
        a.output.join("scatter.tsv"),
        a.output.join("labels.tsv"),
        a.output.join("laplacian.txt"),
    ];
    write_spectrum(create(&files[0])?, &spec, &meta)?;
    write_scatter(create(&files[1])?, &points)?;
    write_labels(create(&files[2])?, &spec.labels, &assignment)?;
    TripletGraph::from_laplacian(&l).write(create(&files[3])?)?;

    let gap_json = gap.as_ref().ok().map(|c| {
        json!({
            "k": c.k,
            "nonzero_below_gap": c.nonzero_below_gap(),
            "relative_gap": c.relative_gap,
        })
    });
    Ok(json!({
        "command": "communities",
        "nodes": spec.n_nodes(),
        "removed": l.removed().len(),
        "eigenvalues": spec.values,
        "zeros": spec.zero_count(),
        "gap": gap_json,
        "k": k,
        "sizes": assignment.sizes(),
        "unclassified": assignment.unclassified(),
        "scatter_dims": dims,
        "files": files.iter().map(|p| path_str(p)).collect::<Vec<_>>(),
    }))
}

pub fn synth_config(a: &SynthArgs) -> Result<SynthConfig> {
    if a.groups == 0 || !a.users.is_multiple_of(a.groups) {
        bail!(
            "--users ({}) must be a positive multiple of --groups ({})",
            a.users,
            a.groups
        );
    }
    Ok(SynthConfig {
        n_groups: a.groups,
        users_per_group: a.users / a.groups,
        posts_per_group: a.posts_per_group,
        p_in: a.p_in,
        p_out: a.p_out,
        interevent: match a.interevent {
            Sampler::Pareto => InterEvent::Pareto {
                alpha: a.alpha,
                x_min: a.x_min,
            },
            Sampler::Exponential => InterEvent::Exponential { rate: a.rate },
        },
        activity: match a.activity {
            ActivityKind::Uniform => Activity::Uniform,
            ActivityKind::Loguniform => Activity::LogUniform { decades: a.spread },
            ActivityKind::Pareto => Activity::Pareto { tail: a.tail },
        },
        kernel: QExpFit::new(a.q, a.t_star, 1.0),
        reply_prob: a.reply_prob,
        timing: match a.timing {
            TimingKind::User => Timing::UserClock,
            TimingKind::Post => Timing::PostClock,
        },
        horizon: a.horizon,
        seed: a.seed,
    })
}

fn synth(a: SynthArgs) -> Result<Value> {
    let cfg = synth_config(&a)?;
    let (log, truth) = generate(&cfg)?;
    if let Some(dir) = a.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        out_dir(dir)?;
    }
    let mut w = create(&a.output)?;
    write_event_log(&log, log_format(a.format), &mut w)?;
    w.flush()?;
    let truth_path = a.truth.clone().unwrap_or_else(|| {
        let mut s = a.output.clone().into_os_string();
        s.push(".truth.tsv");
        PathBuf::from(s)
    });
    let mut w = create(&truth_path)?;
    truth.write_tsv(&mut w)?;
    w.flush()?;
    Ok(json!({
        "command": "synth",
        "seed": a.seed,
        "groups": cfg.n_groups,
        "counts": counts(&log),
        "files": [path_str(&a.output), path_str(&truth_path)],
    }))
}

fn report(a: ReportArgs) -> Result<Value> {
    if !a.input.is_dir() {
        bail!("{} is not a directory", a.input.display());
    }
    let (text, sections) = crate::report::build(&a.input);
    let out = a.output.unwrap_or_else(|| a.input.join("report.md"));
    let mut w = create(&out)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(json!({
        "command": "report",
        "sections": sections,
        "files": [path_str(&out)],
    }))
}
