//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use blogspace::spectral::CsrMatrix;
use blogspace::*;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EIGEN_TOL: f64 = 1e-8;
const RANGE_TOL: f64 = 1e-9;
const ZERO_TOL: f64 = 1e-9;
const SPECTRAL_BUDGET: Duration = Duration::from_secs(30);
const N_RANDOM_GRAPHS: usize = 50;
const MAX_NODES: usize = 200;

const PLANTED_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const PLANTED_MIN_NMI: f64 = 0.9;
const PLANTED_BUDGET: Duration = Duration::from_secs(60);

const POISSON_MU: f64 = 0.5;
const POISSON_MU_TOL: f64 = 0.05;
const SCALED_MU_TOL: f64 = 1e-6;

const QEXP_Q: f64 = 1.5;
const QEXP_T_STAR: f64 = 100.0;
const QEXP_SAMPLES: usize = 100_000;
const QEXP_Q_TOL: f64 = 0.05;
const QEXP_T_REL_TOL: f64 = 0.10;

const PARETO_ALPHA: f64 = 2.5;
const PARETO_SAMPLES: usize = 1_000_000;
const PARETO_TOL: f64 = 0.05;
const EXACT_SLOPE_TOL: f64 = 1e-6;

const BRUTE_FORCE_MAX_USERS: usize = 20;
const NULL_VECTOR_TOL: f64 = 1e-9;

const SCALE_EVENTS: usize = 500_000;
const SCALE_BUDGET: Duration = Duration::from_secs(600);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("spectral correctness", spectral_correctness),
        ("planted-partition recovery", planted_recovery),
        ("fluctuation scaling", fluctuation_limits),
        ("q-exponential round trip", qexp_round_trip),
        ("power-law fit round trip", powerlaw_round_trip),
        ("bipartite invariants", bipartite_invariants),
        ("determinism", determinism),
        ("scale check", scale_check),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|e| Err(format!("panicked: {}", panic_message(&e))));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {} PASS {name}: {detail} [{secs:.1} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default()
}

fn dense_eigenvalues(m: &CsrMatrix) -> Vec<f64> {
    let n = m.n();
    let e = SymmetricEigen::new(DMatrix::from_fn(n, n, |i, j| m.get(i, j)));
    let mut v: Vec<f64> = e.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn count_components(n: usize, edges: &[(usize, usize, f64)]) -> usize {
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut parent: Vec<usize> = (0..n).collect();
    let mut touched = vec![false; n];
    for &(a, b, _) in edges {
        touched[a] = true;
        touched[b] = true;
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }
    (0..n)
        .filter(|&i| touched[i] && find(&mut parent, i) == i)
        .count()
}

/// Random weighted graph built from a few disjoint blocks.
fn block_graph(rng: &mut ChaCha8Rng) -> (usize, Vec<(usize, usize, f64)>) {
    let n = rng.random_range(3..=MAX_NODES);
    let blocks = rng.random_range(1..=4.min(n));
    let p = [0.03, 0.08, 0.2, 0.5][rng.random_range(0..4)];
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if i % blocks == j % blocks && rng.random::<f64>() < p {
                edges.push((i, j, rng.random_range(0.1..10.0)));
            }
        }
    }
    (n, edges)
}

fn spectral_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut graphs = 0;
    let mut multi = 0;
    while graphs < N_RANDOM_GRAPHS {
        let (n, edges) = block_graph(&mut rng);
        if edges.is_empty() {
            continue;
        }
        graphs += 1;
        let g = WeightedUserGraph::from_edges((0..n).map(|i| format!("v{i}")).collect(), &edges);
        let l = normalized_laplacian(&g).map_err(|e| e.to_string())?;
        let comps = count_components(n, &edges);
        multi += usize::from(comps > 1);
        let k = l.n().min(comps + 8);
        let opts = LanczosOptions {
            seed: graphs as u64,
            ..Default::default()
        };
        let spec = smallest_eigenpairs(&l, k, &opts).map_err(|e| e.to_string())?;
        let dense = dense_eigenvalues(l.matrix());
        for (i, (got, want)) in spec.values.iter().zip(&dense).enumerate() {
            let err = (got - want).abs();
            worst = worst.max(err);
            ensure(err <= EIGEN_TOL, || {
                format!("graph {graphs} (n={n}): eigenvalue {i} is {got}, dense {want}")
            })?;
        }
        for &v in dense.iter().chain(&spec.values) {
            ensure((-RANGE_TOL..=2.0 + RANGE_TOL).contains(&v), || {
                format!("graph {graphs}: eigenvalue {v} outside [0, 2]")
            })?;
        }
        let dense_zeros = dense.iter().filter(|&&v| v < ZERO_TOL).count();
        ensure(dense_zeros == comps && spec.zero_count() == comps, || {
            format!(
                "graph {graphs}: {comps} components, dense zeros {dense_zeros}, lanczos zeros {}",
                spec.zero_count()
            )
        })?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < SPECTRAL_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{graphs} graphs ({multi} disconnected), max eigenvalue error {worst:.1e}, {:.1} s",
        elapsed.as_secs_f64()
    ))
}

fn planted_recovery() -> Outcome {
    let start = Instant::now();
    let mut scores = Vec::new();
    for seed in PLANTED_SEEDS {
        let cfg = SynthConfig {
            n_groups: 4,
            users_per_group: 100,
            p_in: 0.95,
            p_out: 0.05,
            seed,
            ..SynthConfig::default()
        };
        let (log, truth) = generate(&cfg).map_err(|e| e.to_string())?;
        let g = build_bipartite(&log, BuildMode::CommentTree).map_err(|e| e.to_string())?;
        let l = normalized_laplacian(&project_user_graph(&commons_matrix(&g)))
            .map_err(|e| e.to_string())?;
        let opts = LanczosOptions {
            seed,
            ..Default::default()
        };
        let spec = smallest_eigenpairs(&l, 10, &opts).map_err(|e| e.to_string())?;
        let count = detect_num_communities(&spec.values, 10).map_err(|e| e.to_string())?;
        ensure(count.k == 4, || {
            format!("seed {seed}: detected k = {}", count.k)
        })?;
        let a = assign_branches(
            &spec,
            count.k,
            &BranchOptions {
                seed,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let planted: Vec<usize> = spec.labels.iter().map(|u| truth.user_group[u]).collect();
        let score = nmi(&a.labels, &planted);
        ensure(score >= PLANTED_MIN_NMI, || {
            format!("seed {seed}: NMI {score}")
        })?;
        scores.push(score);
    }
    let elapsed = start.elapsed();
    ensure(elapsed < PLANTED_BUDGET, || format!("took {elapsed:?}"))?;
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!(
        "k = 4 on all {} seeds, min NMI {min:.3}",
        scores.len()
    ))
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    let (mut t, mut k) = (0.0, 0.0);
    loop {
        t -= (1.0 - rng.random::<f64>()).ln();
        if t > mean {
            return k;
        }
        k += 1.0;
    }
}

fn fluctuation_limits() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let battery: Vec<TimeSeries> = (0..60)
        .map(|i| {
            let rate = 10f64.powf(-1.0 + 3.0 * i as f64 / 59.0);
            TimeSeries::new(
                format!("s{i}"),
                60,
                (0..2000).map(|_| poisson(&mut rng, rate)).collect(),
            )
        })
        .collect();
    let (_, fit) = fluctuation_scaling(&battery).map_err(|e| e.to_string())?;
    ensure((fit.mu - POISSON_MU).abs() <= POISSON_MU_TOL, || {
        format!("Poisson battery mu {}", fit.mu)
    })?;

    let base: Vec<f64> = (0..1000).map(|_| poisson(&mut rng, 5.0)).collect();
    let copies: Vec<TimeSeries> = (1..=25)
        .map(|a| {
            let f = a as f64 * 0.7;
            TimeSeries::new(format!("x{a}"), 60, base.iter().map(|x| x * f).collect())
        })
        .collect();
    let (_, scaled) = fluctuation_scaling(&copies).map_err(|e| e.to_string())?;
    ensure((scaled.mu - 1.0).abs() <= SCALED_MU_TOL, || {
        format!("scaled copies mu {}", scaled.mu)
    })?;
    Ok(format!(
        "Poisson mu {:.4}, scaled-copy mu {:.9}",
        fit.mu, scaled.mu
    ))
}

fn qexp_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (q, t) = (QEXP_Q, QEXP_T_STAR);
    // inverse survival of the normalized density
    let s: Vec<f64> = (0..QEXP_SAMPLES)
        .map(|_| {
            let u = 1.0 - rng.random::<f64>();
            t / (q - 1.0) * (u.powf(-(q - 1.0) / (2.0 - q)) - 1.0)
        })
        .collect();
    let fit = fit_qexp(&s).map_err(|e| e.to_string())?;
    ensure((fit.q - q).abs() <= QEXP_Q_TOL, || format!("q {}", fit.q))?;
    ensure((fit.t_star / t - 1.0).abs() <= QEXP_T_REL_TOL, || {
        format!("t* {}", fit.t_star)
    })?;

    let e: Vec<f64> = (0..QEXP_SAMPLES)
        .map(|_| -t * (1.0 - rng.random::<f64>()).ln())
        .collect();
    let efit = fit_qexp(&e).map_err(|e| e.to_string())?;
    ensure((efit.q - 1.0).abs() <= QEXP_Q_TOL, || {
        format!("exponential q {}", efit.q)
    })?;
    Ok(format!(
        "q {:.4}, t* {:.2}, exponential q {:.4}",
        fit.q, fit.t_star, efit.q
    ))
}

fn powerlaw_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let s: Vec<f64> = (0..PARETO_SAMPLES)
        .map(|_| (1.0 - rng.random::<f64>()).powf(-1.0 / (PARETO_ALPHA - 1.0)))
        .collect();
    let d = Distribution::from_reals(&s, DEFAULT_RATIO).map_err(|e| e.to_string())?;
    let fit = fit_powerlaw(&d, None).map_err(|e| e.to_string())?;
    ensure((fit.exponent - PARETO_ALPHA).abs() <= PARETO_TOL, || {
        format!("sampled slope {}", fit.exponent)
    })?;

    let r = DEFAULT_RATIO;
    let exact: Vec<(f64, f64, f64)> = (0..40)
        .map(|k| {
            let (lo, hi) = (r.powi(k), r.powi(k + 1));
            // bin average of x^-2.5
            let mass = (lo.powf(-1.5) - hi.powf(-1.5)) / 1.5;
            (lo, hi, mass / (hi - lo))
        })
        .collect();
    let d = Distribution::from_bin_table(&exact).map_err(|e| e.to_string())?;
    let efit = fit_powerlaw(&d, Some((1.0, r.powi(39)))).map_err(|e| e.to_string())?;
    ensure(
        (efit.exponent - PARETO_ALPHA).abs() <= EXACT_SLOPE_TOL,
        || format!("exact-bin slope {}", efit.exponent),
    )?;
    Ok(format!(
        "sampled slope {:.4}, exact-bin error {:.1e}",
        fit.exponent,
        (efit.exponent - PARETO_ALPHA).abs()
    ))
}

/// Content each user touches, read straight off the log.
fn touched(log: &EventLog) -> BTreeMap<String, BTreeSet<String>> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for e in log.events() {
        let s = out.entry(e.actor.clone()).or_default();
        s.insert(e.event_id.clone());
        if e.kind == EventKind::Comment {
            s.insert(e.post.clone());
            if let Some(p) = &e.parent {
                s.insert(p.clone());
            }
        }
    }
    out
}

fn bipartite_invariants() -> Outcome {
    let mut logs = 0;
    let mut brute = 0;
    let mut worst_null = 0.0f64;
    let mut configs = Vec::new();
    for seed in 0..40u64 {
        configs.push(SynthConfig {
            n_groups: 1 + (seed % 4) as usize,
            users_per_group: 2 + (seed % 5) as usize,
            posts_per_group: 3,
            horizon: 3 * 1440,
            seed,
            ..SynthConfig::default()
        });
    }
    for seed in PLANTED_SEEDS {
        configs.push(SynthConfig {
            seed,
            ..SynthConfig::default()
        });
    }
    configs.push(SynthConfig {
        activity: Activity::Pareto { tail: 1.5 },
        interevent: InterEvent::Pareto {
            alpha: 1.5,
            x_min: 10.0,
        },
        ..SynthConfig::default()
    });
    for cfg in &configs {
        let Ok((log, _)) = generate(cfg) else {
            continue;
        };
        logs += 1;
        let g = build_bipartite(&log, BuildMode::CommentTree).map_err(|e| e.to_string())?;
        let indeg = g.degrees(Partition::Content, Direction::In);
        ensure(indeg.iter().all(|&d| d == 1), || {
            format!("seed {}: content in-degree not identically 1", cfg.seed)
        })?;
        let c = commons_matrix(&g);
        if g.n_users() <= BRUTE_FORCE_MAX_USERS {
            brute += 1;
            let sets = touched(&log);
            let users = g.users();
            for i in 0..users.len() {
                for j in 0..users.len() {
                    let want = if i == j {
                        0
                    } else {
                        sets[&users[i]].intersection(&sets[&users[j]]).count() as u32
                    };
                    ensure(c.get(i, j) == want, || {
                        format!("seed {}: C[{i}][{j}] = {} != {want}", cfg.seed, c.get(i, j))
                    })?;
                }
            }
        }
        let Ok(l) = normalized_laplacian(&project_user_graph(&c)) else {
            continue;
        };
        let norm = l.strengths().iter().sum::<f64>().sqrt();
        let v: Vec<f64> = l.strengths().iter().map(|s| s.sqrt() / norm).collect();
        let mut lv = vec![0.0; v.len()];
        l.matvec(&v, &mut lv);
        let err = lv.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        worst_null = worst_null.max(err);
        ensure(err <= NULL_VECTOR_TOL, || {
            format!("seed {}: |L sqrt(l)| = {err:e}", cfg.seed)
        })?;
    }
    Ok(format!(
        "{logs} logs, {brute} brute-force commons checks, max |L sqrt(l)| {worst_null:.1e}"
    ))
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blogspace"))
}

fn run_in(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = bin()
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`blogspace {}` exited {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

/// Every analysis subcommand over `log.jsonl` in `dir`, writing into `dir/out`.
fn pipeline(dir: &Path, owner: &str) -> Result<(), String> {
    let steps: [&[&str]; 9] = [
        &[
            "ingest-validate",
            "-i",
            "log.jsonl",
            "-o",
            "out/clean.jsonl",
        ],
        &[
            "net-build",
            "-i",
            "log.jsonl",
            "-o",
            "out",
            "--min-comments",
            "50",
        ],
        &["stats-intervals", "-i", "log.jsonl", "-o", "out"],
        &[
            "stats-activity",
            "-i",
            "log.jsonl",
            "-o",
            "out",
            "--owner",
            owner,
        ],
        &[
            "stats-spectrum",
            "-i",
            "log.jsonl",
            "-o",
            "out",
            "--owner",
            owner,
        ],
        &["stats-scaling", "-i", "log.jsonl", "-o", "out"],
        &["stats-response", "-i", "log.jsonl", "-o", "out"],
        &["communities", "-i", "log.jsonl", "-o", "out"],
        &["report", "-i", "out"],
    ];
    fs::create_dir_all(dir.join("out")).map_err(|e| e.to_string())?;
    for args in steps {
        run_in(dir, args)?;
    }
    Ok(())
}

fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).map_err(|e| e.to_string())? {
            let p = e.map_err(|e| e.to_string())?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, fs::read(&p).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let runs: Vec<_> = (0..2)
        .map(|_| -> Result<BTreeMap<String, Vec<u8>>, String> {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            run_in(dir.path(), &["synth", "-o", "log.jsonl", "--seed", "11"])?;
            pipeline(dir.path(), "u1")?;
            snapshot(dir.path())
        })
        .collect::<Result<_, _>>()?;
    let (a, b) = (&runs[0], &runs[1]);
    ensure(a.keys().eq(b.keys()), || "different file sets".to_owned())?;
    let differing: Vec<&String> = a.keys().filter(|k| a[*k] != b[*k]).collect();
    ensure(differing.is_empty(), || {
        format!("files differ: {differing:?}")
    })?;
    let bytes: usize = a.values().map(Vec::len).sum();
    Ok(format!("{} files, {bytes} bytes identical", a.len()))
}

fn scale_check() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    // 1000 users at ~500 actions each over 30 days
    let summary = run_in(
        dir.path(),
        &[
            "synth",
            "-o",
            "log.jsonl",
            "--users",
            "1000",
            "--posts-per-group",
            "200",
            "--rate",
            "0.0116",
            "--seed",
            "3",
        ],
    )?;
    let events = log_size(&dir.path().join("log.jsonl"))?;
    ensure(events >= SCALE_EVENTS, || {
        format!("synthetic log has only {events} events: {summary}")
    })?;
    pipeline(dir.path(), "u1")?;
    let elapsed = start.elapsed();
    ensure(elapsed < SCALE_BUDGET, || {
        format!("pipeline took {elapsed:?}")
    })?;
    Ok(format!(
        "{events} events through synth and all analyses in {:.1} s",
        elapsed.as_secs_f64()
    ))
}

fn log_size(p: &Path) -> Result<usize, String> {
    Ok(fs::read_to_string(p)
        .map_err(|e| e.to_string())?
        .lines()
        .count())
}
