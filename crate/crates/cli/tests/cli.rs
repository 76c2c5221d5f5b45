use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use blogspace::distribution::read_distribution_tsv;
use blogspace::formats::*;
use blogspace::{parse_event_log, GroundTruth, LogFormat, Strictness};
use serde_json::Value;
use tempfile::TempDir;

fn blogspace(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blogspace"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = blogspace(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        stdout.lines().count(),
        1,
        "summary must be one line: {stdout}"
    );
    serde_json::from_str(&stdout).unwrap()
}

fn planted_run() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(
        p,
        &[
            "synth",
            "--groups",
            "4",
            "--users",
            "400",
            "--seed",
            "7",
            "-o",
            "log.jsonl",
        ],
    );
    for args in [
        &["net-build", "-i", "log.jsonl", "-o", "out"][..],
        &["stats-intervals", "-i", "log.jsonl", "-o", "out"],
        &[
            "stats-activity",
            "-i",
            "log.jsonl",
            "-o",
            "out",
            "--owner",
            "u5",
        ],
        &[
            "stats-spectrum",
            "-i",
            "log.jsonl",
            "-o",
            "out",
            "--owner",
            "u5",
        ],
        &["stats-scaling", "-i", "log.jsonl", "-o", "out"],
        &["stats-response", "-i", "log.jsonl", "-o", "out"],
        &["communities", "-i", "log.jsonl", "-o", "out/"],
        &["report", "-i", "out"],
    ] {
        ok(p, args);
    }
    dir
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for args in [
        &["frobnicate"][..],
        &[],
        &["synth"],
        &["communities", "-i", "x.jsonl", "--bogus"],
        &["communities", "-i", "x.jsonl", "--dims", "4"],
        &["synth", "-o", "x", "--seed", "seven"],
        &["--config", "missing.conf", "synth", "-o", "x"],
    ] {
        assert_eq!(blogspace(p, args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn every_subcommand_has_help() {
    let dir = tempfile::tempdir().unwrap();
    for sub in [
        "ingest-validate",
        "net-build",
        "stats-intervals",
        "stats-activity",
        "stats-scaling",
        "stats-spectrum",
        "stats-response",
        "communities",
        "synth",
        "report",
    ] {
        let out = blogspace(dir.path(), &[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0));
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
}

#[test]
fn empty_log_is_an_operation_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    let out = blogspace(dir.path(), &["ingest-validate", "-i", "empty.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty log"));

    let out = blogspace(dir.path(), &["net-build", "-i", "nope.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn lenient_flag_drops_orphans() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("log.jsonl"),
        concat!(
            r#"{"id":"p1","type":"post","user":"a","post":"p1","ts":0}"#,
            "\n",
            r#"{"id":"c1","type":"comment","user":"b","post":"p99","ts":5}"#,
            "\n",
            r#"{"id":"c2","type":"comment","user":"b","post":"p1","ts":3}"#,
            "\n",
        ),
    )
    .unwrap();
    assert_eq!(
        blogspace(dir.path(), &["ingest-validate", "-i", "log.jsonl"])
            .status
            .code(),
        Some(1)
    );
    let s = ok(
        dir.path(),
        &[
            "ingest-validate",
            "-i",
            "log.jsonl",
            "--lenient",
            "-o",
            "clean.tsv",
            "--out-format",
            "tsv",
        ],
    );
    assert_eq!(s["dropped"], 1);
    assert_eq!(s["counts"]["events"], 2);
    assert_eq!(s["out_of_order"], 1);
    let back = parse_event_log(
        BufReader::new(File::open(dir.path().join("clean.tsv")).unwrap()),
        LogFormat::Tsv,
        Strictness::Strict,
    )
    .unwrap();
    assert_eq!(back.log.len(), 2);
}

#[test]
fn planted_run_end_to_end() {
    let dir = planted_run();
    let p = dir.path();
    let s = ok(p, &["communities", "-i", "log.jsonl", "-o", "out/"]);
    assert_eq!(s["k"], 4);
    assert_eq!(s["gap"]["k"], 4);
    for f in ["spectrum.tsv", "scatter.tsv", "labels.tsv"] {
        assert!(p.join("out").join(f).is_file(), "{f}");
    }

    let report = fs::read_to_string(p.join("out/report.md")).unwrap();
    for section in [
        "Degrees",
        "Intervals",
        "Scaling",
        "Response",
        "Spectrum",
        "Communities",
    ] {
        assert!(report.contains(&format!("## {section}")), "{section}");
    }
    assert!(!report.contains("_absent_"));
    let sizes: Vec<usize> = report
        .lines()
        .filter_map(|l| {
            let f: Vec<&str> = l.split('|').map(str::trim).collect();
            (f.len() == 4 && f[1].parse::<usize>().is_ok()).then(|| f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(sizes.len(), 4, "{report}");
    for n in sizes {
        assert!((80..=120).contains(&n), "community size {n}");
    }
}

#[test]
fn artifacts_parse_back() {
    let dir = planted_run();
    let out = dir.path().join("out");
    let open = |name: &str| BufReader::new(File::open(out.join(name)).unwrap());

    let spec_summary = ok(dir.path(), &["communities", "-i", "log.jsonl", "-o", "out"]);
    let (t, vals, res) = read_spectrum(open("spectrum.tsv")).unwrap();
    assert_eq!(
        vals.len(),
        spec_summary["eigenvalues"].as_array().unwrap().len()
    );
    assert_eq!(res.len(), vals.len());
    assert_eq!(t.meta["k"], "4");
    let pts = read_scatter(open("scatter.tsv")).unwrap();
    assert_eq!(pts.len(), 400);
    assert!(pts.iter().all(|p| p.coords.len() == 3));
    let (_, labels) = read_labels(open("labels.tsv")).unwrap();
    assert_eq!(labels.len(), 400);
    let lap = TripletGraph::read(open("laplacian.txt")).unwrap();
    assert_eq!(lap.nodes, 400);

    for f in ["bipartite.txt", "user_graph.txt"] {
        let g = TripletGraph::read(open(f)).unwrap();
        assert!(!g.edges.is_empty(), "{f}");
    }
    for f in [
        "degrees_users_out.tsv",
        "degrees_users_in.tsv",
        "degrees_content_in.tsv",
        "degrees_content_out.tsv",
        "commons.tsv",
        "intervals.tsv",
        "response.tsv",
    ] {
        let d = read_distribution_tsv(open(f)).unwrap();
        assert!(!d.rows.is_empty(), "{f}");
    }
    let (t, pts) = read_scaling(open("scaling.tsv")).unwrap();
    assert_eq!(pts.len(), 400);
    assert!(t.meta_f64("mu").is_some());
    let (_, pg) = read_periodogram(open("periodogram_user_u5.tsv")).unwrap();
    assert!(!pg.power.is_empty());
    let s = read_series(open("series_user_u5.tsv")).unwrap();
    assert_eq!(s.owner, "u5");

    let truth = GroundTruth::read_tsv(BufReader::new(
        File::open(dir.path().join("log.jsonl.truth.tsv")).unwrap(),
    ))
    .unwrap();
    assert_eq!(truth.user_group.len(), 400);
}

#[test]
fn report_on_empty_dir_lists_everything_absent() {
    let dir = tempfile::tempdir().unwrap();
    let s = ok(dir.path(), &["report", "-i", "."]);
    let sections = s["sections"].as_object().unwrap();
    assert_eq!(sections.len(), 6);
    assert!(sections.values().all(|v| v == "absent"));
    let text = fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert_eq!(text.matches("_absent_").count(), 6);
}

#[test]
fn poisson_users_scaling_summary() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(
        p,
        &[
            "synth",
            "-o",
            "log.jsonl",
            "--groups",
            "2",
            "--users",
            "100",
            "--posts-per-group",
            "5",
            "--rate",
            "0.0000694444",
            "--activity",
            "loguniform",
            "--spread",
            "3",
            "--horizon",
            "288000",
        ],
    );
    let s = ok(p, &["stats-scaling", "-i", "log.jsonl", "--twin", "1440"]);
    let mu = s["mu"].as_f64().unwrap();
    assert!((mu - 0.5).abs() < 0.05, "mu {mu}");
    let (_, pts) =
        read_scaling(BufReader::new(File::open(p.join("scaling.tsv")).unwrap())).unwrap();
    assert_eq!(pts.len() + s["excluded"].as_u64().unwrap() as usize, 100);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(
        p.join("run.conf"),
        "# planted run\nseed = 3\ngroups = 2\nusers = 40\nposts_per_group = 4\nhorizon = 4320\n",
    )
    .unwrap();
    let a = ok(
        p,
        &[
            "--config", "run.conf", "synth", "-o", "a.jsonl", "--groups", "4",
        ],
    );
    let b = ok(
        p,
        &[
            "synth",
            "-o",
            "b.jsonl",
            "--seed",
            "3",
            "--groups",
            "4",
            "--users",
            "40",
            "--posts-per-group",
            "4",
            "--horizon",
            "4320",
        ],
    );
    assert_eq!(a["groups"], 4);
    assert_eq!(a["seed"], 3);
    assert_eq!(a["counts"], b["counts"]);
    assert_eq!(
        fs::read(p.join("a.jsonl")).unwrap(),
        fs::read(p.join("b.jsonl")).unwrap()
    );
}

#[test]
fn seeds_change_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for (seed, name) in [("1", "a.jsonl"), ("2", "b.jsonl"), ("1", "c.jsonl")] {
        ok(
            p,
            &[
                "synth",
                "-o",
                name,
                "--seed",
                seed,
                "--users",
                "40",
                "--horizon",
                "2880",
            ],
        );
    }
    let read = |n: &str| fs::read(p.join(n)).unwrap();
    assert_eq!(read("a.jsonl"), read("c.jsonl"));
    assert_ne!(read("a.jsonl"), read("b.jsonl"));
}

#[test]
fn uneven_groups_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = blogspace(
        dir.path(),
        &["synth", "-o", "x.jsonl", "--groups", "3", "--users", "100"],
    );
    assert_eq!(out.status.code(), Some(1));
}
