use std::collections::BTreeSet;

use blogspace::*;
use proptest::prelude::*;

fn big_log() -> (EventLog, GroundTruth) {
    let cfg = SynthConfig {
        n_groups: 4,
        users_per_group: 250,
        posts_per_group: 200,
        interevent: InterEvent::Exponential {
            rate: 100.0 / (30.0 * 1440.0),
        },
        ..SynthConfig::default()
    };
    generate(&cfg).unwrap()
}

#[test]
fn synthetic_log_round_trips_in_both_formats() {
    let (log, _) = big_log();
    assert!(log.len() >= 100_000, "{}", log.len());
    assert!(validate_log(&log).is_clean());
    for format in [LogFormat::JsonLines, LogFormat::Tsv] {
        let mut buf = Vec::new();
        write_event_log(&log, format, &mut buf).unwrap();
        let back = parse_event_log(&buf[..], format, Strictness::Strict).unwrap();
        assert!(back.report.is_clean());
        assert_eq!(back.log, log);
        assert_eq!(
            (
                back.log.n_users(),
                back.log.n_posts(),
                back.log.n_comments()
            ),
            (log.n_users(), log.n_posts(), log.n_comments())
        );
        let mut again = Vec::new();
        write_event_log(&back.log, format, &mut again).unwrap();
        assert_eq!(buf, again);
    }
}

#[test]
fn filter_matches_generator_counts() {
    let (log, truth) = big_log();
    let want: BTreeSet<&str> = truth
        .post_comments
        .iter()
        .filter(|(_, &c)| (50..=100).contains(&c))
        .map(|(p, _)| p.as_str())
        .collect();
    assert!(want.len() >= 10, "only {} posts in range", want.len());
    let criteria = FilterCriteria {
        min_comments: Some(50),
        max_comments: Some(100),
        window: None,
    };
    let f = filter_events(&log, &criteria).unwrap();
    let got: BTreeSet<&str> = f.posts().map(|p| p.post.as_str()).collect();
    assert_eq!(got, want);
    let comments: usize = want.iter().map(|p| truth.post_comments[*p]).sum();
    assert_eq!(f.n_comments(), comments);
    assert!(validate_log(&f).is_clean());
    assert_eq!(filter_events(&f, &criteria).unwrap(), f);
}

#[test]
fn open_filter_is_identity() {
    let (log, _) = generate(&SynthConfig::default()).unwrap();
    assert_eq!(
        filter_events(&log, &FilterCriteria::default()).unwrap(),
        log
    );
    let bad = FilterCriteria {
        min_comments: Some(5),
        max_comments: Some(2),
        window: None,
    };
    assert!(matches!(
        filter_events(&log, &bad),
        Err(IngestError::InvertedBounds { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn filter_is_idempotent(
        seed in 0u64..1000,
        min in 0usize..20,
        span in 0usize..40,
        window in prop::option::of((0u64..5000, 0u64..5000)),
    ) {
        let (log, _) = generate(&SynthConfig {
            n_groups: 2,
            users_per_group: 10,
            posts_per_group: 6,
            horizon: 5 * 1440,
            seed,
            ..SynthConfig::default()
        }).unwrap();
        let criteria = FilterCriteria {
            min_comments: Some(min),
            max_comments: Some(min + span),
            window: window.map(|(a, b)| (a.min(b), a.max(b))),
        };
        let once = filter_events(&log, &criteria).unwrap();
        prop_assert!(validate_log(&once).is_clean());
        prop_assert_eq!(filter_events(&once, &criteria).unwrap(), once);
    }

    #[test]
    fn lenient_parse_resolves_every_comment(
        extra in prop::collection::vec((0usize..30, prop::option::of(0usize..30), 0u64..100), 0..30),
    ) {
        let mut lines = vec![
            r#"{"id":"p1","type":"post","user":"a","post":"p1","ts":0}"#.to_owned(),
        ];
        for (i, (post, parent, ts)) in extra.iter().enumerate() {
            let post = if post % 3 == 0 { "p1".to_owned() } else { format!("p{post}") };
            let parent = parent.map_or("null".to_owned(), |p| format!("\"c{p}\""));
            lines.push(format!(
                r#"{{"id":"c{i}","type":"comment","user":"u{}","post":"{post}","parent":{parent},"ts":{ts}}}"#,
                i % 4
            ));
        }
        let text = lines.join("\n");
        let got = parse_event_log(text.as_bytes(), LogFormat::JsonLines, Strictness::Lenient).unwrap();
        prop_assert!(validate_log(&got.log).is_clean());
        for e in got.log.events() {
            prop_assert!(got.log.has_post(&e.post));
            if let Some(p) = &e.parent {
                prop_assert_eq!(&got.log.get(p).unwrap().post, &e.post);
            }
        }
        prop_assert_eq!(got.log.len() + got.report.dropped.len(), lines.len());
    }
}

#[test]
fn orphans_and_cycles_are_reported() {
    let log = EventLog::from_records_unchecked(vec![
        EventRecord::post("p1", "a", 0),
        EventRecord::comment("c1", "b", "p99", None, 1),
        EventRecord::comment("cA", "b", "p1", Some("cB"), 2),
        EventRecord::comment("cB", "c", "p1", Some("cA"), 3),
    ]);
    let r = validate_log(&log);
    assert_eq!(r.orphans, vec!["c1".to_owned()]);
    assert!(!r.cycles.is_empty());
    assert!(matches!(
        build_bipartite(&log, BuildMode::CommentTree),
        Err(GraphError::Unvalidated(_))
    ));
}
