//! Event-log ingestion: parsing, validation and filtering of timestamped
//! post/comment records.
//!
//! Timestamps are integer minutes. Records are kept sorted by `(ts, event_id)`
//! so every downstream analysis sees the same order for the same input.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("duplicate event id {0:?}")]
    DuplicateId(String),
    #[error("log failed validation: {0}")]
    Invalid(Box<ValidationReport>),
    #[error("min_comments ({min}) exceeds max_comments ({max})")]
    InvertedBounds { min: usize, max: usize },
    #[error("time window start {start} is after its end {end}")]
    InvertedWindow { start: u64, end: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Post,
    Comment,
}

impl EventKind {
    fn as_str(self) -> &'static str {
        match self {
            EventKind::Post => "post",
            EventKind::Comment => "comment",
        }
    }
}

/// One action recorded by the blog platform.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EventRecord {
    pub event_id: String,
    pub kind: EventKind,
    pub actor: String,
    /// Root post this event belongs to (equal to `event_id` for posts).
    pub post: String,
    /// Comment being replied to, for comment-on-comment events.
    pub parent: Option<String>,
    /// Minutes since epoch.
    pub ts: u64,
}

impl EventRecord {
    pub fn post(id: impl Into<String>, actor: impl Into<String>, ts: u64) -> Self {
        let id = id.into();
        EventRecord {
            post: id.clone(),
            event_id: id,
            kind: EventKind::Post,
            actor: actor.into(),
            parent: None,
            ts,
        }
    }

    pub fn comment(
        id: impl Into<String>,
        actor: impl Into<String>,
        post: impl Into<String>,
        parent: Option<&str>,
        ts: u64,
    ) -> Self {
        EventRecord {
            event_id: id.into(),
            kind: EventKind::Comment,
            actor: actor.into(),
            post: post.into(),
            parent: parent.map(str::to_owned),
            ts,
        }
    }

    pub fn is_post(&self) -> bool {
        self.kind == EventKind::Post
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogFormat {
    #[default]
    JsonLines,
    Tsv,
}

impl std::str::FromStr for LogFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" | "json" | "jsonlines" => Ok(LogFormat::JsonLines),
            "tsv" => Ok(LogFormat::Tsv),
            other => Err(format!(
                "unknown log format {other:?} (expected jsonl or tsv)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    #[default]
    Strict,
    /// Drop comments with unresolvable references instead of failing.
    Lenient,
}

/// Problems found in a log. Empty means the log is well formed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    /// Comments whose root post does not exist.
    pub orphans: Vec<String>,
    /// Comments whose parent is missing, is not a comment, or sits under another post.
    pub bad_parents: Vec<String>,
    /// Parent chains that loop, each listed from its smallest id.
    pub cycles: Vec<Vec<String>>,
    pub duplicates: Vec<String>,
    /// Records that appeared out of timestamp order in the source.
    pub out_of_order: usize,
    /// Comments discarded by lenient parsing (includes descendants of dropped comments).
    pub dropped: Vec<String>,
}

impl ValidationReport {
    /// True when no structural problem was found. `out_of_order` is informational only.
    pub fn is_clean(&self) -> bool {
        self.orphans.is_empty()
            && self.bad_parents.is_empty()
            && self.cycles.is_empty()
            && self.duplicates.is_empty()
    }

    fn offending(&self) -> BTreeSet<&str> {
        self.orphans
            .iter()
            .chain(&self.bad_parents)
            .chain(self.cycles.iter().flatten())
            .map(String::as_str)
            .collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} orphan(s), {} bad parent(s), {} cycle(s), {} duplicate(s), {} out of order",
            self.orphans.len(),
            self.bad_parents.len(),
            self.cycles.len(),
            self.duplicates.len(),
            self.out_of_order
        )
    }
}

/// Sorted, indexed collection of events. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    events: Vec<EventRecord>,
    by_user: BTreeMap<String, Vec<usize>>,
    posts: BTreeMap<String, usize>,
    comments_by_post: BTreeMap<String, Vec<usize>>,
    by_id: HashMap<String, usize>,
    source_out_of_order: usize,
}

impl PartialEq for EventLog {
    fn eq(&self, other: &Self) -> bool {
        self.events == other.events
    }
}

impl EventLog {
    /// Sorts and indexes `records` without checking references.
    ///
    /// Duplicated ids are kept so that [`validate_log`] can report them.
    pub fn from_records_unchecked(mut records: Vec<EventRecord>) -> Self {
        let source_out_of_order = records.windows(2).filter(|w| w[1].ts < w[0].ts).count();
        records.sort_by(|a, b| a.ts.cmp(&b.ts).then_with(|| a.event_id.cmp(&b.event_id)));

        let mut log = EventLog {
            source_out_of_order,
            ..Default::default()
        };
        for (i, ev) in records.iter().enumerate() {
            log.by_user.entry(ev.actor.clone()).or_default().push(i);
            log.by_id.entry(ev.event_id.clone()).or_insert(i);
            match ev.kind {
                EventKind::Post => {
                    log.posts.entry(ev.post.clone()).or_insert(i);
                }
                EventKind::Comment => log
                    .comments_by_post
                    .entry(ev.post.clone())
                    .or_default()
                    .push(i),
            }
        }
        log.events = records;
        log
    }

    /// Builds a log and rejects it unless validation comes back clean.
    pub fn from_records(records: Vec<EventRecord>) -> Result<Self, IngestError> {
        let log = Self::from_records_unchecked(records);
        let report = validate_log(&log);
        if let Some(dup) = report.duplicates.first() {
            return Err(IngestError::DuplicateId(dup.clone()));
        }
        if !report.is_clean() {
            return Err(IngestError::Invalid(Box::new(report)));
        }
        Ok(log)
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn get(&self, event_id: &str) -> Option<&EventRecord> {
        self.by_id.get(event_id).map(|&i| &self.events[i])
    }

    /// Number of distinct actors, N_U.
    pub fn n_users(&self) -> usize {
        self.by_user.len()
    }

    /// Number of posts, N_B.
    pub fn n_posts(&self) -> usize {
        self.events.iter().filter(|e| e.is_post()).count()
    }

    /// Number of comments, N_c.
    pub fn n_comments(&self) -> usize {
        self.events.len() - self.n_posts()
    }

    /// Users in id order.
    pub fn users(&self) -> impl Iterator<Item = &str> {
        self.by_user.keys().map(String::as_str)
    }

    /// Post records in id order.
    pub fn posts(&self) -> impl Iterator<Item = &EventRecord> {
        self.posts.values().map(|&i| &self.events[i])
    }

    /// Events by `user`, in log order.
    pub fn user_events(&self, user: &str) -> impl Iterator<Item = &EventRecord> {
        self.by_user
            .get(user)
            .into_iter()
            .flatten()
            .map(|&i| &self.events[i])
    }

    /// Comments under `post` (at any depth), in log order.
    pub fn post_comments(&self, post: &str) -> impl Iterator<Item = &EventRecord> {
        self.comments_by_post
            .get(post)
            .into_iter()
            .flatten()
            .map(|&i| &self.events[i])
    }

    pub fn comment_count(&self, post: &str) -> usize {
        self.comments_by_post.get(post).map_or(0, Vec::len)
    }

    pub fn has_user(&self, user: &str) -> bool {
        self.by_user.contains_key(user)
    }

    pub fn has_post(&self, post: &str) -> bool {
        self.posts.contains_key(post)
    }

    /// Records that were out of order in the source before sorting.
    pub fn source_out_of_order(&self) -> usize {
        self.source_out_of_order
    }
}

/// A parsed log together with whatever lenient parsing had to drop.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub log: EventLog,
    pub report: ValidationReport,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    #[serde(rename = "type")]
    kind: EventKind,
    user: String,
    post: String,
    #[serde(default)]
    parent: Option<String>,
    ts: serde_json::Number,
}

#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    #[serde(rename = "type")]
    kind: EventKind,
    user: &'a str,
    post: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    parent: Option<&'a str>,
    ts: u64,
}

const TSV_HEADER: &str = "id\ttype\tuser\tpost\tparent\tts";

fn parse_ts(raw: &str, line: usize) -> Result<u64, IngestError> {
    let malformed = |msg: String| IngestError::Malformed { line, msg };
    if let Ok(v) = raw.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| malformed(format!("timestamp {raw:?} is not a number")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(malformed(format!("timestamp {raw} must be non-negative")));
    }
    Ok(v.floor() as u64)
}

fn check_shape(rec: &EventRecord, line: usize) -> Result<(), IngestError> {
    let malformed = |msg: &str| IngestError::Malformed {
        line,
        msg: msg.to_owned(),
    };
    if rec.event_id.is_empty() || rec.actor.is_empty() || rec.post.is_empty() {
        return Err(malformed("id, user and post must be non-empty"));
    }
    if rec.is_post() {
        if rec.parent.is_some() {
            return Err(malformed("a post cannot have a parent"));
        }
        if rec.event_id != rec.post {
            return Err(malformed("a post's id must equal its post field"));
        }
    }
    Ok(())
}

fn parse_json_line(text: &str, line: usize) -> Result<EventRecord, IngestError> {
    let raw: RawRecord = serde_json::from_str(text).map_err(|e| IngestError::Malformed {
        line,
        msg: e.to_string(),
    })?;
    let ts = parse_ts(&raw.ts.to_string(), line)?;
    Ok(EventRecord {
        event_id: raw.id,
        kind: raw.kind,
        actor: raw.user,
        post: raw.post,
        parent: raw.parent.filter(|p| !p.is_empty()),
        ts,
    })
}

fn parse_tsv_line(text: &str, line: usize) -> Result<EventRecord, IngestError> {
    let cols: Vec<&str> = text.split('\t').collect();
    if cols.len() != 6 {
        return Err(IngestError::Malformed {
            line,
            msg: format!("expected 6 tab-separated columns, found {}", cols.len()),
        });
    }
    let kind = match cols[1] {
        "post" => EventKind::Post,
        "comment" => EventKind::Comment,
        other => {
            return Err(IngestError::Malformed {
                line,
                msg: format!("unknown event type {other:?}"),
            })
        }
    };
    let parent = match cols[4] {
        "-" | "" => None,
        p => Some(p.to_owned()),
    };
    Ok(EventRecord {
        event_id: cols[0].to_owned(),
        kind,
        actor: cols[2].to_owned(),
        post: cols[3].to_owned(),
        parent,
        ts: parse_ts(cols[5], line)?,
    })
}

/// Reads a whole event log in `format`.
///
/// Blank lines and `#` comments are skipped, as is a TSV header line. In
/// strict mode any unresolvable reference fails the parse; in lenient mode the
/// offending comments (and replies beneath them) are dropped and listed in
/// the returned report.
pub fn parse_event_log<R: BufRead>(
    reader: R,
    format: LogFormat,
    strictness: Strictness,
) -> Result<Ingested, IngestError> {
    let mut records = Vec::new();
    let mut seen = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim_end_matches('\r');
        if text.trim().is_empty() || text.starts_with('#') {
            continue;
        }
        if format == LogFormat::Tsv && text == TSV_HEADER {
            continue;
        }
        let rec = match format {
            LogFormat::JsonLines => parse_json_line(text, line_no)?,
            LogFormat::Tsv => parse_tsv_line(text, line_no)?,
        };
        check_shape(&rec, line_no)?;
        if seen.insert(rec.event_id.clone(), line_no).is_some() {
            return Err(IngestError::DuplicateId(rec.event_id));
        }
        records.push(rec);
    }

    let log = EventLog::from_records_unchecked(records);
    let mut report = validate_log(&log);
    if report.is_clean() {
        return Ok(Ingested { log, report });
    }
    match strictness {
        Strictness::Strict => Err(IngestError::Invalid(Box::new(report))),
        Strictness::Lenient => {
            let offending: BTreeSet<String> =
                report.offending().into_iter().map(str::to_owned).collect();
            let kept = drop_with_descendants(log.events, &offending, &mut report.dropped);
            let log = EventLog {
                source_out_of_order: log.source_out_of_order,
                ..EventLog::from_records_unchecked(kept)
            };
            debug_assert!(validate_log(&log).is_clean());
            Ok(Ingested { log, report })
        }
    }
}

/// Removes `seeds` and every comment whose parent chain passes through a
/// removed comment. Iterates to a fixpoint, so record order does not matter.
fn drop_with_descendants(
    events: Vec<EventRecord>,
    seeds: &BTreeSet<String>,
    dropped: &mut Vec<String>,
) -> Vec<EventRecord> {
    let mut removed: BTreeSet<String> = seeds.clone();
    loop {
        let before = removed.len();
        for ev in &events {
            if let Some(p) = &ev.parent {
                if removed.contains(p) {
                    removed.insert(ev.event_id.clone());
                }
            }
        }
        if removed.len() == before {
            break;
        }
    }
    dropped.extend(removed.iter().cloned());
    events
        .into_iter()
        .filter(|e| !removed.contains(&e.event_id))
        .collect()
}

/// Inspects a log for structural problems. Never modifies it.
pub fn validate_log(log: &EventLog) -> ValidationReport {
    let mut report = ValidationReport {
        out_of_order: log.source_out_of_order,
        ..Default::default()
    };

    let mut counts: HashMap<&str, usize> = HashMap::new();
    for ev in &log.events {
        *counts.entry(ev.event_id.as_str()).or_default() += 1;
    }
    let mut dups: Vec<String> = counts
        .into_iter()
        .filter(|&(_, n)| n > 1)
        .map(|(id, _)| id.to_owned())
        .collect();
    dups.sort();
    report.duplicates = dups;

    for ev in log.events.iter().filter(|e| !e.is_post()) {
        if !log.has_post(&ev.post) {
            report.orphans.push(ev.event_id.clone());
            continue;
        }
        if let Some(pid) = &ev.parent {
            let ok = log
                .get(pid)
                .is_some_and(|p| !p.is_post() && p.post == ev.post);
            if !ok {
                report.bad_parents.push(ev.event_id.clone());
            }
        }
    }

    report.cycles = find_parent_cycles(log);
    report
}

fn find_parent_cycles(log: &EventLog) -> Vec<Vec<String>> {
    // 0 = unvisited, 1 = on current chain, 2 = done
    let mut state: HashMap<&str, u8> = HashMap::new();
    let mut cycles = Vec::new();
    for ev in log.events.iter().filter(|e| !e.is_post()) {
        if state.contains_key(ev.event_id.as_str()) {
            continue;
        }
        let mut chain: Vec<&str> = Vec::new();
        let mut cur = Some(ev.event_id.as_str());
        while let Some(id) = cur {
            match state.get(id) {
                Some(1) => {
                    let start = chain.iter().position(|&c| c == id).unwrap();
                    let mut cyc: Vec<String> =
                        chain[start..].iter().map(|s| (*s).to_owned()).collect();
                    let min_pos = cyc
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1.cmp(b.1))
                        .map(|(i, _)| i)
                        .unwrap();
                    cyc.rotate_left(min_pos);
                    cycles.push(cyc);
                    break;
                }
                Some(_) => break,
                None => {}
            }
            state.insert(id, 1);
            chain.push(id);
            cur = log
                .get(id)
                .filter(|e| !e.is_post())
                .and_then(|e| e.parent.as_deref());
        }
        for id in chain {
            state.insert(id, 2);
        }
    }
    cycles.sort();
    cycles
}

/// Selection applied by [`filter_events`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterCriteria {
    pub min_comments: Option<usize>,
    pub max_comments: Option<usize>,
    /// Half-open `[start, end)` range of minutes.
    pub window: Option<(u64, u64)>,
}

/// Keeps posts whose comment count lies in `[min, max]`, together with all
/// their comments.
///
/// The time window is applied first: posts and comments outside it are
/// removed, and replies whose parent fell outside it go with the parent.
/// Comment counts are taken after windowing, which makes the filter
/// idempotent.
pub fn filter_events(log: &EventLog, criteria: &FilterCriteria) -> Result<EventLog, IngestError> {
    if let (Some(min), Some(max)) = (criteria.min_comments, criteria.max_comments) {
        if min > max {
            return Err(IngestError::InvertedBounds { min, max });
        }
    }
    if let Some((start, end)) = criteria.window {
        if start > end {
            return Err(IngestError::InvertedWindow { start, end });
        }
    }

    let windowed: Vec<&EventRecord> = match criteria.window {
        None => log.events.iter().collect(),
        Some((start, end)) => {
            let mut kept_ids: BTreeSet<&str> = BTreeSet::new();
            let mut out = Vec::new();
            // Log order puts parents before replies unless timestamps tie in
            // an unlucky id order, so iterate to a fixpoint.
            let in_window: Vec<&EventRecord> = log
                .events
                .iter()
                .filter(|e| e.ts >= start && e.ts < end)
                .collect();
            for e in in_window.iter().filter(|e| e.is_post()) {
                kept_ids.insert(&e.event_id);
            }
            let mut pending: Vec<&EventRecord> =
                in_window.iter().copied().filter(|e| !e.is_post()).collect();
            loop {
                let before = pending.len();
                pending.retain(|e| {
                    let ok = kept_ids.contains(e.post.as_str())
                        && e.parent.as_deref().is_none_or(|p| kept_ids.contains(p));
                    if ok {
                        kept_ids.insert(&e.event_id);
                    }
                    !ok
                });
                if pending.len() == before {
                    break;
                }
            }
            for e in in_window {
                if kept_ids.contains(e.event_id.as_str()) {
                    out.push(e);
                }
            }
            out
        }
    };

    let mut counts: HashMap<&str, usize> = HashMap::new();
    for e in &windowed {
        if !e.is_post() {
            *counts.entry(e.post.as_str()).or_default() += 1;
        }
    }
    let min = criteria.min_comments.unwrap_or(0);
    let max = criteria.max_comments.unwrap_or(usize::MAX);
    let keep_post = |post: &str| {
        let n = counts.get(post).copied().unwrap_or(0);
        n >= min && n <= max
    };

    let records = windowed
        .into_iter()
        .filter(|e| keep_post(&e.post))
        .cloned()
        .collect();
    Ok(EventLog::from_records_unchecked(records))
}

/// Writes `log` in canonical order.
pub fn write_event_log<W: Write>(
    log: &EventLog,
    format: LogFormat,
    mut out: W,
) -> std::io::Result<()> {
    match format {
        LogFormat::JsonLines => {
            for ev in &log.events {
                let rec = OutRecord {
                    id: &ev.event_id,
                    kind: ev.kind,
                    user: &ev.actor,
                    post: &ev.post,
                    parent: ev.parent.as_deref(),
                    ts: ev.ts,
                };
                serde_json::to_writer(&mut out, &rec)?;
                out.write_all(b"\n")?;
            }
        }
        LogFormat::Tsv => {
            writeln!(out, "{TSV_HEADER}")?;
            for ev in &log.events {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    ev.event_id,
                    ev.kind.as_str(),
                    ev.actor,
                    ev.post,
                    ev.parent.as_deref().unwrap_or("-"),
                    ev.ts
                )?;
            }
        }
    }
    out.flush()
}
