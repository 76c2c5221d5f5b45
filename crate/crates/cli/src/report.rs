//! Markdown summary of a run directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use blogspace::formats::{read_labels, read_periodogram, read_spectrum, read_table, Table};
use serde_json::{json, Map, Value};

type Section = Result<String, String>;
type SectionFn = fn(&Path) -> Option<Section>;

pub fn build(dir: &Path) -> (String, Value) {
    let sections: [(&str, SectionFn); 6] = [
        ("Degrees", degrees),
        ("Intervals", intervals),
        ("Scaling", scaling),
        ("Response", response),
        ("Spectrum", spectrum),
        ("Communities", communities),
    ];
    let mut md = String::from("# Run report\n");
    let mut status = Map::new();
    for (name, f) in sections {
        let _ = write!(md, "\n## {name}\n\n");
        let s = match f(dir) {
            None => {
                md.push_str("_absent_\n");
                "absent"
            }
            Some(Ok(body)) => {
                md.push_str(&body);
                "present"
            }
            Some(Err(e)) => {
                let _ = writeln!(md, "_unreadable: {e}_");
                "unreadable"
            }
        };
        status.insert(name.to_lowercase(), json!(s));
    }
    (md, Value::Object(status))
}

fn open(p: &Path) -> Option<Result<BufReader<File>, String>> {
    p.is_file().then(|| {
        File::open(p)
            .map(BufReader::new)
            .map_err(|e| format!("{}: {e}", p.display()))
    })
}

fn table(p: &Path) -> Option<Result<Table, String>> {
    open(p).map(|r| r.and_then(|r| read_table(r).map_err(|e| format!("{}: {e}", p.display()))))
}

fn meta<'a>(t: &'a Table, key: &str) -> &'a str {
    t.meta.get(key).map_or("n/a", String::as_str)
}

fn matching(dir: &Path, prefix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .into_iter()
        .flatten()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(prefix) && n.ends_with(".tsv"))
        })
        .collect();
    v.sort();
    v
}

fn degrees(dir: &Path) -> Option<Section> {
    let files = [
        "users_out",
        "users_in",
        "content_in",
        "content_out",
        "commons",
    ];
    let mut body = String::from(
        "| distribution | power-law exponent | fit range | bins |\n|---|---|---|---|\n",
    );
    let mut any = false;
    for name in files {
        let file = if name == "commons" {
            "commons.tsv".to_owned()
        } else {
            format!("degrees_{name}.tsv")
        };
        let Some(t) = table(&dir.join(file)) else {
            continue;
        };
        any = true;
        let t = match t {
            Ok(t) => t,
            Err(e) => return Some(Err(e)),
        };
        let _ = writeln!(
            body,
            "| {name} | {} | [{}, {}] | {} |",
            meta(&t, "exponent"),
            meta(&t, "x_min"),
            meta(&t, "x_max"),
            meta(&t, "n_bins"),
        );
    }
    any.then_some(Ok(body))
}

fn intervals(dir: &Path) -> Option<Section> {
    let t = table(&dir.join("intervals.tsv"))?;
    Some(t.map(|t| {
        format!(
            "Inter-event exponent {} over [{}, {}] ({} bins, rms residual {}).\n",
            meta(&t, "exponent"),
            meta(&t, "x_min"),
            meta(&t, "x_max"),
            meta(&t, "n_bins"),
            meta(&t, "residual"),
        )
    }))
}

fn scaling(dir: &Path) -> Option<Section> {
    let mut body = String::new();
    for (file, who) in [("scaling.tsv", "users"), ("scaling_posts.tsv", "posts")] {
        let Some(t) = table(&dir.join(file)) else {
            continue;
        };
        let t = match t {
            Ok(t) => t,
            Err(e) => return Some(Err(e)),
        };
        let _ = writeln!(
            body,
            "- {who}: mu = {} from {} series ({} excluded), bin {} min",
            meta(&t, "mu"),
            meta(&t, "n_points"),
            meta(&t, "excluded"),
            meta(&t, "twin"),
        );
    }
    (!body.is_empty()).then_some(Ok(body))
}

fn response(dir: &Path) -> Option<Section> {
    let t = table(&dir.join("response.tsv"))?;
    Some(t.map(|t| {
        format!(
            "q = {}, t* = {} min, tail exponent {}.\n",
            meta(&t, "q"),
            meta(&t, "t_star"),
            meta(&t, "tail_exponent"),
        )
    }))
}

fn spectrum(dir: &Path) -> Option<Section> {
    let files = matching(dir, "periodogram_");
    if files.is_empty() {
        return None;
    }
    let mut body =
        String::from("| series | bin (min) | peak frequency | total power |\n|---|---|---|---|\n");
    for p in files {
        let r = match open(&p)? {
            Ok(r) => r,
            Err(e) => return Some(Err(e)),
        };
        let (t, pg) = match read_periodogram(r) {
            Ok(x) => x,
            Err(e) => return Some(Err(format!("{}: {e}", p.display()))),
        };
        let peak = pg
            .frequency
            .iter()
            .zip(&pg.power)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0.0, |(&f, _)| f);
        let _ = writeln!(
            body,
            "| {} | {} | {peak} | {:.6e} |",
            meta(&t, "owner"),
            meta(&t, "twin"),
            pg.power.iter().sum::<f64>(),
        );
    }
    Some(Ok(body))
}

fn communities(dir: &Path) -> Option<Section> {
    let spec = open(&dir.join("spectrum.tsv"));
    let labels = open(&dir.join("labels.tsv"));
    if spec.is_none() && labels.is_none() {
        return None;
    }
    let mut body = String::new();
    if let Some(r) = spec {
        let (t, vals, _) = match r.and_then(|r| read_spectrum(r).map_err(|e| e.to_string())) {
            Ok(x) => x,
            Err(e) => return Some(Err(e)),
        };
        let shown: Vec<String> = vals
            .iter()
            .map(|&v| format!("{:.4}", if v.abs() < 1e-9 { 0.0 } else { v }))
            .collect();
        let _ = writeln!(
            body,
            "{} nodes, {} zero eigenvalues, k = {} (gap rule {}, {} nonzero below the gap).\n\nSmallest eigenvalues: {}\n",
            meta(&t, "nodes"),
            meta(&t, "zeros"),
            meta(&t, "k"),
            meta(&t, "k_gap"),
            meta(&t, "nonzero_below_gap"),
            shown.join(", "),
        );
    }
    if let Some(r) = labels {
        let (_, rows) = match r.and_then(|r| read_labels(r).map_err(|e| e.to_string())) {
            Ok(x) => x,
            Err(e) => return Some(Err(e)),
        };
        let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
        let mut ring = 0;
        for (_, l) in &rows {
            match l {
                Some(l) => *sizes.entry(*l).or_default() += 1,
                None => ring += 1,
            }
        }
        body.push_str("| community | size |\n|---|---|\n");
        for (l, n) in &sizes {
            let _ = writeln!(body, "| {l} | {n} |");
        }
        let _ = writeln!(body, "| ring | {ring} |");
    }
    Some(Ok(body))
}
