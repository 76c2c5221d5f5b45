//! Text artifact formats: graph triplets and the TSV tables written by the
//! pipeline. Every writer has a reader that recovers the same values.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::spectral::{CommunityAssignment, LaplacianMatrix, ScatterPoint, Spectrum};
use crate::tempstats::{Periodogram, ScalingFit, ScalingPoint, TimeSeries};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn perr(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        msg: msg.into(),
    }
}

/// A TSV file: `# key=value` metadata lines, a column header, then rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub meta: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta.get(key)?.parse().ok()
    }

    fn column_f64(&self, i: usize) -> Result<Vec<f64>, FormatError> {
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row[i]
                    .parse()
                    .map_err(|_| perr(r + 1, format!("bad number {:?}", row[i])))
            })
            .collect()
    }
}

pub fn read_table<R: BufRead>(input: R) -> Result<Table, FormatError> {
    let mut t = Table::default();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if let Some(kv) = line.strip_prefix("# ") {
            if let Some((k, v)) = kv.split_once('=') {
                t.meta.insert(k.to_owned(), v.to_owned());
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(str::to_owned).collect();
        if t.columns.is_empty() {
            t.columns = fields;
        } else if fields.len() != t.columns.len() {
            return Err(perr(i + 1, format!("expected {} columns", t.columns.len())));
        } else {
            t.rows.push(fields);
        }
    }
    if t.columns.is_empty() {
        return Err(perr(0, "missing column header"));
    }
    Ok(t)
}

fn expect_columns(t: &Table, cols: &[&str]) -> Result<(), FormatError> {
    if t.columns != cols {
        return Err(perr(
            0,
            format!("expected columns {cols:?}, found {:?}", t.columns),
        ));
    }
    Ok(())
}

fn write_meta<W: Write>(w: &mut W, meta: &[(&str, String)]) -> std::io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

/// A graph in triplet form: `nodes N`, `partitions A B`, then `src dst weight`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletGraph {
    pub nodes: usize,
    pub partitions: (usize, usize),
    pub edges: Vec<(String, String, f64)>,
}

impl TripletGraph {
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "nodes {}", self.nodes)?;
        writeln!(w, "partitions {} {}", self.partitions.0, self.partitions.1)?;
        for (s, d, x) in &self.edges {
            writeln!(w, "{s} {d} {x}")?;
        }
        w.flush()
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self, FormatError> {
        let mut lines = input.lines();
        let mut header = |n: usize, key: &str| -> Result<Vec<usize>, FormatError> {
            let line = lines.next().ok_or_else(|| perr(n, "truncated header"))??;
            let mut f = line.split_whitespace();
            if f.next() != Some(key) {
                return Err(perr(n, format!("expected {key:?}")));
            }
            f.map(|x| x.parse().map_err(|_| perr(n, "bad count")))
                .collect()
        };
        let nodes = header(1, "nodes")?;
        let parts = header(2, "partitions")?;
        if nodes.len() != 1 || parts.len() != 2 {
            return Err(perr(1, "malformed header"));
        }
        let mut edges = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let w = match f.as_slice() {
                [_, _, w] => w.parse().map_err(|_| perr(i + 3, "bad weight"))?,
                _ => return Err(perr(i + 3, "expected `src dst weight`")),
            };
            edges.push((f[0].to_owned(), f[1].to_owned(), w));
        }
        Ok(TripletGraph {
            nodes: nodes[0],
            partitions: (parts[0], parts[1]),
            edges,
        })
    }

    /// Nonzero entries of a Laplacian, labelled by node.
    pub fn from_laplacian(l: &LaplacianMatrix) -> Self {
        let labels = l.labels();
        TripletGraph {
            nodes: l.n(),
            partitions: (l.n(), 0),
            edges: l
                .matrix()
                .triplets()
                .map(|(i, j, v)| (labels[i].clone(), labels[j].clone(), v))
                .collect(),
        }
    }
}

const SPECTRUM_COLS: [&str; 3] = ["index", "eigenvalue", "residual"];

pub fn write_spectrum<W: Write>(
    mut w: W,
    spec: &Spectrum,
    meta: &[(&str, String)],
) -> std::io::Result<()> {
    write_meta(&mut w, meta)?;
    writeln!(w, "{}", SPECTRUM_COLS.join("\t"))?;
    for (i, (v, r)) in spec.values.iter().zip(&spec.residuals).enumerate() {
        writeln!(w, "{}\t{v:e}\t{r:e}", i + 1)?;
    }
    w.flush()
}

/// Eigenvalues and residuals, in file order.
pub fn read_spectrum<R: BufRead>(input: R) -> Result<(Table, Vec<f64>, Vec<f64>), FormatError> {
    let t = read_table(input)?;
    expect_columns(&t, &SPECTRUM_COLS)?;
    let (vals, res) = (t.column_f64(1)?, t.column_f64(2)?);
    Ok((t, vals, res))
}

const RING: &str = "ring";

fn label_str(l: Option<usize>) -> String {
    l.map_or_else(|| RING.to_owned(), |c| c.to_string())
}

fn parse_label(s: &str, line: usize) -> Result<Option<usize>, FormatError> {
    if s == RING {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| perr(line, format!("bad label {s:?}")))
}

const AXES: [&str; 3] = ["x", "y", "z"];

pub fn write_scatter<W: Write>(mut w: W, points: &[ScatterPoint]) -> std::io::Result<()> {
    let dims = points.first().map_or(2, |p| p.coords.len());
    writeln!(w, "node\t{}\tlabel", AXES[..dims].join("\t"))?;
    for p in points {
        write!(w, "{}", p.node)?;
        for c in &p.coords {
            write!(w, "\t{c:e}")?;
        }
        writeln!(w, "\t{}", label_str(p.label))?;
    }
    w.flush()
}

pub fn read_scatter<R: BufRead>(input: R) -> Result<Vec<ScatterPoint>, FormatError> {
    let t = read_table(input)?;
    let dims = t.columns.len().saturating_sub(2);
    if !(2..=3).contains(&dims) || t.columns[0] != "node" || t.columns[dims + 1] != "label" {
        return Err(perr(1, "unexpected scatter columns"));
    }
    t.rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let coords = r[1..=dims]
                .iter()
                .map(|x| x.parse().map_err(|_| perr(i + 2, "bad coordinate")))
                .collect::<Result<_, _>>()?;
            Ok(ScatterPoint {
                node: r[0].clone(),
                coords,
                label: parse_label(&r[dims + 1], i + 2)?,
            })
        })
        .collect()
}

/// `(node, label)` rows of a labels file; `None` marks the central ring.
pub type LabelRows = Vec<(String, Option<usize>)>;

pub fn write_labels<W: Write>(
    mut w: W,
    nodes: &[String],
    a: &CommunityAssignment,
) -> std::io::Result<()> {
    write_meta(
        &mut w,
        &[
            ("k", a.k.to_string()),
            ("ring_eps", format!("{:e}", a.ring_eps)),
        ],
    )?;
    writeln!(w, "node\tlabel\trow_norm")?;
    for (i, n) in nodes.iter().enumerate() {
        writeln!(w, "{n}\t{}\t{:e}", label_str(a.labels[i]), a.row_norms[i])?;
    }
    w.flush()
}

/// `(node, label)` pairs plus the table metadata.
pub fn read_labels<R: BufRead>(input: R) -> Result<(Table, LabelRows), FormatError> {
    let t = read_table(input)?;
    expect_columns(&t, &["node", "label", "row_norm"])?;
    let rows = t
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| Ok((r[0].clone(), parse_label(&r[1], i + 2)?)))
        .collect::<Result<_, FormatError>>()?;
    Ok((t, rows))
}

pub fn write_scaling<W: Write>(
    mut w: W,
    points: &[ScalingPoint],
    fit: &ScalingFit,
    twin: u64,
) -> std::io::Result<()> {
    write_meta(
        &mut w,
        &[
            ("twin", twin.to_string()),
            ("mu", fit.mu.to_string()),
            ("c", fit.c.to_string()),
            ("residual", fit.residual.to_string()),
            ("n_points", fit.n_points.to_string()),
            ("excluded", fit.excluded.len().to_string()),
        ],
    )?;
    writeln!(w, "owner\tmean\tsigma")?;
    for p in points {
        writeln!(w, "{}\t{}\t{}", p.owner, p.mean, p.sigma)?;
    }
    w.flush()
}

pub fn read_scaling<R: BufRead>(input: R) -> Result<(Table, Vec<ScalingPoint>), FormatError> {
    let t = read_table(input)?;
    expect_columns(&t, &["owner", "mean", "sigma"])?;
    let (m, s) = (t.column_f64(1)?, t.column_f64(2)?);
    let pts = t
        .rows
        .iter()
        .zip(m.into_iter().zip(s))
        .map(|(r, (mean, sigma))| ScalingPoint {
            owner: r[0].clone(),
            mean,
            sigma,
        })
        .collect();
    Ok((t, pts))
}

pub fn write_periodogram<W: Write>(
    mut w: W,
    p: &Periodogram,
    meta: &[(&str, String)],
) -> std::io::Result<()> {
    write_meta(&mut w, meta)?;
    writeln!(w, "frequency\tpower")?;
    for (f, x) in p.frequency.iter().zip(&p.power) {
        writeln!(w, "{f}\t{x:e}")?;
    }
    w.flush()
}

pub fn read_periodogram<R: BufRead>(input: R) -> Result<(Table, Periodogram), FormatError> {
    let t = read_table(input)?;
    expect_columns(&t, &["frequency", "power"])?;
    let p = Periodogram {
        frequency: t.column_f64(0)?,
        power: t.column_f64(1)?,
    };
    Ok((t, p))
}

pub fn write_series<W: Write>(mut w: W, s: &TimeSeries) -> std::io::Result<()> {
    write_meta(
        &mut w,
        &[
            ("owner", s.owner.clone()),
            ("twin", s.twin.to_string()),
            ("start", s.start.to_string()),
        ],
    )?;
    writeln!(w, "bin_start\tcount")?;
    for (i, c) in s.counts.iter().enumerate() {
        writeln!(w, "{}\t{c}", s.start + i as u64 * s.twin)?;
    }
    w.flush()
}

pub fn read_series<R: BufRead>(input: R) -> Result<TimeSeries, FormatError> {
    let t = read_table(input)?;
    expect_columns(&t, &["bin_start", "count"])?;
    let get = |k: &str| {
        t.meta
            .get(k)
            .cloned()
            .ok_or_else(|| perr(0, format!("missing `# {k}=`")))
    };
    let num = |k: &str| -> Result<u64, FormatError> {
        get(k)?.parse().map_err(|_| perr(0, format!("bad {k}")))
    };
    Ok(TimeSeries {
        owner: get("owner")?,
        twin: num("twin")?,
        start: num("start")?,
        counts: t.column_f64(1)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_round_trip() {
        let g = TripletGraph {
            nodes: 3,
            partitions: (2, 1),
            edges: vec![("a".into(), "p".into(), 2.0), ("b".into(), "p".into(), 0.5)],
        };
        let mut buf = Vec::new();
        g.write(&mut buf).unwrap();
        assert!(buf.starts_with(b"nodes 3\npartitions 2 1\na p 2\n"));
        assert_eq!(TripletGraph::read(&buf[..]).unwrap(), g);
        assert!(TripletGraph::read(&b"nodes 3\n"[..]).is_err());
    }

    #[test]
    fn series_round_trip() {
        let s = TimeSeries {
            owner: "u1".into(),
            twin: 60,
            start: 120,
            counts: vec![2.0, 0.0, 1.0],
        };
        let mut buf = Vec::new();
        write_series(&mut buf, &s).unwrap();
        assert_eq!(read_series(&buf[..]).unwrap(), s);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(read_table(&b"a\tb\n1\n"[..]).is_err());
        assert!(read_table(&b""[..]).is_err());
    }

    #[test]
    fn scatter_round_trip() {
        let pts = vec![
            ScatterPoint {
                node: "u1".into(),
                coords: vec![0.1, -0.25],
                label: Some(2),
            },
            ScatterPoint {
                node: "u2".into(),
                coords: vec![1e-17, 3.0],
                label: None,
            },
        ];
        let mut buf = Vec::new();
        write_scatter(&mut buf, &pts).unwrap();
        assert_eq!(read_scatter(&buf[..]).unwrap(), pts);
    }
}
