//! Log-binned empirical distributions and log-log power-law fitting.
//!
//! Bins grow geometrically by [`DEFAULT_RATIO`]. Integer-valued samples
//! (degrees, commons, minute intervals) use lattice-aware bins whose width is
//! the number of integers they contain; zero samples get their own `[0, 1)`
//! bin ahead of the geometric ladder.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use thiserror::Error;

/// Consecutive bin edges differ by a factor 2^(1/4).
pub const DEFAULT_RATIO: f64 = 1.189_207_115_002_721;

const EDGE_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DistributionError {
    #[error("no samples")]
    Empty,
    #[error("bin ratio must exceed 1, got {0}")]
    BadRatio(f64),
    #[error("sample {0} is negative or not finite")]
    BadSample(f64),
    #[error("need at least {need} non-empty bins in [{lo}, {hi}], found {found}")]
    InsufficientBins {
        need: usize,
        found: usize,
        lo: f64,
        hi: f64,
    },
    #[error("fit range [{0}, {1}] is empty or inverted")]
    BadRange(f64, f64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub lo: f64,
    /// Exclusive upper edge.
    pub hi: f64,
    /// Representative abscissa (geometric centre of the values the bin covers).
    pub center: f64,
    pub count: u64,
    /// Count divided by sample size and bin width.
    pub pdf: f64,
    /// Fraction of samples `>= lo`.
    pub ccdf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    Integer,
    Real,
}

/// Empirical pdf/ccdf over log bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    bins: Vec<Bin>,
    n_samples: usize,
    ratio: f64,
    kind: SampleKind,
    /// When set, fits regress the ccdf column rather than the pdf.
    pub cumulative: bool,
    median: Option<f64>,
    p99: Option<f64>,
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[idx]
}

fn fill_ccdf(bins: &mut [Bin], n: usize) {
    let mut above = n as u64;
    for b in bins.iter_mut() {
        b.ccdf = above as f64 / n as f64;
        above -= b.count;
    }
}

impl Distribution {
    /// Bins non-negative integer samples.
    pub fn from_integers(samples: &[u64], ratio: f64) -> Result<Self, DistributionError> {
        if samples.is_empty() {
            return Err(DistributionError::Empty);
        }
        if ratio.partial_cmp(&1.0) != Some(std::cmp::Ordering::Greater) {
            return Err(DistributionError::BadRatio(ratio));
        }
        let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
        for &s in samples {
            *hist.entry(s).or_default() += 1;
        }
        let max = *hist.keys().next_back().unwrap();
        let n = samples.len();

        let mut edges: Vec<u64> = vec![0, 1];
        let mut k = 1i32;
        while *edges.last().unwrap() <= max {
            let e = (ratio.powi(k) - EDGE_EPS).ceil() as u64;
            if e > *edges.last().unwrap() {
                edges.push(e);
            }
            k += 1;
        }

        let mut bins = Vec::with_capacity(edges.len());
        let mut iter = hist.iter().peekable();
        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mut count = 0;
            while let Some((&v, &c)) = iter.peek() {
                if v >= hi {
                    break;
                }
                count += c;
                iter.next();
            }
            let width = (hi - lo) as f64;
            let center = if lo == 0 {
                0.0
            } else {
                ((lo as f64) * ((hi - 1) as f64)).sqrt()
            };
            bins.push(Bin {
                lo: lo as f64,
                hi: hi as f64,
                center,
                count,
                pdf: count as f64 / (n as f64 * width),
                ccdf: 0.0,
            });
        }
        // trim leading empty zero bin
        if bins[0].count == 0 {
            bins.remove(0);
        }
        fill_ccdf(&mut bins, n);

        let mut sorted: Vec<f64> = samples.iter().map(|&s| s as f64).collect();
        sorted.sort_by(f64::total_cmp);
        Ok(Distribution {
            bins,
            n_samples: n,
            ratio,
            kind: SampleKind::Integer,
            cumulative: false,
            median: Some(quantile_sorted(&sorted, 0.5)),
            p99: Some(quantile_sorted(&sorted, 0.99)),
        })
    }

    /// Bins non-negative real samples. The ladder starts at the smallest
    /// positive sample; zeros fall into the first bin, whose lower edge is
    /// then moved to 0.
    pub fn from_reals(samples: &[f64], ratio: f64) -> Result<Self, DistributionError> {
        if samples.is_empty() {
            return Err(DistributionError::Empty);
        }
        if ratio.partial_cmp(&1.0) != Some(std::cmp::Ordering::Greater) {
            return Err(DistributionError::BadRatio(ratio));
        }
        if let Some(&bad) = samples.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(DistributionError::BadSample(bad));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let Some(x0) = sorted.iter().copied().find(|&x| x > 0.0) else {
            // all zeros: one degenerate bin
            let bins = vec![Bin {
                lo: 0.0,
                hi: 1.0,
                center: 0.0,
                count: n as u64,
                pdf: 1.0,
                ccdf: 1.0,
            }];
            return Ok(Distribution {
                bins,
                n_samples: n,
                ratio,
                kind: SampleKind::Real,
                cumulative: false,
                median: Some(0.0),
                p99: Some(0.0),
            });
        };
        let max = sorted[n - 1];
        let ln_r = ratio.ln();
        let n_bins = ((max / x0).ln() / ln_r).floor() as usize + 1;
        let mut counts = vec![0u64; n_bins];
        for &x in &sorted {
            let idx = if x <= x0 {
                0
            } else {
                (((x / x0).ln() / ln_r).floor() as usize).min(n_bins - 1)
            };
            counts[idx] += 1;
        }
        let has_zero = sorted[0] == 0.0;
        let mut bins: Vec<Bin> = counts
            .iter()
            .enumerate()
            .map(|(i, &count)| {
                let lo = x0 * ratio.powi(i as i32);
                let hi = lo * ratio;
                let lo_edge = if i == 0 && has_zero { 0.0 } else { lo };
                Bin {
                    lo: lo_edge,
                    hi,
                    center: (lo * hi).sqrt(),
                    count,
                    pdf: count as f64 / (n as f64 * (hi - lo_edge)),
                    ccdf: 0.0,
                }
            })
            .collect();
        fill_ccdf(&mut bins, n);
        Ok(Distribution {
            bins,
            n_samples: n,
            ratio,
            kind: SampleKind::Real,
            cumulative: false,
            median: Some(quantile_sorted(&sorted, 0.5)),
            p99: Some(quantile_sorted(&sorted, 0.99)),
        })
    }

    /// Wraps a precomputed bin table. `ccdf` is reconstructed from
    /// `pdf * width` and counts are left at zero.
    pub fn from_bin_table(table: &[(f64, f64, f64)]) -> Result<Self, DistributionError> {
        if table.is_empty() {
            return Err(DistributionError::Empty);
        }
        let masses: Vec<f64> = table.iter().map(|&(lo, hi, p)| p * (hi - lo)).collect();
        let total: f64 = masses.iter().sum();
        let mut above = total;
        let bins = table
            .iter()
            .zip(&masses)
            .map(|(&(lo, hi, pdf), &m)| {
                let b = Bin {
                    lo,
                    hi,
                    center: (lo * hi).sqrt(),
                    count: 0,
                    pdf,
                    ccdf: if total > 0.0 { above / total } else { 0.0 },
                };
                above -= m;
                b
            })
            .collect();
        let ratio = table[0].1 / table[0].0;
        Ok(Distribution {
            bins,
            n_samples: 0,
            ratio,
            kind: SampleKind::Real,
            cumulative: false,
            median: None,
            p99: None,
        })
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    /// Bins with at least one sample (or positive pdf for bin tables).
    pub fn nonempty_bins(&self) -> impl Iterator<Item = &Bin> {
        self.bins.iter().filter(|b| b.pdf > 0.0)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn kind(&self) -> SampleKind {
        self.kind
    }

    pub fn median(&self) -> Option<f64> {
        self.median
    }

    pub fn p99(&self) -> Option<f64> {
        self.p99
    }

    pub fn with_cumulative(mut self, cumulative: bool) -> Self {
        self.cumulative = cumulative;
        self
    }

    /// Probability mass per distinct integer value, for integer data whose
    /// bins are all unit width. Returns `None` once bins get wider than one.
    pub fn unit_masses(&self) -> Option<BTreeMap<u64, f64>> {
        if self.kind != SampleKind::Integer {
            return None;
        }
        let mut out = BTreeMap::new();
        for b in &self.bins {
            if b.count == 0 {
                continue;
            }
            if b.hi - b.lo != 1.0 {
                return None;
            }
            out.insert(b.lo as u64, b.count as f64 / self.n_samples as f64);
        }
        Some(out)
    }

    /// Serializes as TSV with `# key=value` header lines.
    pub fn write_tsv<W: Write>(&self, meta: &[(&str, String)], mut out: W) -> std::io::Result<()> {
        writeln!(out, "# n_samples={}", self.n_samples)?;
        writeln!(out, "# ratio={}", self.ratio)?;
        writeln!(out, "# cumulative={}", self.cumulative)?;
        for (k, v) in meta {
            writeln!(out, "# {k}={v}")?;
        }
        writeln!(out, "bin_lo\tbin_hi\tpdf\tccdf")?;
        for b in &self.bins {
            writeln!(out, "{}\t{}\t{:e}\t{:e}", b.lo, b.hi, b.pdf, b.ccdf)?;
        }
        out.flush()
    }
}

/// A distribution read back from its TSV export, with header metadata.
#[derive(Debug, Clone)]
pub struct DistributionTable {
    pub meta: BTreeMap<String, String>,
    /// `(bin_lo, bin_hi, pdf, ccdf)` rows.
    pub rows: Vec<(f64, f64, f64, f64)>,
}

pub fn read_distribution_tsv<R: BufRead>(input: R) -> Result<DistributionTable, DistributionError> {
    let mut meta = BTreeMap::new();
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| DistributionError::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        if let Some(kv) = line.strip_prefix("# ") {
            if let Some((k, v)) = kv.split_once('=') {
                meta.insert(k.to_owned(), v.to_owned());
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !saw_header {
            if line != "bin_lo\tbin_hi\tpdf\tccdf" {
                return Err(DistributionError::Parse {
                    line: i + 1,
                    msg: "missing column header".into(),
                });
            }
            saw_header = true;
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split('\t').map(str::parse::<f64>).collect();
        match vals {
            Ok(v) if v.len() == 4 => rows.push((v[0], v[1], v[2], v[3])),
            _ => {
                return Err(DistributionError::Parse {
                    line: i + 1,
                    msg: format!("bad row {line:?}"),
                })
            }
        }
    }
    if !saw_header {
        return Err(DistributionError::Parse {
            line: 0,
            msg: "missing column header".into(),
        });
    }
    Ok(DistributionTable { meta, rows })
}

/// Least-squares line through log-log bin data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    /// Decay exponent: the fitted curve is `prefactor * x^(-exponent)`.
    pub exponent: f64,
    pub prefactor: f64,
    pub x_min: f64,
    pub x_max: f64,
    /// Root-mean-square residual in natural-log units.
    pub residual: f64,
    pub n_bins: usize,
    /// Whether the ccdf rather than the pdf was regressed.
    pub cumulative: bool,
}

impl PowerLawFit {
    pub fn header(&self) -> Vec<(&'static str, String)> {
        vec![
            ("fit", "powerlaw".to_owned()),
            ("exponent", format!("{}", self.exponent)),
            ("prefactor", format!("{}", self.prefactor)),
            ("x_min", format!("{}", self.x_min)),
            ("x_max", format!("{}", self.x_max)),
            ("residual", format!("{}", self.residual)),
            ("n_bins", format!("{}", self.n_bins)),
        ]
    }
}

pub const MIN_FIT_BINS: usize = 5;

/// Ordinary least squares `y = a + b x`; returns `(a, b, rms residual)`.
pub(crate) fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - a - b * x).powi(2))
        .sum();
    (a, b, (ss / n).sqrt())
}

/// Fits a power law to the bins of `d` whose abscissa lies in `range`.
///
/// The abscissa is the bin centre for pdf fits and the lower edge for ccdf
/// fits. Without an explicit range the fit uses `[median, p99]` of the
/// original samples.
pub fn fit_powerlaw(
    d: &Distribution,
    range: Option<(f64, f64)>,
) -> Result<PowerLawFit, DistributionError> {
    let (lo, hi) = match range {
        Some(r) => r,
        None => match (d.median, d.p99) {
            (Some(m), Some(p)) => (m, p),
            _ => {
                let nz: Vec<&Bin> = d.nonempty_bins().collect();
                match (nz.first(), nz.last()) {
                    (Some(f), Some(l)) => (f.center, l.center),
                    _ => return Err(DistributionError::Empty),
                }
            }
        },
    };
    if !(lo < hi) {
        return Err(DistributionError::BadRange(lo, hi));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for b in &d.bins {
        let (x, y) = if d.cumulative {
            (b.lo, b.ccdf)
        } else {
            (b.center, b.pdf)
        };
        if x >= lo && x <= hi && x > 0.0 && y > 0.0 {
            xs.push(x.ln());
            ys.push(y.ln());
        }
    }
    if xs.len() < MIN_FIT_BINS {
        return Err(DistributionError::InsufficientBins {
            need: MIN_FIT_BINS,
            found: xs.len(),
            lo,
            hi,
        });
    }
    let (a, b, residual) = ols(&xs, &ys);
    Ok(PowerLawFit {
        exponent: -b,
        prefactor: a.exp(),
        x_min: lo,
        x_max: hi,
        residual,
        n_bins: xs.len(),
        cumulative: d.cumulative,
    })
}

/// Renders `(key, value)` pairs as a compact `k=v k=v` string.
pub fn format_meta(meta: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (i, (k, v)) in meta.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{k}={v}");
    }
    s
}
