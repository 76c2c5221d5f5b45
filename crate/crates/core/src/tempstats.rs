//! Temporal statistics of an event log: inter-event intervals, binned
//! activity series, fluctuation scaling, periodograms and response times.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::distribution::{ols, Distribution, DistributionError, DEFAULT_RATIO};
use crate::ingest::EventLog;
use crate::qexp::{fit_qexp_binned, QExpError, QExpFit};

/// One day, the default bin for user series.
pub const USER_TWIN: u64 = 1440;
/// One hour, the default bin for post series.
pub const POST_TWIN: u64 = 60;

pub const MIN_SCALING_POINTS: usize = 10;
pub const MIN_SPECTRUM_BINS: usize = 16;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no user has two or more events")]
    NoIntervals,
    #[error("unknown owner {0:?}")]
    UnknownOwner(String),
    #[error("time window must be positive")]
    ZeroWindow,
    #[error("only {usable} series with nonzero variance; need {need}")]
    TooFewSeries { usable: usize, need: usize },
    #[error("series has {got} bins; need at least {need}")]
    TooFewBins { got: usize, need: usize },
    #[error("log has no comments")]
    NoComments,
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    QExp(#[from] QExpError),
}

/// Pooled gaps between consecutive events of each user, in minutes.
/// Users are visited in id order.
pub fn interevent_samples(log: &EventLog) -> Vec<u64> {
    let mut out = Vec::new();
    for user in log.users() {
        let mut prev: Option<u64> = None;
        for ev in log.user_events(user) {
            if let Some(p) = prev {
                out.push(ev.ts - p);
            }
            prev = Some(ev.ts);
        }
    }
    out
}

/// Log-binned distribution of pooled inter-event intervals. Same-minute
/// events give zero gaps, which stay in the first bin.
pub fn interevent_distribution(log: &EventLog) -> Result<Distribution, StatsError> {
    let samples = interevent_samples(log);
    if samples.is_empty() {
        return Err(StatsError::NoIntervals);
    }
    Ok(Distribution::from_integers(&samples, DEFAULT_RATIO)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Owner {
    User(String),
    Post(String),
}

impl Owner {
    pub fn id(&self) -> &str {
        match self {
            Owner::User(s) | Owner::Post(s) => s,
        }
    }
}

/// Event counts in consecutive windows of `twin` minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub owner: String,
    pub twin: u64,
    /// Minute at which the first bin starts.
    pub start: u64,
    pub counts: Vec<f64>,
}

impl TimeSeries {
    pub fn new(owner: impl Into<String>, twin: u64, counts: Vec<f64>) -> Self {
        TimeSeries {
            owner: owner.into(),
            twin,
            start: 0,
            counts,
        }
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.total() / self.counts.len() as f64
    }

    /// Population standard deviation over bins.
    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        let var =
            self.counts.iter().map(|c| (c - m).powi(2)).sum::<f64>() / self.counts.len() as f64;
        var.sqrt()
    }
}

fn bin_times(owner: &str, times: &[u64], start: u64, twin: u64) -> TimeSeries {
    let last = times.iter().copied().max().unwrap_or(start).max(start);
    // the inclusive minute span [start, last] covers last - start + 1 minutes
    let span = last - start + 1;
    let n_bins = span.div_ceil(twin) as usize;
    let mut counts = vec![0.0; n_bins];
    for &t in times {
        counts[((t - start) / twin) as usize] += 1.0;
    }
    TimeSeries {
        owner: owner.to_owned(),
        twin,
        start,
        counts,
    }
}

/// Bins an owner's activity from its first to its last event.
///
/// For users every post or comment counts. For posts the series starts at
/// the post's creation and counts the comments it receives.
pub fn activity_series(log: &EventLog, owner: &Owner, twin: u64) -> Result<TimeSeries, StatsError> {
    if twin == 0 {
        return Err(StatsError::ZeroWindow);
    }
    match owner {
        Owner::User(u) => {
            if !log.has_user(u) {
                return Err(StatsError::UnknownOwner(u.clone()));
            }
            let times: Vec<u64> = log.user_events(u).map(|e| e.ts).collect();
            Ok(bin_times(u, &times, times[0], twin))
        }
        Owner::Post(p) => {
            let post = log
                .get(p)
                .filter(|e| e.is_post())
                .ok_or_else(|| StatsError::UnknownOwner(p.clone()))?;
            let times: Vec<u64> = log.post_comments(p).map(|e| e.ts).collect();
            Ok(bin_times(p, &times, post.ts, twin))
        }
    }
}

/// Series for every user (in id order) or every post (in id order).
pub fn all_series(log: &EventLog, posts: bool, twin: u64) -> Result<Vec<TimeSeries>, StatsError> {
    if posts {
        log.posts()
            .map(|p| activity_series(log, &Owner::Post(p.post.clone()), twin))
            .collect()
    } else {
        log.users()
            .map(|u| activity_series(log, &Owner::User(u.to_owned()), twin))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub owner: String,
    pub mean: f64,
    pub sigma: f64,
}

/// `sigma = c <n>^mu` fitted in log-log space.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub mu: f64,
    pub c: f64,
    /// RMS residual in natural-log units.
    pub residual: f64,
    pub n_points: usize,
    /// Owners left out because their series has zero variance.
    pub excluded: Vec<String>,
}

/// Mean and dispersion of each series, with the power-law fit between them.
pub fn fluctuation_scaling(
    series: &[TimeSeries],
) -> Result<(Vec<ScalingPoint>, ScalingFit), StatsError> {
    let mut points = Vec::with_capacity(series.len());
    let mut excluded = Vec::new();
    for s in series {
        let sigma = s.std_dev();
        let mean = s.mean();
        if sigma > 0.0 && mean > 0.0 {
            points.push(ScalingPoint {
                owner: s.owner.clone(),
                mean,
                sigma,
            });
        } else {
            excluded.push(s.owner.clone());
        }
    }
    if points.len() < MIN_SCALING_POINTS {
        return Err(StatsError::TooFewSeries {
            usable: points.len(),
            need: MIN_SCALING_POINTS,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.mean.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.sigma.ln()).collect();
    let (a, mu, residual) = ols(&xs, &ys);
    let fit = ScalingFit {
        mu,
        c: a.exp(),
        residual,
        n_points: points.len(),
        excluded,
    };
    Ok((points, fit))
}

/// One-sided periodogram of a mean-subtracted series.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    /// Cycles per bin, `k / N` for `k = 1..=N/2`.
    pub frequency: Vec<f64>,
    /// Normalized so the powers sum to the series variance.
    pub power: Vec<f64>,
}

/// Periodogram via FFT, scaled so that `sum(power) == variance` (population).
pub fn power_spectrum(ts: &TimeSeries) -> Result<Periodogram, StatsError> {
    let n = ts.counts.len();
    if n < MIN_SPECTRUM_BINS {
        return Err(StatsError::TooFewBins {
            got: n,
            need: MIN_SPECTRUM_BINS,
        });
    }
    let mean = ts.mean();
    let mut buf: Vec<Complex<f64>> = ts
        .counts
        .iter()
        .map(|&c| Complex::new(c - mean, 0.0))
        .collect();
    let fft: Arc<dyn rustfft::Fft<f64>> = FftPlanner::new().plan_fft_forward(n);
    fft.process(&mut buf);

    let nf = n as f64;
    let half = n / 2;
    let mut frequency = Vec::with_capacity(half);
    let mut power = Vec::with_capacity(half);
    for (k, x) in buf.iter().enumerate().take(half + 1).skip(1) {
        let p = x.norm_sqr() / (nf * nf);
        let doubled = !(n.is_multiple_of(2) && k == half);
        frequency.push(k as f64 / nf);
        power.push(if doubled { 2.0 * p } else { p });
    }
    Ok(Periodogram { frequency, power })
}

/// Minutes from each comment's root post to the comment, in log order.
pub fn response_time_samples(log: &EventLog) -> Result<Vec<u64>, StatsError> {
    let mut out = Vec::with_capacity(log.n_comments());
    for ev in log.events().iter().filter(|e| !e.is_post()) {
        let post = log
            .get(&ev.post)
            .ok_or_else(|| StatsError::UnknownOwner(ev.post.clone()))?;
        out.push(ev.ts.saturating_sub(post.ts));
    }
    if out.is_empty() {
        return Err(StatsError::NoComments);
    }
    Ok(out)
}

/// Response-time distribution with its q-exponential fit.
pub fn response_distribution(log: &EventLog) -> Result<(Distribution, QExpFit), StatsError> {
    let samples = response_time_samples(log)?;
    let d = Distribution::from_integers(&samples, DEFAULT_RATIO)?;
    let fit = fit_qexp_binned(&d)?;
    Ok((d, fit))
}
