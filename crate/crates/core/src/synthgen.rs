//! Synthetic event logs with planted user groups.
//!
//! Every user runs a renewal process of comment slots. A slot picks a group
//! (its own with weight `p_in`, another with weight `p_out`), a delay from the
//! response kernel, and the latest post of that group created at least that
//! delay before the slot. Posts are spread uniformly over the horizon, the
//! first post of each group at minute 0.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::distr::{Distribution as _, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ingest::{EventLog, EventRecord};
use crate::qexp::QExpFit;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("horizon of {0} minutes is too short to place any comment")]
    HorizonTooShort(u64),
    #[error("ground truth line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Gap distribution of each user's comment slots, in minutes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterEvent {
    /// Density `∝ x^-alpha` for `x >= x_min` (needs `alpha > 1`).
    Pareto { alpha: f64, x_min: f64 },
    /// Poisson slots with `rate` events per minute.
    Exponential { rate: f64 },
}

impl InterEvent {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = 1.0 - rng.random::<f64>();
        match *self {
            InterEvent::Pareto { alpha, x_min } => x_min * u.powf(-1.0 / (alpha - 1.0)),
            InterEvent::Exponential { rate } => -u.ln() / rate,
        }
    }
}

/// Per-user activity multiplier; slot gaps are divided by it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activity {
    Uniform,
    /// Multipliers log-uniform over `decades` decades starting at 1.
    LogUniform {
        decades: f64,
    },
    /// Multipliers with survival `m^-tail` for `m >= 1`.
    Pareto {
        tail: f64,
    },
}

impl Activity {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Activity::Uniform => 1.0,
            Activity::LogUniform { decades } => 10f64.powf(decades * rng.random::<f64>()),
            Activity::Pareto { tail } => (1.0 - rng.random::<f64>()).powf(-1.0 / tail),
        }
    }
}

/// Which clock a comment's timestamp follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Timing {
    /// Comments land on the user's slot times; the response time is the
    /// kernel delay plus the lag to the chosen post.
    #[default]
    UserClock,
    /// Comments land at post time plus the kernel delay, so response times
    /// follow the kernel exactly; user gaps shift by the post lag.
    PostClock,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_groups: usize,
    pub users_per_group: usize,
    pub posts_per_group: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub interevent: InterEvent,
    pub activity: Activity,
    /// Response kernel; only `q` and `t_star` are used.
    pub kernel: QExpFit,
    /// Probability that a comment replies to an earlier comment on its post.
    pub reply_prob: f64,
    pub timing: Timing,
    /// Minutes.
    pub horizon: u64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_groups: 4,
            users_per_group: 100,
            posts_per_group: 20,
            p_in: 0.95,
            p_out: 0.05,
            interevent: InterEvent::Exponential { rate: 1.0 / 720.0 },
            activity: Activity::Uniform,
            kernel: QExpFit::new(1.55, 60.0, 1.0),
            reply_prob: 0.2,
            timing: Timing::UserClock,
            horizon: 30 * 1440,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn n_users(&self) -> usize {
        self.n_groups * self.users_per_group
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_owned()));
        if self.n_groups == 0 || self.users_per_group == 0 || self.posts_per_group == 0 {
            return bad("groups, users per group and posts per group must be positive");
        }
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.p_in) || !prob(self.p_out) || !prob(self.reply_prob) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.p_in + self.p_out <= 0.0 {
            return bad("p_in + p_out must be positive");
        }
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        match self.interevent {
            InterEvent::Pareto { alpha, x_min } if !(alpha > 1.0 && x_min > 0.0) => {
                return bad("Pareto sampler needs alpha > 1 and x_min > 0")
            }
            InterEvent::Exponential { rate } if !(rate > 0.0) => {
                return bad("exponential sampler needs rate > 0")
            }
            _ => {}
        }
        match self.activity {
            Activity::LogUniform { decades } if !(decades >= 0.0) => {
                return bad("activity spread must be non-negative")
            }
            Activity::Pareto { tail } if !(tail > 0.0) => {
                return bad("activity tail must be positive")
            }
            _ => {}
        }
        if !(self.kernel.q < 2.0 && self.kernel.q > 0.0 && self.kernel.t_star > 0.0) {
            return bad("response kernel needs 0 < q < 2 and t* > 0");
        }
        Ok(())
    }
}

/// Planted labels and generator bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub user_group: BTreeMap<String, usize>,
    pub post_group: BTreeMap<String, usize>,
    pub post_comments: BTreeMap<String, usize>,
}

impl GroundTruth {
    /// Sidecar TSV: `id`, `kind` (`user` or `post`), `group`.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "id\tkind\tgroup")?;
        for (id, g) in &self.user_group {
            writeln!(w, "{id}\tuser\t{g}")?;
        }
        for (id, g) in &self.post_group {
            writeln!(w, "{id}\tpost\t{g}")?;
        }
        Ok(())
    }

    /// Reads the sidecar TSV; comment counts are left empty.
    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self, SynthError> {
        let mut gt = GroundTruth::default();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 && line.starts_with("id\t") || line.trim().is_empty() {
                continue;
            }
            let err = |msg: &str| SynthError::Parse {
                line: i + 1,
                msg: msg.to_owned(),
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(err("expected 3 columns"));
            }
            let g: usize = f[2].parse().map_err(|_| err("bad group"))?;
            match f[1] {
                "user" => gt.user_group.insert(f[0].to_owned(), g),
                "post" => gt.post_group.insert(f[0].to_owned(), g),
                _ => return Err(err("kind must be user or post")),
            };
        }
        Ok(gt)
    }
}

struct Slot {
    t: f64,
    user: usize,
}

/// Generates a log and its ground truth; identical configs give identical output.
pub fn generate(cfg: &SynthConfig) -> Result<(EventLog, GroundTruth), SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h = cfg.horizon;
    let hf = h as f64;
    let upg = cfg.users_per_group;
    let user_id = |u: usize| format!("u{u}");
    let kernel = QExpFit::normalized(cfg.kernel.q, cfg.kernel.t_star)
        .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;

    let mut gt = GroundTruth::default();
    for u in 0..cfg.n_users() {
        gt.user_group.insert(user_id(u), u / upg);
    }

    // posts: per group, sorted creation times with the first at 0
    let mut records = Vec::new();
    let mut group_posts: Vec<Vec<(u64, usize)>> = Vec::with_capacity(cfg.n_groups);
    let mut post_ids: Vec<String> = Vec::new();
    let time_dist = Uniform::new_inclusive(0, h).expect("horizon > 0");
    for g in 0..cfg.n_groups {
        let mut times: Vec<u64> = (0..cfg.posts_per_group)
            .map(|i| {
                if i == 0 {
                    0
                } else {
                    time_dist.sample(&mut rng)
                }
            })
            .collect();
        times.sort_unstable();
        let mut posts = Vec::with_capacity(times.len());
        for t in times {
            let idx = post_ids.len();
            let id = format!("p{idx}");
            let author = g * upg + rng.random_range(0..upg);
            records.push(EventRecord::post(&id, user_id(author), t));
            gt.post_group.insert(id.clone(), g);
            gt.post_comments.insert(id.clone(), 0);
            post_ids.push(id);
            posts.push((t, idx));
        }
        group_posts.push(posts);
    }

    // comment slots
    let mut slots = Vec::new();
    for u in 0..cfg.n_users() {
        let m = cfg.activity.sample(&mut rng);
        let mut t = 0.0;
        loop {
            t += cfg.interevent.sample(&mut rng) / m;
            if t > hf {
                break;
            }
            slots.push(Slot { t, user: u });
        }
    }
    slots.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.user.cmp(&b.user)));

    let stay = cfg.p_in / (cfg.p_in + cfg.p_out);
    let mut post_comments: Vec<Vec<(u64, usize)>> = vec![Vec::new(); post_ids.len()];
    let mut n_comments = 0usize;
    for slot in &slots {
        let own = slot.user / upg;
        let group = if cfg.n_groups == 1 || rng.random::<f64>() < stay {
            own
        } else {
            let other = rng.random_range(0..cfg.n_groups - 1);
            if other >= own {
                other + 1
            } else {
                other
            }
        };
        let mut d = kernel.inverse_ccdf(1.0 - rng.random::<f64>());
        for _ in 0..16 {
            if d <= slot.t {
                break;
            }
            d = kernel.inverse_ccdf(1.0 - rng.random::<f64>());
        }
        let d = d.min(slot.t);
        let posts = &group_posts[group];
        let latest = posts.partition_point(|&(pt, _)| pt as f64 <= slot.t - d) - 1;
        let (pt, post) = posts[latest];
        let ts = match cfg.timing {
            Timing::UserClock => slot.t.floor() as u64,
            Timing::PostClock => pt + d.floor() as u64,
        };

        let mut parent = None;
        if rng.random::<f64>() < cfg.reply_prob && !post_comments[post].is_empty() {
            let existing = &post_comments[post];
            for _ in 0..4 {
                let (ct, c) = existing[rng.random_range(0..existing.len())];
                if ct <= ts {
                    parent = Some(format!("c{c}"));
                    break;
                }
            }
        }
        let id = format!("c{n_comments}");
        records.push(EventRecord::comment(
            &id,
            user_id(slot.user),
            &post_ids[post],
            parent.as_deref(),
            ts,
        ));
        post_comments[post].push((ts, n_comments));
        *gt.post_comments.get_mut(&post_ids[post]).unwrap() += 1;
        n_comments += 1;
    }
    if n_comments == 0 {
        return Err(SynthError::HorizonTooShort(h));
    }
    records.sort_by(|a, b| (a.ts, &a.event_id).cmp(&(b.ts, &b.event_id)));
    Ok((EventLog::from_records_unchecked(records), gt))
}
