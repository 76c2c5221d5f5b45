use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{SpectralError, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchOptions {
    /// Absolute row-norm threshold below which a node is left unclassified.
    /// Defaults to `ring_fraction` times the largest row norm.
    pub ring_eps: Option<f64>,
    pub ring_fraction: f64,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for BranchOptions {
    fn default() -> Self {
        BranchOptions {
            ring_eps: None,
            ring_fraction: 1e-3,
            seed: 0x5eed,
            max_iter: 200,
        }
    }
}

/// Community label per node (in spectrum order), `None` for the ring of
/// nodes too close to the origin to belong to a branch.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityAssignment {
    pub labels: Vec<Option<usize>>,
    pub k: usize,
    pub row_norms: Vec<f64>,
    pub ring_eps: f64,
}

impl CommunityAssignment {
    /// Members per community, index `c - 1` for label `c`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for c in self.labels.iter().flatten() {
            s[c - 1] += 1;
        }
        s
    }

    pub fn unclassified(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Splits nodes into `k` branches of the low eigenvector embedding by
/// spherical k-means. Labels `1..=k` are ordered by each branch's smallest
/// node label.
pub fn assign_branches(
    spec: &Spectrum,
    k: usize,
    opts: &BranchOptions,
) -> Result<CommunityAssignment, SpectralError> {
    let available = spec.vectors.len();
    if k < 2 || k > available {
        return Err(SpectralError::BadK { k, available });
    }
    let z = spec.zero_count();
    // With several components the null vectors already separate them.
    let cols: Vec<usize> = if z >= 2 {
        (0..k).collect()
    } else {
        (1..k).collect()
    };
    let n = spec.n_nodes();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| cols.iter().map(|&c| spec.vectors[c][i]).collect())
        .collect();
    let row_norms: Vec<f64> = rows.iter().map(|r| dot(r, r).sqrt()).collect();
    let max_norm = row_norms.iter().cloned().fold(0.0, f64::max);
    let ring_eps = opts.ring_eps.unwrap_or(opts.ring_fraction * max_norm);

    let mut points: Vec<usize> = (0..n)
        .filter(|&i| row_norms[i] >= ring_eps && row_norms[i] > 0.0)
        .collect();
    points.sort_by(|&a, &b| spec.labels[a].cmp(&spec.labels[b]));
    if points.len() < k {
        return Err(SpectralError::EmptyClusters {
            k,
            nonempty: points.len(),
        });
    }
    let unit: Vec<Vec<f64>> = points
        .iter()
        .map(|&i| rows[i].iter().map(|x| x / row_norms[i]).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut centers = vec![unit[rng.random_range(0..unit.len())].clone()];
    let mut best_sim: Vec<f64> = unit.iter().map(|u| dot(u, &centers[0])).collect();
    while centers.len() < k {
        let far = (0..unit.len())
            .min_by(|&a, &b| best_sim[a].total_cmp(&best_sim[b]))
            .unwrap();
        let c = unit[far].clone();
        for (s, u) in best_sim.iter_mut().zip(&unit) {
            *s = s.max(dot(u, &c));
        }
        centers.push(c);
    }

    let nearest = |u: &[f64], centers: &[Vec<f64>]| -> usize {
        (0..centers.len())
            .max_by(|&a, &b| {
                dot(u, &centers[a])
                    .total_cmp(&dot(u, &centers[b]))
                    .then(b.cmp(&a))
            })
            .unwrap()
    };
    let mut assign: Vec<usize> = unit.iter().map(|u| nearest(u, &centers)).collect();
    for _ in 0..opts.max_iter {
        let d = cols.len();
        let mut sums = vec![vec![0.0; d]; k];
        for (u, &c) in unit.iter().zip(&assign) {
            for (s, x) in sums[c].iter_mut().zip(u) {
                *s += x;
            }
        }
        for (c, s) in centers.iter_mut().zip(sums) {
            let norm = dot(&s, &s).sqrt();
            if norm > 0.0 {
                *c = s.iter().map(|x| x / norm).collect();
            }
        }
        let next: Vec<usize> = unit.iter().map(|u| nearest(u, &centers)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }

    // points are label-sorted, so first sighting gives the smallest label
    let mut rank = vec![usize::MAX; k];
    let mut next_label = 1;
    for &c in &assign {
        if rank[c] == usize::MAX {
            rank[c] = next_label;
            next_label += 1;
        }
    }
    if next_label - 1 < k {
        return Err(SpectralError::EmptyClusters {
            k,
            nonempty: next_label - 1,
        });
    }
    let mut labels = vec![None; n];
    for (&i, &c) in points.iter().zip(&assign) {
        labels[i] = Some(rank[c]);
    }
    Ok(CommunityAssignment {
        labels,
        k,
        row_norms,
        ring_eps,
    })
}
