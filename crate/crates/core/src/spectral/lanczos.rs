//! Smallest eigenpairs of a symmetric operator by Lanczos iterations with
//! full reorthogonalization and locking.
//!
//! Each run builds a Krylov basis orthogonal to the already locked
//! eigenvectors and locks the Ritz pairs that converge from the bottom of the
//! spectrum upward. A single Krylov sequence sees only one direction of a
//! repeated eigenvalue, so once enough pairs are locked a confirmation run
//! checks that nothing smaller hides in the orthogonal complement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tridiag::tridiagonal_eigen;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    pub seed: u64,
    /// Absolute residual bound `||A v - lambda v||` for accepting a pair.
    pub tol: f64,
    /// Largest Krylov basis per run.
    pub max_basis: usize,
    /// Cap on Lanczos runs (restarts plus confirmation runs).
    pub max_runs: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            seed: 0x5eed,
            tol: 1e-10,
            max_basis: 320,
            max_runs: 200,
        }
    }
}

/// Outcome of [`lanczos_smallest`]: pairs ascending, with explicit residuals.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub matvecs: usize,
}

#[derive(Debug, Clone)]
pub struct NotConverged {
    pub found: usize,
    pub residuals: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Two passes of classical Gram-Schmidt against every vector in `bases`.
fn orthogonalize(w: &mut [f64], bases: &[&[Vec<f64>]]) {
    for _ in 0..2 {
        for set in bases {
            for q in set.iter() {
                let c = dot(q, w);
                axpy(-c, q, w);
            }
        }
    }
}

struct Run {
    basis: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

/// Ritz values ascending and, for each, the residual estimate `|beta_m y_m|`.
fn ritz_estimates(run: &Run) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = run.alpha.len();
    let (vals, rows) = tridiagonal_eigen(&run.alpha, &run.beta[..m - 1], &[m - 1])?;
    let beta_m = run.beta[m - 1];
    let est = rows[0].iter().map(|y| (beta_m * y).abs()).collect();
    Some((vals, est))
}

fn ritz_vectors(run: &Run, which: &[usize]) -> Option<Vec<Vec<f64>>> {
    let m = run.alpha.len();
    let all: Vec<usize> = (0..m).collect();
    let (_, rows) = tridiagonal_eigen(&run.alpha, &run.beta[..m - 1], &all)?;
    let n = run.basis[0].len();
    Some(
        which
            .iter()
            .map(|&j| {
                let mut v = vec![0.0; n];
                for (i, q) in run.basis.iter().enumerate() {
                    axpy(rows[i][j], q, &mut v);
                }
                v
            })
            .collect(),
    )
}

/// Computes the `k` algebraically smallest eigenpairs of the symmetric
/// operator `apply` of dimension `n`.
pub fn lanczos_smallest<F>(
    n: usize,
    k: usize,
    apply: F,
    opts: &LanczosOptions,
) -> Result<EigenPairs, NotConverged>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked_vals: Vec<f64> = Vec::new();
    let mut locked_vecs: Vec<Vec<f64>> = Vec::new();
    let mut matvecs = 0usize;
    let mut scratch = vec![0.0; n];
    let mut restart: Option<Vec<f64>> = None;
    let mut last_estimates: Vec<f64> = Vec::new();

    let kth_locked = |vals: &[f64]| -> f64 {
        let mut v = vals.to_vec();
        v.sort_by(f64::total_cmp);
        v[k - 1]
    };

    for _run in 0..opts.max_runs {
        let free = n - locked_vecs.len();
        if free == 0 {
            break;
        }
        let confirming = locked_vecs.len() >= k;
        let needed = if confirming { 1 } else { k - locked_vecs.len() };

        let mut q0 = restart
            .take()
            .unwrap_or_else(|| (0..n).map(|_| rng.random::<f64>() - 0.5).collect());
        orthogonalize(&mut q0, &[&locked_vecs]);
        if normalize(&mut q0) < 1e-10 {
            q0 = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            orthogonalize(&mut q0, &[&locked_vecs]);
            if normalize(&mut q0) < 1e-10 {
                break;
            }
        }

        let max_m = opts.max_basis.min(free).max(1);
        let mut run = Run {
            basis: vec![q0],
            alpha: Vec::new(),
            beta: Vec::new(),
        };
        let mut accepted: Vec<usize> = Vec::new();
        loop {
            let j = run.alpha.len();
            apply(&run.basis[j], &mut scratch);
            matvecs += 1;
            let mut w = scratch.clone();
            let a = dot(&run.basis[j], &w);
            axpy(-a, &run.basis[j], &mut w);
            if j > 0 {
                axpy(-run.beta[j - 1], &run.basis[j - 1], &mut w);
            }
            orthogonalize(&mut w, &[&locked_vecs, &run.basis]);
            let b = normalize(&mut w);
            run.alpha.push(a);
            run.beta.push(b);
            let m = j + 1;
            let breakdown = b < 1e-12;

            if breakdown || m == max_m || m.is_multiple_of(5) {
                let Some((_, est)) = ritz_estimates(&run) else {
                    break;
                };
                let good = if breakdown {
                    est.len()
                } else {
                    est.iter().take_while(|&&e| e <= opts.tol).count()
                };
                if good >= needed || breakdown || m == max_m {
                    accepted = (0..good.min(needed)).collect();
                    last_estimates = est;
                    break;
                }
            }
            run.basis.push(w);
        }

        let m = run.alpha.len();
        let Some((vals, _)) = tridiagonal_eigen(&run.alpha, &run.beta[..m - 1], &[]) else {
            continue;
        };
        if accepted.is_empty() {
            // explicit restart from the wanted Ritz directions
            let want: Vec<usize> = (0..needed.min(m)).collect();
            if let Some(vs) = ritz_vectors(&run, &want) {
                let mut s = vec![0.0; n];
                for v in &vs {
                    axpy(1.0, v, &mut s);
                }
                restart = Some(s);
            }
            continue;
        }
        let Some(mut vecs) = ritz_vectors(&run, &accepted) else {
            continue;
        };
        for (idx, v) in accepted.iter().zip(vecs.iter_mut()) {
            orthogonalize(v, &[&locked_vecs]);
            if normalize(v) < 0.5 {
                continue;
            }
            let theta = vals[*idx];
            if confirming && theta >= kth_locked(&locked_vals) - opts.tol {
                // nothing below the k-th locked value remains
                return Ok(finish(locked_vals, locked_vecs, k, &apply, matvecs));
            }
            locked_vals.push(theta);
            locked_vecs.push(std::mem::take(v));
        }
    }

    // the complement is exhausted, so the locked set is the whole spectrum
    if locked_vecs.len() >= k && locked_vecs.len() == n {
        return Ok(finish(locked_vals, locked_vecs, k, &apply, matvecs));
    }
    Err(NotConverged {
        found: locked_vecs.len(),
        residuals: last_estimates,
    })
}

fn finish<F>(
    vals: Vec<f64>,
    vecs: Vec<Vec<f64>>,
    k: usize,
    apply: &F,
    mut matvecs: usize,
) -> EigenPairs
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    order.truncate(k);
    let n = vecs[0].len();
    let mut out = EigenPairs {
        values: Vec::with_capacity(k),
        vectors: Vec::with_capacity(k),
        residuals: Vec::with_capacity(k),
        matvecs: 0,
    };
    let mut av = vec![0.0; n];
    for i in order {
        let v = &vecs[i];
        apply(v, &mut av);
        matvecs += 1;
        // Rayleigh quotient sharpens the Ritz value
        let lambda = dot(v, &av);
        let res = av
            .iter()
            .zip(v)
            .map(|(a, x)| (a - lambda * x).powi(2))
            .sum::<f64>()
            .sqrt();
        out.values.push(lambda);
        out.vectors.push(v.clone());
        out.residuals.push(res);
    }
    out.matvecs = matvecs;
    out
}
