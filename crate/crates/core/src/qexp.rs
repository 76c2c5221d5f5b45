//! q-exponential densities `C (1 - (1-q) x / t*)^(1/(1-q))`: evaluation,
//! inverse-CDF sampling and fitting to log-binned data.

use thiserror::Error;

use crate::distribution::{Distribution, DistributionError, DEFAULT_RATIO};

/// Below this distance from 1 the exponential limit is used.
pub const Q_ONE_EPS: f64 = 1e-8;

pub const MIN_FIT_SAMPLES: usize = 1000;

const Q_BOUNDS: (f64, f64) = (0.5, 3.0);

#[derive(Debug, Error, PartialEq)]
pub enum QExpError {
    #[error("dt must be non-negative, got {0}")]
    NegativeDt(f64),
    #[error("dt = {dt} lies outside the support (base {base} <= 0)")]
    Domain { dt: f64, base: f64 },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("fit did not converge after {iterations} iterations; best q={q}, t*={t_star}, C={prefactor}")]
    NoConvergence {
        iterations: usize,
        q: f64,
        t_star: f64,
        prefactor: f64,
    },
    #[error("q={q}, t*={t_star} does not describe a normalizable density")]
    NotNormalizable { q: f64, t_star: f64 },
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// Parameters of a q-exponential (and, after fitting, its residual).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QExpFit {
    pub q: f64,
    /// Time scale in minutes.
    pub t_star: f64,
    pub prefactor: f64,
    /// Weighted RMS residual of the log-density fit; 0 for hand-built values.
    pub residual: f64,
}

impl QExpFit {
    pub fn new(q: f64, t_star: f64, prefactor: f64) -> Self {
        QExpFit {
            q,
            t_star,
            prefactor,
            residual: 0.0,
        }
    }

    /// Prefactor making the density integrate to one on `[0, inf)` (needs `q < 2`).
    pub fn normalized(q: f64, t_star: f64) -> Result<Self, QExpError> {
        if !(q < 2.0) || !(t_star > 0.0) {
            return Err(QExpError::NotNormalizable { q, t_star });
        }
        Ok(QExpFit::new(q, t_star, (2.0 - q) / t_star))
    }

    /// Power-law decay exponent of the density tail, `1/(q-1)`.
    pub fn tail_exponent(&self) -> f64 {
        1.0 / (self.q - 1.0)
    }

    /// `q` implied by a measured tail exponent.
    pub fn q_for_tail_exponent(exponent: f64) -> f64 {
        1.0 + 1.0 / exponent
    }

    pub fn eval(&self, dt: f64) -> Result<f64, QExpError> {
        qexp_eval(self, dt)
    }

    /// Survival function of the normalized density (`q < 2`).
    pub fn ccdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let q = self.q;
        if (q - 1.0).abs() < Q_ONE_EPS {
            return (-x / self.t_star).exp();
        }
        let base = 1.0 + (q - 1.0) * x / self.t_star;
        if base <= 0.0 {
            return 0.0;
        }
        (-(2.0 - q) / (q - 1.0) * base.ln()).exp()
    }

    /// Inverse survival function; maps `u` uniform on (0, 1] to a sample
    /// from the normalized density.
    pub fn inverse_ccdf(&self, u: f64) -> f64 {
        let q = self.q;
        if (q - 1.0).abs() < Q_ONE_EPS {
            return -self.t_star * u.ln();
        }
        let e = -(q - 1.0) / (2.0 - q);
        self.t_star / (q - 1.0) * (u.powf(e) - 1.0)
    }
}

/// Evaluates `C (1 - (1-q) dt / t*)^(1/(1-q))`, with the exponential limit
/// when `q` is within [`Q_ONE_EPS`] of 1.
pub fn qexp_eval(p: &QExpFit, dt: f64) -> Result<f64, QExpError> {
    if dt < 0.0 {
        return Err(QExpError::NegativeDt(dt));
    }
    if (p.q - 1.0).abs() < Q_ONE_EPS {
        return Ok(p.prefactor * (-dt / p.t_star).exp());
    }
    let base = 1.0 - (1.0 - p.q) * dt / p.t_star;
    if base <= 0.0 {
        return Err(QExpError::Domain { dt, base });
    }
    Ok(p.prefactor * base.powf(1.0 / (1.0 - p.q)))
}

/// `ln` of the mean of the unit-prefactor density over `[lo, hi)`, or
/// `None` when the bin lies outside the support.
fn ln_bin_mean(q: f64, t_star: f64, lo: f64, hi: f64) -> Option<f64> {
    let width = hi - lo;
    if (q - 1.0).abs() < 1e-6 {
        // t* (e^{-lo/t*} - e^{-hi/t*}) / width
        let a = -lo / t_star;
        let d = -(-(width / t_star)).exp_m1();
        return Some((t_star * d / width).ln() + a);
    }
    let k = q - 1.0;
    let support_end = if k < 0.0 { -t_star / k } else { f64::INFINITY };
    if lo >= support_end {
        return None;
    }
    let hi = hi.min(support_end);
    let ln_b = |x: f64| (k * x / t_star).ln_1p();
    if (q - 2.0).abs() < 1e-6 {
        // antiderivative t* ln b
        let v = t_star * (ln_b(hi) - ln_b(lo)) / width;
        return (v > 0.0).then(|| v.ln());
    }
    // antiderivative -t*/(2-q) b^{(2-q)/(1-q)}
    let e = (2.0 - q) / (1.0 - q);
    let (blo, bhi) = (ln_b(lo) * e, ln_b(hi) * e);
    // b_lo^e - b_hi^e = b_lo^e (1 - exp(bhi - blo))
    let diff = -(bhi - blo).exp_m1();
    let v = t_star / (2.0 - q) * diff / width;
    if !(v > 0.0) || !v.is_finite() {
        return None;
    }
    Some(v.ln() + blo)
}

struct BinObs {
    lo: f64,
    hi: f64,
    ln_pdf: f64,
    weight: f64,
}

/// Weighted log-residual objective with the prefactor profiled out.
fn objective(bins: &[BinObs], q: f64, t_star: f64) -> Option<(f64, f64)> {
    if !(Q_BOUNDS.0..=Q_BOUNDS.1).contains(&q) || !(t_star > 0.0) || !t_star.is_finite() {
        return None;
    }
    let mut model = Vec::with_capacity(bins.len());
    for b in bins {
        model.push(ln_bin_mean(q, t_star, b.lo, b.hi)?);
    }
    let wsum: f64 = bins.iter().map(|b| b.weight).sum();
    let ln_c = bins
        .iter()
        .zip(&model)
        .map(|(b, m)| b.weight * (b.ln_pdf - m))
        .sum::<f64>()
        / wsum;
    let sse = bins
        .iter()
        .zip(&model)
        .map(|(b, m)| b.weight * (b.ln_pdf - ln_c - m).powi(2))
        .sum::<f64>();
    Some((sse / wsum, ln_c))
}

/// Minimal Nelder-Mead over two parameters.
fn nelder_mead<F: Fn([f64; 2]) -> f64>(
    f: F,
    start: [f64; 2],
    step: [f64; 2],
    max_iter: usize,
    ftol: f64,
) -> ([f64; 2], f64, usize, bool) {
    let mut simplex = [
        start,
        [start[0] + step[0], start[1]],
        [start[0], start[1] + step[1]],
    ];
    let mut vals = simplex.map(&f);
    for iter in 0..max_iter {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.map(|i| simplex[i]);
        vals = order.map(|i| vals[i]);

        let spread = (vals[2] - vals[0]).abs();
        let size = (0..2)
            .map(|d| (simplex[1][d] - simplex[0][d]).abs() + (simplex[2][d] - simplex[0][d]).abs())
            .fold(0.0, f64::max);
        if spread <= ftol * (1.0 + vals[0].abs()) && size < 1e-7 {
            return (simplex[0], vals[0], iter, true);
        }

        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let along = |t: f64| {
            [
                centroid[0] + t * (simplex[2][0] - centroid[0]),
                centroid[1] + t * (simplex[2][1] - centroid[1]),
            ]
        };
        let xr = along(-1.0);
        let fr = f(xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(xe);
            if fe < fr {
                simplex[2] = xe;
                vals[2] = fe;
            } else {
                simplex[2] = xr;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            simplex[2] = xr;
            vals[2] = fr;
        } else {
            let (xc, fc) = if fr < vals[2] {
                let x = along(-0.5);
                (x, f(x))
            } else {
                let x = along(0.5);
                (x, f(x))
            };
            if fc < vals[2].min(fr) {
                simplex[2] = xc;
                vals[2] = fc;
            } else {
                let best = simplex[0];
                for i in 1..3 {
                    for (x, b) in simplex[i].iter_mut().zip(best) {
                        *x = b + 0.5 * (*x - b);
                    }
                    vals[i] = f(simplex[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    (simplex[best], vals[best], max_iter, false)
}

const MAX_ITER: usize = 4000;

/// Fits a q-exponential to the non-empty bins of `d`.
///
/// Each bin is compared against the model's mean density over the bin, in
/// log space, weighted by the bin's sample count. The prefactor is solved in
/// closed form; `(q, ln t*)` are searched by Nelder-Mead from a few starts.
pub fn fit_qexp_binned(d: &Distribution) -> Result<QExpFit, QExpError> {
    let bins: Vec<BinObs> = d
        .nonempty_bins()
        .map(|b| BinObs {
            lo: b.lo,
            hi: b.hi,
            ln_pdf: b.pdf.ln(),
            weight: if b.count > 0 { b.count as f64 } else { 1.0 },
        })
        .collect();
    if d.n_samples() > 0 && d.n_samples() < MIN_FIT_SAMPLES {
        return Err(QExpError::TooFewSamples {
            need: MIN_FIT_SAMPLES,
            got: d.n_samples(),
        });
    }
    let scale = d
        .median()
        .filter(|m| *m > 0.0)
        .unwrap_or_else(|| bins.iter().map(|b| b.hi).fold(1.0, f64::max) / 10.0);

    let f = |p: [f64; 2]| objective(&bins, p[0], p[1].exp()).map_or(f64::INFINITY, |v| v.0);

    let mut best: Option<([f64; 2], f64, bool, usize)> = None;
    for &q0 in &[1.05, 1.3, 1.7] {
        let (x, _, it, ok) = nelder_mead(f, [q0, scale.ln()], [0.1, 0.5], MAX_ITER, 1e-14);
        // polish from the found point
        let (x, v, it2, ok2) = nelder_mead(f, x, [0.02, 0.1], MAX_ITER, 1e-15);
        let cand = (x, v, ok && ok2, it + it2);
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some(cand);
        }
    }
    let (x, v, converged, iterations) = best.unwrap();
    let t_star = x[1].exp();
    let ln_c = objective(&bins, x[0], t_star)
        .map(|o| o.1)
        .unwrap_or(f64::NAN);
    if !converged || !v.is_finite() {
        return Err(QExpError::NoConvergence {
            iterations,
            q: x[0],
            t_star,
            prefactor: ln_c.exp(),
        });
    }
    Ok(QExpFit {
        q: x[0],
        t_star,
        prefactor: ln_c.exp(),
        residual: v.sqrt(),
    })
}

/// Fits a q-exponential to raw non-negative samples.
pub fn fit_qexp(samples: &[f64]) -> Result<QExpFit, QExpError> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(QExpError::TooFewSamples {
            need: MIN_FIT_SAMPLES,
            got: samples.len(),
        });
    }
    let d = Distribution::from_reals(samples, DEFAULT_RATIO)?;
    fit_qexp_binned(&d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_at_zero_is_prefactor() {
        let p = QExpFit::new(1.4, 30.0, 0.7);
        assert_eq!(qexp_eval(&p, 0.0).unwrap(), 0.7);
    }

    #[test]
    fn q_two_direct_substitution() {
        let p = QExpFit::new(2.0, 1.0, 1.0);
        assert!((qexp_eval(&p, 1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exponential_limit_branch() {
        let p = QExpFit::new(1.0 + 1e-9, 10.0, 2.0);
        let v = qexp_eval(&p, 5.0).unwrap();
        assert!((v - 2.0 * (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn domain_violation() {
        let p = QExpFit::new(0.5, 1.0, 1.0);
        // base = 1 - 0.5 * 3 < 0
        assert!(matches!(qexp_eval(&p, 3.0), Err(QExpError::Domain { .. })));
        assert!(matches!(qexp_eval(&p, -1.0), Err(QExpError::NegativeDt(_))));
    }

    #[test]
    fn bin_mean_matches_quadrature() {
        for &q in &[0.8, 1.0, 1.3, 1.5, 1.9, 2.0, 2.4] {
            let (lo, hi, t) = (3.0, 7.5, 4.0);
            let p = QExpFit::new(q, t, 1.0);
            let n = 20000;
            let h = (hi - lo) / n as f64;
            let mut s = 0.0;
            for i in 0..n {
                s += p.eval(lo + (i as f64 + 0.5) * h).unwrap_or(0.0) * h;
            }
            let want = (s / (hi - lo)).ln();
            let got = ln_bin_mean(q, t, lo, hi).unwrap();
            assert!((got - want).abs() < 1e-6, "q={q}: {got} vs {want}");
        }
    }

    #[test]
    fn inverse_ccdf_round_trips() {
        let p = QExpFit::normalized(1.55, 60.0).unwrap();
        for &u in &[0.9, 0.5, 0.1, 1e-4] {
            let x = p.inverse_ccdf(u);
            assert!((p.ccdf(x) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            fit_qexp(&[1.0; 10]),
            Err(QExpError::TooFewSamples { got: 10, .. })
        ));
    }
}
