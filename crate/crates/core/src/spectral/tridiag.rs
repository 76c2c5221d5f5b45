//! Eigen-decomposition of symmetric tridiagonal matrices by implicit QL
//! iterations with Wilkinson shifts.

const MAX_SWEEPS: usize = 64;

/// Diagonalizes the tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off` (`off[i]` couples `i` and `i + 1`).
///
/// On return `diag` holds the eigenvalues in unspecified order. Every row in
/// `rows` is rotated alongside, so passing rows of the identity yields the
/// matching rows of the eigenvector matrix (eigenvectors are columns).
/// Returns `false` if some eigenvalue failed to converge.
pub(crate) fn tql(diag: &mut [f64], off: &[f64], rows: &mut [Vec<f64>]) -> bool {
    let n = diag.len();
    if n == 0 {
        return true;
    }
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&off[..n - 1]);

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return false;
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                for row in rows.iter_mut() {
                    let f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    true
}

/// Eigenvalues ascending with the requested rows of the eigenvector matrix,
/// columns permuted to match.
pub(crate) fn tridiagonal_eigen(
    diag: &[f64],
    off: &[f64],
    row_indices: &[usize],
) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut rows: Vec<Vec<f64>> = row_indices
        .iter()
        .map(|&r| {
            let mut v = vec![0.0; n];
            v[r] = 1.0;
            v
        })
        .collect();
    if !tql(&mut d, off, &mut rows) {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let vals = order.iter().map(|&i| d[i]).collect();
    let rows = rows
        .into_iter()
        .map(|row| order.iter().map(|&i| row[i]).collect())
        .collect();
    Some((vals, rows))
}
