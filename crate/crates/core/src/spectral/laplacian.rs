use crate::bigraph::WeightedGraph;

use super::SpectralError;

/// Compressed sparse row storage for a square symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indptr[r + 1] += 1;
            indices.push(c as u32);
            values.push(v);
            last = Some((r, c));
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .zip(&self.values[r])
            .map(|(&j, &v)| (j as usize, v))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&(j as u32)) {
            Ok(pos) => self.values[r.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.values[k] * x[self.indices[k] as usize];
            }
            *yi = acc;
        }
    }

    /// Every stored entry as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (i, j, v) in self.triplets() {
            m[i][j] = v;
        }
        m
    }
}

/// `L = I - D^{-1/2} W D^{-1/2}` over the non-isolated nodes of a weighted graph.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    labels: Vec<String>,
    strengths: Vec<f64>,
    matrix: CsrMatrix,
    removed: Vec<String>,
}

impl LaplacianMatrix {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Node strengths `l_i` of the retained nodes.
    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Zero-strength nodes that were dropped before building the matrix.
    pub fn removed(&self) -> &[String] {
        &self.removed
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.matvec(x, y)
    }

    /// Component index of every node (numbered in order of first node).
    pub fn components(&self) -> (usize, Vec<usize>) {
        let n = self.n();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            stack.push(s);
            while let Some(i) = stack.pop() {
                for (j, v) in self.matrix.row(i) {
                    if v != 0.0 && comp[j] == usize::MAX {
                        comp[j] = count;
                        stack.push(j);
                    }
                }
            }
            count += 1;
        }
        (count, comp)
    }

    /// `sqrt(l)` restricted to each component and normalized: a basis of the null space.
    pub fn null_vectors(&self) -> Vec<Vec<f64>> {
        let (count, comp) = self.components();
        let mut out = vec![vec![0.0; self.n()]; count];
        for (i, &c) in comp.iter().enumerate() {
            out[c][i] = self.strengths[i].sqrt();
        }
        for v in &mut out {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
        }
        out
    }
}

/// Builds the weighted normalized Laplacian of `g`, dropping isolated nodes.
pub fn normalized_laplacian<G: WeightedGraph + ?Sized>(
    g: &G,
) -> Result<LaplacianMatrix, SpectralError> {
    let n = g.node_count();
    let edges = g.weighted_edges();
    let mut strength = vec![0.0; n];
    for &(i, j, w) in &edges {
        strength[i] += w;
        strength[j] += w;
    }
    let mut new_index = vec![usize::MAX; n];
    let mut labels = Vec::new();
    let mut strengths = Vec::new();
    let mut removed = Vec::new();
    for i in 0..n {
        if strength[i] > 0.0 {
            new_index[i] = labels.len();
            labels.push(g.node_label(i));
            strengths.push(strength[i]);
        } else {
            removed.push(g.node_label(i));
        }
    }
    if labels.is_empty() {
        return Err(SpectralError::EmptyGraph);
    }
    let m = labels.len();
    let mut trip = Vec::with_capacity(2 * edges.len() + m);
    for i in 0..m {
        trip.push((i, i, 1.0));
    }
    for &(i, j, w) in &edges {
        let (a, b) = (new_index[i], new_index[j]);
        let v = -w / (strengths[a] * strengths[b]).sqrt();
        trip.push((a, b, v));
        trip.push((b, a, v));
    }
    Ok(LaplacianMatrix {
        labels,
        strengths,
        matrix: CsrMatrix::from_triplets(m, trip),
        removed,
    })
}
