//! Cosine-similarity kNN graph over samples and its Laplacian.
//!
//! Edge `(i, j)` exists when either sample is among the other's `k` most
//! similar samples, and carries the cosine similarity as its weight.
//! Negative similarities are kept as they are, so for data with obtuse
//! sample pairs the Laplacian can be indefinite.

use std::io::{self, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::data::DataMatrix;
use crate::error::{GafsError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    adjacency: Array2<f64>,
    degree: Array1<f64>,
    laplacian: Array2<f64>,
    k: usize,
}

impl NeighborGraph {
    pub fn adjacency(&self) -> &Array2<f64> {
        &self.adjacency
    }

    pub fn degree(&self) -> &Array1<f64> {
        &self.degree
    }

    pub fn laplacian(&self) -> &Array2<f64> {
        &self.laplacian
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.degree.len()
    }

    /// Writes nonzero upper-triangle edges as `i j weight` lines, 1-based.
    pub fn write_edges<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n = self.n();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.adjacency[[i, j]];
                if w != 0.0 {
                    writeln!(out, "{} {} {:.16e}", i + 1, j + 1, w)?;
                }
            }
        }
        Ok(())
    }
}

fn dot(u: ArrayView1<f64>, v: ArrayView1<f64>) -> f64 {
    u.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
}

/// `uᵀv / (‖u‖‖v‖)`, clamped to `[-1, 1]`.
///
/// A zero-norm argument yields [`GafsError::ZeroNorm`] with `sample` set to
/// the argument position (0 for `u`, 1 for `v`).
pub fn cosine_similarity(u: ArrayView1<f64>, v: ArrayView1<f64>) -> Result<f64> {
    if u.len() != v.len() {
        return Err(GafsError::shape(format!(
            "vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = unit(u).ok_or(GafsError::ZeroNorm { sample: 0 })?;
    let nv = unit(v).ok_or(GafsError::ZeroNorm { sample: 1 })?;
    Ok(dot(nu.view(), nv.view()).clamp(-1.0, 1.0))
}

// Normalizing before the dot product keeps collinear samples at exactly ±1
// (sqrt(x²) == |x| in IEEE arithmetic), so tie order among them does not
// depend on per-sample scale.
fn unit(u: ArrayView1<f64>) -> Option<Array1<f64>> {
    let norm = dot(u, u).sqrt();
    (norm > 0.0).then(|| u.mapv(|a| a / norm))
}

/// Full `n × n` cosine similarity table between sample columns. The
/// diagonal is left at zero.
fn similarity_table(x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = x.ncols();
    let mut units = Array2::zeros(x.raw_dim());
    for (i, c) in x.columns().into_iter().enumerate() {
        let u = unit(c).ok_or(GafsError::ZeroNorm { sample: i + 1 })?;
        units.column_mut(i).assign(&u);
    }
    let mut s = units.t().dot(&units);
    // Mirror the upper triangle so the table is exactly symmetric.
    for i in 0..n {
        s[[i, i]] = 0.0;
        for j in (i + 1)..n {
            let c = s[[i, j]].clamp(-1.0, 1.0);
            s[[i, j]] = c;
            s[[j, i]] = c;
        }
    }
    Ok(s)
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(GafsError::invalid(format!(
            "neighbors k must satisfy 1 <= k <= n-1 (got k={k}, n={n})"
        )));
    }
    Ok(())
}

fn neighbors_from_table(s: &Array2<f64>, k: usize) -> Vec<Vec<usize>> {
    let n = s.nrows();
    (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            // Descending similarity, ascending index on ties.
            let order = |a: &usize, b: &usize| s[[i, *b]].total_cmp(&s[[i, *a]]).then(a.cmp(b));
            if k < others.len() {
                others.select_nth_unstable_by(k - 1, order);
                others.truncate(k);
            }
            others.sort_by(order);
            others
        })
        .collect()
}

/// For each sample, the `k` other samples with the largest cosine
/// similarity (0-based indices, most similar first, ties to the smaller
/// index).
pub fn knn_neighbors(x: &DataMatrix, k: usize) -> Result<Vec<Vec<usize>>> {
    check_k(k, x.n())?;
    let s = similarity_table(x.view())?;
    Ok(neighbors_from_table(&s, k))
}

/// Builds the symmetrized kNN adjacency, degrees and Laplacian `L = D − A`.
pub fn build_graph(x: &DataMatrix, k: usize) -> Result<NeighborGraph> {
    let n = x.n();
    check_k(k, n)?;
    let s = similarity_table(x.view())?;
    let neighbors = neighbors_from_table(&s, k);

    let mut linked = Array2::from_elem((n, n), false);
    for (i, list) in neighbors.iter().enumerate() {
        for &j in list {
            linked[[i, j]] = true;
            linked[[j, i]] = true;
        }
    }
    let adjacency = Array2::from_shape_fn(
        (n, n),
        |(i, j)| {
            if linked[[i, j]] {
                s[[i, j]]
            } else {
                0.0
            }
        },
    );
    let degree: Array1<f64> = adjacency.rows().into_iter().map(|r| r.sum()).collect();
    let mut laplacian = -&adjacency;
    for i in 0..n {
        laplacian[[i, i]] += degree[i];
    }
    Ok(NeighborGraph {
        adjacency,
        degree,
        laplacian,
        k,
    })
}
