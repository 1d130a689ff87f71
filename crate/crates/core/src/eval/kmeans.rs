//! Lloyd's k-means with random data-point initialization.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{GafsError, Result};
use crate::eval::LabelVector;

pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRun {
    pub labels: LabelVector,
    pub inertia: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Inertia after each assignment/update round.
    pub inertia_history: Vec<f64>,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest center for every sample (ties to the lower center index) and
/// the squared distance to it.
fn assign(x: ArrayView2<f64>, centers: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    x.columns()
        .into_iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (c, center) in centers.columns().into_iter().enumerate() {
                let dist = sq_dist(p, center);
                if dist < best.1 {
                    best = (c, dist);
                }
            }
            best
        })
        .unzip()
}

/// Clusters the columns of `x` (features × samples) into `k` groups.
///
/// Initial centers are `k` distinct samples drawn uniformly. A cluster
/// that loses all its members is re-seeded with the sample farthest from
/// its current center. Stops when assignments no longer change or after
/// `max_iter` rounds.
pub fn kmeans(x: ArrayView2<f64>, k: usize, seed: u64, max_iter: usize) -> Result<ClusterRun> {
    let (p, n) = x.dim();
    if k == 0 || k > n {
        return Err(GafsError::invalid(format!(
            "k-means needs 1 <= K <= n (got K={k}, n={n})"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GafsError::invalid(
            "k-means input contains non-finite values",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = sample(&mut rng, n, k);
    let mut centers = Array2::zeros((p, k));
    for (c, i) in init.iter().enumerate() {
        centers.column_mut(c).assign(&x.column(i));
    }

    let (mut labels, mut dists) = assign(x, &centers);
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        // Update step, re-seeding empty clusters from the worst-fit sample.
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("n >= k guarantees a cluster with two members");
                counts[labels[far]] -= 1;
                labels[far] = c;
                dists[far] = 0.0;
                counts[c] = 1;
            }
        }
        centers.fill(0.0);
        for (i, &l) in labels.iter().enumerate() {
            let mut col = centers.column_mut(l);
            col += &x.column(i);
        }
        for (mut center, &count) in centers.columns_mut().into_iter().zip(&counts) {
            let inv = 1.0 / count as f64;
            center.mapv_inplace(|v| v * inv);
        }
        let (new_labels, new_dists) = assign(x, &centers);
        history.push(new_dists.iter().sum());
        let changed = new_labels != labels;
        labels = new_labels;
        dists = new_dists;
        if !changed {
            break;
        }
    }
    // Final assignment may leave a cluster empty; label ids stay in 0..k.
    let inertia = dists.iter().sum();
    Ok(ClusterRun {
        labels: LabelVector::with_classes(labels, k)?,
        inertia,
        iterations,
        seed,
        inertia_history: history,
    })
}
