//! Clustering accuracy under the optimal cluster-to-class assignment, and
//! normalized mutual information.

use crate::error::{GafsError, Result};
use crate::eval::LabelVector;

/// `table[c][g]` = number of samples with prediction `c` and truth `g`,
/// padded to a square `K × K` with `K = max(#clusters, #classes)`.
pub fn contingency(pred: &LabelVector, truth: &LabelVector) -> Result<Vec<Vec<u64>>> {
    if pred.len() != truth.len() {
        return Err(GafsError::shape(format!(
            "label vectors of length {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    let k = pred.num_classes().max(truth.num_classes());
    let mut table = vec![vec![0u64; k]; k];
    for (&c, &g) in pred.ids().iter().zip(truth.ids()) {
        table[c][g] += 1;
    }
    Ok(table)
}

/// Minimum-cost perfect assignment on a square matrix (shortest augmenting
/// path form of the Hungarian method, O(K³)). Returns `assignment[row] = col`.
pub fn solve_assignment(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based potentials; column 0 is a virtual start.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = i64::MAX;
            let mut col1 = 0usize;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[r0 - 1][col - 1] - u[r0] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for col in 1..=n {
        assignment[owner[col] - 1] = col - 1;
    }
    assignment
}

/// One-to-one map from cluster id to class id maximizing matched samples.
/// The result has one entry per row of the padded contingency table.
pub fn hungarian_map(pred: &LabelVector, truth: &LabelVector) -> Result<Vec<usize>> {
    let table = contingency(pred, truth)?;
    let max = table.iter().flatten().copied().max().unwrap_or(0) as i64;
    let cost: Vec<Vec<i64>> = table
        .iter()
        .map(|row| row.iter().map(|&c| max - c as i64).collect())
        .collect();
    Ok(solve_assignment(&cost))
}

/// Fraction of samples whose mapped cluster id equals the class id.
pub fn acc(pred: &LabelVector, truth: &LabelVector) -> Result<f64> {
    let table = contingency(pred, truth)?;
    let mapping = hungarian_map(pred, truth)?;
    let matched: u64 = mapping.iter().enumerate().map(|(c, &g)| table[c][g]).sum();
    Ok(matched as f64 / pred.len() as f64)
}

fn entropy(counts: impl Iterator<Item = u64>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `MI(C, G) / max(H(C), H(G))` with natural logarithms. Two labelings
/// that are both a single group score 1.
pub fn nmi(pred: &LabelVector, truth: &LabelVector) -> Result<f64> {
    let table = contingency(pred, truth)?;
    let n = pred.len() as f64;
    let row_sums: Vec<u64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<u64> = (0..table.len())
        .map(|j| table.iter().map(|r| r[j]).sum())
        .collect();
    let h_pred = entropy(row_sums.iter().copied(), n);
    let h_truth = entropy(col_sums.iter().copied(), n);
    let denom = h_pred.max(h_truth);
    if denom == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for (c, row) in table.iter().enumerate() {
        for (g, &count) in row.iter().enumerate() {
            if count > 0 {
                let joint = count as f64 / n;
                mi += joint * (count as f64 * n / (row_sums[c] as f64 * col_sums[g] as f64)).ln();
            }
        }
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}
