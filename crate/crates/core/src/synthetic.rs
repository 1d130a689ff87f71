//! Clustered datasets with a known set of informative features.
//!
//! Informative features carry well-separated Gaussian clusters; all other
//! features are independent uniform noise over the same span. Informative
//! features are placed at random positions so that index order carries no
//! information.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::DataMatrix;
use crate::error::{GafsError, Result};
use crate::eval::LabelVector;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub n_informative: usize,
    pub n_noise: usize,
    pub n_clusters: usize,
    /// Distance between adjacent cluster centers, in units of `sigma`.
    pub separation: f64,
    pub sigma: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_samples: 300,
            n_informative: 10,
            n_noise: 90,
            n_clusters: 3,
            separation: 8.0,
            sigma: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// Raw (unscaled) `d × n` data.
    pub data: DataMatrix,
    pub labels: LabelVector,
    /// 0-based indices of the informative features, ascending.
    pub informative: Vec<usize>,
}

/// Draws a dataset. On every informative feature the cluster centers sit
/// at `0, s, 2s, …` (with `s = separation·sigma`) in a per-feature random
/// order, so any two clusters differ by at least `s` on each of them.
pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
    let d = spec.n_informative + spec.n_noise;
    let n = spec.n_samples;
    let k = spec.n_clusters;
    if spec.n_informative == 0 || k < 2 || n < k || !(spec.sigma > 0.0) || !(spec.separation > 0.0)
    {
        return Err(GafsError::invalid(format!(
            "invalid synthetic spec {spec:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = spec.separation * spec.sigma;
    let span = step * (k - 1) as f64;

    let mut positions: Vec<usize> = (0..d).collect();
    positions.shuffle(&mut rng);
    let mut informative = positions[..spec.n_informative].to_vec();
    informative.sort_unstable();

    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let noise = Normal::new(0.0, spec.sigma).expect("sigma > 0");
    let mut values = Array2::zeros((d, n));
    for f in 0..d {
        if informative.binary_search(&f).is_ok() {
            let mut centers: Vec<f64> = (0..k).map(|c| c as f64 * step).collect();
            centers.shuffle(&mut rng);
            for i in 0..n {
                values[[f, i]] = centers[labels[i]] + noise.sample(&mut rng);
            }
        } else {
            for i in 0..n {
                values[[f, i]] = rng.random_range(0.0..span);
            }
        }
    }
    Ok(SyntheticData {
        data: DataMatrix::new(values)?,
        labels: LabelVector::new(labels)?,
        informative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_determinism() {
        let spec = SyntheticSpec::default();
        let a = generate(&spec, 4).unwrap();
        assert_eq!((a.data.d(), a.data.n()), (100, 300));
        assert_eq!(a.informative.len(), 10);
        assert_eq!(a.labels.num_classes(), 3);
        let b = generate(&spec, 4).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.informative, b.informative);
        let c = generate(&spec, 5).unwrap();
        assert_ne!(a.informative, c.informative);
    }

    #[test]
    fn informative_features_separate_clusters() {
        let spec = SyntheticSpec::default();
        let s = generate(&spec, 1).unwrap();
        for &f in &s.informative {
            let mut means = [0.0; 3];
            let mut counts = vec![0.0; 3];
            for i in 0..s.data.n() {
                means[s.labels.ids()[i]] += s.data.values()[[f, i]];
                counts[s.labels.ids()[i]] += 1.0;
            }
            let mut m: Vec<f64> = means.iter().zip(&counts).map(|(a, b)| a / b).collect();
            m.sort_by(f64::total_cmp);
            assert!(m[1] - m[0] > 3.0 && m[2] - m[1] > 3.0, "{m:?}");
        }
    }
}
