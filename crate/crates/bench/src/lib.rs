//! Shared fixtures for the benchmarks.

use gafs_core::data::{scale_features, DEFAULT_DELTA};
use gafs_core::synthetic::{generate, SyntheticSpec};
use gafs_core::{DataMatrix, LabelVector};

/// Scaled synthetic data with `d` features (a tenth informative) and `n`
/// samples in three clusters.
pub fn fixture(d: usize, n: usize, seed: u64) -> (DataMatrix, LabelVector) {
    let informative = (d / 10).max(1);
    let spec = SyntheticSpec {
        n_samples: n,
        n_informative: informative,
        n_noise: d - informative,
        ..SyntheticSpec::default()
    };
    let s = generate(&spec, seed).expect("valid fixture spec");
    (
        scale_features(&s.data, DEFAULT_DELTA).expect("finite data"),
        s.labels,
    )
}
