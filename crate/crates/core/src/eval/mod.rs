//! Judging a feature subset: repeated k-means scored by ACC and NMI, and
//! softmax classification accuracy on a train/test split.

pub mod kmeans;
pub mod metrics;
pub mod softmax;

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::DataMatrix;
use crate::error::{GafsError, Result};

pub use kmeans::{kmeans, ClusterRun, DEFAULT_MAX_ITER};
pub use metrics::{acc, hungarian_map, nmi};
pub use softmax::{softmax_predict, softmax_train, SoftmaxModel, DEFAULT_REG};

/// Class or cluster ids, stored 0-based, with the number of classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    ids: Vec<usize>,
    num_classes: usize,
}

impl LabelVector {
    /// Ids in `0..K`, `K` taken as `max + 1`.
    pub fn new(ids: Vec<usize>) -> Result<Self> {
        let k = ids.iter().max().map_or(0, |m| m + 1);
        Self::with_classes(ids, k)
    }

    /// Ids in `0..num_classes`; classes may be absent.
    pub fn with_classes(ids: Vec<usize>, num_classes: usize) -> Result<Self> {
        if ids.is_empty() {
            return Err(GafsError::Empty);
        }
        if let Some(&bad) = ids.iter().find(|&&c| c >= num_classes) {
            return Err(GafsError::invalid(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self { ids, num_classes })
    }

    /// Maps arbitrary integer ids onto `0..K` in ascending order of value,
    /// so every class occurs.
    pub fn from_raw(raw: &[i64]) -> Result<Self> {
        let mut dense = BTreeMap::new();
        for &r in raw {
            dense.entry(r).or_insert(0usize);
        }
        for (i, v) in dense.values_mut().enumerate() {
            *v = i;
        }
        Self::with_classes(raw.iter().map(|r| dense[r]).collect(), dense.len())
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> LabelVector {
        LabelVector {
            ids: indices.iter().map(|&i| self.ids[i]).collect(),
            num_classes: self.num_classes,
        }
    }
}

/// Reads one integer class id per non-empty line.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVector> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| GafsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut raw = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: i64 = t.parse().map_err(|_| GafsError::Parse {
            row: i + 1,
            col: 1,
            token: t.to_string(),
        })?;
        raw.push(v);
    }
    LabelVector::from_raw(&raw)
}

/// Sample indices used for training and testing the classifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Shuffles `0..n` and puts the first `round(fraction·n)` into train.
    pub fn random(n: usize, train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(GafsError::invalid(format!(
                "train fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n.saturating_sub(1));
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut train = idx[..n_train].to_vec();
        let mut test = idx[n_train..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Self::checked(train, test)
    }

    /// `true` marks a training sample.
    pub fn from_mask(mask: &[bool]) -> Result<Self> {
        let train = (0..mask.len()).filter(|&i| mask[i]).collect();
        let test = (0..mask.len()).filter(|&i| !mask[i]).collect();
        Self::checked(train, test)
    }

    fn checked(train: Vec<usize>, test: Vec<usize>) -> Result<Self> {
        if train.is_empty() || test.is_empty() {
            return Err(GafsError::invalid(
                "split needs at least one train and one test sample",
            ));
        }
        Ok(Self { train, test })
    }

    pub fn n(&self) -> usize {
        self.train.len() + self.test.len()
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub repetitions: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub reg: f64,
    pub split: Option<Split>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            repetitions: 20,
            seed: 0,
            max_iter: DEFAULT_MAX_ITER,
            reg: DEFAULT_REG,
            split: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMetrics {
    pub acc_mean: f64,
    pub nmi_mean: f64,
    /// `None` when no split was supplied.
    pub classification_accuracy: Option<f64>,
    pub n_features: usize,
    pub seed_count: usize,
    /// Per-repetition values, in seed order.
    pub acc_runs: Vec<f64>,
    pub nmi_runs: Vec<f64>,
}

impl SelectionMetrics {
    /// `key: value` lines.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "acc_mean: {:.16e}", self.acc_mean)?;
        writeln!(out, "nmi_mean: {:.16e}", self.nmi_mean)?;
        match self.classification_accuracy {
            Some(a) => writeln!(out, "classification_accuracy: {a:.16e}")?,
            None => writeln!(out, "classification_accuracy: none")?,
        }
        writeln!(out, "n_features: {}", self.n_features)?;
        writeln!(out, "seed_count: {}", self.seed_count)
    }
}

/// Restricts `x` to `features`, clusters it `repetitions` times (seeds
/// `seed, seed+1, …`) and, when a split is given, trains and tests a
/// softmax classifier.
pub fn evaluate_selection(
    x: &DataMatrix,
    labels: &LabelVector,
    features: &[usize],
    opts: &EvalOptions,
) -> Result<SelectionMetrics> {
    if labels.len() != x.n() {
        return Err(GafsError::shape(format!(
            "data has {} samples but {} labels",
            x.n(),
            labels.len()
        )));
    }
    if opts.repetitions == 0 {
        return Err(GafsError::invalid("repetitions must be >= 1"));
    }
    let sub = x.select_features(features)?;
    let k = labels.num_classes();
    let mut acc_runs = Vec::with_capacity(opts.repetitions);
    let mut nmi_runs = Vec::with_capacity(opts.repetitions);
    for r in 0..opts.repetitions {
        let run = kmeans(
            sub.view(),
            k,
            opts.seed.wrapping_add(r as u64),
            opts.max_iter,
        )?;
        acc_runs.push(acc(&run.labels, labels)?);
        nmi_runs.push(nmi(&run.labels, labels)?);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

    let classification_accuracy = match &opts.split {
        Some(split) => {
            if split.n() != x.n() || split.train.iter().chain(&split.test).any(|&i| i >= x.n()) {
                return Err(GafsError::shape(
                    "split does not match the number of samples",
                ));
            }
            let xv = sub.values();
            let x_train = xv.select(ndarray::Axis(1), &split.train);
            let x_test = xv.select(ndarray::Axis(1), &split.test);
            let model = softmax_train(x_train.view(), &labels.subset(&split.train), k, opts.reg)?;
            let pred = softmax_predict(&model, x_test.view())?;
            let truth = labels.subset(&split.test);
            let hits = pred
                .ids()
                .iter()
                .zip(truth.ids())
                .filter(|(a, b)| a == b)
                .count();
            Some(hits as f64 / truth.len() as f64)
        }
        None => None,
    };

    Ok(SelectionMetrics {
        acc_mean: mean(&acc_runs),
        nmi_mean: mean(&nmi_runs),
        classification_accuracy,
        n_features: features.len(),
        seed_count: opts.repetitions,
        acc_runs,
        nmi_runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, SyntheticSpec};

    #[test]
    fn raw_labels_are_densified() {
        let l = LabelVector::from_raw(&[7, 3, 3, 9]).unwrap();
        assert_eq!(l.ids(), &[1, 0, 0, 2]);
        assert_eq!(l.num_classes(), 3);
    }

    #[test]
    fn split_covers_everything_once() {
        let s = Split::random(10, 0.5, 1).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(s.train.len(), 5);
        assert!(Split::random(10, 1.0, 1).is_err());
        assert!(Split::from_mask(&[true, true]).is_err());
    }

    #[test]
    fn all_features_baseline_and_determinism() {
        let spec = SyntheticSpec {
            n_samples: 60,
            n_informative: 3,
            n_noise: 3,
            ..SyntheticSpec::default()
        };
        let s = generate(&spec, 0).unwrap();
        let x = crate::data::scale_features(&s.data, 1e-3).unwrap();
        let opts = EvalOptions {
            repetitions: 5,
            seed: 4,
            split: Some(Split::random(60, 0.5, 0).unwrap()),
            ..EvalOptions::default()
        };
        let all: Vec<usize> = (0..6).collect();
        let a = evaluate_selection(&x, &s.labels, &all, &opts).unwrap();
        let b = evaluate_selection(&x, &s.labels, &all, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_features, 6);
        let good = evaluate_selection(&x, &s.labels, &s.informative, &opts).unwrap();
        let noise: Vec<usize> = all
            .iter()
            .copied()
            .filter(|f| !s.informative.contains(f))
            .collect();
        let bad = evaluate_selection(&x, &s.labels, &noise, &opts).unwrap();
        assert!(good.acc_mean > bad.acc_mean);
        assert!(good.classification_accuracy.unwrap() > 0.9);
        assert!(bad.classification_accuracy.unwrap() < 0.7);
    }

    #[test]
    fn label_length_mismatch() {
        let x = DataMatrix::new(ndarray::Array2::from_elem((2, 4), 1.0)).unwrap();
        let l = LabelVector::new(vec![0, 1, 0]).unwrap();
        assert!(evaluate_selection(&x, &l, &[0], &EvalOptions::default()).is_err());
    }

    #[test]
    fn metrics_text() {
        let m = SelectionMetrics {
            acc_mean: 0.5,
            nmi_mean: 0.25,
            classification_accuracy: None,
            n_features: 3,
            seed_count: 20,
            acc_runs: vec![],
            nmi_runs: vec![],
        };
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let keys: Vec<&str> = text.lines().map(|l| l.split(':').next().unwrap()).collect();
        assert_eq!(
            keys,
            [
                "acc_mean",
                "nmi_mean",
                "classification_accuracy",
                "n_features",
                "seed_count"
            ]
        );
    }
}
