//! Multinomial logistic regression trained with L-BFGS.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{GafsError, Result};
use crate::eval::LabelVector;
use crate::optim::{minimize, LbfgsConfig};

/// Default ridge weight on the classifier weights.
pub const DEFAULT_REG: f64 = 1e-4;

/// Weights `K × (p + 1)`; the last column is the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    pub weights: Array2<f64>,
}

impl SoftmaxModel {
    pub fn zeros(num_classes: usize, num_features: usize) -> Self {
        Self {
            weights: Array2::zeros((num_classes, num_features + 1)),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.weights.nrows()
    }

    fn scores(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let p = self.weights.ncols() - 1;
        let w = self.weights.slice(ndarray::s![.., ..p]);
        let b = self.weights.column(p);
        let mut s = w.dot(&x);
        s += &b.insert_axis(Axis(1));
        s
    }
}

/// Mean cross-entropy plus `reg/2·‖W‖²_F` over all weights (bias
/// included), with its gradient. `x` is features × samples.
pub fn softmax_objective(
    weights: &Array2<f64>,
    x: ArrayView2<f64>,
    y: &LabelVector,
    reg: f64,
) -> (f64, Array2<f64>) {
    let model = SoftmaxModel {
        weights: weights.clone(),
    };
    let n = x.ncols();
    let k = weights.nrows();
    let p = weights.ncols() - 1;
    let mut probs = model.scores(x);
    let mut loss = 0.0;
    for (i, mut col) in probs.columns_mut().into_iter().enumerate() {
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        col.mapv_inplace(|s| (s - max).exp());
        let z: f64 = col.sum();
        loss -= (col[y.ids()[i]] / z).ln();
        col.mapv_inplace(|e| e / z);
    }
    let inv_n = 1.0 / n as f64;
    let mut residual = probs;
    for (i, &c) in y.ids().iter().enumerate() {
        residual[[c, i]] -= 1.0;
    }
    let mut grad = Array2::zeros((k, p + 1));
    grad.slice_mut(ndarray::s![.., ..p])
        .assign(&(residual.dot(&x.t()) * inv_n));
    grad.column_mut(p)
        .assign(&(residual.sum_axis(Axis(1)) * inv_n));
    grad.scaled_add(reg, weights);
    let penalty = 0.5 * reg * weights.iter().map(|w| w * w).sum::<f64>();
    (loss * inv_n + penalty, grad)
}

/// Fits a `num_classes`-way classifier. Every class must occur in `y`.
pub fn softmax_train(
    x: ArrayView2<f64>,
    y: &LabelVector,
    num_classes: usize,
    reg: f64,
) -> Result<SoftmaxModel> {
    if num_classes < 2 {
        return Err(GafsError::invalid("softmax needs at least two classes"));
    }
    if x.ncols() != y.len() {
        return Err(GafsError::shape(format!(
            "{} samples but {} labels",
            x.ncols(),
            y.len()
        )));
    }
    if !(reg >= 0.0) {
        return Err(GafsError::invalid(format!(
            "regularization must be >= 0, got {reg}"
        )));
    }
    let mut present = vec![false; num_classes];
    for &c in y.ids() {
        if c >= num_classes {
            return Err(GafsError::invalid(format!(
                "label {} exceeds {num_classes} classes",
                c + 1
            )));
        }
        present[c] = true;
    }
    if let Some(missing) = present.iter().position(|&p| !p) {
        return Err(GafsError::invalid(format!(
            "class {} has no training samples",
            missing + 1
        )));
    }
    let shape = (num_classes, x.nrows() + 1);
    let func = |v: &[f64]| {
        let w = Array2::from_shape_vec(shape, v.to_vec()).expect("length fixed");
        let (f, g) = softmax_objective(&w, x, y, reg);
        (f, g.into_iter().collect::<Vec<f64>>())
    };
    let cfg = LbfgsConfig {
        memory: 20,
        relative_tolerance: 1e-9,
        ..LbfgsConfig::default()
    };
    let (theta, _) = minimize(func, vec![0.0; shape.0 * shape.1], &cfg)?;
    Ok(SoftmaxModel {
        weights: Array2::from_shape_vec(shape, theta).expect("length fixed"),
    })
}

/// Highest-scoring class per sample, lower class index on ties.
pub fn softmax_predict(model: &SoftmaxModel, x: ArrayView2<f64>) -> Result<LabelVector> {
    if x.nrows() + 1 != model.weights.ncols() {
        return Err(GafsError::shape(format!(
            "model expects {} features, data has {}",
            model.weights.ncols() - 1,
            x.nrows()
        )));
    }
    let scores = model.scores(x);
    let ids = scores
        .columns()
        .into_iter()
        .map(|col| {
            let mut best = 0;
            for (c, &s) in col.iter().enumerate() {
                if s > col[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    LabelVector::with_classes(ids, model.num_classes())
}
