//! Single-layer sigmoid autoencoder, the regularized objective and its
//! analytic gradient.
//!
//! For data `X` (`d × n`), hidden codes and reconstruction are
//!
//! ```text
//! Y  = σ(W1·X + b1·1ᵀ)      (m × n)
//! X̄  = σ(W2·Y + b2·1ᵀ)      (d × n)
//! ```
//!
//! and the objective is
//!
//! ```text
//! F(Θ) = 1/(2n)·‖X − X̄‖²_F + λ·Σ_q ‖W1[:, q]‖₂ + γ·Tr(Y·L·Yᵀ)
//! ```
//!
//! The sparsity term is not differentiable at a zero column; there the
//! gradient contribution of that column is taken to be zero.

use std::io::{self, BufRead, Write};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use crate::error::{GafsError, Result};

/// Guard added to column norms in the sparsity gradient.
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Columns of `W1` with a norm below this are treated as zero.
pub const ZERO_COLUMN_THRESHOLD: f64 = 1e-12;

const CHECKPOINT_MAGIC: &str = "GAFS-PARAMS";

/// Autoencoder parameters: encoder `W1` (m × d), decoder `W2` (d × m) and
/// their biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b1: Array1<f64>,
    pub b2: Array1<f64>,
}

impl ModelParams {
    pub fn zeros(d: usize, m: usize) -> Self {
        Self {
            w1: Array2::zeros((m, d)),
            w2: Array2::zeros((d, m)),
            b1: Array1::zeros(m),
            b2: Array1::zeros(d),
        }
    }

    /// Input dimension `d`.
    pub fn d(&self) -> usize {
        self.w1.ncols()
    }

    /// Hidden size `m`.
    pub fn m(&self) -> usize {
        self.w1.nrows()
    }

    /// Number of scalar parameters, `2md + d + m`.
    pub fn len(&self) -> usize {
        param_count(self.d(), self.m())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_shapes(&self) -> Result<()> {
        let (m, d) = self.w1.dim();
        if self.w2.dim() != (d, m) || self.b1.len() != m || self.b2.len() != d {
            return Err(GafsError::shape(format!(
                "W1 {:?}, W2 {:?}, b1 {}, b2 {} are not consistent",
                self.w1.dim(),
                self.w2.dim(),
                self.b1.len(),
                self.b2.len()
            )));
        }
        Ok(())
    }

    /// Packs `W1` (row-major), `W2` (row-major), `b1`, `b2` into one vector.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend(self.w1.iter());
        v.extend(self.w2.iter());
        v.extend(self.b1.iter());
        v.extend(self.b2.iter());
        v
    }

    /// Inverse of [`ModelParams::flatten`].
    pub fn unflatten(v: &[f64], d: usize, m: usize) -> Result<Self> {
        let want = param_count(d, m);
        if v.len() != want {
            return Err(GafsError::shape(format!(
                "parameter vector has length {}, expected 2md+d+m = {want}",
                v.len()
            )));
        }
        let md = m * d;
        let (w1, rest) = v.split_at(md);
        let (w2, rest) = rest.split_at(md);
        let (b1, b2) = rest.split_at(m);
        Ok(Self {
            w1: Array2::from_shape_vec((m, d), w1.to_vec()).expect("length checked"),
            w2: Array2::from_shape_vec((d, m), w2.to_vec()).expect("length checked"),
            b1: Array1::from_vec(b1.to_vec()),
            b2: Array1::from_vec(b2.to_vec()),
        })
    }

    /// Writes the text checkpoint: a `GAFS-PARAMS d m` header, then `W1`
    /// rows, `W2` rows, `b1` and `b2`, each value with 17 significant digits.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CHECKPOINT_MAGIC} {} {}", self.d(), self.m())?;
        let mut line = |vals: &mut dyn Iterator<Item = &f64>| -> io::Result<()> {
            let parts: Vec<String> = vals.map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", parts.join(" "))
        };
        for row in self.w1.rows() {
            line(&mut row.iter())?;
        }
        for row in self.w2.rows() {
            line(&mut row.iter())?;
        }
        line(&mut self.b1.iter())?;
        line(&mut self.b2.iter())?;
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(input: R) -> Result<Self> {
        let bad = |msg: String| GafsError::Format(format!("checkpoint: {msg}"));
        let mut lines = input.lines();
        let mut next_line = |what: &str| -> Result<String> {
            match lines.next() {
                Some(Ok(l)) => Ok(l),
                Some(Err(e)) => Err(bad(e.to_string())),
                None => Err(bad(format!("missing {what}"))),
            }
        };
        let header = next_line("header")?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 || fields[0] != CHECKPOINT_MAGIC {
            return Err(bad(format!("bad header {header:?}")));
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| bad(format!("bad dimension {s:?}")))
        };
        let (d, m) = (parse_dim(fields[1])?, parse_dim(fields[2])?);

        let mut values = Vec::with_capacity(param_count(d, m));
        let shape = [(m, d, "W1"), (d, m, "W2"), (1, m, "b1"), (1, d, "b2")];
        for (rows, cols, name) in shape {
            for _ in 0..rows {
                let l = next_line(name)?;
                let row: Vec<f64> = l
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| bad(format!("{name}: bad value {t:?}")))
                    })
                    .collect::<Result<_>>()?;
                if row.len() != cols {
                    return Err(bad(format!(
                        "{name}: row has {} values, expected {cols}",
                        row.len()
                    )));
                }
                values.extend(row);
            }
        }
        Self::unflatten(&values, d, m)
    }
}

pub fn param_count(d: usize, m: usize) -> usize {
    2 * m * d + d + m
}

/// Logistic sigmoid, evaluated without overflow for any finite input.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn affine_sigmoid(w: &Array2<f64>, b: &Array1<f64>, input: ArrayView2<f64>) -> Array2<f64> {
    let mut z = w.dot(&input);
    z += &b.view().insert_axis(Axis(1));
    z.mapv_inplace(sigmoid);
    z
}

/// Hidden codes `Y = σ(W1·X + b1)`, shape `m × n`.
pub fn encode(params: &ModelParams, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    params.check_shapes()?;
    if x.nrows() != params.d() {
        return Err(GafsError::shape(format!(
            "data has {} features, encoder expects {}",
            x.nrows(),
            params.d()
        )));
    }
    Ok(affine_sigmoid(&params.w1, &params.b1, x))
}

/// Reconstruction `X̄ = σ(W2·Y + b2)`, shape `d × n`.
pub fn decode(params: &ModelParams, y: ArrayView2<f64>) -> Result<Array2<f64>> {
    params.check_shapes()?;
    if y.nrows() != params.m() {
        return Err(GafsError::shape(format!(
            "codes have {} rows, decoder expects {}",
            y.nrows(),
            params.m()
        )));
    }
    Ok(affine_sigmoid(&params.w2, &params.b2, y))
}

/// `1/(2n)·‖X − decode(encode(X))‖²_F`.
pub fn reconstruction_loss(params: &ModelParams, x: ArrayView2<f64>) -> Result<f64> {
    let y = encode(params, x)?;
    let xbar = decode(params, y.view())?;
    Ok(squared_error(x, &xbar) / (2.0 * x.ncols() as f64))
}

fn squared_error(x: ArrayView2<f64>, xbar: &Array2<f64>) -> f64 {
    Zip::from(x)
        .and(xbar)
        .fold(0.0, |acc, &a, &b| acc + (a - b) * (a - b))
}

/// Sum over columns of each column's Euclidean norm.
pub fn l21_columns(w: ArrayView2<f64>) -> f64 {
    w.columns().into_iter().map(|c| c.dot(&c).sqrt()).sum()
}

/// `Tr(Y·L·Yᵀ)`.
pub fn graph_penalty(y: ArrayView2<f64>, laplacian: ArrayView2<f64>) -> Result<f64> {
    let n = y.ncols();
    if laplacian.dim() != (n, n) {
        return Err(GafsError::shape(format!(
            "codes have {n} samples, Laplacian is {:?}",
            laplacian.dim()
        )));
    }
    let yl = y.dot(&laplacian);
    Ok(trace_of_product(y, &yl))
}

// Tr(Y·Mᵀ) for same-shaped Y, M, i.e. Σ Y∘M.
fn trace_of_product(y: ArrayView2<f64>, yl: &Array2<f64>) -> f64 {
    Zip::from(y).and(yl).fold(0.0, |acc, &a, &b| acc + a * b)
}

/// Gradient of the objective with respect to each parameter block, with
/// the backpropagated error terms kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b1: Array1<f64>,
    pub b2: Array1<f64>,
    /// Hidden-layer error term Δ2 (m × n).
    pub delta_hidden: Array2<f64>,
    /// Output-layer error term Δ3 (d × n).
    pub delta_output: Array2<f64>,
}

impl GradientBundle {
    /// Same layout as [`ModelParams::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.w1.len() + self.b1.len() + self.b2.len());
        v.extend(self.w1.iter());
        v.extend(self.w2.iter());
        v.extend(self.b1.iter());
        v.extend(self.b2.iter());
        v
    }
}

/// Values of the three objective terms, each already weighted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    pub reconstruction: f64,
    pub sparsity: f64,
    pub graph: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.reconstruction + self.sparsity + self.graph
    }

    /// Name of the first non-finite term, if any.
    pub fn non_finite_term(&self) -> Option<&'static str> {
        [
            ("reconstruction", self.reconstruction),
            ("sparsity", self.sparsity),
            ("graph", self.graph),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(name, _)| name)
    }
}

/// Everything the objective needs besides the parameters.
///
/// The Laplacian is optional: with `gamma == 0` no graph is required and
/// the graph term is skipped entirely.
#[derive(Debug, Clone)]
pub struct ObjectiveContext {
    x: Array2<f64>,
    laplacian: Option<Array2<f64>>,
    lambda: f64,
    gamma: f64,
    epsilon: f64,
}

struct Forward {
    y: Array2<f64>,
    xbar: Array2<f64>,
    yl: Option<Array2<f64>>,
    terms: ObjectiveTerms,
}

impl ObjectiveContext {
    pub fn new(
        x: Array2<f64>,
        laplacian: Option<Array2<f64>>,
        lambda: f64,
        gamma: f64,
    ) -> Result<Self> {
        Self::with_epsilon(x, laplacian, lambda, gamma, DEFAULT_EPSILON)
    }

    pub fn with_epsilon(
        x: Array2<f64>,
        laplacian: Option<Array2<f64>>,
        lambda: f64,
        gamma: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(GafsError::invalid(format!(
                "lambda must be >= 0, got {lambda}"
            )));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(GafsError::invalid(format!(
                "gamma must be >= 0, got {gamma}"
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(GafsError::invalid(format!(
                "epsilon must be > 0, got {epsilon}"
            )));
        }
        let n = x.ncols();
        match &laplacian {
            Some(l) if l.dim() != (n, n) => {
                return Err(GafsError::shape(format!(
                    "Laplacian is {:?}, data has {n} samples",
                    l.dim()
                )));
            }
            None if gamma > 0.0 => {
                return Err(GafsError::invalid("gamma > 0 requires a Laplacian"));
            }
            _ => {}
        }
        Ok(Self {
            x,
            laplacian,
            lambda,
            gamma,
            epsilon,
        })
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// A copy with a different sparsity weight.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::with_epsilon(
            self.x.clone(),
            self.laplacian.clone(),
            lambda,
            self.gamma,
            self.epsilon,
        )
    }

    fn graph_active(&self) -> Option<&Array2<f64>> {
        self.laplacian.as_ref().filter(|_| self.gamma > 0.0)
    }

    fn forward(&self, params: &ModelParams) -> Result<Forward> {
        let y = encode(params, self.x.view())?;
        let xbar = decode(params, y.view())?;
        let n = self.x.ncols() as f64;
        let reconstruction = squared_error(self.x.view(), &xbar) / (2.0 * n);
        let sparsity = if self.lambda > 0.0 {
            self.lambda * l21_columns(params.w1.view())
        } else {
            0.0
        };
        let (yl, graph) = match self.graph_active() {
            Some(l) => {
                let yl = y.dot(l);
                let g = self.gamma * trace_of_product(y.view(), &yl);
                (Some(yl), g)
            }
            None => (None, 0.0),
        };
        Ok(Forward {
            y,
            xbar,
            yl,
            terms: ObjectiveTerms {
                reconstruction,
                sparsity,
                graph,
            },
        })
    }

    /// The weighted terms of the objective at `params`.
    pub fn terms(&self, params: &ModelParams) -> Result<ObjectiveTerms> {
        Ok(self.forward(params)?.terms)
    }

    pub fn objective(&self, params: &ModelParams) -> Result<f64> {
        Ok(self.terms(params)?.total())
    }

    pub fn gradient(&self, params: &ModelParams) -> Result<GradientBundle> {
        Ok(self.value_and_gradient(params)?.1)
    }

    /// Objective and gradient from a single forward pass.
    pub fn value_and_gradient(&self, params: &ModelParams) -> Result<(f64, GradientBundle)> {
        let fwd = self.forward(params)?;
        let grad = self.backward(params, &fwd);
        Ok((fwd.terms.total(), grad))
    }

    fn backward(&self, params: &ModelParams, fwd: &Forward) -> GradientBundle {
        let x = &self.x;
        let inv_n = 1.0 / x.ncols() as f64;
        let Forward { y, xbar, yl, .. } = fwd;

        // Δ3 = (X̄ − X)∘X̄∘(1 − X̄)
        let mut delta_output = xbar - x;
        Zip::from(&mut delta_output)
            .and(xbar)
            .for_each(|e, &o| *e *= o * (1.0 - o));

        // Δ2 = (W2ᵀΔ3)∘Y∘(1 − Y)
        let mut delta_hidden = params.w2.t().dot(&delta_output);
        Zip::from(&mut delta_hidden)
            .and(y)
            .for_each(|e, &h| *e *= h * (1.0 - h));

        // Error signal at the hidden pre-activation: Δ2/n plus the graph
        // term 2γ·(YL)∘Y∘(1 − Y).
        let mut hidden_signal = &delta_hidden * inv_n;
        if let Some(yl) = yl {
            let two_gamma = 2.0 * self.gamma;
            Zip::from(&mut hidden_signal)
                .and(yl)
                .and(y)
                .for_each(|s, &g, &h| *s += two_gamma * g * h * (1.0 - h));
        }

        let mut g_w1 = hidden_signal.dot(&x.t());
        if self.lambda > 0.0 {
            for (mut g_col, w_col) in g_w1.columns_mut().into_iter().zip(params.w1.columns()) {
                let norm = w_col.dot(&w_col).sqrt();
                if norm >= ZERO_COLUMN_THRESHOLD {
                    let u = self.lambda / (norm + self.epsilon);
                    g_col.scaled_add(u, &w_col);
                }
            }
        }
        let g_b1 = hidden_signal.sum_axis(Axis(1));
        let g_w2 = delta_output.dot(&y.t()) * inv_n;
        let g_b2 = delta_output.sum_axis(Axis(1)) * inv_n;

        GradientBundle {
            w1: g_w1,
            w2: g_w2,
            b1: g_b1,
            b2: g_b2,
            delta_hidden,
            delta_output,
        }
    }
}
