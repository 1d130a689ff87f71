//! End-to-end feature selection: graph, training, scoring, ranking.

use std::io::{self, BufRead, Write};
use std::time::{Duration, Instant};

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{GafsError, Result};
use crate::graph::{build_graph, NeighborGraph};
use crate::model::{ModelParams, ObjectiveContext, DEFAULT_EPSILON};
use crate::optim::{minimize, LbfgsConfig, OptimTrace};

/// How many features to keep: an absolute count or a percentage of `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureCount {
    Count(usize),
    Percent(f64),
}

impl FeatureCount {
    /// Resolves against `d` features; percentages round up.
    pub fn resolve(&self, d: usize) -> Result<usize> {
        let n = match *self {
            FeatureCount::Count(c) => c,
            FeatureCount::Percent(p) => {
                if !(p > 0.0 && p <= 100.0) {
                    return Err(GafsError::invalid(format!(
                        "percentage must lie in (0, 100], got {p}"
                    )));
                }
                // Guard against p·d/100 landing a hair above an integer.
                (p * d as f64 / 100.0 - 1e-9).ceil().max(1.0) as usize
            }
        };
        if n == 0 || n > d {
            return Err(GafsError::invalid(format!(
                "number of features to keep must satisfy 1 <= n_F <= d (got n_F={n}, d={d})"
            )));
        }
        Ok(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GafsConfig {
    pub hidden_size: usize,
    pub neighbors: usize,
    pub lambda: f64,
    pub gamma: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub optimizer: LbfgsConfig,
    pub seed: u64,
    pub n_features: FeatureCount,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl Default for GafsConfig {
    fn default() -> Self {
        Self {
            hidden_size: 10,
            neighbors: 5,
            lambda: 1e-2,
            gamma: 1e-3,
            epsilon: DEFAULT_EPSILON,
            optimizer: LbfgsConfig::default(),
            seed: 0,
            n_features: FeatureCount::Percent(20.0),
        }
    }
}

impl GafsConfig {
    /// Checks the configuration against a dataset with `d` features and
    /// `n` samples.
    pub fn validate(&self, d: usize, n: usize) -> Result<()> {
        if self.hidden_size == 0 {
            return Err(GafsError::invalid("hidden size m must be >= 1"));
        }
        if self.neighbors == 0 || self.neighbors >= n {
            return Err(GafsError::invalid(format!(
                "neighbors k must satisfy 1 <= k <= n-1 (got k={}, n={n})",
                self.neighbors
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(GafsError::invalid(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(GafsError::invalid(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        self.n_features.resolve(d)?;
        self.optimizer.validate()
    }
}

/// Per-feature scores and the feature indices sorted by descending score.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRanking {
    scores: Vec<f64>,
    order: Vec<usize>,
}

impl FeatureRanking {
    /// Orders by descending score, ascending index among equal scores.
    pub fn from_scores(scores: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Self { scores, order }
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// 0-based feature indices, best first.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// One `rank index score` line per feature, 1-based.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (rank, &idx) in self.order.iter().enumerate() {
            writeln!(out, "{} {} {:.16e}", rank + 1, idx + 1, self.scores[idx])?;
        }
        Ok(())
    }

    /// Parses the format written by [`FeatureRanking::write_text`].
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let bad = |line: usize, msg: &str| GafsError::Format(format!("ranking line {line}: {msg}"));
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| bad(i + 1, &e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad(i + 1, "expected `rank index score`"));
            }
            let rank: usize = f[0].parse().map_err(|_| bad(i + 1, "bad rank"))?;
            let idx: usize = f[1].parse().map_err(|_| bad(i + 1, "bad index"))?;
            let score: f64 = f[2].parse().map_err(|_| bad(i + 1, "bad score"))?;
            entries.push((rank, idx, score));
        }
        let d = entries.len();
        if d == 0 {
            return Err(GafsError::Format("ranking file is empty".into()));
        }
        let mut scores = vec![f64::NAN; d];
        let mut order = vec![usize::MAX; d];
        for &(rank, idx, score) in &entries {
            if rank == 0 || rank > d || idx == 0 || idx > d {
                return Err(GafsError::Format(format!(
                    "ranking entry ({rank}, {idx}) out of range for {d} features"
                )));
            }
            if order[rank - 1] != usize::MAX || !scores[idx - 1].is_nan() {
                return Err(GafsError::Format(format!(
                    "duplicate rank {rank} or index {idx}"
                )));
            }
            order[rank - 1] = idx - 1;
            scores[idx - 1] = score;
        }
        Ok(Self { scores, order })
    }
}

/// Euclidean norm of every column of `W1`.
pub fn feature_scores(w1: ArrayView2<f64>) -> Vec<f64> {
    w1.columns().into_iter().map(|c| c.dot(&c).sqrt()).collect()
}

/// The first `n_features` entries of the ranking order.
pub fn top_features(ranking: &FeatureRanking, n_features: usize) -> Result<Vec<usize>> {
    if n_features > ranking.len() {
        return Err(GafsError::invalid(format!(
            "cannot keep {n_features} features out of {}",
            ranking.len()
        )));
    }
    Ok(ranking.order[..n_features].to_vec())
}

/// Weights uniform in `±√(6/(d+m))`, biases zero.
pub fn init_params(d: usize, m: usize, seed: u64) -> ModelParams {
    let r = (6.0 / (d + m) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ModelParams::zeros(d, m);
    p.w1.mapv_inplace(|_| rng.random_range(-r..=r));
    p.w2.mapv_inplace(|_| rng.random_range(-r..=r));
    p
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub graph: Duration,
    pub optimize: Duration,
    pub score: Duration,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ModelParams,
    pub ranking: FeatureRanking,
    pub trace: OptimTrace,
    /// `None` when `gamma == 0` and no graph was needed.
    pub graph: Option<NeighborGraph>,
    pub timings: PhaseTimings,
}

impl FitResult {
    pub fn selected(&self, cfg: &GafsConfig) -> Result<Vec<usize>> {
        top_features(&self.ranking, cfg.n_features.resolve(self.ranking.len())?)
    }
}

/// Builds the objective context for `x` (graph only when `gamma > 0`).
pub fn objective_context(
    x: &DataMatrix,
    cfg: &GafsConfig,
) -> Result<(ObjectiveContext, Option<NeighborGraph>)> {
    let graph = if cfg.gamma > 0.0 {
        Some(build_graph(x, cfg.neighbors)?)
    } else {
        None
    };
    let ctx = ObjectiveContext::with_epsilon(
        x.values().clone(),
        graph.as_ref().map(|g| g.laplacian().clone()),
        cfg.lambda,
        cfg.gamma,
        cfg.epsilon,
    )?;
    Ok((ctx, graph))
}

/// Runs graph construction, training and scoring on scaled data.
pub fn fit(x: &DataMatrix, cfg: &GafsConfig) -> Result<FitResult> {
    let (d, n, m) = (x.d(), x.n(), cfg.hidden_size);
    cfg.validate(d, n)?;

    let t0 = Instant::now();
    let (ctx, graph) = objective_context(x, cfg)?;
    let graph_time = t0.elapsed();

    let t1 = Instant::now();
    let init = init_params(d, m, cfg.seed);
    let terms = ctx.terms(&init)?;
    if let Some(term) = terms.non_finite_term() {
        return Err(GafsError::NonFiniteObjective { term });
    }
    let func = |v: &[f64]| -> (f64, Vec<f64>) {
        let p = ModelParams::unflatten(v, d, m).expect("optimizer preserves length");
        let (f, g) = ctx
            .value_and_gradient(&p)
            .expect("shapes fixed by construction");
        (f, g.flatten())
    };
    let (theta, trace) = minimize(func, init.flatten(), &cfg.optimizer)?;
    let params = ModelParams::unflatten(&theta, d, m)?;
    let optimize_time = t1.elapsed();

    let t2 = Instant::now();
    let ranking = FeatureRanking::from_scores(feature_scores(params.w1.view()));
    let score_time = t2.elapsed();

    Ok(FitResult {
        params,
        ranking,
        trace,
        graph,
        timings: PhaseTimings {
            graph: graph_time,
            optimize: optimize_time,
            score: score_time,
        },
    })
}

/// Number of encoder columns whose norm is below `threshold`.
pub fn near_zero_columns(params: &ModelParams, threshold: f64) -> usize {
    feature_scores(params.w1.view())
        .into_iter()
        .filter(|&v| v < threshold)
        .count()
}
