use std::io::{self, Write};
use std::path::PathBuf;

use clap::Args;
use gafs_core::data::DEFAULT_DELTA;
use gafs_core::eval::{evaluate_selection, EvalOptions};
use gafs_core::select::top_features;
use gafs_core::{DataMatrix, FeatureCount, FeatureRanking, GafsError, LabelVector, Split};

use crate::common::{
    load_label_file, load_ranking, load_scaled, resolve_split, write_metrics, write_with,
    MetricsBlock,
};
use crate::config::{pick, require, FileConfig, LayoutArg};
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Data matrix the ranking was computed on.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Class ids, one integer per line.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// ranking.txt written by `select`.
    #[arg(long)]
    pub ranking: Option<PathBuf>,
    /// Percentages of top-ranked features to evaluate (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub percent: Vec<f64>,
    /// k-means repetitions per percentage [default: 20].
    #[arg(long)]
    pub reps: Option<usize>,
    /// Seed of the first k-means repetition and of the random split [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train a softmax classifier on this random fraction of the samples.
    #[arg(long, conflicts_with = "split")]
    pub train_fraction: Option<f64>,
    /// Train mask file (one 1 = train / 0 = test per sample).
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Whether samples are rows or columns of the file [default: rows].
    #[arg(long, value_enum)]
    pub layout: Option<LayoutArg>,
    /// Margin of the per-feature rescaling to [delta, 1-delta] [default: 0.001].
    #[arg(long)]
    pub delta: Option<f64>,
    /// TOML settings file, or a manifest.json from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Metrics file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Evaluates the top `p`% of `ranking` for every `p` in `percents`.
pub fn evaluate_percents(
    x: &DataMatrix,
    labels: &LabelVector,
    ranking: &FeatureRanking,
    percents: &[f64],
    repetitions: usize,
    seed: u64,
    split: Option<Split>,
) -> CliResult<Vec<MetricsBlock>> {
    if ranking.len() != x.d() {
        return Err(GafsError::ShapeMismatch(format!(
            "ranking covers {} features but the data has {}",
            ranking.len(),
            x.d()
        ))
        .into());
    }
    let opts = EvalOptions {
        repetitions,
        seed,
        split,
        ..EvalOptions::default()
    };
    percents
        .iter()
        .map(|&p| {
            let n = FeatureCount::Percent(p).resolve(x.d())?;
            let features = top_features(ranking, n)?;
            let m = evaluate_selection(x, labels, &features, &opts)?;
            Ok(MetricsBlock::new(p, &m))
        })
        .collect()
}

pub fn run(args: EvaluateArgs) -> CliResult<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let data = require(pick(args.data, file.data.clone()), "data")?;
    let labels = require(pick(args.labels, file.labels.clone()), "labels")?;
    let ranking = require(pick(args.ranking, file.ranking.clone()), "ranking")?;
    let percents = if args.percent.is_empty() {
        require(file.percent.clone(), "percent")?.to_vec()
    } else {
        args.percent
    };
    let layout = pick(args.layout, file.layout).unwrap_or(LayoutArg::Rows);
    let delta = pick(args.delta, file.delta).unwrap_or(DEFAULT_DELTA);
    let reps = pick(args.reps, file.reps).unwrap_or(20);
    let seed = pick(args.seed, file.seed).unwrap_or(0);
    let (split_file, fraction) = if args.split.is_some() || args.train_fraction.is_some() {
        (args.split, args.train_fraction)
    } else {
        (file.split.clone(), file.train_fraction)
    };

    let x = load_scaled(&data, layout.into(), delta)?;
    let y = load_label_file(&labels)?;
    if y.len() != x.n() {
        return Err(CliError::Core(GafsError::ShapeMismatch(format!(
            "data has {} samples but {} labels",
            x.n(),
            y.len()
        ))));
    }
    let r = load_ranking(&ranking)?;
    let split = resolve_split(split_file.as_deref(), fraction, x.n(), seed)?;
    let blocks = evaluate_percents(&x, &y, &r, &percents, reps, seed, split)?;

    match &args.out {
        Some(path) => {
            write_with(path, |b| write_metrics(b, &blocks))?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_metrics(&mut lock, &blocks)
                .and_then(|_| lock.flush())
                .map_err(CliError::io("<stdout>"))?;
        }
    }
    Ok(())
}
