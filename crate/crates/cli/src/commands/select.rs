use std::path::PathBuf;

use clap::Args;
use gafs_core::data::DEFAULT_DELTA;
use gafs_core::select::{fit, FeatureCount, GafsConfig};
use gafs_core::LbfgsConfig;

use crate::common::{create_dir, load_scaled, write_fit_artifacts, write_with};
use crate::config::{absolute, pick, require, single, FileConfig, LayoutArg, OneOrMany};
use crate::error::CliResult;
use crate::manifest::{millis, FileDigest, Optimization, RunManifest, Timings};

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Data matrix (CSV or whitespace separated).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Whether samples are rows or columns of the file [default: rows].
    #[arg(long, value_enum)]
    pub layout: Option<LayoutArg>,
    /// Hidden layer size [default: 10].
    #[arg(long)]
    pub m: Option<usize>,
    /// Neighbors per sample in the kNN graph [default: 5].
    #[arg(long)]
    pub k: Option<usize>,
    /// Weight of the ℓ2,1 penalty [default: 0.01].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Weight of the graph penalty; 0 skips the graph [default: 0.001].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Number of features to select.
    #[arg(long, conflicts_with = "percent")]
    pub top: Option<usize>,
    /// Percentage of features to select [default: 20].
    #[arg(long)]
    pub percent: Option<f64>,
    /// Seed for weight initialization [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Margin of the per-feature rescaling to [delta, 1-delta] [default: 0.001].
    #[arg(long)]
    pub delta: Option<f64>,
    /// Maximum L-BFGS iterations [default: 400].
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// L-BFGS history length [default: 100].
    #[arg(long)]
    pub memory: Option<usize>,
    /// Relative objective change that stops training [default: 1e-5].
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Also write the kNN graph edges to graph.txt.
    #[arg(long)]
    pub dump_graph: bool,
    /// TOML settings file, or a manifest.json from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Fully resolved settings of a `select` run.
pub struct SelectSettings {
    pub resolved: FileConfig,
    pub data: PathBuf,
    pub layout: LayoutArg,
    pub delta: f64,
    pub gafs: GafsConfig,
}

pub fn optimizer(
    file: &FileConfig,
    max_iter: Option<usize>,
    memory: Option<usize>,
    rel_tol: Option<f64>,
) -> LbfgsConfig {
    let d = LbfgsConfig::default();
    LbfgsConfig {
        max_iterations: pick(max_iter, file.max_iter).unwrap_or(d.max_iterations),
        memory: pick(memory, file.memory).unwrap_or(d.memory),
        relative_tolerance: pick(rel_tol, file.rel_tol).unwrap_or(d.relative_tolerance),
        ..d
    }
}

impl SelectArgs {
    pub fn resolve(self) -> CliResult<SelectSettings> {
        let file = FileConfig::load(self.config.as_deref())?;
        let defaults = GafsConfig::default();
        let data = absolute(require(pick(self.data, file.data.clone()), "data")?)?;
        let layout = pick(self.layout, file.layout).unwrap_or(LayoutArg::Rows);
        let delta = pick(self.delta, file.delta).unwrap_or(DEFAULT_DELTA);
        let n_features = match (self.top, self.percent) {
            (Some(t), _) => FeatureCount::Count(t),
            (None, Some(p)) => FeatureCount::Percent(p),
            (None, None) => match (file.top, single(file.percent.clone(), "percent")?) {
                (Some(t), _) => FeatureCount::Count(t),
                (None, Some(p)) => FeatureCount::Percent(p),
                (None, None) => defaults.n_features,
            },
        };
        let gafs = GafsConfig {
            hidden_size: pick(self.m, single(file.m.clone(), "m")?).unwrap_or(defaults.hidden_size),
            neighbors: pick(self.k, file.k).unwrap_or(defaults.neighbors),
            lambda: pick(self.lambda, single(file.lambda.clone(), "lambda")?)
                .unwrap_or(defaults.lambda),
            gamma: pick(self.gamma, single(file.gamma.clone(), "gamma")?).unwrap_or(defaults.gamma),
            seed: pick(self.seed, file.seed).unwrap_or(defaults.seed),
            optimizer: optimizer(&file, self.max_iter, self.memory, self.rel_tol),
            n_features,
            ..defaults
        };
        let (top, percent) = match n_features {
            FeatureCount::Count(t) => (Some(t), None),
            FeatureCount::Percent(p) => (None, Some(OneOrMany::One(p))),
        };
        let resolved = FileConfig {
            data: Some(data.clone()),
            layout: Some(layout),
            delta: Some(delta),
            m: Some(OneOrMany::One(gafs.hidden_size)),
            k: Some(gafs.neighbors),
            lambda: Some(OneOrMany::One(gafs.lambda)),
            gamma: Some(OneOrMany::One(gafs.gamma)),
            top,
            percent,
            seed: Some(gafs.seed),
            max_iter: Some(gafs.optimizer.max_iterations),
            memory: Some(gafs.optimizer.memory),
            rel_tol: Some(gafs.optimizer.relative_tolerance),
            ..FileConfig::default()
        };
        Ok(SelectSettings {
            resolved,
            data,
            layout,
            delta,
            gafs,
        })
    }
}

pub fn run(args: SelectArgs) -> CliResult<()> {
    let out = args.out.clone();
    let dump_graph = args.dump_graph;
    let s = args.resolve()?;
    let x = load_scaled(&s.data, s.layout.into(), s.delta)?;
    let result = fit(&x, &s.gafs)?;
    let selected = result.selected(&s.gafs)?;

    create_dir(&out)?;
    let mut outputs = write_fit_artifacts(&out, &result, dump_graph)?;
    outputs.push(write_with(&out.join("selected.txt"), |b| {
        use std::io::Write;
        selected.iter().try_for_each(|f| writeln!(b, "{}", f + 1))
    })?);

    let manifest = RunManifest {
        command: "select".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: s.resolved,
        inputs: vec![FileDigest::of(&s.data)?],
        outputs: outputs
            .iter()
            .map(|p| FileDigest::of(p))
            .collect::<CliResult<_>>()?,
        optimization: Some(optimization_summary(&result)),
        timings: Timings {
            graph_ms: millis(result.timings.graph),
            optimize_ms: millis(result.timings.optimize),
            score_ms: millis(result.timings.score),
            evaluate_ms: None,
        },
    };
    manifest.write(&out.join("manifest.json"))?;
    eprintln!(
        "selected {} of {} features ({} iterations, {}), wrote {}",
        selected.len(),
        x.d(),
        result.trace.iterations(),
        result.trace.termination,
        out.display()
    );
    Ok(())
}

pub fn optimization_summary(result: &gafs_core::FitResult) -> Optimization {
    Optimization {
        iterations: result.trace.iterations(),
        evaluations: result.trace.evaluations,
        initial_objective: result.trace.objective[0],
        final_objective: result.trace.final_objective(),
        termination: result.trace.termination.to_string(),
    }
}
