//! Cartesian parameter sweep over (m, λ, γ) with every percentage of
//! selected features evaluated per fitted model.
//!
//! Each (m, λ, γ) cell owns a directory `cell-NNNN` holding its ranking,
//! checkpoint, trace, metrics and manifest. The manifest is written last
//! and marks the cell complete, so an interrupted sweep resumes by
//! skipping cells whose manifest matches the current settings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::Args;
use gafs_core::data::DEFAULT_DELTA;
use gafs_core::select::{fit, FeatureCount, GafsConfig};
use gafs_core::{DataMatrix, LabelVector, LbfgsConfig};

use crate::commands::evaluate::evaluate_percents;
use crate::commands::select::{optimization_summary, optimizer};
use crate::common::{
    create_dir, load_label_file, load_scaled, parse_metrics, resolve_split, write_fit_artifacts,
    write_metrics, write_with, MetricsBlock,
};
use crate::config::{absolute, pick, require, FileConfig, LayoutArg, OneOrMany};
use crate::error::{CliError, CliResult};
use crate::manifest::{millis, FileDigest, RunManifest, Timings};

pub const DEFAULT_PERCENTS: [f64; 12] = [
    2.0, 4.0, 6.0, 8.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0,
];
pub const DEFAULT_HIDDEN: [usize; 4] = [10, 20, 30, 40];
pub const DEFAULT_LAMBDAS: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];
pub const DEFAULT_GAMMAS: [f64; 5] = [0.0, 1e-4, 5e-4, 1e-3, 5e-3];

/// How many pending cells one invocation may compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Cells(usize),
    All,
}

impl FromStr for Budget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            return Ok(Budget::All);
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!(
                "expected a positive cell count or `all`, got {s:?}"
            )),
            Ok(n) => Ok(Budget::Cells(n)),
        }
    }
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Data matrix (CSV or whitespace separated).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Class ids, one integer per line.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Percentages of features to evaluate [default: 2,4,6,8,10,20,...,80].
    #[arg(long, value_delimiter = ',')]
    pub percent: Vec<f64>,
    /// Hidden sizes [default: 10,20,30,40].
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<usize>,
    /// ℓ2,1 weights [default: 1e-4,1e-3,1e-2,1e-1,1].
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub lambda: Vec<f64>,
    /// Graph weights [default: 0,1e-4,5e-4,1e-3,5e-3].
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub gamma: Vec<f64>,
    /// Neighbors per sample [default: 5].
    #[arg(long)]
    pub k: Option<usize>,
    /// Base seed; cell i uses `seed XOR i` [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// k-means repetitions [default: 20].
    #[arg(long)]
    pub reps: Option<usize>,
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
    /// Maximum L-BFGS iterations per cell [default: 400].
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// L-BFGS history length [default: 100].
    #[arg(long)]
    pub memory: Option<usize>,
    /// Relative objective change that stops training [default: 1e-5].
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Cells to compute in this invocation: a count or `all`.
    #[arg(long)]
    pub budget: Budget,
    /// Worker threads [default: 1].
    #[arg(long, env = "GAFS_WORKERS")]
    pub workers: Option<usize>,
    /// TOML settings file, or a manifest.json from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub m: usize,
    pub lambda: f64,
    pub gamma: f64,
}

fn axis<T: Clone>(flag: Vec<T>, file: &Option<OneOrMany<T>>, default: &[T]) -> Vec<T> {
    if !flag.is_empty() {
        flag
    } else if let Some(v) = file {
        v.to_vec()
    } else {
        default.to_vec()
    }
}

/// Cells in `m`-major, then `λ`, then `γ` order.
pub fn cells(ms: &[usize], lambdas: &[f64], gammas: &[f64]) -> Vec<Cell> {
    let mut out = Vec::new();
    for &m in ms {
        for &lambda in lambdas {
            for &gamma in gammas {
                out.push(Cell {
                    index: out.len(),
                    m,
                    lambda,
                    gamma,
                });
            }
        }
    }
    out
}

struct Sweep {
    data: PathBuf,
    labels: PathBuf,
    split_file: Option<PathBuf>,
    train_fraction: Option<f64>,
    layout: LayoutArg,
    delta: f64,
    percents: Vec<f64>,
    k: usize,
    seed: u64,
    reps: usize,
    optimizer: LbfgsConfig,
    out: PathBuf,
    x: DataMatrix,
    y: LabelVector,
    inputs: Vec<FileDigest>,
}

impl Sweep {
    fn cell_dir(&self, cell: &Cell) -> PathBuf {
        self.out.join(format!("cell-{:04}", cell.index))
    }

    fn cell_seed(&self, cell: &Cell) -> u64 {
        self.seed ^ cell.index as u64
    }

    /// Settings that reproduce this cell as a one-cell sweep.
    fn cell_config(&self, cell: &Cell) -> FileConfig {
        FileConfig {
            data: Some(self.data.clone()),
            labels: Some(self.labels.clone()),
            split: self.split_file.clone(),
            layout: Some(self.layout),
            delta: Some(self.delta),
            m: Some(OneOrMany::One(cell.m)),
            k: Some(self.k),
            lambda: Some(OneOrMany::One(cell.lambda)),
            gamma: Some(OneOrMany::One(cell.gamma)),
            percent: Some(OneOrMany::Many(self.percents.clone())),
            seed: Some(self.cell_seed(cell)),
            max_iter: Some(self.optimizer.max_iterations),
            memory: Some(self.optimizer.memory),
            rel_tol: Some(self.optimizer.relative_tolerance),
            reps: Some(self.reps),
            train_fraction: self.train_fraction,
            ..FileConfig::default()
        }
    }

    fn is_complete(&self, cell: &Cell) -> CliResult<bool> {
        let path = self.cell_dir(cell).join("manifest.json");
        if !path.exists() {
            return Ok(false);
        }
        let manifest = RunManifest::read(&path)?;
        if manifest.config != self.cell_config(cell) {
            return Err(CliError::Grid(format!(
                "{} holds results for different settings; use a fresh --out",
                path.display()
            )));
        }
        Ok(true)
    }

    fn run_cell(&self, cell: &Cell) -> CliResult<()> {
        let dir = self.cell_dir(cell);
        create_dir(&dir)?;
        let seed = self.cell_seed(cell);
        let cfg = GafsConfig {
            hidden_size: cell.m,
            neighbors: self.k,
            lambda: cell.lambda,
            gamma: cell.gamma,
            seed,
            optimizer: self.optimizer,
            n_features: FeatureCount::Percent(self.percents[0]),
            ..GafsConfig::default()
        };
        let result = fit(&self.x, &cfg)?;
        let mut outputs = write_fit_artifacts(&dir, &result, false)?;

        let t = Instant::now();
        let split = resolve_split(
            self.split_file.as_deref(),
            self.train_fraction,
            self.x.n(),
            seed,
        )?;
        let blocks = evaluate_percents(
            &self.x,
            &self.y,
            &result.ranking,
            &self.percents,
            self.reps,
            seed,
            split,
        )?;
        let evaluate_ms = millis(t.elapsed());
        outputs.push(write_with(&dir.join("metrics.txt"), |b| {
            write_metrics(b, &blocks)
        })?);

        let manifest = RunManifest {
            command: "grid-cell".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: self.cell_config(cell),
            inputs: self.inputs.clone(),
            outputs: outputs
                .iter()
                .map(|p| FileDigest::of(p))
                .collect::<CliResult<_>>()?,
            optimization: Some(optimization_summary(&result)),
            timings: Timings {
                graph_ms: millis(result.timings.graph),
                optimize_ms: millis(result.timings.optimize),
                score_ms: millis(result.timings.score),
                evaluate_ms: Some(evaluate_ms),
            },
        };
        manifest.write(&dir.join("manifest.json"))
    }

    fn read_cell_metrics(&self, cell: &Cell) -> CliResult<Vec<MetricsBlock>> {
        let path = self.cell_dir(cell).join("metrics.txt");
        let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
        parse_metrics(&text).map_err(|e| CliError::Grid(format!("{}: {e}", path.display())))
    }
}

/// Runs `cells` on `workers` threads; returns the first error in cell order.
fn run_parallel(sweep: &Sweep, todo: &[Cell], workers: usize) -> CliResult<()> {
    let next = AtomicUsize::new(0);
    let errors: Mutex<Vec<(usize, CliError)>> = Mutex::new(Vec::new());
    let done = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers.min(todo.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cell) = todo.get(i) else { break };
                match sweep.run_cell(cell) {
                    Ok(()) => {
                        let n = done.fetch_add(1, Ordering::SeqCst) + 1;
                        eprintln!(
                            "cell {:04} done (m={}, lambda={}, gamma={}) [{n}/{}]",
                            cell.index,
                            cell.m,
                            cell.lambda,
                            cell.gamma,
                            todo.len()
                        );
                    }
                    Err(e) => errors
                        .lock()
                        .expect("no panics while locked")
                        .push((cell.index, e)),
                }
            });
        }
    });
    let mut errors = errors.into_inner().expect("threads joined");
    errors.sort_by_key(|(i, _)| *i);
    match errors.into_iter().next() {
        Some((_, e)) => Err(e),
        None => Ok(()),
    }
}

fn write_summary(out: &Path, rows: &[(Cell, MetricsBlock)]) -> CliResult<()> {
    let mut table = String::from(
        "cell m lambda gamma percent n_features acc_mean nmi_mean classification_accuracy\n",
    );
    for (c, b) in rows {
        let ca = b
            .classification_accuracy
            .map_or("none".to_string(), |a| format!("{a:.16e}"));
        let _ = writeln!(
            table,
            "{} {} {} {} {} {} {:.16e} {:.16e} {ca}",
            c.index, c.m, c.lambda, c.gamma, b.percent, b.n_features, b.acc_mean, b.nmi_mean
        );
    }
    let path = out.join("grid_metrics.txt");
    fs::write(&path, table).map_err(CliError::io(&path))?;

    type Getter = fn(&MetricsBlock) -> Option<f64>;
    let metrics: [(&str, Getter); 3] = [
        ("acc_mean", |b| Some(b.acc_mean)),
        ("nmi_mean", |b| Some(b.nmi_mean)),
        ("classification_accuracy", |b| b.classification_accuracy),
    ];
    let mut best = String::from("metric value cell m lambda gamma percent\n");
    for (name, get) in metrics {
        let mut top: Option<(f64, &Cell, &MetricsBlock)> = None;
        for (c, b) in rows {
            if let Some(v) = get(b) {
                if top.is_none_or(|(t, _, _)| v > t) {
                    top = Some((v, c, b));
                }
            }
        }
        if let Some((v, c, b)) = top {
            let _ = writeln!(
                best,
                "{name} {v:.16e} {} {} {} {} {}",
                c.index, c.m, c.lambda, c.gamma, b.percent
            );
        }
    }
    let path = out.join("best.txt");
    fs::write(&path, best).map_err(CliError::io(&path))
}

pub fn run(args: GridArgs) -> CliResult<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let data = absolute(require(pick(args.data, file.data.clone()), "data")?)?;
    let labels = absolute(require(pick(args.labels, file.labels.clone()), "labels")?)?;
    let percents = axis(args.percent, &file.percent, &DEFAULT_PERCENTS);
    let ms = axis(args.m, &file.m, &DEFAULT_HIDDEN);
    let lambdas = axis(args.lambda, &file.lambda, &DEFAULT_LAMBDAS);
    let gammas = axis(args.gamma, &file.gamma, &DEFAULT_GAMMAS);
    if percents.is_empty() || ms.is_empty() || lambdas.is_empty() || gammas.is_empty() {
        return Err(CliError::Grid(
            "empty grid: every axis needs at least one value".into(),
        ));
    }
    let (split_file, train_fraction) = if args.split.is_some() || args.train_fraction.is_some() {
        (args.split, args.train_fraction)
    } else {
        (file.split.clone(), file.train_fraction)
    };
    let split_file = split_file.map(absolute).transpose()?;
    let workers = pick(args.workers, file.workers).unwrap_or(1);
    if workers == 0 {
        return Err(CliError::Usage("--workers must be >= 1".into()));
    }

    let layout = pick(args.layout, file.layout).unwrap_or(LayoutArg::Rows);
    let delta = pick(args.delta, file.delta).unwrap_or(DEFAULT_DELTA);
    let x = load_scaled(&data, layout.into(), delta)?;
    let y = load_label_file(&labels)?;
    let mut inputs = vec![FileDigest::of(&data)?, FileDigest::of(&labels)?];
    if let Some(s) = &split_file {
        inputs.push(FileDigest::of(s)?);
    }
    let sweep = Sweep {
        data,
        labels,
        split_file,
        train_fraction,
        layout,
        delta,
        percents,
        k: pick(args.k, file.k).unwrap_or(GafsConfig::default().neighbors),
        seed: pick(args.seed, file.seed).unwrap_or(0),
        reps: pick(args.reps, file.reps).unwrap_or(20),
        optimizer: optimizer(&file, args.max_iter, args.memory, args.rel_tol),
        out: args.out,
        x,
        y,
        inputs,
    };

    // Validate every setting once up front so a bad value fails before
    // any cell runs.
    let all = cells(&ms, &lambdas, &gammas);
    for cell in &all {
        let cfg = GafsConfig {
            hidden_size: cell.m,
            neighbors: sweep.k,
            lambda: cell.lambda,
            gamma: cell.gamma,
            optimizer: sweep.optimizer,
            ..GafsConfig::default()
        };
        cfg.validate(sweep.x.d(), sweep.x.n())?;
    }
    for &p in &sweep.percents {
        FeatureCount::Percent(p).resolve(sweep.x.d())?;
    }
    if sweep.y.len() != sweep.x.n() {
        return Err(CliError::Core(gafs_core::GafsError::ShapeMismatch(
            format!(
                "data has {} samples but {} labels",
                sweep.x.n(),
                sweep.y.len()
            ),
        )));
    }

    create_dir(&sweep.out)?;
    let mut pending = Vec::new();
    for cell in &all {
        if !sweep.is_complete(cell)? {
            pending.push(*cell);
        }
    }
    let todo: Vec<Cell> = match args.budget {
        Budget::All => pending.clone(),
        Budget::Cells(n) => pending.iter().take(n).copied().collect(),
    };
    eprintln!(
        "{} cells, {} already complete, running {} on {workers} worker(s)",
        all.len(),
        all.len() - pending.len(),
        todo.len()
    );
    run_parallel(&sweep, &todo, workers)?;

    let mut rows = Vec::new();
    for cell in &all {
        if sweep.is_complete(cell)? {
            for b in sweep.read_cell_metrics(cell)? {
                rows.push((*cell, b));
            }
        }
    }
    write_summary(&sweep.out, &rows)?;
    let remaining = pending.len() - todo.len();
    if remaining > 0 {
        eprintln!("{remaining} cell(s) left; rerun with the same flags to continue");
    }
    Ok(())
}
