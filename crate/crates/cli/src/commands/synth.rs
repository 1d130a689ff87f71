use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use gafs_core::synthetic::{generate, SyntheticSpec};

use crate::common::{create_dir, write_with};
use crate::error::CliResult;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of samples.
    #[arg(long, default_value_t = 300)]
    pub samples: usize,
    /// Features that carry the cluster structure.
    #[arg(long, default_value_t = 10)]
    pub informative: usize,
    /// Uniform noise features.
    #[arg(long, default_value_t = 90)]
    pub noise: usize,
    /// Number of clusters.
    #[arg(long, default_value_t = 3)]
    pub clusters: usize,
    /// Gap between adjacent cluster centers, in standard deviations.
    #[arg(long, default_value_t = 8.0)]
    pub separation: f64,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for data.csv, labels.txt and informative.txt.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: SynthArgs) -> CliResult<()> {
    let spec = SyntheticSpec {
        n_samples: args.samples,
        n_informative: args.informative,
        n_noise: args.noise,
        n_clusters: args.clusters,
        separation: args.separation,
        ..SyntheticSpec::default()
    };
    let s = generate(&spec, args.seed)?;
    create_dir(&args.out)?;
    let values = s.data.values();
    write_with(&args.out.join("data.csv"), |b| {
        for sample in values.columns() {
            let row: Vec<String> = sample.iter().map(|v| format!("{v:.12e}")).collect();
            writeln!(b, "{}", row.join(","))?;
        }
        Ok(())
    })?;
    write_with(&args.out.join("labels.txt"), |b| {
        s.labels
            .ids()
            .iter()
            .try_for_each(|c| writeln!(b, "{}", c + 1))
    })?;
    write_with(&args.out.join("informative.txt"), |b| {
        s.informative
            .iter()
            .try_for_each(|f| writeln!(b, "{}", f + 1))
    })?;
    eprintln!(
        "wrote {} samples x {} features to {}",
        spec.n_samples,
        spec.n_informative + spec.n_noise,
        args.out.display()
    );
    Ok(())
}
