use std::fs;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use gafs_core::data::{load_matrix, scale_features};
use gafs_core::eval::{load_labels, SelectionMetrics};
use gafs_core::{DataMatrix, FeatureRanking, FitResult, LabelVector, Layout, Split};

use crate::error::{CliError, CliResult};

/// Loads a matrix and rescales every feature to `[delta, 1 - delta]`.
pub fn load_scaled(path: &Path, layout: Layout, delta: f64) -> CliResult<DataMatrix> {
    let raw = load_matrix(path, layout)?;
    Ok(scale_features(&raw, delta)?)
}

pub fn load_ranking(path: &Path) -> CliResult<FeatureRanking> {
    let f = fs::File::open(path).map_err(CliError::io(path))?;
    Ok(FeatureRanking::read_text(BufReader::new(f))?)
}

pub fn load_label_file(path: &Path) -> CliResult<LabelVector> {
    Ok(load_labels(path)?)
}

/// Train mask file: one `1` (train) or `0` (test) per sample.
pub fn load_split(path: &Path) -> CliResult<Split> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut mask = Vec::new();
    for (i, line) in text.lines().enumerate() {
        match line.trim() {
            "" => {}
            "1" => mask.push(true),
            "0" => mask.push(false),
            other => {
                return Err(CliError::Config(format!(
                    "{} line {}: expected 0 or 1, got {other:?}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(Split::from_mask(&mask)?)
}

/// Resolves the classifier split, if any, for `n` samples.
pub fn resolve_split(
    split_file: Option<&Path>,
    train_fraction: Option<f64>,
    n: usize,
    seed: u64,
) -> CliResult<Option<Split>> {
    match (split_file, train_fraction) {
        (Some(_), Some(_)) => Err(CliError::Usage(
            "--split and --train-fraction are mutually exclusive".into(),
        )),
        (Some(p), None) => Ok(Some(load_split(p)?)),
        (None, Some(f)) => Ok(Some(Split::random(n, f, seed)?)),
        (None, None) => Ok(None),
    }
}

/// Renders with `render` and writes the bytes to `path`.
pub fn write_with<F>(path: &Path, render: F) -> CliResult<PathBuf>
where
    F: FnOnce(&mut Vec<u8>) -> io::Result<()>,
{
    let mut buf = Vec::new();
    render(&mut buf).map_err(CliError::io(path))?;
    fs::write(path, buf).map_err(CliError::io(path))?;
    Ok(path.to_path_buf())
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(CliError::io(path))
}

/// Writes ranking, checkpoint and trace (and the graph, if asked) into
/// `dir`, returning the paths in write order.
pub fn write_fit_artifacts(
    dir: &Path,
    fit: &FitResult,
    dump_graph: bool,
) -> CliResult<Vec<PathBuf>> {
    let mut out = vec![
        write_with(&dir.join("ranking.txt"), |b| fit.ranking.write_text(b))?,
        write_with(&dir.join("params.txt"), |b| fit.params.write_checkpoint(b))?,
        write_with(&dir.join("trace.txt"), |b| fit.trace.write_text(b))?,
    ];
    if dump_graph {
        if let Some(g) = &fit.graph {
            out.push(write_with(&dir.join("graph.txt"), |b| g.write_edges(b))?);
        }
    }
    Ok(out)
}

/// One block of a metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsBlock {
    pub percent: f64,
    pub acc_mean: f64,
    pub nmi_mean: f64,
    pub classification_accuracy: Option<f64>,
    pub n_features: usize,
    pub seed_count: usize,
}

impl MetricsBlock {
    pub fn new(percent: f64, m: &SelectionMetrics) -> Self {
        Self {
            percent,
            acc_mean: m.acc_mean,
            nmi_mean: m.nmi_mean,
            classification_accuracy: m.classification_accuracy,
            n_features: m.n_features,
            seed_count: m.seed_count,
        }
    }
}

/// Blocks of `key: value` lines, separated by blank lines.
pub fn write_metrics<W: io::Write>(mut out: W, blocks: &[MetricsBlock]) -> io::Result<()> {
    for (i, b) in blocks.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        writeln!(out, "percent: {}", b.percent)?;
        writeln!(out, "acc_mean: {:.16e}", b.acc_mean)?;
        writeln!(out, "nmi_mean: {:.16e}", b.nmi_mean)?;
        match b.classification_accuracy {
            Some(a) => writeln!(out, "classification_accuracy: {a:.16e}")?,
            None => writeln!(out, "classification_accuracy: none")?,
        }
        writeln!(out, "n_features: {}", b.n_features)?;
        writeln!(out, "seed_count: {}", b.seed_count)?;
    }
    Ok(())
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsBlock>, String> {
    let mut blocks = Vec::new();
    for chunk in text.split("\n\n").filter(|c| !c.trim().is_empty()) {
        let mut get = {
            let mut lines = chunk.lines().filter(|l| !l.trim().is_empty());
            move |key: &str| -> Result<String, String> {
                let line = lines.next().ok_or(format!("missing `{key}`"))?;
                let (k, v) = line
                    .split_once(':')
                    .ok_or(format!("malformed line {line:?}"))?;
                if k.trim() != key {
                    return Err(format!("expected `{key}`, found `{}`", k.trim()));
                }
                Ok(v.trim().to_string())
            }
        };
        let num = |s: String| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
        let int = |s: String| s.parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
        let percent = num(get("percent")?)?;
        let acc_mean = num(get("acc_mean")?)?;
        let nmi_mean = num(get("nmi_mean")?)?;
        let ca = get("classification_accuracy")?;
        let classification_accuracy = if ca == "none" { None } else { Some(num(ca)?) };
        blocks.push(MetricsBlock {
            percent,
            acc_mean,
            nmi_mean,
            classification_accuracy,
            n_features: int(get("n_features")?)?,
            seed_count: int(get("seed_count")?)?,
        });
    }
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_round_trip() {
        let blocks = vec![
            MetricsBlock {
                percent: 2.5,
                acc_mean: 0.1 + 0.2,
                nmi_mean: 1.0 / 3.0,
                classification_accuracy: None,
                n_features: 3,
                seed_count: 20,
            },
            MetricsBlock {
                percent: 100.0,
                acc_mean: 1.0,
                nmi_mean: 0.0,
                classification_accuracy: Some(0.75),
                n_features: 100,
                seed_count: 1,
            },
        ];
        let mut buf = Vec::new();
        write_metrics(&mut buf, &blocks).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("percent: 2.5\nacc_mean: "));
        assert_eq!(parse_metrics(&text).unwrap(), blocks);
    }

    #[test]
    fn malformed_metrics() {
        assert!(parse_metrics("percent: 1\nnmi_mean: 2\n").is_err());
    }
}
