//! Dense dataset loading and feature scaling.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{GafsError, Result};

/// Default margin kept between scaled features and the sigmoid's asymptotes.
pub const DEFAULT_DELTA: f64 = 1e-3;

/// How samples are laid out in a text file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// One sample per line (the usual CSV convention).
    SamplesAsRows,
    /// One feature per line.
    SamplesAsColumns,
}

/// Observed range of one feature before scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub min: f64,
    pub max: f64,
}

/// A `d × n` dataset: rows are features, columns are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
    scaling: Option<(f64, Vec<FeatureRange>)>,
}

impl DataMatrix {
    /// Wraps a `d × n` matrix. Requires `d ≥ 1`, `n ≥ 2` and finite entries.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (d, n) = values.dim();
        if d == 0 || n == 0 {
            return Err(GafsError::Empty);
        }
        if n < 2 {
            return Err(GafsError::invalid(format!(
                "dataset needs at least 2 samples, got {n}"
            )));
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(GafsError::NonFinite {
                row: row + 1,
                col: col + 1,
                token: values[[row, col]].to_string(),
            });
        }
        Ok(Self {
            values,
            scaling: None,
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Number of features.
    pub fn d(&self) -> usize {
        self.values.nrows()
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.values.ncols()
    }

    /// Per-feature ranges recorded by [`scale_features`], if any.
    pub fn scaling(&self) -> Option<&[FeatureRange]> {
        self.scaling.as_ref().map(|(_, r)| r.as_slice())
    }

    /// Margin used by the most recent [`scale_features`] call.
    pub fn scaling_delta(&self) -> Option<f64> {
        self.scaling.as_ref().map(|(delta, _)| *delta)
    }

    /// Keeps only the listed feature rows, in the given order.
    pub fn select_features(&self, features: &[usize]) -> Result<DataMatrix> {
        if let Some(&bad) = features.iter().find(|&&f| f >= self.d()) {
            return Err(GafsError::invalid(format!(
                "feature index {} out of range 1..={}",
                bad + 1,
                self.d()
            )));
        }
        if features.is_empty() {
            return Err(GafsError::invalid("no features selected"));
        }
        let values = self.values.select(Axis(0), features);
        let scaling = self
            .scaling
            .as_ref()
            .map(|(delta, ranges)| (*delta, features.iter().map(|&f| ranges[f]).collect()));
        Ok(DataMatrix { values, scaling })
    }

    /// Undoes [`scale_features`]. Constant features come back as their
    /// recorded value. Returns a clone when no scaling is recorded.
    pub fn unscale(&self) -> DataMatrix {
        let Some((delta, ranges)) = &self.scaling else {
            return self.clone();
        };
        let span = 1.0 - 2.0 * delta;
        let mut values = self.values.clone();
        for (mut row, range) in values.rows_mut().into_iter().zip(ranges) {
            let width = range.max - range.min;
            if width > 0.0 {
                row.mapv_inplace(|v| range.min + (v - delta) / span * width);
            } else {
                row.fill(range.min);
            }
        }
        DataMatrix {
            values,
            scaling: None,
        }
    }
}

/// Reads a comma- or whitespace-delimited numeric file.
///
/// A first line consisting only of non-numeric tokens is treated as a
/// header and skipped. Whatever the file layout, the result is `d × n`.
pub fn load_matrix(path: impl AsRef<Path>, layout: Layout) -> Result<DataMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| GafsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_matrix(&text, layout)
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Parses delimited text; see [`load_matrix`].
pub fn parse_matrix(text: &str, layout: Layout) -> Result<DataMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut seen_first = false;
    for (lineno, line) in text.lines().enumerate() {
        let row_no = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields = split_fields(line);
        if !seen_first {
            seen_first = true;
            if fields.iter().all(|f| f.parse::<f64>().is_err()) {
                continue;
            }
        }
        let mut row = Vec::with_capacity(fields.len());
        for (c, tok) in fields.iter().enumerate() {
            let v: f64 = tok.parse().map_err(|_| GafsError::Parse {
                row: row_no,
                col: c + 1,
                token: tok.to_string(),
            })?;
            if !v.is_finite() {
                return Err(GafsError::NonFinite {
                    row: row_no,
                    col: c + 1,
                    token: tok.to_string(),
                });
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(GafsError::Ragged {
                    row: row_no,
                    expected: first.len(),
                    found: row.len(),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(GafsError::Empty);
    }
    let (r, c) = (rows.len(), rows[0].len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let m = Array2::from_shape_vec((r, c), flat).expect("rows have equal arity");
    let values = match layout {
        Layout::SamplesAsColumns => m,
        Layout::SamplesAsRows => m.reversed_axes().as_standard_layout().into_owned(),
    };
    DataMatrix::new(values)
}

/// Maps every feature row affinely onto `[delta, 1 - delta]`.
///
/// Constant features map to 0.5. The original `(min, max)` of each row is
/// kept so the transform can be undone with [`DataMatrix::unscale`].
pub fn scale_features(x: &DataMatrix, delta: f64) -> Result<DataMatrix> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(GafsError::invalid(format!(
            "scaling margin must lie in (0, 0.5), got {delta}"
        )));
    }
    let span = 1.0 - 2.0 * delta;
    let mut values = x.values.clone();
    let mut ranges = Vec::with_capacity(x.d());
    for mut row in values.rows_mut() {
        let min = row.iter().copied().fold(f64::INFINITY, f64::min);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ranges.push(FeatureRange { min, max });
        let width = max - min;
        if width > 0.0 {
            row.mapv_inplace(|v| delta + (v - min) / width * span);
        } else {
            row.fill(0.5);
        }
    }
    Ok(DataMatrix {
        values,
        scaling: Some((delta, ranges)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn rows_layout_transposes() {
        let x = parse_matrix("1,2\n3,4\n5,6", Layout::SamplesAsRows).unwrap();
        assert_eq!((x.d(), x.n()), (2, 3));
        assert_eq!(x.values().column(0).to_vec(), vec![1.0, 2.0]);
    }

    #[test]
    fn columns_layout_is_identity() {
        let x = parse_matrix("1,2\n3,4\n5,6", Layout::SamplesAsColumns).unwrap();
        assert_eq!((x.d(), x.n()), (3, 2));
        assert_eq!(x.values()[[2, 1]], 6.0);
    }

    #[test]
    fn whitespace_and_header() {
        let x = parse_matrix("a b c\n1 2 3\n4  5\t6\n", Layout::SamplesAsRows).unwrap();
        assert_eq!((x.d(), x.n()), (3, 2));
        assert_eq!(x.values()[[2, 1]], 6.0);
    }

    #[test]
    fn bad_token_reports_location() {
        let err = parse_matrix("1,2\n3,abc\n", Layout::SamplesAsRows).unwrap_err();
        match err {
            GafsError::Parse { row, col, token } => {
                assert_eq!((row, col, token.as_str()), (2, 2, "abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_and_nonfinite_rejected() {
        assert!(matches!(
            parse_matrix("1,2\n3\n", Layout::SamplesAsRows),
            Err(GafsError::Ragged {
                row: 2,
                expected: 2,
                found: 1
            })
        ));
        assert!(matches!(
            parse_matrix("1,2\n3,NaN\n", Layout::SamplesAsRows),
            Err(GafsError::NonFinite { row: 2, col: 2, .. })
        ));
        assert!(matches!(
            parse_matrix("1,2\n3,inf\n", Layout::SamplesAsRows),
            Err(GafsError::NonFinite { .. })
        ));
    }

    #[test]
    fn missing_file() {
        let err = load_matrix("/nonexistent/gafs.csv", Layout::SamplesAsRows).unwrap_err();
        assert_eq!(err.category(), "io");
    }

    #[test]
    fn single_sample_rejected() {
        assert!(parse_matrix("1,2,3\n", Layout::SamplesAsRows).is_err());
    }

    #[test]
    fn scale_endpoints() {
        let x = DataMatrix::new(array![[0.0, 10.0], [7.0, 7.0]]).unwrap();
        let s = scale_features(&x, 0.1).unwrap();
        assert!((s.values()[[0, 0]] - 0.1).abs() < 1e-15);
        assert!((s.values()[[0, 1]] - 0.9).abs() < 1e-15);
        assert_eq!(s.values().row(1).to_vec(), vec![0.5, 0.5]);
        assert_eq!(s.scaling().unwrap()[1], FeatureRange { min: 7.0, max: 7.0 });
    }

    #[test]
    fn scale_midpoint() {
        let x = DataMatrix::new(array![[-1.0, 0.0, 1.0]]).unwrap();
        let s = scale_features(&x, 0.1).unwrap();
        for (got, want) in s.values().iter().zip([0.1, 0.5, 0.9]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn scale_rejects_bad_delta() {
        let x = DataMatrix::new(array![[0.0, 1.0]]).unwrap();
        assert!(scale_features(&x, 0.0).is_err());
        assert!(scale_features(&x, 0.5).is_err());
    }

    fn matrix_strategy() -> impl Strategy<Value = Array2<f64>> {
        (1usize..6, 2usize..8).prop_flat_map(|(d, n)| {
            proptest::collection::vec(-1e3f64..1e3, d * n)
                .prop_map(move |v| Array2::from_shape_vec((d, n), v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn scaled_entries_in_range(m in matrix_strategy(), delta in 1e-4f64..0.4) {
            let s = scale_features(&DataMatrix::new(m).unwrap(), delta).unwrap();
            for &v in s.values() {
                prop_assert!(v >= delta - 1e-15 && v <= 1.0 - delta + 1e-15);
            }
        }

        #[test]
        fn unscale_round_trip(m in matrix_strategy()) {
            let x = DataMatrix::new(m).unwrap();
            let back = scale_features(&x, DEFAULT_DELTA).unwrap().unscale();
            for (row_a, row_b) in x.values().rows().into_iter().zip(back.values().rows()) {
                let scale = row_a.iter().fold(1.0f64, |a, v| a.max(v.abs()));
                for (a, b) in row_a.iter().zip(row_b.iter()) {
                    prop_assert!((a - b).abs() <= 1e-12 * scale);
                }
            }
        }

        #[test]
        fn scaling_idempotent(m in matrix_strategy()) {
            let once = scale_features(&DataMatrix::new(m).unwrap(), 0.01).unwrap();
            let twice = scale_features(&once, 0.01).unwrap();
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
