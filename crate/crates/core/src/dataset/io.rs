//! CSV ingestion and emission.
//!
//! RFC-4180-style CSV, UTF-8, `.` decimal separator. The header row is
//! optional; the label column may be addressed by name (header required) or
//! zero-based index. Values are written in Rust's shortest round-trip form,
//! so a save/load cycle reproduces the matrix bit-exactly.

use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::error::{Error, Result};

/// How to locate the label column of a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

/// Load a dataset from a CSV file.
pub fn load_csv(
    path: impl AsRef<Path>,
    has_header: bool,
    label: Option<&LabelColumn>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(csv_io_error)?;

    let mut records = reader.records();
    let header: Option<Vec<String>> = if has_header {
        match records.next() {
            Some(rec) => Some(
                rec.map_err(csv_io_error)?
                    .iter()
                    .map(str::to_string)
                    .collect(),
            ),
            None => return Err(Error::EmptyInput("csv file")),
        }
    } else {
        None
    };

    let mut width: Option<usize> = header.as_ref().map(|h| h.len());
    let label_index = match label {
        None => None,
        Some(LabelColumn::Index(i)) => Some(*i),
        Some(LabelColumn::Name(name)) => {
            let header = header.as_ref().ok_or_else(|| {
                Error::InvalidArgument(
                    "label column by name requires a header row".into(),
                )
            })?;
            Some(header.iter().position(|h| h == name).ok_or_else(|| {
                Error::InvalidArgument(format!("label column {name:?} not in header"))
            })?)
        }
    };

    let mut values: Vec<f64> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut n_rows = 0usize;
    for (row, rec) in records.enumerate() {
        let rec = rec.map_err(csv_io_error)?;
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::RaggedRow {
                row,
                got: rec.len(),
                expected: w,
            });
        }
        if let Some(li) = label_index {
            if li >= w {
                return Err(Error::InvalidArgument(format!(
                    "label column index {li} out of range (width {w})"
                )));
            }
        }
        for (col, cell) in rec.iter().enumerate() {
            if Some(col) == label_index {
                labels.push(cell.to_string());
                continue;
            }
            let parsed: f64 = cell.trim().parse().map_err(|e| Error::Parse {
                row,
                column: col,
                name: column_name(&header, col),
                message: format!("{e}: {cell:?}"),
            })?;
            if !parsed.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: col,
                    name: column_name(&header, col),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            values.push(parsed);
        }
        n_rows += 1;
    }

    if n_rows == 0 {
        return Err(Error::EmptyInput("csv file"));
    }
    let w = width.unwrap_or(0);
    let d = w - usize::from(label_index.is_some());
    if d == 0 {
        return Err(Error::EmptyInput("csv feature columns"));
    }
    let x = Array2::from_shape_vec((n_rows, d), values)
        .expect("row width is checked above");

    let feature_names: Option<Vec<String>> = header.map(|h| {
        h.into_iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != label_index)
            .map(|(_, name)| name)
            .collect()
    });

    match label_index {
        Some(_) => Dataset::with_labels(x, &labels, feature_names),
        None => Dataset::new(x, feature_names),
    }
}

fn column_name(header: &Option<Vec<String>>, col: usize) -> String {
    header
        .as_ref()
        .and_then(|h| h.get(col).cloned())
        .unwrap_or_else(|| format!("column {col}"))
}

fn csv_io_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv error: {other:?}")),
    }
}

/// Write a dataset as CSV with a header row. Labeled datasets gain a final
/// `label` column holding the class names.
pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref()).map_err(csv_io_error)?;
    let mut header: Vec<String> = ds.feature_names().to_vec();
    if ds.is_labeled() {
        header.push("label".to_string());
    }
    writer.write_record(&header).map_err(csv_io_error)?;
    for i in 0..ds.n() {
        let mut record: Vec<String> = (0..ds.d()).map(|j| format!("{}", ds.x()[[i, j]])).collect();
        if let Some(codes) = ds.labels() {
            record.push(ds.class_names()[codes[i]].clone());
        }
        writer.write_record(&record).map_err(csv_io_error)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_numeric_csv_with_header() {
        let f = write_temp("a,b\n1,2\n3,4\n5,6\n");
        let ds = load_csv(f.path(), true, None).unwrap();
        assert_eq!((ds.n(), ds.d()), (3, 2));
        assert!(!ds.is_labeled());
        assert_eq!(ds.feature_names(), ["a", "b"]);
    }

    #[test]
    fn loads_label_column_by_name() {
        let f = write_temp("x,y\n1,a\n2,b\n3,a\n");
        let ds = load_csv(f.path(), true, Some(&LabelColumn::Name("y".into()))).unwrap();
        assert_eq!(ds.class_names(), ["a", "b"]);
        assert_eq!(ds.labels().unwrap(), &[0, 1, 0]);
        assert_eq!(ds.d(), 1);
    }

    #[test]
    fn loads_label_column_by_index_without_header() {
        let f = write_temp("1,pos\n2,neg\n");
        let ds = load_csv(f.path(), false, Some(&LabelColumn::Index(1))).unwrap();
        assert_eq!(ds.class_names(), ["pos", "neg"]);
        assert_eq!(ds.feature_names(), ["f0"]);
    }

    #[test]
    fn nan_cell_is_a_parse_error_with_coordinates() {
        let f = write_temp("a,b\n1,2\n3,NaN\n");
        let err = load_csv(f.path(), true, None).unwrap_err();
        match err {
            Error::Parse { row, column, name, .. } => {
                assert_eq!((row, column), (1, 1));
                assert_eq!(name, "b");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn text_cell_is_a_parse_error() {
        let f = write_temp("1,2\n3,oops\n");
        let err = load_csv(f.path(), false, None).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, column: 1, .. }));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let f = write_temp("1,2\n3\n");
        assert!(matches!(
            load_csv(f.path(), false, None),
            Err(Error::RaggedRow { row: 1, got: 1, expected: 2 })
        ));
    }

    #[test]
    fn empty_and_missing_files_error() {
        let f = write_temp("");
        assert!(load_csv(f.path(), false, None).is_err());
        assert!(load_csv("/nonexistent/path.csv", false, None).is_err());
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let x = ndarray::array![
            [0.1, 2.0 / 3.0],
            [1e-300, -5.55555555555555e12],
            [f64::MIN_POSITIVE, 1.0 + f64::EPSILON]
        ];
        let labels = vec!["u".to_string(), "v".to_string(), "u".to_string()];
        let ds = Dataset::with_labels(x, &labels, None).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_csv(&ds, f.path()).unwrap();
        let back = load_csv(f.path(), true, Some(&LabelColumn::Name("label".into()))).unwrap();
        assert_eq!(ds.x(), back.x());
        assert_eq!(ds.labels(), back.labels());
    }
}
