//! CSV ingestion.
//!
//! The file needs a header row. Every column except the label column must
//! hold decimal numbers; an empty field is a missing value. Labels are
//! arbitrary strings, encoded to class indices by first appearance.

use std::path::Path;

use semifactual_core::dataset::{encode_labels, impute_column_means};
use semifactual_core::Dataset;

use crate::error::{CliError, Result};

pub fn load_csv(path: &Path, label_column: &str, impute_missing: bool) -> Result<Dataset> {
    let csv_err = |source| CliError::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;

    let header = reader.headers().map_err(csv_err)?.clone();
    let label_idx = header.iter().position(|h| h == label_column).ok_or_else(|| {
        CliError::Config(format!("{}: no label column {label_column:?}", path.display()))
    })?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut cells: Vec<Vec<Option<f64>>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        // header is line 1
        let line = r + 2;
        let mut row = Vec::with_capacity(feature_names.len());
        for (i, field) in record.iter().enumerate() {
            if i == label_idx {
                continue;
            }
            if field.is_empty() {
                if !impute_missing {
                    return Err(CliError::Parse {
                        path: path.to_path_buf(),
                        row: line,
                        column: header[i].to_string(),
                        message: "missing value (enable imputation to fill it)".into(),
                    });
                }
                row.push(None);
                continue;
            }
            let value: f64 = field.parse().map_err(|_| CliError::Parse {
                path: path.to_path_buf(),
                row: line,
                column: header[i].to_string(),
                message: format!("{field:?} is not a number"),
            })?;
            if !value.is_finite() {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    row: line,
                    column: header[i].to_string(),
                    message: format!("{field:?} is not finite"),
                });
            }
            row.push(Some(value));
        }
        let label = record.get(label_idx).unwrap_or_default();
        if label.is_empty() {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                row: line,
                column: label_column.to_string(),
                message: "missing label".into(),
            });
        }
        raw_labels.push(label.to_string());
        cells.push(row);
    }

    let rows = impute_column_means(&cells).map_err(|j| CliError::UnusableFeature {
        path: path.to_path_buf(),
        column: feature_names[j].clone(),
    })?;
    let (labels, class_names) = encode_labels(&raw_labels);
    Ok(Dataset::new(rows, labels, feature_names, class_names)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn imputes_column_mean() {
        let f = write("age,bmi,y\n1,20,A\n2,,B\n3,30,A\n");
        let data = load_csv(f.path(), "y", true).unwrap();
        assert_eq!(data.row(1), &[2.0, 25.0]);
        assert_eq!(data.labels(), &[0, 1, 0]);
        assert_eq!(data.feature_names(), &["age".to_string(), "bmi".to_string()]);
        assert_eq!(data.class_names(), &["A".to_string(), "B".to_string()]);
    }

    #[test]
    fn complete_file_loads_verbatim() {
        let f = write("a,label,b\n0.5,x,-1.25\n1e3,y,7\n");
        let data = load_csv(f.path(), "label", false).unwrap();
        assert_eq!(data.row(0), &[0.5, -1.25]);
        assert_eq!(data.row(1), &[1000.0, 7.0]);
    }

    #[test]
    fn missing_without_imputation_is_an_error() {
        let f = write("a,b,y\n1,,A\n2,3,B\n");
        match load_csv(f.path(), "y", false) {
            Err(CliError::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_missing_column_is_unusable() {
        let f = write("a,b,y\n1,,A\n2,,B\n");
        assert!(matches!(load_csv(f.path(), "y", true), Err(CliError::UnusableFeature { .. })));
    }

    #[test]
    fn bad_number_reports_location() {
        let f = write("a,y\n1,A\nabc,B\n");
        match load_csv(f.path(), "y", false) {
            Err(CliError::Parse { row: 3, column, .. }) => assert_eq!(column, "a"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_rows_and_missing_label_column() {
        let f = write("a,y\n1,A,extra\n");
        assert!(matches!(load_csv(f.path(), "y", false), Err(CliError::Csv { .. })));
        let f = write("a,y\n1,A\n2,B\n");
        assert!(matches!(load_csv(f.path(), "class", false), Err(CliError::Config(_))));
        assert!(matches!(
            load_csv(Path::new("/nonexistent/file.csv"), "y", false),
            Err(CliError::Csv { .. })
        ));
    }
}
