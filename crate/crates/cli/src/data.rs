//! CSV input and output of observation tables.

use std::path::Path;

use serde::Serialize;

use crate::config::Columns;
use crate::error::{CliError, Result};

/// Cells read as missing rather than malformed.
const MISSING: [&str; 5] = ["", "na", "n/a", "nan", "null"];

/// Observations with rows containing missing values already removed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub y1: Vec<f64>,
    pub y2: Option<Vec<f64>>,
    pub covariate: Option<Vec<f64>>,
    /// 1-based data-row indices (header excluded) that were dropped.
    #[serde(skip)]
    pub dropped_rows: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y1.is_empty()
    }
}

/// Which columns a load needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Needs {
    pub y2: bool,
    pub covariate: bool,
}

fn parse_cell(path: &Path, row: usize, column: &str, raw: &str) -> Result<Option<f64>> {
    let cell = raw.trim();
    if MISSING.contains(&cell.to_ascii_lowercase().as_str()) {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(CliError::Malformed {
            path: path.to_path_buf(),
            row,
            column: column.to_string(),
            value: raw.to_string(),
        }),
    }
}

/// Read the used columns of a comma-delimited file with a header row. Rows
/// with a missing value in any used column are dropped and reported.
pub fn load_csv(path: &Path, columns: &Columns, needs: Needs) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::Headers)
        .from_path(path)
        .map_err(|e| CliError::csv(path, e))?;
    let headers = reader.headers().map_err(|e| CliError::csv(path, e))?.clone();
    let locate = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let mut wanted = vec![(columns.y1.as_str(), locate(&columns.y1)?)];
    if needs.y2 {
        wanted.push((columns.y2.as_str(), locate(&columns.y2)?));
    }
    if needs.covariate {
        let name = columns.covariate.as_deref().ok_or_else(|| {
            CliError::Config("a covariate column name is required for this run".into())
        })?;
        wanted.push((name, locate(name)?));
    }

    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); wanted.len()];
    let mut dropped_rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CliError::csv(path, e))?;
        let mut values = Vec::with_capacity(wanted.len());
        for (name, idx) in &wanted {
            values.push(parse_cell(path, row, name, record.get(*idx).unwrap_or(""))?);
        }
        if values.iter().any(Option::is_none) {
            dropped_rows.push(row);
            continue;
        }
        for (col, v) in cols.iter_mut().zip(values) {
            col.push(v.expect("checked above"));
        }
    }
    if !dropped_rows.is_empty() {
        log::warn!(
            "{}: dropped {} row(s) with missing values: {:?}",
            path.display(),
            dropped_rows.len(),
            dropped_rows
        );
    }
    if cols[0].is_empty() {
        return Err(CliError::NoRows(path.to_path_buf()));
    }
    let mut cols = cols.into_iter();
    let y1 = cols.next().expect("y1 column");
    let y2 = needs.y2.then(|| cols.next().expect("y2 column"));
    let covariate = needs.covariate.then(|| cols.next().expect("covariate column"));
    Ok(Dataset {
        y1,
        y2,
        covariate,
        dropped_rows,
    })
}

/// Decimal form with 17 significant digits; parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a dataset with the configured column names.
pub fn dataset_csv(data: &Dataset, columns: &Columns) -> Result<Vec<u8>> {
    let mut header = vec![columns.y1.clone()];
    if data.y2.is_some() {
        header.push(columns.y2.clone());
    }
    if data.covariate.is_some() {
        header.push(columns.covariate.clone().unwrap_or_else(|| "covariate".into()));
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| CliError::csv("<dataset>", e);
    writer.write_record(&header).map_err(to_err)?;
    for i in 0..data.len() {
        let mut row = vec![format_f64(data.y1[i])];
        if let Some(y2) = &data.y2 {
            row.push(format_f64(y2[i]));
        }
        if let Some(z) = &data.covariate {
            row.push(format_f64(z[i]));
        }
        writer.write_record(&row).map_err(to_err)?;
    }
    writer
        .into_inner()
        .map_err(|e| CliError::format("<dataset>", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    const ONLY_Y: Needs = Needs {
        y2: false,
        covariate: false,
    };

    #[test]
    fn two_numeric_columns_load_as_univariate() {
        let f = file("y1,y2\n1.5,2\n3,4\n-1e3,0.25\n");
        let d = load_csv(f.path(), &Columns::default(), ONLY_Y).unwrap();
        assert_eq!(d.y1, vec![1.5, 3.0, -1000.0]);
        assert!(d.y2.is_none() && d.covariate.is_none());
    }

    #[test]
    fn missing_covariates_drop_rows() {
        let f = file("date,y1,temp\n2020-01-01,1,2\n2020-01-02,2,\n2020-01-03,3,NA\n2020-01-04,4,5\n2020-01-05,5, \n");
        let cols = Columns {
            covariate: Some("temp".into()),
            ..Columns::default()
        };
        let d = load_csv(f.path(), &cols, Needs { y2: false, covariate: true }).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dropped_rows, vec![2, 3, 5]);
        assert_eq!(d.covariate.unwrap(), vec![2.0, 5.0]);
    }

    #[test]
    fn malformed_cell_names_row_and_column() {
        let f = file("y1,y2\n1,2\n3,abc\n");
        let err = load_csv(f.path(), &Columns::default(), Needs { y2: true, covariate: false }).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2") && msg.contains("\"y2\"") && msg.contains("abc"), "{msg}");
    }

    #[test]
    fn missing_column_and_empty_file() {
        let f = file("a,b\n1,2\n");
        assert!(matches!(
            load_csv(f.path(), &Columns::default(), ONLY_Y),
            Err(CliError::MissingColumn { .. })
        ));
        let f = file("y1\nNA\n");
        assert!(matches!(load_csv(f.path(), &Columns::default(), ONLY_Y), Err(CliError::NoRows(_))));
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, std::f64::consts::PI * 1e200, -2.5e-300, 5e-324] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
