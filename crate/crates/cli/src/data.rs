//! CSV ingestion.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::CliError;

/// A raw CSV table: header plus string rows, all of equal width.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn is_empty(&self) -> bool {
        self.header.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric matrix of the named columns, in the given order.
    pub fn numeric(&self, columns: &[usize]) -> Result<DMatrix<f64>, CliError> {
        let mut out = DMatrix::zeros(self.rows.len(), columns.len());
        for (i, row) in self.rows.iter().enumerate() {
            for (k, &j) in columns.iter().enumerate() {
                out[(i, k)] = parse_cell(&row[j], i + 2, &self.header[j])?;
            }
        }
        Ok(out)
    }
}

fn parse_cell(raw: &str, line: usize, column: &str) -> Result<f64, CliError> {
    let v: f64 = raw.trim().parse().map_err(|_| {
        CliError::Data(format!(
            "line {line}, column '{column}': cannot parse '{raw}' as a number"
        ))
    })?;
    if !v.is_finite() {
        return Err(CliError::Data(format!(
            "line {line}, column '{column}': non-finite value '{raw}'"
        )));
    }
    Ok(v)
}

/// Reads a comma-separated table with a header row. An empty input yields an
/// empty table; rows of a different width from the header are rejected.
pub fn read_table<R: Read>(input: R) -> Result<Table, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let header: Vec<String> = match records.next() {
        None => {
            return Ok(Table {
                header: Vec::new(),
                rows: Vec::new(),
            })
        }
        Some(r) => r
            .map_err(csv_error)?
            .iter()
            .map(|s| s.trim().to_string())
            .collect(),
    };
    for (j, h) in header.iter().enumerate() {
        if header[..j].contains(h) {
            return Err(CliError::Data(format!(
                "line 1: duplicate column name '{h}'"
            )));
        }
    }
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let rec = rec.map_err(csv_error)?;
        if rec.len() != header.len() {
            return Err(CliError::Data(format!(
                "line {}: expected {} fields, found {}",
                i + 2,
                header.len(),
                rec.len()
            )));
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(Table { header, rows })
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Data(format!("malformed CSV: {e}"))
}

pub fn read_table_from(path: &Path) -> Result<Table, CliError> {
    if path.as_os_str() == "-" {
        return read_table(std::io::stdin().lock());
    }
    let file =
        std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    read_table(file)
}

/// Samples and target values for fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: DMatrix<f64>,
    pub values: DVector<f64>,
    pub features: Vec<String>,
    pub target: String,
}

impl Dataset {
    /// Every column except `target` is a feature.
    pub fn from_table(table: &Table, target: &str) -> Result<Self, CliError> {
        let t = table.column(target).ok_or_else(|| {
            CliError::Data(format!("target column '{target}' not found in header"))
        })?;
        if table.rows.is_empty() {
            return Err(CliError::Data("no data rows".into()));
        }
        let feature_idx: Vec<usize> = (0..table.header.len()).filter(|&j| j != t).collect();
        if feature_idx.is_empty() {
            return Err(CliError::Data(
                "no feature columns besides the target".into(),
            ));
        }
        let points = table.numeric(&feature_idx)?;
        let values = table.numeric(&[t])?.column(0).into_owned();
        Ok(Dataset {
            points,
            values,
            features: feature_idx
                .iter()
                .map(|&j| table.header[j].clone())
                .collect(),
            target: target.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Table, CliError> {
        read_table(s.as_bytes())
    }

    #[test]
    fn reads_scientific_notation() {
        let t = parse("a,b,f\n1e-3,2,3.5E2\n").unwrap();
        let d = Dataset::from_table(&t, "f").unwrap();
        assert_eq!(d.points[(0, 0)], 1e-3);
        assert_eq!(d.values[0], 350.0);
        assert_eq!(d.features, ["a", "b"]);
    }

    #[test]
    fn rejects_ragged_and_non_finite() {
        let err = parse("a,f\n1,2\n3\n").unwrap_err();
        assert!(err.to_string().contains("line 3"));
        let t = parse("a,f\n1,NaN\n").unwrap();
        let err = Dataset::from_table(&t, "f").unwrap_err();
        assert!(err.to_string().contains("line 2, column 'f'"));
        let t = parse("a,f\ninf,1\n").unwrap();
        assert!(Dataset::from_table(&t, "f").is_err());
        let t = parse("a,f\nx,1\n").unwrap();
        assert!(Dataset::from_table(&t, "f").is_err());
    }

    #[test]
    fn missing_target_and_empty_input() {
        let t = parse("a,b\n1,2\n").unwrap();
        assert!(Dataset::from_table(&t, "f")
            .unwrap_err()
            .to_string()
            .contains("'f'"));
        assert!(parse("").unwrap().is_empty());
    }
}
