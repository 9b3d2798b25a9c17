//! Observed-data layer: loading, schema checks, and fit-for-use audits.
//!
//! A dataset is delimited text — comma separator, one header line, UTF-8 —
//! with `NA` or an empty cell meaning missing. The observed outcome
//! column is special: it may be missing (it is unobserved for censored
//! rows), while every other column must be complete. Treatment and
//! censoring columns must be binary 0/1.
//!
//! Whether missingness actually lines up with censoring is *measured*,
//! not assumed: [`missingness_summary`] cross-tabulates the censoring
//! indicator against outcome missingness and flags uncensored rows with
//! a missing outcome as inconsistent.

mod positivity;

pub use positivity::{positivity_diagnostics, PositivityReport, StratumRow, DEFAULT_TAU};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};

/// Column-role bindings for a study dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub treatment: String,
    pub outcome: String,
    pub censoring: Option<String>,
    /// Measured covariate columns (a superset of any adjustment set).
    pub covariates: Vec<String>,
}

/// An in-memory dataset with validated schema.
///
/// All cells are stored as `Option<f64>`; the loader guarantees `None`
/// appears only in the outcome column. Rows where the censoring column is
/// 1 are still rows — estimation decides what to do with them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    cols: Vec<Vec<Option<f64>>>,
    index: BTreeMap<String, usize>,
    schema: DatasetSchema,
    n: usize,
}

impl Dataset {
    /// Load a CSV file against a schema. See the module docs for format
    /// rules; violations name the offending row (1-based, counting data
    /// rows) and column.
    pub fn load(path: &Path, schema: &DatasetSchema) -> Result<Dataset> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| EngineError::Io { path: path.display().to_string(), source: e })?;
        Dataset::from_csv_str(&raw, schema)
    }

    /// Parse CSV text against a schema.
    pub fn from_csv_str(text: &str, schema: &DatasetSchema) -> Result<Dataset> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| EngineError::DataSyntax { row: None, message: e.to_string() })?
            .clone();
        let names: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();

        let mut index = BTreeMap::new();
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(EngineError::DataSyntax {
                    row: None,
                    message: format!("duplicate column `{name}` in header"),
                });
            }
        }
        for required in schema_columns(schema) {
            if !index.contains_key(&required) {
                return Err(EngineError::MissingColumn { name: required });
            }
        }

        let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
        for (rix, record) in reader.records().enumerate() {
            let row = rix + 1;
            let record =
                record.map_err(|e| EngineError::DataSyntax { row: Some(row), message: e.to_string() })?;
            if record.len() != names.len() {
                return Err(EngineError::DataSyntax {
                    row: Some(row),
                    message: format!("expected {} fields, found {}", names.len(), record.len()),
                });
            }
            for (cix, cell) in record.iter().enumerate() {
                let cell = cell.trim();
                let value = if cell.is_empty() || cell == "NA" {
                    None
                } else {
                    let v: f64 = cell.parse().map_err(|_| EngineError::DataSyntax {
                        row: Some(row),
                        message: format!("cannot parse `{}` in column `{}` as a number", cell, names[cix]),
                    })?;
                    if !v.is_finite() {
                        return Err(EngineError::DataSyntax {
                            row: Some(row),
                            message: format!("non-finite value in column `{}`", names[cix]),
                        });
                    }
                    Some(v)
                };
                cols[cix].push(value);
            }
        }

        let n = cols.first().map(|c| c.len()).unwrap_or(0);
        if n == 0 {
            return Err(EngineError::EmptyDataset);
        }

        let d = Dataset { names, cols, index, schema: schema.clone(), n };
        d.validate()?;
        Ok(d)
    }

    /// Assemble a dataset from in-memory columns (the simulation harness'
    /// path — no CSV round trip). Runs the same validation as the loader.
    pub(crate) fn from_parts(
        names: Vec<String>,
        cols: Vec<Vec<Option<f64>>>,
        schema: &DatasetSchema,
    ) -> Result<Dataset> {
        let mut index = BTreeMap::new();
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(EngineError::DataSyntax {
                    row: None,
                    message: format!("duplicate column `{name}` in header"),
                });
            }
        }
        for required in schema_columns(schema) {
            if !index.contains_key(&required) {
                return Err(EngineError::MissingColumn { name: required });
            }
        }
        let n = cols.first().map(|c| c.len()).unwrap_or(0);
        if n == 0 {
            return Err(EngineError::EmptyDataset);
        }
        debug_assert!(cols.iter().all(|c| c.len() == n));

        let d = Dataset { names, cols, index, schema: schema.clone(), n };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        // Missing values only in the outcome column.
        for (cix, name) in self.names.iter().enumerate() {
            if *name == self.schema.outcome {
                continue;
            }
            if let Some(rix) = self.cols[cix].iter().position(|v| v.is_none()) {
                return Err(EngineError::UnexpectedMissing { column: name.clone(), row: rix + 1 });
            }
        }
        // Treatment, censoring, and (where observed) outcome are 0/1.
        let mut binary = vec![self.schema.treatment.clone(), self.schema.outcome.clone()];
        if let Some(c) = &self.schema.censoring {
            binary.push(c.clone());
        }
        for name in binary {
            let cix = self.index[&name];
            for (rix, v) in self.cols[cix].iter().enumerate() {
                if let Some(v) = v {
                    if *v != 0.0 && *v != 1.0 {
                        return Err(EngineError::NonBinaryColumn {
                            column: name.clone(),
                            row: rix + 1,
                            value: *v,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn schema(&self) -> &DatasetSchema {
        &self.schema
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<&[Option<f64>]> {
        let cix = self.index.get(name).ok_or_else(|| EngineError::MissingColumn { name: name.into() })?;
        Ok(&self.cols[*cix])
    }

    /// Column as complete numeric values; errors if any cell is missing.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name)?
            .iter()
            .enumerate()
            .map(|(rix, v)| v.ok_or(EngineError::UnexpectedMissing { column: name.into(), row: rix + 1 }))
            .collect()
    }

    /// Row-major feature matrix for the named columns.
    pub fn feature_matrix(&self, columns: &[String]) -> Result<Vec<Vec<f64>>> {
        let col_data: Vec<Vec<f64>> =
            columns.iter().map(|c| self.numeric_column(c)).collect::<Result<_>>()?;
        Ok((0..self.n).map(|r| col_data.iter().map(|c| c[r]).collect()).collect())
    }

    pub fn treatment_values(&self) -> Result<Vec<f64>> {
        self.numeric_column(&self.schema.treatment)
    }

    pub fn outcome_values(&self) -> Result<&[Option<f64>]> {
        self.column(&self.schema.outcome)
    }

    /// True where the row is uncensored (C=0, or no censoring column).
    pub fn uncensored_mask(&self) -> Result<Vec<bool>> {
        match &self.schema.censoring {
            None => Ok(vec![true; self.n]),
            Some(c) => Ok(self.numeric_column(c)?.iter().map(|&v| v == 0.0).collect()),
        }
    }

    /// Copy of the dataset with the outcome role moved to `column`
    /// (negative-control runs). The new outcome must be a complete binary
    /// column.
    pub fn with_outcome_column(&self, column: &str) -> Result<Dataset> {
        let cix = *self
            .index
            .get(column)
            .ok_or_else(|| EngineError::BadNegativeControl { column: column.into(), reason: "column not present".into() })?;
        for (rix, v) in self.cols[cix].iter().enumerate() {
            match v {
                None => {
                    return Err(EngineError::BadNegativeControl {
                        column: column.into(),
                        reason: format!("missing value at row {}", rix + 1),
                    })
                }
                Some(v) if *v != 0.0 && *v != 1.0 => {
                    return Err(EngineError::BadNegativeControl {
                        column: column.into(),
                        reason: format!("non-binary value {} at row {}", v, rix + 1),
                    })
                }
                _ => {}
            }
        }
        let mut d = self.clone();
        d.schema.outcome = column.to_string();
        Ok(d)
    }

    /// Canonical serialization: original column order, `NA` for missing.
    /// Loading and re-serializing is idempotent.
    pub fn to_csv_string(&self) -> String {
        let mut out = self.names.join(",");
        out.push('\n');
        for r in 0..self.n {
            for (cix, _) in self.names.iter().enumerate() {
                if cix > 0 {
                    out.push(',');
                }
                match self.cols[cix][r] {
                    Some(v) => out.push_str(&format!("{v}")),
                    None => out.push_str("NA"),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn schema_columns(schema: &DatasetSchema) -> Vec<String> {
    let mut cols = vec![schema.treatment.clone(), schema.outcome.clone()];
    if let Some(c) = &schema.censoring {
        cols.push(c.clone());
    }
    cols.extend(schema.covariates.iter().cloned());
    cols
}

// ── missingness ──

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMissingness {
    pub column: String,
    pub missing: usize,
    pub fraction: f64,
}

/// Censoring indicator × outcome-missingness counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensoringCrosstab {
    pub uncensored_observed: usize,
    pub uncensored_missing: usize,
    pub censored_observed: usize,
    pub censored_missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessSummary {
    pub per_column: Vec<ColumnMissingness>,
    /// Present only when the schema has a censoring column.
    pub crosstab: Option<CensoringCrosstab>,
    /// Rows (1-based) that are uncensored yet have a missing outcome —
    /// inconsistent with censoring being the only source of missingness.
    pub inconsistent_rows: Vec<usize>,
}

/// Per-column missingness and the censoring/outcome cross-tabulation.
pub fn missingness_summary(d: &Dataset) -> Result<MissingnessSummary> {
    let per_column = d
        .names
        .iter()
        .enumerate()
        .map(|(cix, name)| {
            let missing = d.cols[cix].iter().filter(|v| v.is_none()).count();
            ColumnMissingness { column: name.clone(), missing, fraction: missing as f64 / d.n as f64 }
        })
        .collect();

    let outcome = d.outcome_values()?;
    let uncensored = d.uncensored_mask()?;
    let crosstab = d.schema.censoring.as_ref().map(|_| {
        let mut ct = CensoringCrosstab {
            uncensored_observed: 0,
            uncensored_missing: 0,
            censored_observed: 0,
            censored_missing: 0,
        };
        for r in 0..d.n {
            match (uncensored[r], outcome[r].is_some()) {
                (true, true) => ct.uncensored_observed += 1,
                (true, false) => ct.uncensored_missing += 1,
                (false, true) => ct.censored_observed += 1,
                (false, false) => ct.censored_missing += 1,
            }
        }
        ct
    });

    let inconsistent_rows = (0..d.n)
        .filter(|&r| uncensored[r] && outcome[r].is_none())
        .map(|r| r + 1)
        .collect();

    Ok(MissingnessSummary { per_column, crosstab, inconsistent_rows })
}

/// Schema with covariate W, treatment A, censoring C, outcome Y.
#[cfg(test)]
pub(crate) fn schema_wacy() -> DatasetSchema {
    DatasetSchema {
        treatment: "A".into(),
        outcome: "Y".into(),
        censoring: Some("C".into()),
        covariates: vec!["W".into()],
    }
}

/// Schema without a censoring column.
#[cfg(test)]
pub(crate) fn schema_way() -> DatasetSchema {
    DatasetSchema {
        treatment: "A".into(),
        outcome: "Y".into(),
        censoring: None,
        covariates: vec!["W".into()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_and_masks_censored_outcomes() {
        let text = "W,A,C,Y\n0,1,0,1\n1,0,1,NA\n0.5,1,0,0\n";
        let d = Dataset::from_csv_str(text, &schema_wacy()).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.outcome_values().unwrap()[1], None);
        assert_eq!(d.uncensored_mask().unwrap(), vec![true, false, true]);
        assert_eq!(d.numeric_column("W").unwrap(), vec![0.0, 1.0, 0.5]);
    }

    #[test]
    fn empty_cell_means_missing_too() {
        let text = "W,A,C,Y\n0,1,1,\n1,0,0,1\n";
        let d = Dataset::from_csv_str(text, &schema_wacy()).unwrap();
        assert_eq!(d.outcome_values().unwrap()[0], None);
    }

    #[test]
    fn missing_required_column_is_named() {
        let text = "W,A,Y\n0,1,1\n";
        match Dataset::from_csv_str(text, &schema_wacy()).unwrap_err() {
            EngineError::MissingColumn { name } => assert_eq!(name, "C"),
            other => panic!("expected missing column, got {other}"),
        }
    }

    #[test]
    fn non_binary_treatment_names_row_and_column() {
        let text = "W,A,Y\n0,1,1\n0,2,0\n";
        match Dataset::from_csv_str(text, &schema_way()).unwrap_err() {
            EngineError::NonBinaryColumn { column, row, value } => {
                assert_eq!((column.as_str(), row, value), ("A", 2, 2.0));
            }
            other => panic!("expected non-binary error, got {other}"),
        }
    }

    #[test]
    fn missing_covariate_is_rejected() {
        let text = "W,A,Y\nNA,1,1\n0,0,0\n";
        match Dataset::from_csv_str(text, &schema_way()).unwrap_err() {
            EngineError::UnexpectedMissing { column, row } => {
                assert_eq!((column.as_str(), row), ("W", 1));
            }
            other => panic!("expected unexpected-missing, got {other}"),
        }
    }

    #[test]
    fn header_only_file_is_empty() {
        let text = "W,A,Y\n";
        assert!(matches!(
            Dataset::from_csv_str(text, &schema_way()).unwrap_err(),
            EngineError::EmptyDataset
        ));
    }

    #[test]
    fn unparseable_cell_is_a_syntax_error() {
        let text = "W,A,Y\nzero,1,1\n";
        let err = Dataset::from_csv_str(text, &schema_way()).unwrap_err();
        assert!(err.is_syntax(), "{err}");
    }

    #[test]
    fn serialization_round_trip_is_idempotent() {
        let text = "W,A,C,Y\n0,1,0,1\n1.25,0,1,NA\n0,1,0,0\n";
        let d = Dataset::from_csv_str(text, &schema_wacy()).unwrap();
        let s1 = d.to_csv_string();
        let d2 = Dataset::from_csv_str(&s1, &schema_wacy()).unwrap();
        assert_eq!(d, d2);
        assert_eq!(s1, d2.to_csv_string());
    }

    #[test]
    fn missingness_crosstab_and_inconsistency_flags() {
        // Row 2 censored+missing (consistent); row 4 uncensored+missing
        // (inconsistent, flagged).
        let text = "W,A,C,Y\n0,1,0,1\n1,0,1,NA\n1,1,0,0\n0,0,0,NA\n";
        let d = Dataset::from_csv_str(text, &schema_wacy()).unwrap();
        let m = missingness_summary(&d).unwrap();
        let y = m.per_column.iter().find(|c| c.column == "Y").unwrap();
        assert_eq!(y.missing, 2);
        assert!((y.fraction - 0.5).abs() < 1e-12);
        let ct = m.crosstab.unwrap();
        assert_eq!(
            (ct.uncensored_observed, ct.uncensored_missing, ct.censored_observed, ct.censored_missing),
            (2, 1, 0, 1)
        );
        assert_eq!(m.inconsistent_rows, vec![4]);
    }

    #[test]
    fn outcome_swap_for_negative_controls_validates_the_column() {
        let text = "W,NC,A,Y\n0,1,1,1\n1,0,0,0\n";
        let schema = DatasetSchema {
            treatment: "A".into(),
            outcome: "Y".into(),
            censoring: None,
            covariates: vec!["W".into()],
        };
        let d = Dataset::from_csv_str(text, &schema).unwrap();
        let swapped = d.with_outcome_column("NC").unwrap();
        assert_eq!(swapped.schema().outcome, "NC");
        // Continuous column cannot serve as a negative-control outcome.
        let err = d.with_outcome_column("W");
        assert!(err.is_ok(), "binary-looking W is fine here");
        let text = "W,A,Y\n0.5,1,1\n1,0,0\n";
        let d = Dataset::from_csv_str(text, &schema_way()).unwrap();
        assert!(matches!(
            d.with_outcome_column("W").unwrap_err(),
            EngineError::BadNegativeControl { .. }
        ));
    }
}
