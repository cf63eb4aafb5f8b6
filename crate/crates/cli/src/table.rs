//! CSV datasets: a header row, a response column named `y`, every other
//! column a covariate in header order.

use std::path::Path;

use fwdreg_core::{standardize, Dataset, Error, Standardized};
use nalgebra::{DMatrix, DVector};

use crate::error::{CliError, CliResult};

pub const RESPONSE: &str = "y";

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub covariates: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: Option<DVector<f64>>,
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let y_pos = header.iter().position(|h| h == RESPONSE);
    if header.iter().filter(|h| *h == RESPONSE).count() > 1 {
        return Err(CliError::Input("more than one column named y".into()));
    }
    let covariates: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != y_pos)
        .map(|(_, h)| h.clone())
        .collect();
    if covariates.is_empty() {
        return Err(CliError::Input("no covariate columns".into()));
    }

    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(CliError::Input(format!(
                "row {} has {} fields, header has {}",
                r + 2,
                rec.len(),
                header.len()
            )));
        }
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Input(format!(
                    "row {}, column {}: '{field}' is not a number",
                    r + 2,
                    header[c]
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::Input(format!(
                    "row {}, column {}: non-finite value",
                    r + 2,
                    header[c]
                )));
            }
            if Some(c) == y_pos {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    let x = DMatrix::from_row_slice(rows, covariates.len(), &xs);
    Ok(Table {
        covariates,
        x,
        y: y_pos.map(|_| DVector::from_vec(ys)),
    })
}

pub fn write_table(path: &Path, covariates: &[String], x: &DMatrix<f64>, y: &DVector<f64>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = covariates.to_vec();
    header.push(RESPONSE.to_string());
    w.write_record(&header)?;
    for i in 0..x.nrows() {
        let mut rec: Vec<String> = (0..x.ncols()).map(|j| x[(i, j)].to_string()).collect();
        rec.push(y[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

impl Table {
    pub fn response(&self) -> CliResult<&DVector<f64>> {
        self.y
            .as_ref()
            .ok_or_else(|| CliError::Input("input has no 'y' column".into()))
    }

    /// Standardized design; a constant column is reported by name.
    pub fn standardized(&self) -> CliResult<Standardized> {
        standardize(&self.x).map_err(|e| match e {
            Error::ZeroVarianceColumn(j) => CliError::Degenerate(format!(
                "column '{}' has zero variance",
                self.covariates[j]
            )),
            other => other.into(),
        })
    }
}

/// Standardized design with the centered response; returns the response mean.
pub fn centered_dataset(table: &Table) -> CliResult<(Dataset, Standardized, f64)> {
    let y = table.response()?;
    let std = table.standardized()?;
    let y_mean = y.mean();
    let ds = Dataset::new(std.x.clone(), y.add_scalar(-y_mean))?;
    Ok((ds, std, y_mean))
}
