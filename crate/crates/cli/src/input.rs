use std::collections::BTreeMap;
use std::path::Path;

use medml::Dataset;
use ndarray::Array2;

use crate::error::CliError;

/// Column names for each role; `covariates: None` takes every other column.
pub struct Roles<'a> {
    pub outcome: &'a str,
    pub treatment: &'a str,
    pub mediator: &'a str,
    pub covariates: Option<&'a [String]>,
}

pub struct Loaded {
    pub data: Dataset,
    pub covariates: Vec<String>,
    pub rows_read: usize,
    /// Rows dropped because a referenced field was empty or `NA`, counted per column.
    pub rejected_by_column: BTreeMap<String, usize>,
    pub rows_rejected: usize,
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field.eq_ignore_ascii_case("na")
}

fn parse_cell(field: &str, column: &str, line: u64, binary: bool) -> Result<f64, CliError> {
    let err = |message: String| CliError::Parse { line, column: column.to_string(), message };
    let v: f64 = field.parse().map_err(|_| err(format!("`{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(err(format!("`{field}` is not finite")));
    }
    if binary && v != 0.0 && v != 1.0 {
        return Err(err(format!("expected 0 or 1, found `{field}`")));
    }
    Ok(v)
}

/// Reads a headed CSV file and validates it into a [`Dataset`].
pub fn load_csv(path: &Path, roles: &Roles<'_>) -> Result<Loaded, CliError> {
    if !path.is_file() {
        return Err(CliError::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| CliError::MissingColumn(name.to_string()))
    };
    let (iy, id, im) = (find(roles.outcome)?, find(roles.treatment)?, find(roles.mediator)?);
    let covariates: Vec<String> = match roles.covariates {
        Some(list) => list.to_vec(),
        None => headers
            .iter()
            .enumerate()
            .filter(|(j, _)| ![iy, id, im].contains(j))
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let ix = covariates.iter().map(|c| find(c)).collect::<Result<Vec<_>, _>>()?;
    let referenced: Vec<(usize, &str, bool)> = [(iy, roles.outcome, false), (id, roles.treatment, true), (im, roles.mediator, true)]
        .into_iter()
        .chain(ix.iter().zip(&covariates).map(|(&j, c)| (j, c.as_str(), false)))
        .collect();

    let mut values: Vec<Vec<f64>> = Vec::new();
    let mut rejected_by_column = BTreeMap::new();
    let mut rows_read = 0;
    for record in reader.records() {
        let record = record?;
        rows_read += 1;
        let line = record.position().map_or(0, |p| p.line());
        let missing: Vec<&str> = referenced.iter().filter(|(j, _, _)| is_missing(&record[*j])).map(|(_, c, _)| *c).collect();
        if !missing.is_empty() {
            for c in missing {
                *rejected_by_column.entry(c.to_string()).or_insert(0) += 1;
            }
            continue;
        }
        let row = referenced
            .iter()
            .map(|&(j, c, binary)| parse_cell(&record[j], c, line, binary))
            .collect::<Result<Vec<f64>, _>>()?;
        values.push(row);
    }
    let n = values.len();
    let p = covariates.len();
    let column = |k: usize| values.iter().map(|r| r[k]).collect::<Vec<f64>>();
    let x = Array2::from_shape_fn((n, p), |(i, j)| values[i][3 + j]);
    let data = Dataset::new(column(0), column(1), column(2), x)?;
    Ok(Loaded { data, covariates, rows_read, rows_rejected: rows_read - n, rejected_by_column })
}
