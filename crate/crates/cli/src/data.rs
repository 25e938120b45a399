//! CSV input.
//!
//! A file starts with a header row naming the columns, followed by one
//! observation per row. Cells are decimal numbers with `.` as separator
//! (scientific notation allowed); surrounding whitespace is ignored. Empty
//! cells, `NaN` and infinities are rejected.

use std::path::Path;

use margquant_core::SampleBatch;

use crate::error::{CliError, CliResult};

pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let bad = |message: String| CliError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.is_empty()
        || header
            .iter()
            .all(|h| h.is_empty() || h.parse::<f64>().is_ok())
    {
        return Err(bad("missing header row".into()));
    }
    let mut columns = vec![Vec::new(); header.len()];
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                bad(format!(
                    "row {}, column `{}`: `{cell}` is not a number",
                    r + 1,
                    header[c]
                ))
            })?;
            if !v.is_finite() {
                return Err(bad(format!(
                    "row {}, column `{}`: non-finite value",
                    r + 1,
                    header[c]
                )));
            }
            columns[c].push(v);
        }
    }
    if columns[0].is_empty() {
        return Err(bad("no data rows".into()));
    }
    Ok(Table { header, columns })
}

pub fn read_batch(path: &Path) -> CliResult<SampleBatch> {
    Ok(SampleBatch::from_columns(read_table(path)?.columns)?)
}
