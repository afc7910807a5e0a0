//! CSV ingestion: header-driven column discovery and strict numeric
//! validation, producing a validated dataset.

use std::path::Path;

use rdwate::dataset::Dataset;
use rdwate::error::Error;

/// Read a dataset from a CSV file with a header row.
///
/// Required columns: `y`, `x`. Covariates are either a single `z` column or
/// numbered `z1..zk`. A `t` column is required in fuzzy mode and optional in
/// sharp mode, where it is validated against `1(x > cutoff)` row by row.
/// Unrecognized columns are ignored.
pub fn load_csv(path: &Path, cutoff: f64, fuzzy: bool) -> Result<Dataset, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::InvalidConfig(format!("bad CSV header: {e}")))?
        .clone();

    let find = |name: &str| headers.iter().position(|h| h == name);
    let y_col = find("y").ok_or_else(|| Error::MissingColumn("y".into()))?;
    let x_col = find("x").ok_or_else(|| Error::MissingColumn("x".into()))?;
    let t_col = find("t");
    if fuzzy && t_col.is_none() {
        return Err(Error::MissingColumn("t".into()));
    }

    // covariates: z1..zk in numeric order, or a bare z
    let mut z_cols: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            h.strip_prefix('z')
                .and_then(|suffix| suffix.parse::<usize>().ok())
                .map(|num| (num, i))
        })
        .collect();
    z_cols.sort_unstable();
    if z_cols.is_empty() {
        if let Some(i) = find("z") {
            z_cols.push((1, i));
        }
    }

    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut z: Vec<Vec<f64>> = vec![Vec::new(); z_cols.len()];
    let mut t: Vec<u8> = Vec::new();

    let parse_cell = |row: usize, column: &str, raw: &str| -> Result<f64, Error> {
        let v: f64 = raw.parse().map_err(|_| Error::NonNumericCell {
            row,
            column: column.into(),
            value: raw.into(),
        })?;
        if !v.is_finite() {
            return Err(Error::NonNumericCell { row, column: column.into(), value: raw.into() });
        }
        Ok(v)
    };

    for (rec_idx, record) in reader.records().enumerate() {
        let row = rec_idx + 1; // 1-based data row
        let record = record.map_err(|e| Error::InvalidConfig(format!("row {row}: {e}")))?;
        let cell = |col: usize| record.get(col).unwrap_or("");
        y.push(parse_cell(row, "y", cell(y_col))?);
        x.push(parse_cell(row, "x", cell(x_col))?);
        for (slot, &(num, col)) in z_cols.iter().enumerate() {
            let name = format!("z{num}");
            z[slot].push(parse_cell(row, &name, cell(col))?);
        }
        if let Some(tc) = t_col {
            let v = parse_cell(row, "t", cell(tc))?;
            if v == 0.0 {
                t.push(0);
            } else if v == 1.0 {
                t.push(1);
            } else {
                return Err(Error::NonNumericCell {
                    row,
                    column: "t".into(),
                    value: cell(tc).into(),
                });
            }
        }
    }

    if fuzzy {
        Dataset::new_fuzzy(y, x, z, t, cutoff)
    } else if t_col.is_some() {
        Dataset::new_sharp_checked(y, x, z, t, cutoff)
    } else {
        Dataset::new_sharp(y, x, z, cutoff)
    }
}
