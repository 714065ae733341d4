//! Comma-separated dataset files.
//!
//! A data file has a header naming its columns: `y`, then either `w` or
//! replicate measurements `w1..wm` (or both), then covariates `z1..zp`.
//! Values use `.` as the decimal point and need no quoting.

use std::io::{Read, Write};

use crate::data::{validate_dataset, Dataset};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    /// Row-major values.
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn column(&self, k: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[k]).collect()
    }
}

fn parse_err(line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        column,
        message: message.into(),
    }
}

fn from_csv(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        },
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => parse_err(
            line,
            (*len).min(*expected_len) as usize + 1,
            format!("expected {expected_len} fields, found {len}"),
        ),
        _ => parse_err(line, 0, e.to_string()),
    }
}

pub fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers().map_err(from_csv)?.iter().map(str::to_string).collect();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(parse_err(1, 1, "missing header row"));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(from_csv)?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .enumerate()
            .map(|(k, field)| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, k + 1, format!("not a finite number: {field:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { headers, rows })
}

/// Column indices of `prefix1..prefixK`, in index order; errors when the
/// numbering has gaps.
fn numbered(headers: &[String], prefix: &str) -> Result<Vec<usize>> {
    let mut found: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(k, h)| {
            let rest = h.strip_prefix(prefix)?;
            let idx: usize = rest.parse().ok()?;
            Some((idx, k))
        })
        .collect();
    found.sort();
    for (expected, (idx, k)) in found.iter().enumerate() {
        if *idx != expected + 1 {
            return Err(parse_err(1, k + 1, format!("expected column {prefix}{}, found {prefix}{idx}", expected + 1)));
        }
    }
    Ok(found.into_iter().map(|(_, k)| k).collect())
}

/// Contents of a data file before `σ_U²` is settled.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub y: Vec<f64>,
    pub w: Option<Vec<f64>>,
    pub z: Matrix,
    /// Replicate proxy measurements `w1..wm`, when present.
    pub replicates: Option<Matrix>,
}

impl DataFile {
    /// Builds the dataset; `w` defaults to the row means of the replicates.
    pub fn into_dataset(self, sigma_u2: f64) -> Result<Dataset> {
        let w = match (self.w, &self.replicates) {
            (Some(w), _) => w,
            (None, Some(r)) => (0..r.rows()).map(|i| r.row(i).iter().sum::<f64>() / r.cols() as f64).collect(),
            (None, None) => unreachable!("parse_data_file requires w or replicates"),
        };
        validate_dataset(Dataset {
            y: self.y,
            w,
            z: self.z,
            sigma_u2,
        })
    }
}

pub fn parse_data_file<R: Read>(reader: R) -> Result<DataFile> {
    let table = read_table(reader)?;
    let h = &table.headers;
    let z_idx = numbered(h, "z")?;
    let w_idx = numbered(h, "w")?;
    let mut y_col = None;
    let mut w_col = None;
    for (k, name) in h.iter().enumerate() {
        match name.as_str() {
            "y" if y_col.is_none() => y_col = Some(k),
            "w" if w_col.is_none() => w_col = Some(k),
            _ if z_idx.contains(&k) || w_idx.contains(&k) => {}
            _ => return Err(parse_err(1, k + 1, format!("unexpected column {name:?}"))),
        }
    }
    let y_col = y_col.ok_or_else(|| parse_err(1, 1, "missing column y"))?;
    if w_col.is_none() && w_idx.len() < 2 {
        return Err(parse_err(1, 1, "missing column w (or at least two replicate columns w1, w2)"));
    }
    if table.rows.is_empty() {
        return Err(parse_err(2, 1, "no data rows"));
    }
    let n = table.rows.len();
    let z = Matrix::from_fn(n, z_idx.len(), |i, j| table.rows[i][z_idx[j]]);
    let replicates = (!w_idx.is_empty()).then(|| Matrix::from_fn(n, w_idx.len(), |i, j| table.rows[i][w_idx[j]]));
    Ok(DataFile {
        y: table.column(y_col),
        w: w_col.map(|k| table.column(k)),
        z,
        replicates,
    })
}

/// Reads an n×m table of replicate measurements with columns `w1..wm`.
pub fn read_replicates<R: Read>(reader: R) -> Result<Matrix> {
    let table = read_table(reader)?;
    let idx = numbered(&table.headers, "w")?;
    if let Some(k) = (0..table.headers.len()).find(|k| !idx.contains(k)) {
        return Err(parse_err(1, k + 1, format!("unexpected column {:?}", table.headers[k])));
    }
    let n = table.rows.len();
    Ok(Matrix::from_fn(n, idx.len(), |i, j| table.rows[i][idx[j]]))
}

/// Writes `y, w, z1..zp` with shortest round-trip formatting, so reading
/// the file back reproduces every value exactly.
pub fn write_dataset<W: Write>(writer: W, d: &Dataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["y".to_string(), "w".to_string()];
    header.extend((1..=d.p()).map(|j| format!("z{j}")));
    wtr.write_record(&header).map_err(from_csv)?;
    for i in 0..d.n() {
        let mut rec = vec![d.y[i].to_string(), d.w[i].to_string()];
        rec.extend(d.z.row(i).iter().map(f64::to_string));
        wtr.write_record(&rec).map_err(from_csv)?;
    }
    wtr.flush()?;
    Ok(())
}
