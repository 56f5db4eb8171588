//! CSV formats for datasets, masks, codebooks, imputation sets and labels.
//!
//! Data files carry a header row of column names; missing entries are the
//! empty field or `NA`. Codebook files use the header
//! `neuron,row,col,<variables...>` with one line per neuron.

use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{domain, Error, Result};
use crate::masked::{Imputation, ImputationSet, MaskedDataset};
use crate::som::Codebook;
use crate::topology::{GridSpec, Topology};

/// Parsed data file: column names and the partially observed matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub data: MaskedDataset,
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f == "NA"
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn parse_real(field: &str, line: usize, column: usize) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, column, format!("'{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, column, format!("'{field}' is not finite")));
    }
    Ok(v)
}

/// Reads raw rows as optional reals. Line numbers in errors are 1-based and
/// count the header; columns are 1-based.
fn read_grid<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<Option<f64>>>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return domain("data file has no header");
    }
    let mut rows = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| parse_err(line, 0, e.to_string()))?;
        if record.len() != header.len() {
            return Err(parse_err(
                line,
                record.len().min(header.len()) + 1,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(j, f)| {
                if is_missing(f) {
                    Ok(None)
                } else {
                    parse_real(f, line, j + 1).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return domain("data file has no rows");
    }
    Ok((header, rows))
}

/// Reads a data file; rows or columns without any observed entry are rejected.
pub fn read_data<R: Read>(reader: R) -> Result<Table> {
    let (header, rows) = read_grid(reader)?;
    let data = MaskedDataset::from_options(&rows)?;
    data.check_columns()?;
    Ok(Table { header, data })
}

/// Reads a complete numeric matrix (no missing entries allowed).
pub fn read_matrix<R: Read>(reader: R) -> Result<(Vec<String>, Array2<f64>)> {
    let (header, rows) = read_grid(reader)?;
    let p = header.len();
    let mut out = Array2::zeros((rows.len(), p));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[[i, j]] = v.ok_or_else(|| parse_err(i + 2, j + 1, "missing entry in a complete matrix"))?;
        }
    }
    Ok((header, out))
}

/// Reads an explicit 0/1 mask with the same shape as the data and applies it:
/// entries marked 0 become missing.
pub fn apply_mask<R: Read>(table: &Table, reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let (n, p) = (table.data.n(), table.data.p());
    let mut mask = table.data.mask().clone();
    let mut count = 0;
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_err(line, 0, e.to_string()))?;
        if i >= n {
            return Err(parse_err(line, 1, format!("mask has more than {n} rows")));
        }
        if record.len() != p {
            return Err(parse_err(line, 1, format!("expected {p} fields, found {}", record.len())));
        }
        for (j, f) in record.iter().enumerate() {
            match f.trim() {
                "1" => {}
                "0" => mask[[i, j]] = false,
                other => return Err(parse_err(line, j + 1, format!("mask entry '{other}' is not 0 or 1"))),
            }
        }
        count += 1;
    }
    if count != n {
        return domain(format!("mask has {count} rows, data has {n}"));
    }
    let data = MaskedDataset::new(table.data.values().clone(), mask)?;
    data.check_columns()?;
    Ok(Table {
        header: table.header.clone(),
        data,
    })
}

fn write_header<W: Write>(w: &mut csv::Writer<W>, header: &[String]) -> Result<()> {
    w.write_record(header)?;
    Ok(())
}

/// Writes a data file; masked entries are written as `NA`.
pub fn write_data<W: Write>(writer: W, header: &[String], data: &MaskedDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    write_header(&mut w, header)?;
    for i in 0..data.n() {
        let row: Vec<String> = (0..data.p())
            .map(|j| {
                if data.is_observed(i, j) {
                    data.values()[[i, j]].to_string()
                } else {
                    "NA".to_string()
                }
            })
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix<W: Write>(writer: W, header: &[String], values: &Array2<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    write_header(&mut w, header)?;
    for row in values.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// `Display` for `f64` prints the shortest representation that parses back
/// to the same value, so these files round-trip exactly.
pub fn write_codebook<W: Write>(writer: W, header: &[String], codebook: &Codebook) -> Result<()> {
    if header.len() != codebook.dim() {
        return Err(Error::DimensionMismatch {
            expected: codebook.dim(),
            actual: header.len(),
        });
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut head = vec!["neuron".to_string(), "row".to_string(), "col".to_string()];
    head.extend(header.iter().cloned());
    w.write_record(&head)?;
    let grid = codebook.grid();
    for k in 0..codebook.len() {
        let (r, c) = grid.position(k)?;
        let mut rec = vec![k.to_string(), r.to_string(), c.to_string()];
        rec.extend(codebook.prototype(k).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a codebook file; the grid shape is recovered from the `row`/`col`
/// columns and the topology must be supplied.
pub fn read_codebook<R: Read>(reader: R, topology: Topology) -> Result<(Vec<String>, Codebook)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let head: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if head.len() < 4 || head[0] != "neuron" || head[1] != "row" || head[2] != "col" {
        return Err(parse_err(1, 1, "codebook header must start with neuron,row,col"));
    }
    let p = head.len() - 3;
    let mut entries: Vec<(usize, usize, usize, Vec<f64>)> = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| parse_err(line, 0, e.to_string()))?;
        if record.len() != head.len() {
            return Err(parse_err(line, 1, format!("expected {} fields, found {}", head.len(), record.len())));
        }
        let int = |j: usize| -> Result<usize> {
            record[j]
                .trim()
                .parse()
                .map_err(|_| parse_err(line, j + 1, format!("'{}' is not an index", &record[j])))
        };
        let (k, r, c) = (int(0)?, int(1)?, int(2)?);
        let w = (3..head.len())
            .map(|j| parse_real(&record[j], line, j + 1))
            .collect::<Result<Vec<_>>>()?;
        entries.push((k, r, c, w));
    }
    if entries.is_empty() {
        return domain("codebook file has no rows");
    }
    let rows = entries.iter().map(|e| e.1).max().unwrap_or(0) + 1;
    let cols = entries.iter().map(|e| e.2).max().unwrap_or(0) + 1;
    let grid = GridSpec::new(rows, cols, topology)?;
    if entries.len() != grid.len() {
        return domain(format!("codebook has {} rows but its grid has {} neurons", entries.len(), grid.len()));
    }
    let mut weights = Array2::zeros((grid.len(), p));
    let mut seen = vec![false; grid.len()];
    for (line, (k, r, c, w)) in entries.into_iter().enumerate() {
        if k >= grid.len() || grid.position(k)? != (r, c) {
            return Err(parse_err(line + 2, 1, format!("neuron {k} does not sit at row {r}, col {c}")));
        }
        if std::mem::replace(&mut seen[k], true) {
            return Err(parse_err(line + 2, 1, format!("duplicate neuron {k}")));
        }
        for (j, v) in w.into_iter().enumerate() {
            weights[[k, j]] = v;
        }
    }
    Ok((head[3..].to_vec(), Codebook::new(grid, weights)?))
}

/// Imputation sets as `row,col,value` lines with 0-based indices.
pub fn write_imputations<W: Write>(writer: W, set: &ImputationSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["row", "col", "value"])?;
    for e in set {
        w.write_record([e.row.to_string(), e.col.to_string(), e.value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_imputations<R: Read>(reader: R) -> Result<ImputationSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| parse_err(line, 0, e.to_string()))?;
        if record.len() != 3 {
            return Err(parse_err(line, 1, "expected row,col,value"));
        }
        let int = |j: usize| -> Result<usize> {
            record[j]
                .trim()
                .parse()
                .map_err(|_| parse_err(line, j + 1, format!("'{}' is not an index", &record[j])))
        };
        out.push(Imputation {
            row: int(0)?,
            col: int(1)?,
            value: parse_real(&record[2], line, 3)?,
        });
    }
    ImputationSet::new(out)
}

/// One label per line under the header `label`.
pub fn write_labels<W: Write>(writer: W, labels: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["label"])?;
    for l in labels {
        w.write_record([l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels<R: Read>(reader: R) -> Result<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| parse_err(idx + 2, 0, e.to_string()))?;
        let field = record.get(0).unwrap_or("").trim();
        if field.is_empty() {
            return Err(parse_err(idx + 2, 1, "empty label"));
        }
        out.push(field.to_string());
    }
    Ok(out)
}
