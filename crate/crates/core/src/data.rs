//! Long-format data tables with a multi-level integer index.
//!
//! A table has zero or more index columns, named after model index
//! variables, and value columns named after model variables or inputs.
//! Missing cells are stored as NaN. A row is identified by its index tuple.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("duplicate index tuple {tuple:?} in table {table}")]
    DuplicateIndexTuple { table: String, tuple: Vec<i64> },
    #[error("row {row}, column `{column}`: cannot parse `{text}`")]
    UnparseableCell { row: usize, column: String, text: String },
    #[error("row {row}: index column `{column}` must hold an integer")]
    BadIndexValue { row: usize, column: String },
    #[error("row {row} has {found} cells, header has {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Integer,
    Float,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    /// NaN marks a missing cell.
    pub values: Vec<f64>,
}

impl Column {
    pub fn float(name: impl Into<String>, values: Vec<f64>) -> Column {
        Column { name: name.into(), kind: ColumnKind::Float, values }
    }

    pub fn integer(name: impl Into<String>, values: Vec<f64>) -> Column {
        Column { name: name.into(), kind: ColumnKind::Integer, values }
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }
}

#[derive(Debug, Clone)]
pub struct DataTable {
    label: String,
    index_names: Vec<String>,
    index_rows: Vec<Vec<i64>>,
    columns: Vec<Column>,
    row_of: HashMap<Vec<i64>, usize>,
}

impl PartialEq for DataTable {
    fn eq(&self, other: &Self) -> bool {
        self.index_names == other.index_names
            && self.index_rows == other.index_rows
            && self.columns.len() == other.columns.len()
            && self.columns.iter().zip(&other.columns).all(|(a, b)| {
                a.name == b.name
                    && a.values.len() == b.values.len()
                    && a.values.iter().zip(&b.values).all(|(x, y)| x == y || (x.is_nan() && y.is_nan()))
            })
    }
}

impl DataTable {
    /// Builds a table, rejecting repeated index tuples.
    pub fn new(
        label: impl Into<String>,
        index_names: Vec<String>,
        index_rows: Vec<Vec<i64>>,
        columns: Vec<Column>,
    ) -> Result<DataTable, DataError> {
        let label = label.into();
        let mut row_of = HashMap::with_capacity(index_rows.len());
        if !index_names.is_empty() {
            for (r, tuple) in index_rows.iter().enumerate() {
                if row_of.insert(tuple.clone(), r).is_some() {
                    return Err(DataError::DuplicateIndexTuple { table: label, tuple: tuple.clone() });
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        for name in index_names.iter().chain(columns.iter().map(|c| &c.name)) {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateColumn(name.clone()));
            }
        }
        Ok(DataTable { label, index_names, index_rows, columns, row_of })
    }

    /// Parses CSV text. Columns named in `index_names` become index columns;
    /// the rest are value columns. Empty cells and `NaN` are missing.
    pub fn from_csv_reader<R: Read>(
        label: impl Into<String>,
        reader: R,
        index_names: &[&str],
    ) -> Result<DataTable, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let index_cols: Vec<usize> = (0..header.len()).filter(|&i| index_names.contains(&header[i].as_str())).collect();
        let value_cols: Vec<usize> = (0..header.len()).filter(|i| !index_cols.contains(i)).collect();

        let mut index_rows = Vec::new();
        let mut raw: Vec<Vec<f64>> = vec![Vec::new(); value_cols.len()];
        let mut integral = vec![true; value_cols.len()];
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(DataError::RaggedRow { row: r + 1, expected: header.len(), found: rec.len() });
            }
            let mut tuple = Vec::with_capacity(index_cols.len());
            for &c in &index_cols {
                let text = rec[c].trim();
                let v: i64 =
                    text.parse().map_err(|_| DataError::BadIndexValue { row: r + 1, column: header[c].clone() })?;
                tuple.push(v);
            }
            index_rows.push(tuple);
            for (k, &c) in value_cols.iter().enumerate() {
                let text = rec[c].trim();
                let v = if text.is_empty() || text == "NaN" || text == "nan" {
                    f64::NAN
                } else {
                    if text.parse::<i64>().is_err() {
                        integral[k] = false;
                    }
                    text.parse::<f64>().map_err(|_| DataError::UnparseableCell {
                        row: r + 1,
                        column: header[c].clone(),
                        text: text.to_string(),
                    })?
                };
                raw[k].push(v);
            }
        }
        let columns = value_cols
            .iter()
            .enumerate()
            .map(|(k, &c)| Column {
                name: header[c].clone(),
                kind: if integral[k] { ColumnKind::Integer } else { ColumnKind::Float },
                values: std::mem::take(&mut raw[k]),
            })
            .collect();
        let index_names = index_cols.iter().map(|&c| header[c].clone()).collect();
        DataTable::new(label, index_names, index_rows, columns)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DataError> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<&str> =
            self.index_names.iter().map(String::as_str).chain(self.columns.iter().map(|c| c.name.as_str())).collect();
        w.write_record(&header)?;
        for r in 0..self.n_rows() {
            let mut rec: Vec<String> = self.index_rows[r].iter().map(|v| v.to_string()).collect();
            for c in &self.columns {
                rec.push(format_cell(c.values[r], c.kind));
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| DataError::Io { path: self.label.clone(), source: e })?;
        Ok(())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn index_names(&self) -> &[String] {
        &self.index_names
    }

    pub fn n_rows(&self) -> usize {
        self.index_rows.len()
    }

    pub fn index_rows(&self) -> &[Vec<i64>] {
        &self.index_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_mut(&mut self, name: &str) -> Option<&mut Column> {
        self.columns.iter_mut().find(|c| c.name == name)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.column(name).is_some()
    }

    pub fn has_index(&self, name: &str) -> bool {
        self.index_names.iter().any(|n| n == name)
    }

    pub fn row(&self, tuple: &[i64]) -> Option<usize> {
        self.row_of.get(tuple).copied()
    }

    /// Value at an index tuple: `None` when the row is absent, NaN when the
    /// cell is missing.
    pub fn get(&self, column: &str, tuple: &[i64]) -> Option<f64> {
        let c = self.column(column)?;
        self.row(tuple).map(|r| c.values[r])
    }

    /// Inclusive range of values in an index column.
    pub fn index_range(&self, name: &str) -> Option<(i64, i64)> {
        let k = self.index_names.iter().position(|n| n == name)?;
        let lo = self.index_rows.iter().map(|t| t[k]).min()?;
        let hi = self.index_rows.iter().map(|t| t[k]).max()?;
        Some((lo, hi))
    }

    /// Copy of the table with an extra index column numbering the rows.
    pub fn with_row_index(&self, name: &str) -> Result<DataTable, DataError> {
        let mut names = vec![name.to_string()];
        names.extend(self.index_names.iter().cloned());
        let rows = self
            .index_rows
            .iter()
            .enumerate()
            .map(|(r, t)| {
                let mut v = vec![r as i64];
                v.extend(t);
                v
            })
            .collect();
        DataTable::new(self.label.clone(), names, rows, self.columns.clone())
    }

    /// Keeps rows whose index tuple satisfies `keep`.
    pub fn filter_rows(&self, keep: impl Fn(&[i64]) -> bool) -> DataTable {
        let rows: Vec<usize> = (0..self.n_rows()).filter(|&r| keep(&self.index_rows[r])).collect();
        let index_rows = rows.iter().map(|&r| self.index_rows[r].clone()).collect();
        let columns = self
            .columns
            .iter()
            .map(|c| Column { name: c.name.clone(), kind: c.kind, values: rows.iter().map(|&r| c.values[r]).collect() })
            .collect();
        DataTable::new(self.label.clone(), self.index_names.clone(), index_rows, columns)
            .expect("a subset of unique rows stays unique")
    }
}

fn format_cell(v: f64, kind: ColumnKind) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if kind == ColumnKind::Integer && v.fract() == 0.0 && v.abs() < 9.0e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Reads a CSV file, treating columns named in `index_names` as the index.
pub fn read_table(path: impl AsRef<Path>, index_names: &[&str]) -> Result<DataTable, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| DataError::Io { path: path.display().to_string(), source: e })?;
    DataTable::from_csv_reader(path.display().to_string(), file, index_names)
}

pub fn write_table(table: &DataTable, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file =
        std::fs::File::create(path).map_err(|e| DataError::Io { path: path.display().to_string(), source: e })?;
    table.write_csv(std::io::BufWriter::new(file))
}
