//! Column tables written as CSV.

use throwcatch::{Error, Result};

/// Named columns of equal length. Headers carry their unit in brackets, e.g. `x [m]`.
#[derive(Debug, Clone, Default)]
pub struct Table {
    headers: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new() -> Self {
        Table::default()
    }

    pub fn column(mut self, header: impl Into<String>, values: Vec<f64>) -> Self {
        self.headers.push(header.into());
        self.columns.push(values);
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    /// CSV bytes, every number with 12 significant digits.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let rows = self.rows();
        if let Some((h, _)) = self.headers.iter().zip(&self.columns).find(|(_, c)| c.len() != rows) {
            return Err(Error::Invariant(format!("column {h:?} does not have {rows} rows")));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.headers).map_err(io)?;
        for i in 0..rows {
            w.write_record(self.columns.iter().map(|c| format_number(c[i]))).map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.11e}")
    }
}
