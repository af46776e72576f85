use std::fmt::Display;

/// Rows of a summary CSV with a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Writes the rows as CSV, preceded by the header when `header` is set.
    pub fn write_csv<W: std::io::Write>(&self, w: W, header: bool) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        if header {
            out.write_record(&self.columns)?;
        }
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Body of the CSV with a header row.
    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, true).expect("writing to memory");
        String::from_utf8(buf).expect("cells are UTF-8")
    }

    /// Column value of a row, if present.
    pub fn get(&self, row: usize, column: &str) -> Option<&str> {
        let idx = self.columns.iter().position(|c| c == column)?;
        self.rows.get(row).map(|r| r[idx].as_str())
    }
}

/// Formats a cell; floats use the shortest round-trip representation and
/// missing values are empty.
pub fn cell<T: Display>(v: T) -> String {
    v.to_string()
}

pub fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
