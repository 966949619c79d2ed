//! Fixed-format CSV text: 17 significant digits, `.` decimal point, `\n`
//! line endings, mandatory header row.

use std::fmt::Write;

use crate::scalar::Real;

/// A real number at 17 significant digits.
pub fn fmt17<T: Real>(x: T) -> String {
    format!("{x:.16e}")
}

/// Column-oriented CSV builder.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    header: Vec<String>,
    body: String,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            body: String::new(),
        }
    }

    pub fn columns(&self) -> usize {
        self.header.len()
    }

    /// Appends a row of pre-formatted cells.
    pub fn push_cells<S: AsRef<str>>(&mut self, cells: &[S]) {
        assert_eq!(cells.len(), self.header.len(), "row width differs from header");
        let row: Vec<&str> = cells.iter().map(|c| c.as_ref()).collect();
        let _ = writeln!(self.body, "{}", row.join(","));
    }

    /// Appends a row of reals.
    pub fn push<T: Real>(&mut self, values: &[T]) {
        let cells: Vec<String> = values.iter().map(|&v| fmt17(v)).collect();
        self.push_cells(&cells);
    }

    pub fn to_text(&self) -> String {
        format!("{}\n{}", self.header.join(","), self.body)
    }
}
