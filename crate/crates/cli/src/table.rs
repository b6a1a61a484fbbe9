//! CSV result tables. Every table starts with a comment line carrying the
//! config hash, then a header row. Floats use Rust's shortest round-trip
//! formatting; absent values are empty cells. Rows are sorted
//! lexicographically by their rendered cells so output order never depends
//! on construction order.

use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(&'static str),
    Empty,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Self {
        match v {
            Some(x) => Cell::Float(x),
            None => Cell::Empty,
        }
    }

    fn render(&self, out: &mut String) {
        match self {
            Cell::Float(x) => write!(out, "{x}").unwrap(),
            Cell::Int(n) => write!(out, "{n}").unwrap(),
            Cell::Text(s) => out.push_str(s),
            Cell::Empty => {}
        }
    }
}

pub struct ResultTable {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn render(&self, config_hash: u64) -> String {
        let mut lines: Vec<String> = self
            .rows
            .iter()
            .map(|row| {
                let mut line = String::new();
                for (i, cell) in row.iter().enumerate() {
                    if i > 0 {
                        line.push(',');
                    }
                    cell.render(&mut line);
                }
                line
            })
            .collect();
        lines.sort();
        let mut out = format!("# config_hash=0x{config_hash:016x}\n");
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for line in lines {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path, config_hash: u64) -> std::io::Result<()> {
        std::fs::write(path, self.render(config_hash))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_sort_and_floats_round_trip() {
        let mut t = ResultTable::new(vec!["kappa", "t", "v"]);
        t.push(vec![Cell::Float(4.0), Cell::Float(0.5), Cell::Empty]);
        t.push(vec![Cell::Float(2.0), Cell::Float(-6.0), Cell::Float(0.1)]);
        let s = t.render(0xdead);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# config_hash=0x000000000000dead");
        assert_eq!(lines[1], "kappa,t,v");
        assert_eq!(lines[2], "2,-6,0.1");
        assert_eq!(lines[3], "4,0.5,");
        let back: f64 = "0.1".parse().unwrap();
        assert_eq!(back, 0.1);
    }
}
