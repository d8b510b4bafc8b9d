//! Frequency tables of real solutions against overlap number.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("real count {real} has the wrong parity for degree {degree}")]
    Parity { real: u64, degree: u64 },
    #[error("real count {real} exceeds degree {degree}")]
    AboveDegree { real: u64, degree: u64 },
    #[error("cell counts must be positive")]
    ZeroCount,
    #[error("malformed CSV: {0}")]
    Csv(String),
}

/// One cell: `count` instances had `real` real solutions at overlap `overlap`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub real: u64,
    pub overlap: u64,
    pub count: u64,
}

/// Counts keyed by `(real, overlap)`. Only positive counts are stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    cells: BTreeMap<(u64, u64), u64>,
}

impl FrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_cells(cells: &[Cell]) -> Self {
        let mut t = Self::new();
        for c in cells {
            t.add(c.real, c.overlap, c.count);
        }
        t
    }

    pub fn add(&mut self, real: u64, overlap: u64, count: u64) {
        if count > 0 {
            *self.cells.entry((real, overlap)).or_default() += count;
        }
    }

    pub fn merge(&mut self, other: &FrequencyTable) {
        for (&(r, o), &c) in &other.cells {
            self.add(r, o, c);
        }
    }

    pub fn get(&self, real: u64, overlap: u64) -> u64 {
        self.cells.get(&(real, overlap)).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.cells.values().sum()
    }

    /// Cells in `(real, overlap)` order.
    pub fn cells(&self) -> Vec<Cell> {
        self.cells
            .iter()
            .map(|(&(real, overlap), &count)| Cell { real, overlap, count })
            .collect()
    }

    /// Parity, range and positivity against a problem's degree.
    pub fn validate(&self, degree: u64) -> Result<(), TableError> {
        validate_cells(&self.cells(), degree)
    }

    pub fn max_overlap(&self) -> Option<u64> {
        self.cells.keys().map(|&(_, o)| o).max()
    }

    /// Per overlap column, the fewest real solutions observed.
    pub fn inner_border(&self) -> BTreeMap<u64, u64> {
        let mut border: BTreeMap<u64, u64> = BTreeMap::new();
        for &(real, overlap) in self.cells.keys() {
            border
                .entry(overlap)
                .and_modify(|m| *m = (*m).min(real))
                .or_insert(real);
        }
        border
    }

    fn row_labels(degree: u64) -> Vec<u64> {
        (degree % 2..=degree).step_by(2).collect()
    }

    fn columns(&self) -> Vec<u64> {
        self.max_overlap().map_or_else(Vec::new, |m| (0..=m).collect())
    }

    /// Rows are the real counts of the degree's parity, ascending; columns
    /// the overlap numbers from 0 to the largest observed; both with totals.
    pub fn render_text(&self, degree: u64) -> String {
        let cols = self.columns();
        let rows = Self::row_labels(degree);
        let mut grid: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["real\\overlap".to_string()];
        header.extend(cols.iter().map(u64::to_string));
        header.push("Total".into());
        grid.push(header);
        for &r in &rows {
            let mut line = vec![r.to_string()];
            for &o in &cols {
                let c = self.get(r, o);
                line.push(if c == 0 { String::new() } else { c.to_string() });
            }
            line.push(self.row_total(r).to_string());
            grid.push(line);
        }
        let mut totals = vec!["Total".to_string()];
        totals.extend(cols.iter().map(|&o| self.column_total(o).to_string()));
        totals.push(self.total().to_string());
        grid.push(totals);

        let widths: Vec<usize> = (0..grid[0].len())
            .map(|c| grid.iter().map(|row| row[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &grid {
            let cells: Vec<String> =
                row.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
            let _ = writeln!(out, "{}", cells.join(" | "));
        }
        let border: Vec<String> = self
            .inner_border()
            .iter()
            .map(|(o, r)| format!("{o}:{r}"))
            .collect();
        let _ = writeln!(out, "inner border (overlap:min real): {}", border.join(" "));
        out
    }

    pub fn row_total(&self, real: u64) -> u64 {
        self.cells.iter().filter(|(k, _)| k.0 == real).map(|(_, c)| c).sum()
    }

    pub fn column_total(&self, overlap: u64) -> u64 {
        self.cells.iter().filter(|(k, _)| k.1 == overlap).map(|(_, c)| c).sum()
    }

    /// CSV with header `real\overlap,0,1,...,Total`, one row per real count
    /// and a final `Total` row. Empty cells are written as `0`.
    pub fn to_csv(&self, degree: u64) -> String {
        let cols = self.columns();
        let mut out = String::from("real\\overlap");
        for o in &cols {
            let _ = write!(out, ",{o}");
        }
        out.push_str(",Total\n");
        for r in Self::row_labels(degree) {
            let _ = write!(out, "{r}");
            for &o in &cols {
                let _ = write!(out, ",{}", self.get(r, o));
            }
            let _ = writeln!(out, ",{}", self.row_total(r));
        }
        out.push_str("Total");
        for &o in &cols {
            let _ = write!(out, ",{}", self.column_total(o));
        }
        let _ = writeln!(out, ",{}", self.total());
        out
    }

    /// Parses the output of [`to_csv`](Self::to_csv), checking the totals.
    pub fn from_csv(text: &str) -> Result<FrequencyTable, TableError> {
        let bad = |m: &str| TableError::Csv(m.to_string());
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split(',').collect();
        if header.first() != Some(&"real\\overlap") || header.last() != Some(&"Total") {
            return Err(bad("header"));
        }
        let cols: Vec<u64> = header[1..header.len() - 1]
            .iter()
            .map(|s| s.parse().map_err(|_| bad("column label")))
            .collect::<Result<_, _>>()?;
        let mut table = FrequencyTable::new();
        let mut totals: Option<Vec<u64>> = None;
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() + 2 {
                return Err(bad("row width"));
            }
            let nums: Vec<u64> = fields[1..]
                .iter()
                .map(|s| s.parse().map_err(|_| bad("count")))
                .collect::<Result<_, _>>()?;
            if fields[0] == "Total" {
                totals = Some(nums);
                continue;
            }
            let real: u64 = fields[0].parse().map_err(|_| bad("row label"))?;
            for (&o, &c) in cols.iter().zip(&nums) {
                table.add(real, o, c);
            }
            if table.row_total(real) != *nums.last().unwrap() {
                return Err(bad("row total"));
            }
        }
        let totals = totals.ok_or_else(|| bad("missing Total row"))?;
        for (&o, &c) in cols.iter().zip(&totals) {
            if table.column_total(o) != c {
                return Err(bad("column total"));
            }
        }
        if table.total() != *totals.last().unwrap() {
            return Err(bad("grand total"));
        }
        Ok(table)
    }
}

pub fn validate_cells(cells: &[Cell], degree: u64) -> Result<(), TableError> {
    for c in cells {
        if c.count == 0 {
            return Err(TableError::ZeroCount);
        }
        if c.real > degree {
            return Err(TableError::AboveDegree { real: c.real, degree });
        }
        if c.real % 2 != degree % 2 {
            return Err(TableError::Parity { real: c.real, degree });
        }
    }
    Ok(())
}
