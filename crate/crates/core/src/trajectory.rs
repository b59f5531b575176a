//! Recorded sample paths and their CSV form.

use std::io::Write;

use crate::combinatorics::{card, full_mask};
use crate::Mask;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Columns `t, x1..xn` followed by `y_<hex>` for each mask.
    pub fn with_layout(n: usize, y_masks: &[Mask]) -> Self {
        let mut columns = vec!["t".to_string()];
        columns.extend((1..=n).map(|i| format!("x{i}")));
        columns.extend(y_masks.iter().map(|m| format!("y_{m:x}")));
        Self { columns, rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Every subset with at least two loci, in increasing mask order.
pub fn all_pair_masks(n: usize) -> Vec<Mask> {
    (0..=full_mask(n)).filter(|&m| card(m) >= 2).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_csv() {
        let mut t = Trajectory::with_layout(2, &[0b11]);
        assert_eq!(t.columns, vec!["t", "x1", "x2", "y_3"]);
        t.rows.push(vec![0.0, 0.5, 0.25, -0.125]);
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "t,x1,x2,y_3\n0,0.5,0.25,-0.125\n");
        assert_eq!(t.column("x2").unwrap(), vec![0.25]);
    }
}
