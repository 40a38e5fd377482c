use std::io::Write;

use crate::fmt_f64;

#[derive(Debug, Clone, PartialEq)]
pub struct PathRow {
    pub t: usize,
    pub beta: Vec<f64>,
    /// `(e_t, Q_t)` when the path came from the Kalman filter.
    pub innovation: Option<(f64, f64)>,
}

/// A recorded coefficient path, exportable as
/// `t,beta_1,...,beta_p[,e,Q]` CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoefficientPath {
    rows: Vec<PathRow>,
}

impl CoefficientPath {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: PathRow) {
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[PathRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let p = self.rows.first().map_or(0, |r| r.beta.len());
        let with_diag = self.rows.first().is_some_and(|r| r.innovation.is_some());
        let mut header = String::from("t");
        for j in 1..=p {
            header.push_str(&format!(",beta_{j}"));
        }
        if with_diag {
            header.push_str(",e,Q");
        }
        writeln!(w, "{header}")?;
        for r in &self.rows {
            let mut line = r.t.to_string();
            for b in &r.beta {
                line.push(',');
                line.push_str(&fmt_f64(*b));
            }
            if with_diag {
                let (e, q) = r.innovation.unwrap_or((f64::NAN, f64::NAN));
                line.push(',');
                line.push_str(&fmt_f64(e));
                line.push(',');
                line.push_str(&fmt_f64(q));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}
