use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::chi2_sf;
use crate::error::{Error, Result};
use crate::math::round;

/// Labeled R×C table of nonnegative counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    observed: Vec<Vec<f64>>,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
}

impl ContingencyTable {
    pub fn new(
        observed: Vec<Vec<f64>>,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
    ) -> Result<Self> {
        if observed.len() < 2 || row_labels.len() != observed.len() {
            return Err(Error::InvalidArgument(
                "contingency table needs >= 2 labeled rows".into(),
            ));
        }
        let cols = col_labels.len();
        if cols < 2 {
            return Err(Error::InvalidArgument(
                "contingency table needs >= 2 labeled columns".into(),
            ));
        }
        for row in &observed {
            if row.len() != cols {
                return Err(Error::LengthMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            if row.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(Error::InvalidArgument(
                    "counts must be finite and nonnegative".into(),
                ));
            }
        }
        Ok(Self {
            observed,
            row_labels,
            col_labels,
        })
    }

    pub fn observed(&self) -> &[Vec<f64>] {
        &self.observed
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn rows(&self) -> usize {
        self.observed.len()
    }

    pub fn cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.observed.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.cols())
            .map(|j| self.observed.iter().map(|r| r[j]).sum())
            .collect()
    }
}

/// How expected counts enter the statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExpectedMode {
    /// `row_sum * col_sum / grand` at full precision.
    #[default]
    Exact,
    /// Expected counts rounded to the nearest integer before use, matching
    /// tables that print and then reuse integer expectations.
    RoundedToInteger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Homogeneous,
    NotHomogeneous,
}

impl Verdict {
    /// `"-"` for homogeneous, `"No"` for rejected homogeneity.
    pub fn symbol(self) -> &'static str {
        match self {
            Verdict::Homogeneous => "-",
            Verdict::NotHomogeneous => "No",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareTerm {
    pub label: String,
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
    pub verdict: Verdict,
}

impl ChiSquareTerm {
    fn new(label: String, statistic: f64, df: u32, alpha: f64) -> Result<Self> {
        let p_value = chi2_sf(statistic, df)?;
        let verdict = if p_value < alpha {
            Verdict::NotHomogeneous
        } else {
            Verdict::Homogeneous
        };
        Ok(Self {
            label,
            statistic,
            df,
            p_value,
            verdict,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareReport {
    pub table: ContingencyTable,
    pub expected: Vec<Vec<f64>>,
    pub partial_row: Vec<ChiSquareTerm>,
    pub partial_col: Vec<ChiSquareTerm>,
    pub total: ChiSquareTerm,
    pub alpha: f64,
    pub mode: ExpectedMode,
}

/// Chi-square homogeneity test with exact expected counts.
pub fn chi2_homogeneity(table: &ContingencyTable, alpha: f64) -> Result<ChiSquareReport> {
    chi2_homogeneity_with(table, alpha, ExpectedMode::Exact)
}

pub fn chi2_homogeneity_with(
    table: &ContingencyTable,
    alpha: f64,
    mode: ExpectedMode,
) -> Result<ChiSquareReport> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument("alpha must lie in [0, 1]".into()));
    }
    let rows = table.row_sums();
    let cols = table.col_sums();
    for (label, &sum) in table.row_labels.iter().zip(&rows) {
        if sum <= 0.0 {
            return Err(Error::ZeroMargin(alloc::format!("row {label}")));
        }
    }
    for (label, &sum) in table.col_labels.iter().zip(&cols) {
        if sum <= 0.0 {
            return Err(Error::ZeroMargin(alloc::format!("column {label}")));
        }
    }
    let grand: f64 = rows.iter().sum();

    let mut expected = Vec::with_capacity(table.rows());
    let mut cell = Vec::with_capacity(table.rows());
    for (i, obs_row) in table.observed.iter().enumerate() {
        let mut exp_row = Vec::with_capacity(table.cols());
        let mut cell_row = Vec::with_capacity(table.cols());
        for (j, &obs) in obs_row.iter().enumerate() {
            let mut e = rows[i] * cols[j] / grand;
            if mode == ExpectedMode::RoundedToInteger {
                e = round(e);
                if e <= 0.0 {
                    return Err(Error::InvalidArgument(alloc::format!(
                        "expected count for ({}, {}) rounds to zero",
                        table.row_labels[i], table.col_labels[j]
                    )));
                }
            }
            let d = obs - e;
            cell_row.push(d * d / e);
            exp_row.push(e);
        }
        expected.push(exp_row);
        cell.push(cell_row);
    }

    let r = table.rows() as u32;
    let c = table.cols() as u32;
    let partial_row = cell
        .iter()
        .zip(&table.row_labels)
        .map(|(row, label)| ChiSquareTerm::new(label.clone(), row.iter().sum(), c - 1, alpha))
        .collect::<Result<Vec<_>>>()?;
    let partial_col = table
        .col_labels
        .iter()
        .enumerate()
        .map(|(j, label)| {
            ChiSquareTerm::new(label.clone(), cell.iter().map(|row| row[j]).sum(), r - 1, alpha)
        })
        .collect::<Result<Vec<_>>>()?;
    let total_stat: f64 = cell.iter().flatten().sum();
    let total = ChiSquareTerm::new("total".into(), total_stat, (r - 1) * (c - 1), alpha)?;

    Ok(ChiSquareReport {
        table: table.clone(),
        expected,
        partial_row,
        partial_col,
        total,
        alpha,
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn labels() -> Vec<String> {
        vec!["P".into(), "T".into(), "D".into()]
    }

    fn table(rows: [[f64; 3]; 3]) -> ContingencyTable {
        ContingencyTable::new(rows.iter().map(|r| r.to_vec()).collect(), labels(), labels())
            .unwrap()
    }

    fn table9() -> ContingencyTable {
        table([
            [6760.0, 7466.0, 8070.0],
            [6537.0, 7529.0, 7964.0],
            [3922.0, 4965.0, 4385.0],
        ])
    }

    #[test]
    fn table9_partials() {
        let rep = chi2_homogeneity(&table9(), 0.05).unwrap();
        assert!((rep.partial_row[0].statistic - 13.6).abs() < 0.1);
        assert!((rep.partial_row[2].statistic - 51.4).abs() < 0.2);
        assert!((rep.total.statistic - 69.9).abs() < 0.2);
        assert_eq!(rep.total.df, 4);
        assert_eq!(rep.partial_row[0].df, 2);
        assert_eq!(rep.total.verdict, Verdict::NotHomogeneous);
        assert_eq!(rep.partial_row[1].verdict, Verdict::Homogeneous);
        // the printed expectations are the rounded ones
        let rounded = chi2_homogeneity_with(&table9(), 0.05, ExpectedMode::RoundedToInteger)
            .unwrap();
        assert_eq!(rounded.expected[0], vec![6665.0, 7726.0, 7904.0]);
    }

    #[test]
    fn table13_total() {
        let t = table([
            [406.0, 214.0, 378.0],
            [419.0, 217.0, 714.0],
            [89.0, 152.0, 893.0],
        ]);
        let rep = chi2_homogeneity(&t, 0.05).unwrap();
        assert!((rep.total.statistic - 421.0).abs() < 2.0);
    }

    #[test]
    fn decomposition_identity_and_margins() {
        let rep = chi2_homogeneity(&table9(), 0.05).unwrap();
        let rows: f64 = rep.partial_row.iter().map(|t| t.statistic).sum();
        let cols: f64 = rep.partial_col.iter().map(|t| t.statistic).sum();
        assert!((rows - rep.total.statistic).abs() <= 1e-9 * rep.total.statistic);
        assert!((cols - rep.total.statistic).abs() <= 1e-9 * rep.total.statistic);
        let obs_rows = rep.table.row_sums();
        for (e, o) in rep.expected.iter().zip(obs_rows) {
            assert!((e.iter().sum::<f64>() - o).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_rows_are_homogeneous() {
        let t = table([[5.0, 7.0, 9.0], [5.0, 7.0, 9.0], [5.0, 7.0, 9.0]]);
        let rep = chi2_homogeneity(&t, 0.05).unwrap();
        assert!(rep.total.statistic.abs() < 1e-12);
        assert!(rep
            .partial_row
            .iter()
            .chain(&rep.partial_col)
            .chain(core::iter::once(&rep.total))
            .all(|t| (t.p_value - 1.0).abs() < 1e-12 && t.verdict == Verdict::Homogeneous));
    }

    #[test]
    fn zero_margin_is_an_error() {
        let t = table([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        assert_eq!(
            chi2_homogeneity(&t, 0.05),
            Err(Error::ZeroMargin("row P".into()))
        );
    }

    #[test]
    fn rejects_malformed_tables() {
        assert!(ContingencyTable::new(vec![vec![1.0, 2.0]], vec!["a".into()], labels()).is_err());
        assert!(ContingencyTable::new(
            vec![vec![1.0, -2.0], vec![1.0, 2.0]],
            vec!["a".into(), "b".into()],
            vec!["x".into(), "y".into()]
        )
        .is_err());
    }
}
