//! Human-readable and machine-readable outputs: run summaries, chi-square
//! reports and the grid tables.

use std::fmt::Write as _;

use galgo_core::engine::RunResult;
use galgo_core::experiment::{homogeneity_analysis, GridAggregate, Measure};
use galgo_core::genome::GeneticTopology;
use galgo_core::scores::round_significant;
use galgo_core::stats::{ChiSquareReport, ChiSquareTerm, ExpectedMode};
use serde::Serialize;

use crate::data::contingency_csv;

/// `x` to six significant digits.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x != 0.0 && (x.abs() < 1e-4 || x.abs() >= 1e9) {
        return format!("{x:.5e}");
    }
    round_significant(x, 6).to_string()
}

#[derive(Debug, Serialize)]
pub struct BestSummary {
    pub objective: f64,
    pub r2: f64,
    pub genotypes: Vec<String>,
    pub with_intercept: bool,
    pub intercept: Option<f64>,
    pub slopes: Vec<f64>,
    pub t_intercept: Option<f64>,
    pub t_slopes: Vec<Option<f64>>,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub config_fingerprint: String,
    pub generations: usize,
    pub improving_generations: usize,
    pub target_reached: bool,
    pub best: Option<BestSummary>,
}

/// JSON keeps non-finite numbers out: `t` values of exact fits become null.
fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn run_summary(
    topology: &GeneticTopology,
    separator: &str,
    fingerprint: &str,
    result: &RunResult,
) -> String {
    let summary = RunSummary {
        seed: result.seed,
        config_fingerprint: fingerprint.to_string(),
        generations: result.records.len(),
        improving_generations: result.records.iter().filter(|r| r.improved).count(),
        target_reached: result.target_reached,
        best: result.best.as_ref().map(|b| BestSummary {
            objective: b.objective,
            r2: b.model.r2,
            genotypes: b.genotypes.iter().map(|g| topology.render(g, separator)).collect(),
            with_intercept: b.model.with_intercept,
            intercept: b.model.intercept,
            slopes: b.model.slopes.clone(),
            t_intercept: b.model.t_intercept.and_then(finite),
            t_slopes: b.model.t_slopes.iter().map(|&t| finite(t)).collect(),
        }),
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    text
}

fn term_line(out: &mut String, kind: &str, t: &ChiSquareTerm) {
    let _ = writeln!(
        out,
        "{:<8}{:<8}{:>12}{:>5}{:>14}  {}",
        kind,
        t.label,
        sig6(t.statistic),
        t.df,
        sig6(t.p_value),
        t.verdict.symbol()
    );
}

/// Observed table, expected table and the partial and total tests.
pub fn render_chi2(report: &ChiSquareReport) -> String {
    let table = &report.table;
    let width = 12;
    let mut out = String::new();
    let grid = |out: &mut String, title: &str, rows: &[Vec<f64>]| {
        let _ = writeln!(out, "{title}");
        let _ = write!(out, "{:<8}", "");
        for c in table.col_labels() {
            let _ = write!(out, "{c:>width$}");
        }
        out.push('\n');
        for (label, row) in table.row_labels().iter().zip(rows) {
            let _ = write!(out, "{label:<8}");
            for v in row {
                let _ = write!(out, "{:>width$}", sig6(*v));
            }
            out.push('\n');
        }
    };
    grid(&mut out, "observed", table.observed());
    let mode = match report.mode {
        ExpectedMode::Exact => "exact",
        ExpectedMode::RoundedToInteger => "rounded to integers",
    };
    grid(&mut out, &format!("expected ({mode})"), &report.expected);
    let _ = writeln!(out, "alpha = {}", report.alpha);
    let _ = writeln!(
        out,
        "{:<8}{:<8}{:>12}{:>5}{:>14}  verdict",
        "test", "label", "X2", "df", "p"
    );
    for t in &report.partial_row {
        term_line(&mut out, "row", t);
    }
    for t in &report.partial_col {
        term_line(&mut out, "column", t);
    }
    term_line(&mut out, "total", &report.total);
    out
}

/// Per-cell counts as CSV, one line per strategy pair.
pub fn cells_csv(agg: &GridAggregate) -> String {
    let mut out = String::from("cell,runs,num,occ,par,top_num,top_occ,top_par,error\n");
    for cell in &agg.cells {
        let c = cell.counts;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            cell.label(),
            cell.runs,
            c.num,
            c.occ,
            c.par,
            c.top_num,
            c.top_occ,
            c.top_par,
            cell.error.as_deref().unwrap_or("").replace([',', '\n'], ";")
        );
    }
    out
}

/// Contingency CSV of one measure, rows by selection, columns by survival.
pub fn measure_csv(agg: &GridAggregate, measure: Measure) -> Option<String> {
    agg.contingency(measure).ok().map(|t| contingency_csv(&t))
}

/// Counts table followed by one homogeneity analysis per measure.
pub fn render_grid(agg: &GridAggregate, alpha: f64, mode: ExpectedMode) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "strategy grid (selection:survival), top threshold {}", agg.threshold);
    let _ = writeln!(
        out,
        "{:<6}{:>6}{:>10}{:>10}{:>12}{:>10}{:>10}{:>12}",
        "cell", "runs", "num", "occ", "par", "top-num", "top-occ", "top-par"
    );
    let mut total = [0u64; 6];
    for cell in &agg.cells {
        let c = cell.counts;
        let vals = [c.num, c.occ, c.par, c.top_num, c.top_occ, c.top_par];
        for (t, v) in total.iter_mut().zip(vals) {
            *t += v;
        }
        let _ = writeln!(
            out,
            "{:<6}{:>6}{:>10}{:>10}{:>12}{:>10}{:>10}{:>12}",
            cell.label(),
            cell.runs,
            vals[0],
            vals[1],
            vals[2],
            vals[3],
            vals[4],
            vals[5]
        );
        if let Some(e) = &cell.error {
            let _ = writeln!(out, "      failed: {e}");
        }
    }
    let _ = writeln!(
        out,
        "{:<6}{:>6}{:>10}{:>10}{:>12}{:>10}{:>10}{:>12}",
        "total",
        agg.cells.iter().map(|c| c.runs).sum::<usize>(),
        total[0],
        total[1],
        total[2],
        total[3],
        total[4],
        total[5]
    );
    for measure in Measure::ALL {
        let _ = writeln!(out, "\n== homogeneity of {measure} ==");
        match homogeneity_analysis(agg, measure, alpha, mode) {
            Ok(report) => out.push_str(&render_chi2(&report)),
            Err(e) => {
                let _ = writeln!(out, "not testable: {e}");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(69.8612345), "69.8612");
        assert_eq!(sig6(0.001234567), "0.00123457");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.5e-7), "1.50000e-7");
        assert_eq!(sig6(f64::INFINITY), "inf");
    }

    #[test]
    fn grid_report_mentions_every_measure() {
        let agg = GridAggregate::from_measure(
            Measure::Num,
            [[6760, 7466, 8070], [6537, 7529, 7964], [3922, 4965, 4385]],
        );
        let text = render_grid(&agg, 0.05, ExpectedMode::RoundedToInteger);
        for m in Measure::ALL {
            assert!(text.contains(&format!("homogeneity of {m}")));
        }
        assert!(text.contains("69.86"));
        assert!(text.contains("not testable"));
        assert_eq!(
            measure_csv(&agg, Measure::Num).unwrap(),
            ",P,T,D\nP,6760,7466,8070\nT,6537,7529,7964\nD,3922,4965,4385\n"
        );
    }
}
