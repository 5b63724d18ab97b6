//! Recomputes the summary statistics of the published accuracy tables and
//! compares them with the printed values.

use serde::Serialize;

use crate::dataio::{
    paper_tables, PaperTables, MSFBCSP_POOLED, MSFBCSP_SUMMARY_ROW, N_TABLE_SUBJECTS, SINGLE_POOLED,
    SINGLE_SUMMARY_ROW,
};
use crate::harness::stats::{fmt_1dp, median_range, wilcoxon_signed_rank, MedianRange};

/// Printed medians carry one decimal of unknown rounding convention.
pub const SUBJECT_MEDIAN_TOL: f64 = 0.1;
pub const POOLED_MEDIAN_TOL: f64 = 0.2;
pub const P_VALUE_BOUND: f64 = 0.001;

const EXACT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaperCheckReport {
    pub checks: Vec<CheckLine>,
    pub msfbcsp_pooled: MedianRange,
    pub single_pooled: MedianRange,
    pub p_value: f64,
}

impl PaperCheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// One line per check followed by the headline comparison.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{:<40} expected {:<22} got {:<22} {}\n",
                c.name,
                c.expected,
                c.actual,
                verdict(c.pass)
            ));
        }
        out.push_str(&format!(
            "msFBCSP median {} vs single-session median {}; p = {:.3e} (p < 0.001): {}\n",
            self.msfbcsp_pooled.display(),
            self.single_pooled.display(),
            self.p_value,
            verdict(self.passed())
        ));
        out
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn summary_check(
    name: String,
    got: MedianRange,
    printed: (f64, f64, f64),
    median_tol: f64,
) -> CheckLine {
    let (median, min, max) = printed;
    let pass = (got.median - median).abs() <= median_tol + EXACT
        && (got.min - min).abs() <= EXACT
        && (got.max - max).abs() <= EXACT;
    CheckLine {
        name,
        expected: format!("{} ({}-{})", fmt_1dp(median), fmt_1dp(min), fmt_1dp(max)),
        actual: format!("{:.2} ({}-{})", got.median, fmt_1dp(got.min), fmt_1dp(got.max)),
        pass,
    }
}

/// Checks the embedded tables.
pub fn paper_check() -> PaperCheckReport {
    paper_check_tables(&paper_tables())
}

/// Checks arbitrary tables against the printed summaries (used for negative
/// controls with perturbed fixtures).
pub fn paper_check_tables(tables: &PaperTables) -> PaperCheckReport {
    let mut checks = Vec::new();
    for subject in 1..=N_TABLE_SUBJECTS {
        for (label, column, printed) in [
            ("msFBCSP", tables.msfbcsp_column(subject), MSFBCSP_SUMMARY_ROW[subject - 1]),
            ("single", tables.single_column(subject), SINGLE_SUMMARY_ROW[subject - 1]),
        ] {
            let got = median_range(&column).expect("14 values");
            checks.push(summary_check(
                format!("{label} Sb.{subject} median (range)"),
                got,
                printed,
                SUBJECT_MEDIAN_TOL,
            ));
        }
    }

    let ms = tables.msfbcsp_flat();
    let single = tables.single_flat();
    let ms_pooled = median_range(&ms).expect("98 values");
    let single_pooled = median_range(&single).expect("98 values");
    checks.push(summary_check(
        "msFBCSP pooled median (range)".into(),
        ms_pooled,
        MSFBCSP_POOLED,
        POOLED_MEDIAN_TOL,
    ));
    checks.push(summary_check(
        "single pooled median (range)".into(),
        single_pooled,
        SINGLE_POOLED,
        POOLED_MEDIAN_TOL,
    ));

    let w = wilcoxon_signed_rank(&ms, &single).expect("paired tables");
    checks.push(CheckLine {
        name: "Wilcoxon signed-rank, 98 pairs".into(),
        expected: format!("p < {P_VALUE_BOUND}"),
        actual: format!("p = {:.3e}", w.p_value),
        pass: w.p_value < P_VALUE_BOUND,
    });

    PaperCheckReport {
        checks,
        msfbcsp_pooled: ms_pooled,
        single_pooled,
        p_value: w.p_value,
    }
}
