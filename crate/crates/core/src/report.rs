//! Text and CSV tables at three significant figures.

use std::fmt::Write;

use crate::bootstrap::BootstrapSummary;
use crate::frontier::FrontierRow;

/// `%g`-style formatting with `sig` significant figures: trailing zeros are
/// dropped; scientific notation below 1e-4 or at/above `10^sig`.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sig = sig.max(1);
    // Round first so that e.g. 9.996 -> 10.0 picks the right exponent.
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let m = trim_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (sig as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Fixed-width table: one row per parameter with central value and bounds.
pub fn render_table(summary: &BootstrapSummary) -> String {
    let header = ["parameter", "central", "lower", "upper"];
    let rows: Vec<[String; 4]> = summary
        .rows()
        .into_iter()
        .map(|r| [r.parameter, format_sig(r.central, 3), format_sig(r.lower, 3), format_sig(r.upper, 3)])
        .collect();
    let mut widths = header.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: [&str; 4]| {
        let mut l = format!("{:<w$}", cells[0], w = widths[0]);
        for (cell, w) in cells[1..].iter().zip(&widths[1..]) {
            write!(l, "  {cell:>w$}").unwrap();
        }
        out.push_str(l.trim_end());
        out.push('\n');
    };
    line(header);
    for row in &rows {
        line([&row[0], &row[1], &row[2], &row[3]]);
    }
    out
}

pub fn render_table_csv(summary: &BootstrapSummary) -> String {
    let mut out = String::from("parameter,central,lower,upper\n");
    for r in summary.rows() {
        writeln!(out, "{},{},{},{}", r.parameter, format_sig(r.central, 3), format_sig(r.lower, 3), format_sig(r.upper, 3)).unwrap();
    }
    out
}

pub fn render_frontier_table(rows: &[FrontierRow]) -> String {
    let mut out = format!("{:>10}  {:>10}  {:>10}  {:>10}\n", "C", "N*", "D*", "L*");
    for r in rows {
        writeln!(
            out,
            "{:>10}  {:>10}  {:>10}  {:>10}",
            format_sig(r.budget, 3),
            format_sig(r.optimal_params, 3),
            format_sig(r.optimal_tokens, 3),
            format_sig(r.optimal_loss, 3)
        )
        .unwrap();
    }
    out
}
