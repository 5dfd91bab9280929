//! Side-by-side results table.

use std::collections::HashSet;

use super::ModelReport;
use crate::design::Block;
use crate::error::{Error, Result};
use crate::estimate::{stars, Coefficient};

pub const ABSENT: &str = "—";
pub const FOOTNOTE: &str = "***p < 0.01; **p < 0.05; *p < 0.1";
pub const LAMBDA_ROW: &str = "λ";

/// Two decimals, with negative zero printed as `0.00`.
pub fn format_number(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// `estimate<stars> (se)`, e.g. `0.26*** (0.07)`.
pub fn format_cell(c: &Coefficient) -> String {
    format!("{}{} ({})", format_number(c.estimate), stars(c.p_value), format_number(c.std_error))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub footnote: String,
}

type SummaryCell = Box<dyn Fn(&ModelReport) -> String>;

fn group(block: Block) -> usize {
    match block {
        Block::Intercept => 0,
        Block::Origin | Block::Destination | Block::OdPair => 1,
        Block::LagDestination | Block::LagOd => 2,
        Block::Dummy => 3,
    }
}

/// Coefficient rows (union over models, grouped intercept, covariates, lags,
/// dummies), then `λ` and the fit summary rows.
pub fn render_table(reports: &[ModelReport]) -> Table {
    let mut names: Vec<(usize, usize, String)> = Vec::new();
    let mut seen = HashSet::new();
    for r in reports {
        for l in &r.spatial.labels {
            if seen.insert(l.name.clone()) {
                names.push((group(l.block), names.len(), l.name.clone()));
            }
        }
    }
    names.sort();

    let mut rows = Vec::new();
    for (_, _, name) in &names {
        let mut row = vec![name.clone()];
        row.extend(reports.iter().map(|r| {
            r.spatial
                .coefficient(name)
                .map_or_else(|| ABSENT.to_string(), |c| format_cell(&c))
        }));
        rows.push(row);
    }
    let summary: [(&str, SummaryCell); 8] = [
        (
            LAMBDA_ROW,
            Box::new(|r| r.spatial.lambda_coefficient().map_or_else(|| ABSENT.to_string(), |c| format_cell(&c))),
        ),
        ("Num. obs.", Box::new(|r| r.n_obs.to_string())),
        ("Parameters", Box::new(|r| r.n_params.to_string())),
        ("Log Likelihood", Box::new(|r| format_number(r.loglik))),
        ("AIC (Linear model)", Box::new(|r| format_number(r.aic_linear))),
        ("AIC (Spatial model)", Box::new(|r| format_number(r.aic_spatial))),
        ("LR test: statistic", Box::new(|r| format_number(r.lr.statistic))),
        ("LR test: p-value", Box::new(|r| format_number(r.lr.p_value))),
    ];
    for (label, f) in summary.iter() {
        let mut row = vec![label.to_string()];
        row.extend(reports.iter().map(f));
        rows.push(row);
    }

    let mut header = vec![String::new()];
    header.extend(reports.iter().map(|r| r.name.clone()));
    Table {
        header,
        rows,
        footnote: FOOTNOTE.into(),
    }
}

impl Table {
    /// Cell text by row label and model name.
    pub fn cell(&self, row: &str, model: &str) -> Option<&str> {
        let col = self.header.iter().position(|h| h == model)?;
        let r = self.rows.iter().find(|r| r[0] == row)?;
        r.get(col).map(String::as_str)
    }

    /// Fixed-width text, first column left-aligned, the rest right-aligned.
    pub fn to_text(&self) -> String {
        let width = |s: &str| s.chars().count();
        let ncol = self.header.len();
        let mut widths = vec![0; ncol];
        for row in std::iter::once(&self.header).chain(&self.rows) {
            for (k, cell) in row.iter().enumerate() {
                widths[k] = widths[k].max(width(cell));
            }
        }
        let line = |row: &[String]| {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let pad = " ".repeat(widths[k] - width(c));
                    if k == 0 {
                        format!("{c}{pad}")
                    } else {
                        format!("{pad}{c}")
                    }
                })
                .collect();
            cells.join("  ").trim_end().to_string()
        };
        let total: usize = widths.iter().sum::<usize>() + 2 * (ncol - 1);
        let rule = "=".repeat(total);
        let mut out = vec![rule.clone(), line(&self.header), "-".repeat(total)];
        out.extend(self.rows.iter().map(|r| line(r)));
        out.push(rule);
        out.push(self.footnote.clone());
        out.join("\n") + "\n"
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(&self.header)?;
        for r in &self.rows {
            wtr.write_record(r)?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
