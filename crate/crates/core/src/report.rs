//! Thread tables: one row per comment with its depth label, its text and
//! one label column per model.
//!
//! Rows follow a pre-order walk of the reply tree. A depth that holds more
//! than one comment gets sibling letters in walk order (`1a`, `1b`, ...);
//! a depth with a single comment is labeled by the bare number.

use serde::{Deserialize, Serialize};

use crate::discussion::DiscussionGraph;
use crate::error::{Error, Result};
use crate::eval::{Horizon, PredictionTrajectory};

pub const ELLIPSIS: &str = "[...]";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Markdown,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::InvalidConfig(format!("unknown report format {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReportOptions {
    /// Maximum characters of comment text before the ellipsis marker;
    /// `None` keeps full text.
    pub width: Option<usize>,
    pub at: Horizon,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            width: Some(80),
            at: Horizon::Final,
        }
    }
}

/// A model column: header and the trajectories it reads labels from.
pub struct ModelColumn<'a> {
    pub name: String,
    pub trajectory: &'a PredictionTrajectory,
}

/// Header plus cell strings, shared by both output formats.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Depth labels per node index.
pub fn depth_labels(g: &DiscussionGraph) -> Vec<String> {
    let max = g.max_depth();
    let mut per_depth = vec![0usize; max + 1];
    for &d in g.depths() {
        per_depth[d] += 1;
    }
    let mut seen = vec![0usize; max + 1];
    let mut labels = vec![String::new(); g.len()];
    for i in g.preorder() {
        let d = g.depth(i);
        labels[i] = if per_depth[d] > 1 {
            format!("{d}{}", letters(seen[d]))
        } else {
            d.to_string()
        };
        seen[d] += 1;
    }
    labels
}

/// `0 -> a`, `25 -> z`, `26 -> aa`.
fn letters(mut k: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'a' + (k % 26) as u8);
        if k < 26 {
            break;
        }
        k = k / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Collapses whitespace and truncates to `width` characters.
pub fn cell_text(text: &str, width: Option<usize>) -> String {
    let flat = text.split_whitespace().collect::<Vec<_>>().join(" ");
    match width {
        Some(w) if flat.chars().count() > w => {
            let head: String = flat.chars().take(w).collect();
            let head = head.trim_end();
            if head.is_empty() {
                ELLIPSIS.to_owned()
            } else {
                format!("{head} {ELLIPSIS}")
            }
        }
        _ => flat,
    }
}

pub fn build_table(g: &DiscussionGraph, columns: &[ModelColumn<'_>], options: ReportOptions) -> Result<ReportTable> {
    for c in columns {
        c.trajectory.check_graph(g)?;
    }
    let labels = depth_labels(g);
    let mut header = vec!["Depth".to_owned(), "Text".to_owned()];
    header.extend(columns.iter().map(|c| c.name.clone()));
    let rows = g
        .preorder()
        .into_iter()
        .map(|i| {
            let mut row = vec![labels[i].clone(), cell_text(&g.comment(i).text, options.width)];
            row.extend(columns.iter().map(|c| {
                c.trajectory
                    .select(i, options.at)
                    .map(|p| p.label.to_string())
                    .unwrap_or_default()
            }));
            row
        })
        .collect();
    Ok(ReportTable { header, rows })
}

pub fn render_report(
    g: &DiscussionGraph,
    columns: &[ModelColumn<'_>],
    format: ReportFormat,
    options: ReportOptions,
) -> Result<String> {
    let table = build_table(g, columns, options)?;
    match format {
        ReportFormat::Markdown => Ok(to_markdown(&table)),
        ReportFormat::Csv => to_csv(&table),
    }
}

fn md_escape(cell: &str) -> String {
    cell.replace('\\', "\\\\").replace('|', "\\|")
}

pub fn to_markdown(table: &ReportTable) -> String {
    let line = |cells: &[String]| {
        let escaped: Vec<String> = cells.iter().map(|c| md_escape(c)).collect();
        format!("| {} |\n", escaped.join(" | "))
    };
    let mut out = line(&table.header);
    out.push_str(&format!("|{}\n", "---|".repeat(table.header.len())));
    for row in &table.rows {
        out.push_str(&line(row));
    }
    out
}

pub fn to_csv(table: &ReportTable) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::NonNumeric)
        .from_writer(Vec::new());
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Malformed(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 cells is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn letter_sequence() {
        let got: Vec<String> = [0, 1, 25, 26, 27, 51, 52, 701, 702].into_iter().map(letters).collect();
        assert_eq!(got, ["a", "b", "z", "aa", "ab", "az", "ba", "zz", "aaa"]);
    }

    #[test]
    fn truncation() {
        assert_eq!(cell_text("short", Some(10)), "short");
        assert_eq!(cell_text("one two three", Some(7)), "one two [...]");
        assert_eq!(cell_text("a\n  b", None), "a b");
        assert_eq!(cell_text("abc", Some(0)), "[...]");
    }

    #[test]
    fn markdown_escapes_pipes() {
        let t = ReportTable {
            header: vec!["Depth".into(), "Text".into()],
            rows: vec![vec!["0".into(), "a | b".into()]],
        };
        assert_eq!(to_markdown(&t), "| Depth | Text |\n|---|---|\n| 0 | a \\| b |\n");
        assert_eq!(to_csv(&t).unwrap(), "\"Depth\",\"Text\"\n0,\"a | b\"\n");
    }
}
