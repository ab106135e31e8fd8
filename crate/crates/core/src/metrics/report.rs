//! Per-subject error tables in plain text and CSV.

use std::fmt::Write as _;

pub const DEFAULT_CAPTION: &str = "Bi-directional mesh-to-mesh error";

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub subject: String,
    /// One entry per variant column; `None` renders as `-`.
    pub values_mm: Vec<Option<f64>>,
}

/// Subject id column followed by one millimeter column per variant.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub caption: String,
    pub variants: Vec<String>,
    pub rows: Vec<ErrorRow>,
}

fn fmt_mm(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.2}"),
        None => "-".to_string(),
    }
}

impl ErrorTable {
    pub fn new(variants: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            caption: DEFAULT_CAPTION.to_string(),
            variants: variants.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, subject: impl Into<String>, values_mm: Vec<Option<f64>>) {
        let mut values_mm = values_mm;
        values_mm.resize(self.variants.len(), None);
        self.rows.push(ErrorRow {
            subject: subject.into(),
            values_mm,
        });
    }

    fn header(&self) -> Vec<String> {
        std::iter::once("Subject ID".to_string())
            .chain(self.variants.iter().cloned())
            .collect()
    }

    /// Caption line, header, rule, then one row per subject. The id column is
    /// left-aligned, values are right-aligned with two decimals.
    pub fn render_text(&self) -> String {
        let header = self.header();
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                std::iter::once(r.subject.clone())
                    .chain(r.values_mm.iter().map(|v| fmt_mm(*v)))
                    .collect()
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                cells
                    .iter()
                    .map(|row| row[c].len())
                    .chain(std::iter::once(header[c].len()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();

        let line = |row: &[String]| -> String {
            row.iter()
                .enumerate()
                .map(|(c, s)| {
                    if c == 0 {
                        format!("{s:<w$}", w = widths[c])
                    } else {
                        format!("{s:>w$}", w = widths[c])
                    }
                })
                .collect::<Vec<_>>()
                .join(" | ")
        };

        let mut out = String::new();
        let _ = writeln!(out, "{}", self.caption);
        let _ = writeln!(out, "{}", line(&header));
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        let _ = writeln!(out, "{}", rule.join("-+-"));
        for row in &cells {
            let _ = writeln!(out, "{}", line(row));
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let quote = |s: &str| {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        };
        let mut out = String::new();
        let header: Vec<String> = self.header().iter().map(|s| quote(s)).collect();
        let _ = writeln!(out, "{}", header.join(","));
        for r in &self.rows {
            let mut fields = vec![quote(&r.subject)];
            fields.extend(r.values_mm.iter().map(|v| match v {
                Some(x) => format!("{x:.2}"),
                None => String::new(),
            }));
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }
}
