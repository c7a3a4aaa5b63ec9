//! Table rows and their CSV / markdown renderings.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MestError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodKind {
    Oracle,
    LassoLS,
    LassoLAD,
    #[serde(rename = "LLA")]
    Lla,
}

impl MethodKind {
    pub const ALL: [MethodKind; 4] = [Self::Oracle, Self::LassoLS, Self::LassoLAD, Self::Lla];

    pub fn label(&self) -> &'static str {
        match self {
            Self::Oracle => "Oracle",
            Self::LassoLS => "LassoLS",
            Self::LassoLAD => "LassoLAD",
            Self::Lla => "LLA",
        }
    }
}

impl std::fmt::Display for MethodKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MethodKind {
    type Err = MestError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "oracle" => Ok(Self::Oracle),
            "lasso" | "lassols" => Ok(Self::LassoLS),
            "lassolad" => Ok(Self::LassoLAD),
            "lla" => Ok(Self::Lla),
            other => Err(MestError::InvalidScenario(format!("unknown method '{other}'"))),
        }
    }
}

/// One line of a results table. CP is stored as a proportion in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub scenario: String,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub method: MethodKind,
    #[serde(rename = "EE")]
    pub ee: f64,
    #[serde(rename = "PE")]
    pub pe: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "IC")]
    pub ic: f64,
    #[serde(rename = "CP")]
    pub cp: f64,
    pub replicates: usize,
}

pub const CSV_HEADER: &str = "scenario,n,p,k,method,EE,PE,C,IC,CP,replicates";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = MestError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(MestError::Report(format!("unknown format '{other}'"))),
        }
    }
}

pub fn emit_report(rows: &[TableRow], format: ReportFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(MestError::Empty("report rows"));
    }
    match format {
        ReportFormat::Csv => emit_csv(rows),
        ReportFormat::Markdown => Ok(emit_markdown(rows)),
    }
}

fn emit_csv(rows: &[TableRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| MestError::Report(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| MestError::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| MestError::Report(e.to_string()))
}

pub fn parse_csv(text: &str) -> Result<Vec<TableRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| MestError::Report(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(MestError::Report(format!("unexpected header {header:?}")));
    }
    r.deserialize()
        .map(|rec| rec.map_err(|e| MestError::Report(e.to_string())))
        .collect()
}

/// One table per scenario, in first-appearance order.
fn emit_markdown(rows: &[TableRow]) -> String {
    let mut groups: Vec<(&str, Vec<&TableRow>)> = Vec::new();
    for row in rows {
        match groups.iter_mut().find(|(s, _)| *s == row.scenario) {
            Some((_, g)) => g.push(row),
            None => groups.push((&row.scenario, vec![row])),
        }
    }
    let mut out = String::new();
    for (i, (scenario, group)) in groups.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let first = group[0];
        let _ = writeln!(
            out,
            "**{scenario}** (n={}, p={}, m={}, replicates={})\n",
            first.n,
            first.p,
            first.p - first.k,
            first.replicates
        );
        out.push_str("| Setting | Method | EE | PE | C | IC | CP |\n");
        out.push_str("|---|---|---:|---:|---:|---:|---:|\n");
        for row in group {
            let _ = writeln!(
                out,
                "| n={} p={} | {} | {:.4} | {:.4} | {:.4} | {:.4} | {:.2}% |",
                row.n,
                row.p,
                row.method,
                row.ee,
                row.pe,
                row.c,
                row.ic,
                100.0 * row.cp
            );
        }
    }
    out
}
