//! Plain-text genetic report format.
//!
//! ```text
//! PATIENT ID: P0001
//! CANCER TYPE: lung
//! GENOMIC FINDINGS
//!   EGFR L858R
//! VARIANTS OF UNKNOWN SIGNIFICANCE
//!   KRAS G12C
//! ```
//!
//! Header lines start in column 0; entry lines are indented and contribute
//! their first token as the gene symbol. `CANCER TYPE` is optional.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::record::{CancerType, PatientRecord};
use crate::error::{Error, Result};

pub const PATIENT_ID_PREFIX: &str = "PATIENT ID:";
pub const CANCER_TYPE_PREFIX: &str = "CANCER TYPE:";
pub const FINDINGS_HEADER: &str = "GENOMIC FINDINGS";
pub const VUS_HEADER: &str = "VARIANTS OF UNKNOWN SIGNIFICANCE";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParsedReport {
    pub patient_id: Option<String>,
    pub cancer_type: Option<CancerType>,
    pub pathogenic: BTreeSet<String>,
    pub vus: BTreeSet<String>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Findings,
    Vus,
    Unknown,
}

pub fn parse_report(text: &str) -> Result<ParsedReport> {
    let mut report = ParsedReport::default();
    let mut section = Section::None;
    let mut saw_header = false;
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let line = raw.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with(char::is_whitespace) {
            let gene = line.split_whitespace().next().unwrap_or_default().to_string();
            match section {
                Section::Findings => {
                    report.pathogenic.insert(gene);
                }
                Section::Vus => {
                    report.vus.insert(gene);
                }
                Section::Unknown => {}
                Section::None => report
                    .warnings
                    .push(format!("line {lineno}: entry outside any section ignored")),
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix(PATIENT_ID_PREFIX) {
            let id = rest.trim();
            if id.is_empty() {
                return Err(Error::parse(lineno, "empty PATIENT ID"));
            }
            report.patient_id = Some(id.to_string());
        } else if let Some(rest) = line.strip_prefix(CANCER_TYPE_PREFIX) {
            let ct = rest
                .trim()
                .parse()
                .map_err(|e: Error| Error::parse(lineno, e.to_string()))?;
            report.cancer_type = Some(ct);
        } else if line == FINDINGS_HEADER {
            section = Section::Findings;
            saw_header = true;
        } else if line == VUS_HEADER {
            section = Section::Vus;
            saw_header = true;
        } else {
            report
                .warnings
                .push(format!("line {lineno}: unknown header {line:?}, section skipped"));
            section = Section::Unknown;
        }
    }
    if !saw_header {
        return Err(Error::parse(
            last_line.max(1),
            format!("report has neither a {FINDINGS_HEADER:?} nor a {VUS_HEADER:?} header"),
        ));
    }
    Ok(report)
}

/// Gene sets of a report: `(pathogenic, vus)`.
pub fn parse_report_text(text: &str) -> Result<(BTreeSet<String>, BTreeSet<String>)> {
    let r = parse_report(text)?;
    Ok((r.pathogenic, r.vus))
}

fn check_token(kind: &str, s: &str) -> Result<()> {
    if s.is_empty() || s.contains(char::is_whitespace) {
        return Err(Error::data(format!(
            "{kind} {s:?} cannot be written to a report (empty or contains whitespace)"
        )));
    }
    Ok(())
}

/// Renders a patient's genes as report text. Both section headers are always
/// written, even when a section is empty.
pub fn render_report(record: &PatientRecord) -> Result<String> {
    check_token("patient id", &record.patient_id)?;
    let mut out = String::new();
    writeln!(out, "{PATIENT_ID_PREFIX} {}", record.patient_id).unwrap();
    writeln!(out, "{CANCER_TYPE_PREFIX} {}", record.cancer_type.key()).unwrap();
    writeln!(out, "{FINDINGS_HEADER}").unwrap();
    for gene in &record.pathogenic {
        check_token("gene symbol", gene)?;
        writeln!(out, "  {gene} alteration").unwrap();
    }
    writeln!(out, "{VUS_HEADER}").unwrap();
    for gene in &record.vus {
        check_token("gene symbol", gene)?;
        writeln!(out, "  {gene} variant").unwrap();
    }
    Ok(out)
}
