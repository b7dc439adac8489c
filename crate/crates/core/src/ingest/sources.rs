//! Merging per-patient phenotype lists with parsed genetic reports.
//!
//! Phenotype table format, one patient per line:
//! `patient_id<TAB>cancer_type<TAB>term;term;...` (the term field may be
//! empty). Lines starting with `#` are comments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::record::{CancerType, PatientRecord};
use super::report::ParsedReport;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PhenotypeRow {
    pub patient_id: String,
    pub cancer_type: CancerType,
    pub terms: BTreeSet<String>,
}

pub fn parse_phenotype_table(text: &str) -> Result<Vec<PhenotypeRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                lineno,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let patient_id = fields[0].trim();
        if patient_id.is_empty() {
            return Err(Error::parse(lineno, "empty patient id"));
        }
        let cancer_type = fields[1]
            .trim()
            .parse()
            .map_err(|e: Error| Error::parse(lineno, e.to_string()))?;
        let terms = fields[2]
            .split(';')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(String::from)
            .collect();
        rows.push(PhenotypeRow {
            patient_id: patient_id.to_string(),
            cancer_type,
            terms,
        });
    }
    Ok(rows)
}

pub fn render_phenotype_table(cohort: &[PatientRecord]) -> Result<String> {
    let mut out = String::new();
    for r in cohort {
        if let Some(bad) = r.phenotypes.iter().find(|t| t.contains(['\t', ';', '\n'])) {
            return Err(Error::data(format!(
                "phenotype {bad:?} of {} cannot be written to a phenotype table",
                r.patient_id
            )));
        }
        let terms: Vec<&str> = r.phenotypes.iter().map(String::as_str).collect();
        writeln!(out, "{}\t{}\t{}", r.patient_id, r.cancer_type.key(), terms.join(";")).unwrap();
    }
    Ok(out)
}

/// Joins phenotype rows and reports on patient id. Patients come out sorted
/// by id. A report without a phenotype row needs its own `CANCER TYPE` line;
/// a phenotype row without a report yields a patient with no genes (noted in
/// the returned warnings).
pub fn assemble_cohort(
    phenotypes: &[PhenotypeRow],
    reports: &[ParsedReport],
) -> Result<(Vec<PatientRecord>, Vec<String>)> {
    let mut warnings = Vec::new();
    let mut by_id: BTreeMap<String, PatientRecord> = BTreeMap::new();
    for row in phenotypes {
        if by_id.contains_key(&row.patient_id) {
            return Err(Error::data(format!(
                "duplicate patient {:?} in phenotype table",
                row.patient_id
            )));
        }
        let mut r = PatientRecord::new(row.patient_id.clone(), row.cancer_type);
        r.phenotypes = row.terms.clone();
        by_id.insert(row.patient_id.clone(), r);
    }
    let mut with_report = BTreeSet::new();
    for rep in reports {
        let id = rep
            .patient_id
            .clone()
            .ok_or_else(|| Error::data("report without a PATIENT ID line"))?;
        if !with_report.insert(id.clone()) {
            return Err(Error::data(format!("two reports for patient {id:?}")));
        }
        let record = match by_id.get_mut(&id) {
            Some(r) => {
                if let Some(ct) = rep.cancer_type {
                    if ct != r.cancer_type {
                        return Err(Error::data(format!(
                            "patient {id:?}: report says {ct}, phenotype table says {}",
                            r.cancer_type
                        )));
                    }
                }
                r
            }
            None => {
                let ct = rep.cancer_type.ok_or_else(|| {
                    Error::data(format!(
                        "patient {id:?} has a report but no phenotype row or CANCER TYPE"
                    ))
                })?;
                warnings.push(format!("patient {id:?}: no phenotype row"));
                by_id.entry(id.clone()).or_insert_with(|| PatientRecord::new(id.clone(), ct))
            }
        };
        record.pathogenic = rep.pathogenic.clone();
        record.vus = rep.vus.clone();
    }
    for id in by_id.keys() {
        if !with_report.contains(id) {
            warnings.push(format!("patient {id:?}: no genetic report"));
        }
    }
    Ok((by_id.into_values().collect(), warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::report::parse_report;

    #[test]
    fn table_round_trip() {
        let mut r = PatientRecord::new("P1", CancerType::Ovarian);
        r.phenotypes.insert("Ascites".into());
        r.phenotypes.insert("Pelvic mass".into());
        let text = render_phenotype_table(&[r.clone()]).unwrap();
        let rows = parse_phenotype_table(&text).unwrap();
        assert_eq!(rows[0].terms, r.phenotypes);
        assert_eq!(rows[0].cancer_type, CancerType::Ovarian);
    }

    #[test]
    fn table_bad_field_count() {
        assert!(matches!(
            parse_phenotype_table("P1\tlung\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn merge_one_patient() {
        let rows = parse_phenotype_table("P1\tlung\tCough;Dyspnea\n").unwrap();
        let rep = parse_report("PATIENT ID: P1\nGENOMIC FINDINGS\n  EGFR L858R\n").unwrap();
        let (cohort, warnings) = assemble_cohort(&rows, &[rep]).unwrap();
        assert_eq!(cohort.len(), 1);
        assert!(warnings.is_empty());
        assert!(cohort[0].pathogenic.contains("EGFR"));
        assert_eq!(cohort[0].phenotypes.len(), 2);
    }

    #[test]
    fn merge_type_conflict() {
        let rows = parse_phenotype_table("P1\tlung\t\n").unwrap();
        let rep = parse_report("PATIENT ID: P1\nCANCER TYPE: liver\nGENOMIC FINDINGS\n").unwrap();
        assert!(matches!(assemble_cohort(&rows, &[rep]), Err(Error::Data(_))));
    }
}
