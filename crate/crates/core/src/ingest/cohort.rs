//! Line-delimited JSON cohort files.
//!
//! One object per line with keys `patient_id`, `cancer_type`, `phenotypes`,
//! `pathogenic` and `vus`. Blank lines are ignored.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Deserialize;

use super::record::{CancerType, PatientRecord};
use crate::error::{Error, Result};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    patient_id: String,
    cancer_type: String,
    #[serde(default)]
    phenotypes: Vec<String>,
    #[serde(default)]
    pathogenic: Vec<String>,
    #[serde(default)]
    vus: Vec<String>,
}

pub fn read_cohort<R: Read>(reader: R) -> Result<Vec<PatientRecord>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        if raw.patient_id.is_empty() {
            return Err(Error::parse(lineno, "empty patient_id"));
        }
        let cancer_type: CancerType = raw
            .cancer_type
            .parse()
            .map_err(|_| Error::data(format!("line {lineno}: unknown cancer_type {:?}", raw.cancer_type)))?;
        if !seen.insert(raw.patient_id.clone()) {
            return Err(Error::data(format!(
                "line {lineno}: duplicate patient_id {:?}",
                raw.patient_id
            )));
        }
        out.push(PatientRecord {
            patient_id: raw.patient_id,
            cancer_type,
            phenotypes: raw.phenotypes.into_iter().collect::<BTreeSet<_>>(),
            pathogenic: raw.pathogenic.into_iter().collect(),
            vus: raw.vus.into_iter().collect(),
        });
    }
    Ok(out)
}

pub fn load_cohort(path: impl AsRef<Path>) -> Result<Vec<PatientRecord>> {
    read_cohort(fs::File::open(path)?)
}

pub fn write_cohort<W: Write>(mut writer: W, cohort: &[PatientRecord]) -> Result<()> {
    for record in cohort {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_cohort(path: impl AsRef<Path>, cohort: &[PatientRecord]) -> Result<()> {
    let mut buf = Vec::new();
    write_cohort(&mut buf, cohort)?;
    fs::write(path, buf)?;
    Ok(())
}
