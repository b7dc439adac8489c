use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The seven cancer classes, in the order used for class indices and for
/// report columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CancerType {
    Lung,
    Prostate,
    Breast,
    Ovarian,
    Pancreas,
    ColonRectum,
    Liver,
}

impl CancerType {
    pub const ALL: [CancerType; 7] = [
        CancerType::Lung,
        CancerType::Prostate,
        CancerType::Breast,
        CancerType::Ovarian,
        CancerType::Pancreas,
        CancerType::ColonRectum,
        CancerType::Liver,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Identifier used in cohort files and report text.
    pub fn key(self) -> &'static str {
        match self {
            CancerType::Lung => "lung",
            CancerType::Prostate => "prostate",
            CancerType::Breast => "breast",
            CancerType::Ovarian => "ovarian",
            CancerType::Pancreas => "pancreas",
            CancerType::ColonRectum => "colon_rectum",
            CancerType::Liver => "liver",
        }
    }

    /// Column heading for reports.
    pub fn display_name(self) -> &'static str {
        match self {
            CancerType::Lung => "Lung",
            CancerType::Prostate => "Prostate",
            CancerType::Breast => "Breast",
            CancerType::Ovarian => "Ovarian",
            CancerType::Pancreas => "Pancreas",
            CancerType::ColonRectum => "Colon/Rectum",
            CancerType::Liver => "Liver",
        }
    }
}

impl fmt::Display for CancerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for CancerType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CancerType::ALL
            .into_iter()
            .find(|c| c.key() == s)
            .ok_or_else(|| Error::data(format!("unknown cancer_type {s:?}")))
    }
}

/// One patient: label plus phenotype terms and gene symbols by category.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub cancer_type: CancerType,
    pub phenotypes: BTreeSet<String>,
    pub pathogenic: BTreeSet<String>,
    pub vus: BTreeSet<String>,
}

impl PatientRecord {
    pub fn new(patient_id: impl Into<String>, cancer_type: CancerType) -> Self {
        PatientRecord {
            patient_id: patient_id.into(),
            cancer_type,
            phenotypes: BTreeSet::new(),
            pathogenic: BTreeSet::new(),
            vus: BTreeSet::new(),
        }
    }

    pub fn label(&self) -> usize {
        self.cancer_type.index()
    }
}
