//! Cohort inputs: records, report text, vocabulary filtering, multi-hot
//! encoding and synthetic cohorts.

mod cohort;
mod encode;
mod record;
mod report;
mod sources;
mod synthetic;
mod vocab;

pub use cohort::{load_cohort, read_cohort, save_cohort, write_cohort};
pub use encode::{decode_multihot_row, encode_multihot};
pub use record::{CancerType, PatientRecord};
pub use report::{
    parse_report, parse_report_text, render_report, ParsedReport, CANCER_TYPE_PREFIX,
    FINDINGS_HEADER, PATIENT_ID_PREFIX, VUS_HEADER,
};
pub use sources::{assemble_cohort, parse_phenotype_table, render_phenotype_table, PhenotypeRow};
pub use synthetic::{
    gene_symbol, generate_synthetic_cohort, phenotype_name, SyntheticSpec, REFERENCE_CLASS_COUNTS,
};
pub use vocab::{
    build_vocabulary, FeatureKey, FeatureKind, FeatureVocabulary, VocabularyConfig,
    DEFAULT_GENE_THRESHOLD, DEFAULT_PHENOTYPE_THRESHOLD, DEFAULT_STOP_TERMS,
};
