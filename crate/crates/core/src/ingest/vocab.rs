use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::record::PatientRecord;
use crate::error::{Error, Result};
use crate::util::sha256_hex;

/// General phenotype terms removed before counting. Matching is
/// case-insensitive.
pub const DEFAULT_STOP_TERMS: [&str; 8] = [
    "cyst",
    "pain",
    "carcinoma",
    "neoplasm",
    "symptoms",
    "disease",
    "minor (disease)",
    "sarcoma - category (morphologic abnormality)",
];

pub const DEFAULT_PHENOTYPE_THRESHOLD: usize = 20;
pub const DEFAULT_GENE_THRESHOLD: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Phenotype,
    GenePathogenic,
    GeneVus,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Phenotype => "phenotype",
            FeatureKind::GenePathogenic => "gene-pathogenic",
            FeatureKind::GeneVus => "gene-vus",
        }
    }
}

/// A feature is a phenotype term or a (gene, category) pair; the same gene
/// reported as pathogenic and as VUS gives two distinct features.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureKey {
    pub kind: FeatureKind,
    pub name: String,
}

impl FeatureKey {
    pub fn new(kind: FeatureKind, name: impl Into<String>) -> Self {
        FeatureKey {
            kind,
            name: name.into(),
        }
    }
}

/// Filtering thresholds and stop list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabularyConfig {
    /// Phenotypes kept when present in at least this many patients.
    pub phenotype_threshold: usize,
    /// Gene features kept when present in strictly more than this many patients.
    pub gene_threshold: usize,
    pub stop_terms: Vec<String>,
}

impl Default for VocabularyConfig {
    fn default() -> Self {
        VocabularyConfig {
            phenotype_threshold: DEFAULT_PHENOTYPE_THRESHOLD,
            gene_threshold: DEFAULT_GENE_THRESHOLD,
            stop_terms: DEFAULT_STOP_TERMS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Ordered, filtered feature set: phenotypes, then pathogenic genes, then VUS
/// genes, each section sorted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct FeatureVocabulary {
    keys: Vec<FeatureKey>,
    counts: Vec<usize>,
    config: VocabularyConfig,
    index: HashMap<FeatureKey, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    keys: Vec<FeatureKey>,
    counts: Vec<usize>,
    config: VocabularyConfig,
}

impl From<VocabRepr> for FeatureVocabulary {
    fn from(r: VocabRepr) -> Self {
        FeatureVocabulary::from_parts(r.keys, r.counts, r.config)
    }
}

impl From<FeatureVocabulary> for VocabRepr {
    fn from(v: FeatureVocabulary) -> Self {
        VocabRepr {
            keys: v.keys,
            counts: v.counts,
            config: v.config,
        }
    }
}

impl FeatureVocabulary {
    fn from_parts(keys: Vec<FeatureKey>, counts: Vec<usize>, config: VocabularyConfig) -> Self {
        let index = keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        FeatureVocabulary {
            keys,
            counts,
            config,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[FeatureKey] {
        &self.keys
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn config(&self) -> &VocabularyConfig {
        &self.config
    }

    pub fn index_of(&self, key: &FeatureKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn count_of_kind(&self, kind: FeatureKind) -> usize {
        self.keys.iter().filter(|k| k.kind == kind).count()
    }

    /// Vocabulary indices of the features a patient carries, ascending.
    pub fn patient_features(&self, record: &PatientRecord) -> Vec<usize> {
        let mut out: Vec<usize> = record_keys(record, &self.config)
            .filter_map(|k| self.index_of(&k))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Stable content hash of the ordered keys; checkpoints use it to refuse
    /// graphs built from a different vocabulary.
    pub fn hash(&self) -> String {
        let mut buf = String::new();
        for k in &self.keys {
            writeln!(buf, "{}\t{}", k.kind.as_str(), k.name).unwrap();
        }
        sha256_hex(buf.as_bytes())
    }

    /// Tab-separated export: `index  kind  key  count`.
    pub fn export_tsv(&self) -> String {
        let mut out = String::new();
        for (i, (k, c)) in self.keys.iter().zip(&self.counts).enumerate() {
            writeln!(out, "{i}\t{}\t{}\t{c}", k.kind.as_str(), k.name).unwrap();
        }
        out
    }
}

fn is_stop_term(term: &str, config: &VocabularyConfig) -> bool {
    let lower = term.to_lowercase();
    config.stop_terms.iter().any(|s| s.to_lowercase() == lower)
}

fn record_keys<'a>(
    r: &'a PatientRecord,
    config: &'a VocabularyConfig,
) -> impl Iterator<Item = FeatureKey> + 'a {
    r.phenotypes
        .iter()
        .filter(move |t| !is_stop_term(t, config))
        .map(|t| FeatureKey::new(FeatureKind::Phenotype, t.clone()))
        .chain(
            r.pathogenic
                .iter()
                .map(|g| FeatureKey::new(FeatureKind::GenePathogenic, g.clone())),
        )
        .chain(r.vus.iter().map(|g| FeatureKey::new(FeatureKind::GeneVus, g.clone())))
}

/// Counts each feature once per patient, drops stop terms, and keeps
/// phenotypes with `count >= phenotype_threshold` and gene features with
/// `count > gene_threshold`.
pub fn build_vocabulary(
    cohort: &[PatientRecord],
    config: &VocabularyConfig,
) -> Result<FeatureVocabulary> {
    if cohort.is_empty() {
        return Err(Error::usage("cannot build a vocabulary from an empty cohort"));
    }
    // BTreeMap orders by (kind, name): exactly the canonical vocabulary order.
    let mut counts: BTreeMap<FeatureKey, usize> = BTreeMap::new();
    for r in cohort {
        for key in record_keys(r, config) {
            *counts.entry(key).or_default() += 1;
        }
    }
    let (keys, counts): (Vec<_>, Vec<_>) = counts
        .into_iter()
        .filter(|(k, c)| match k.kind {
            FeatureKind::Phenotype => *c >= config.phenotype_threshold,
            FeatureKind::GenePathogenic | FeatureKind::GeneVus => *c > config.gene_threshold,
        })
        .unzip();
    Ok(FeatureVocabulary::from_parts(keys, counts, config.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::record::CancerType;

    fn cohort_with(term_patients: usize, gene_patients: usize) -> Vec<PatientRecord> {
        (0..30)
            .map(|i| {
                let mut r = PatientRecord::new(format!("P{i:02}"), CancerType::Lung);
                if i < term_patients {
                    r.phenotypes.insert("Cough".into());
                }
                if i < gene_patients {
                    r.pathogenic.insert("EGFR".into());
                }
                r
            })
            .collect()
    }

    #[test]
    fn phenotype_threshold_is_inclusive() {
        let cfg = VocabularyConfig::default();
        let v = build_vocabulary(&cohort_with(19, 0), &cfg).unwrap();
        assert!(v.is_empty());
        let v = build_vocabulary(&cohort_with(20, 0), &cfg).unwrap();
        assert_eq!(v.keys(), &[FeatureKey::new(FeatureKind::Phenotype, "Cough")]);
    }

    #[test]
    fn gene_threshold_is_exclusive() {
        let cfg = VocabularyConfig::default();
        assert!(build_vocabulary(&cohort_with(0, 10), &cfg).unwrap().is_empty());
        let v = build_vocabulary(&cohort_with(0, 11), &cfg).unwrap();
        assert_eq!(v.counts(), &[11]);
    }

    #[test]
    fn stop_terms_any_case() {
        let mut cohort = cohort_with(0, 0);
        for r in &mut cohort {
            r.phenotypes.insert("PAIN".into());
            r.phenotypes.insert("Minor (Disease)".into());
        }
        let v = build_vocabulary(&cohort, &VocabularyConfig::default()).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn section_order() {
        let mut cohort = cohort_with(25, 25);
        for r in &mut cohort {
            r.vus.insert("AAA".into());
            r.phenotypes.insert("Anemia".into());
        }
        let v = build_vocabulary(&cohort, &VocabularyConfig::default()).unwrap();
        let kinds: Vec<_> = v.keys().iter().map(|k| k.kind).collect();
        assert_eq!(
            kinds,
            vec![
                FeatureKind::Phenotype,
                FeatureKind::Phenotype,
                FeatureKind::GenePathogenic,
                FeatureKind::GeneVus
            ]
        );
        assert_eq!(v.keys()[0].name, "Anemia");
        assert!(v.export_tsv().starts_with("0\tphenotype\tAnemia\t30\n"));
    }

    #[test]
    fn empty_cohort_is_usage_error() {
        assert!(build_vocabulary(&[], &VocabularyConfig::default()).is_err());
    }
}
