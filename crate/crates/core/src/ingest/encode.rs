use super::record::PatientRecord;
use super::vocab::{FeatureKey, FeatureVocabulary};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// `[patients × features]` 0/1 matrix in vocabulary column order. Features a
/// patient carries that are not in the vocabulary are ignored.
pub fn encode_multihot(cohort: &[PatientRecord], vocab: &FeatureVocabulary) -> Result<Tensor> {
    if cohort.is_empty() || vocab.is_empty() {
        return Err(Error::dim(format!(
            "cannot encode {} patients over {} features",
            cohort.len(),
            vocab.len()
        )));
    }
    let f = vocab.len();
    let mut values = vec![0.0; cohort.len() * f];
    for (i, r) in cohort.iter().enumerate() {
        for j in vocab.patient_features(r) {
            values[i * f + j] = 1.0;
        }
    }
    Tensor::new(vec![cohort.len(), f], values)
}

/// Inverse of one multi-hot row: the feature keys whose column is nonzero.
pub fn decode_multihot_row(row: &[f64], vocab: &FeatureVocabulary) -> Vec<FeatureKey> {
    row.iter()
        .zip(vocab.keys())
        .filter(|(v, _)| **v != 0.0)
        .map(|(_, k)| k.clone())
        .collect()
}
