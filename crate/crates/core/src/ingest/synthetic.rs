//! Synthetic cohorts with class-specific signature features.
//!
//! Every class owns a disjoint block of signature features drawn from the
//! combined phenotype + gene universe. A patient carries each of its class's
//! signature features with probability `p_signature` and every other feature
//! with probability `p_background`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::record::{CancerType, PatientRecord};
use crate::error::{Error, Result};
use crate::util::{derive_seed, rng};

/// Cohort size per class in the reference cohort (784 patients in total).
pub const REFERENCE_CLASS_COUNTS: [(CancerType, usize); 7] = [
    (CancerType::Lung, 223),
    (CancerType::Prostate, 66),
    (CancerType::Breast, 53),
    (CancerType::Ovarian, 91),
    (CancerType::Pancreas, 104),
    (CancerType::ColonRectum, 140),
    (CancerType::Liver, 107),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub class_counts: BTreeMap<CancerType, usize>,
    pub signature_features_per_class: usize,
    pub p_signature: f64,
    pub p_background: f64,
    pub n_phenotypes: usize,
    pub n_genes: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            class_counts: REFERENCE_CLASS_COUNTS.into_iter().collect(),
            signature_features_per_class: 12,
            p_signature: 0.6,
            p_background: 0.03,
            n_phenotypes: 150,
            n_genes: 60,
            seed: 42,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Feature {
    Phenotype(usize),
    Pathogenic(usize),
    Vus(usize),
}

pub fn phenotype_name(i: usize) -> String {
    format!("phenotype_{i:03}")
}

pub fn gene_symbol(i: usize) -> String {
    format!("GENE{i:03}")
}

impl SyntheticSpec {
    pub fn total_patients(&self) -> usize {
        self.class_counts.values().sum()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_signature", self.p_signature), ("p_background", self.p_background)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} = {p} is not a probability")));
            }
        }
        if self.class_counts.is_empty() || self.class_counts.values().all(|&c| c == 0) {
            return Err(Error::config("synthetic cohort needs at least one patient"));
        }
        let universe = self.n_phenotypes + self.n_genes;
        let demand = self.signature_features_per_class * self.class_counts.len();
        if demand > universe {
            return Err(Error::config(format!(
                "{} classes x {} signature features exceed the {universe}-feature vocabulary",
                self.class_counts.len(),
                self.signature_features_per_class
            )));
        }
        Ok(())
    }

    /// Gene features alternate two pathogenic to one VUS.
    fn universe(&self) -> Vec<Feature> {
        (0..self.n_phenotypes)
            .map(Feature::Phenotype)
            .chain((0..self.n_genes).map(|g| {
                if g % 3 == 2 {
                    Feature::Vus(g)
                } else {
                    Feature::Pathogenic(g)
                }
            }))
            .collect()
    }
}

pub fn generate_synthetic_cohort(spec: &SyntheticSpec) -> Result<Vec<PatientRecord>> {
    spec.validate()?;
    let universe = spec.universe();
    let mut order: Vec<usize> = (0..universe.len()).collect();
    order.shuffle(&mut rng(derive_seed(spec.seed, 0)));

    // signature[f] = class owning feature f
    let mut owner: Vec<Option<CancerType>> = vec![None; universe.len()];
    for (slot, &class) in spec.class_counts.keys().enumerate() {
        let k = spec.signature_features_per_class;
        for &f in &order[slot * k..(slot + 1) * k] {
            owner[f] = Some(class);
        }
    }

    let mut draw = rng(derive_seed(spec.seed, 1));
    let mut cohort = Vec::with_capacity(spec.total_patients());
    for (&class, &count) in &spec.class_counts {
        for _ in 0..count {
            let mut r = PatientRecord::new(format!("P{:04}", cohort.len() + 1), class);
            for (f, feature) in universe.iter().enumerate() {
                let p = if owner[f] == Some(class) {
                    spec.p_signature
                } else {
                    spec.p_background
                };
                if draw.gen::<f64>() < p {
                    match *feature {
                        Feature::Phenotype(i) => r.phenotypes.insert(phenotype_name(i)),
                        Feature::Pathogenic(g) => r.pathogenic.insert(gene_symbol(g)),
                        Feature::Vus(g) => r.vus.insert(gene_symbol(g)),
                    };
                }
            }
            cohort.push(r);
        }
    }
    Ok(cohort)
}
