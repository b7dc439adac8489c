use oncograph::ingest::{
    build_vocabulary, CancerType, FeatureKey, FeatureKind, PatientRecord, VocabularyConfig, DEFAULT_STOP_TERMS,
};

/// 40 patients, the first `n` of which carry the given term or gene.
fn cohort(term: Option<(&str, usize)>, gene: Option<(&str, usize)>) -> Vec<PatientRecord> {
    (0..40)
        .map(|i| {
            let mut r = PatientRecord::new(format!("P{i:02}"), CancerType::ColonRectum);
            if let Some((t, n)) = term {
                if i < n {
                    r.phenotypes.insert(t.to_string());
                }
            }
            if let Some((g, n)) = gene {
                if i < n {
                    r.pathogenic.insert(g.to_string());
                    r.vus.insert(g.to_string());
                }
            }
            r
        })
        .collect()
}

fn keys(c: &[PatientRecord]) -> Vec<FeatureKey> {
    build_vocabulary(c, &VocabularyConfig::default()).unwrap().keys().to_vec()
}

#[test]
fn phenotype_threshold_boundary() {
    assert!(keys(&cohort(Some(("Fatigue", 19)), None)).is_empty());
    assert_eq!(
        keys(&cohort(Some(("Fatigue", 20)), None)),
        vec![FeatureKey::new(FeatureKind::Phenotype, "Fatigue")]
    );
}

#[test]
fn gene_threshold_boundary() {
    assert!(keys(&cohort(None, Some(("KRAS", 10)))).is_empty());
    assert_eq!(
        keys(&cohort(None, Some(("KRAS", 11)))),
        vec![
            FeatureKey::new(FeatureKind::GenePathogenic, "KRAS"),
            FeatureKey::new(FeatureKind::GeneVus, "KRAS"),
        ]
    );
}

#[test]
fn every_stop_term_is_removed_in_any_case() {
    for term in DEFAULT_STOP_TERMS {
        for variant in [term.to_string(), term.to_uppercase(), capitalize(term)] {
            assert!(keys(&cohort(Some((&variant, 40)), None)).is_empty(), "{variant:?} survived");
        }
    }
}

#[test]
fn near_stop_terms_survive() {
    for term in ["cysts", "chest pain", "carcinoma in situ"] {
        assert_eq!(keys(&cohort(Some((term, 40)), None)).len(), 1, "{term:?} was dropped");
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}
