//! TOML run configuration. Command-line flags are applied on top.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use oncograph::bench::BenchConfig;
use oncograph::ingest::{CancerType, SyntheticSpec};
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Where the cohort comes from. With nothing set, a synthetic cohort is
/// generated from the `[synthetic]` section.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub cohort: Option<PathBuf>,
    pub reports: Option<PathBuf>,
    pub phenotypes: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: Option<PathBuf>,
    pub input: InputConfig,
    pub synthetic: SyntheticSpec,
    pub bench: BenchConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
    }
}

/// Parses `class=N`.
pub fn parse_count(s: &str) -> Result<(CancerType, usize), String> {
    let (class, n) = s
        .split_once('=')
        .ok_or_else(|| format!("expected CLASS=N, got {s:?}"))?;
    let class: CancerType = class.trim().parse().map_err(|e| format!("{e}"))?;
    let n = n
        .trim()
        .parse()
        .map_err(|_| format!("count {:?} is not a non-negative integer", n.trim()))?;
    Ok((class, n))
}

pub fn apply_counts(spec: &mut SyntheticSpec, counts: &[(CancerType, usize)]) {
    let overrides: BTreeMap<CancerType, usize> = counts.iter().copied().collect();
    spec.class_counts.extend(overrides);
}

/// Parses `1,2,3`.
pub fn parse_seed_list(s: &str) -> Result<Vec<u64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| format!("seed {p:?} is not an unsigned integer")))
        .collect()
}
