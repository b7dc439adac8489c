use std::collections::BTreeMap;

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{derive_seed, rng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = Self { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::config(format!("split ratios must be positive, got {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("split ratios sum to {sum}, not 1")));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

impl std::str::FromStr for SplitRatios {
    type Err = Error;

    /// Parses `"0.7,0.1,0.2"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::config(format!("bad split ratio {p:?}")))
            })
            .collect::<Result<_>>()?;
        match parts[..] {
            [a, b, c] => SplitRatios::new(a, b, c),
            _ => Err(Error::config(format!("expected three split ratios, got {s:?}"))),
        }
    }
}

/// Sample indices assigned to each split, each list ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMasks {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub ratios: SplitRatios,
    pub seed: u64,
    /// Classes too small to stratify, sent wholly to train.
    pub warnings: Vec<String>,
}

impl SplitMasks {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Splits `n` items by `ratios` with largest-remainder rounding. Ties in the
/// fractional part go to the earlier split.
pub fn largest_remainder(n: usize, ratios: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|x| (x + 1e-9).floor() as usize).collect();
    let mut left = n.saturating_sub(sizes.iter().sum());
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - sizes[a] as f64;
        let fb = exact[b] - sizes[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

/// Per-class stratified split. Each class is shuffled with its own stream
/// derived from `seed`, so adding a class never perturbs another.
pub fn stratified_split(labels: &[usize], ratios: SplitRatios, seed: u64) -> Result<SplitMasks> {
    ratios.validate()?;
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    let mut masks = SplitMasks {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        ratios,
        seed,
        warnings: Vec::new(),
    };
    for (class, mut idx) in by_class {
        if idx.len() < 3 {
            let msg = format!("class {class} has {} samples; all assigned to train", idx.len());
            warn!("{msg}");
            masks.warnings.push(msg);
            masks.train.extend(idx);
            continue;
        }
        idx.shuffle(&mut rng(derive_seed(seed, class as u64)));
        let sizes = largest_remainder(idx.len(), &ratios.as_array());
        let (train, rest) = idx.split_at(sizes[0]);
        let (val, test) = rest.split_at(sizes[1]);
        masks.train.extend_from_slice(train);
        masks.val.extend_from_slice(val);
        masks.test.extend_from_slice(test);
    }
    masks.train.sort_unstable();
    masks.val.sort_unstable();
    masks.test.sort_unstable();
    Ok(masks)
}
