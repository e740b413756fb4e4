//! Reference metric vectors and a seeded synthetic dataset generator.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{AuditDataset, ColumnSchema, FeatureColumn};
use crate::error::{Error, Result};
use crate::scoring::{MetricVector, DEFAULT_BI_METRICS};

pub const LABEL_COLUMN: &str = "label";
pub const PREDICTION_COLUMN: &str = "prediction";
/// Numeric feature that tracks the primary sensitive attribute.
pub const PROXY_FEATURE: &str = "zip_index";
/// Numeric feature independent of everything.
pub const NOISE_FEATURE: &str = "noise";

/// Reference model comparison vectors over SPD, NDI, EOD, AOD, EO. Their EO
/// entries equal |AOD|, which does not follow the EO definition the engine
/// implements; see [`crate::scoring::ScoringConfig::include_eo`].
pub struct ReferenceVectors {
    pub baseline: MetricVector,
    pub racial: MetricVector,
    pub gender: MetricVector,
}

pub const REFERENCE_BASELINE: [f64; 5] = [0.187, 0.753, 0.226, 0.176, 0.176];
pub const REFERENCE_RACIAL: [f64; 5] = [0.106, 0.368, 0.094, 0.074, 0.074];
pub const REFERENCE_GENDER: [f64; 5] = [-0.287, -0.699, -0.368, -0.273, 0.273];

pub fn reference_vectors() -> ReferenceVectors {
    ReferenceVectors {
        baseline: MetricVector::new("baseline", &DEFAULT_BI_METRICS, &REFERENCE_BASELINE),
        racial: MetricVector::new("race", &DEFAULT_BI_METRICS, &REFERENCE_RACIAL),
        gender: MetricVector::new("sex", &DEFAULT_BI_METRICS, &REFERENCE_GENDER),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticAttribute {
    pub name: String,
    /// Share of rows in the privileged group (value 1).
    pub privileged_fraction: f64,
}

/// Outcome targets for one group of the primary attribute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupTargets {
    /// P(prediction = 1).
    pub favorable_rate: f64,
    #[serde(default)]
    pub tpr: Option<f64>,
    #[serde(default)]
    pub fpr: Option<f64>,
}

impl GroupTargets {
    pub fn rate(favorable_rate: f64) -> Self {
        Self {
            favorable_rate,
            tpr: None,
            fpr: None,
        }
    }

    /// Label prevalence that makes the targets consistent:
    /// p = pi * TPR + (1 - pi) * FPR.
    fn prevalence(&self, base_rate: f64) -> Result<f64> {
        match (self.tpr, self.fpr) {
            (None, None) => Ok(base_rate),
            (Some(tpr), Some(fpr)) => {
                if (tpr - fpr).abs() < 1e-12 {
                    if (self.favorable_rate - tpr).abs() > 1e-12 {
                        return Err(Error::DegenerateSpec(
                            "TPR = FPR forces the favorable rate to equal them".into(),
                        ));
                    }
                    return Ok(base_rate);
                }
                let pi = (self.favorable_rate - fpr) / (tpr - fpr);
                if !(0.0..=1.0).contains(&pi) {
                    return Err(Error::DegenerateSpec(format!(
                        "favorable rate {} is not reachable with TPR {tpr} and FPR {fpr}",
                        self.favorable_rate
                    )));
                }
                Ok(pi)
            }
            _ => Err(Error::DegenerateSpec(
                "TPR and FPR targets must be given together".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_rows: usize,
    /// The first attribute drives the outcome targets; the rest are independent.
    pub attributes: Vec<SyntheticAttribute>,
    pub privileged: GroupTargets,
    pub unprivileged: GroupTargets,
    /// Label prevalence when no TPR/FPR targets are given.
    #[serde(default = "default_base_rate")]
    pub base_rate: f64,
    pub seed: u64,
}

fn default_base_rate() -> f64 {
    0.5
}

impl SyntheticSpec {
    /// One attribute `sex` with an even split and the given favorable rates.
    pub fn biased(p1: f64, p0: f64, n_rows: usize, seed: u64) -> Self {
        Self {
            n_rows,
            attributes: vec![SyntheticAttribute {
                name: "sex".into(),
                privileged_fraction: 0.5,
            }],
            privileged: GroupTargets::rate(p1),
            unprivileged: GroupTargets::rate(p0),
            base_rate: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rows < 10 {
            return Err(Error::DegenerateSpec(format!(
                "n_rows must be at least 10, got {}",
                self.n_rows
            )));
        }
        if self.attributes.is_empty() {
            return Err(Error::DegenerateSpec(
                "at least one attribute is required".into(),
            ));
        }
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::DegenerateSpec(format!(
                    "{name} = {p} is not a probability"
                )))
            }
        };
        prob("base_rate", self.base_rate)?;
        for g in [&self.privileged, &self.unprivileged] {
            prob("favorable_rate", g.favorable_rate)?;
            for p in [g.tpr, g.fpr].into_iter().flatten() {
                prob("tpr/fpr", p)?;
            }
            g.prevalence(self.base_rate)?;
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &self.attributes {
            if !seen.insert(a.name.as_str())
                || [
                    LABEL_COLUMN,
                    PREDICTION_COLUMN,
                    PROXY_FEATURE,
                    NOISE_FEATURE,
                ]
                .contains(&a.name.as_str())
            {
                return Err(Error::DegenerateSpec(format!(
                    "attribute name `{}` is duplicated or reserved",
                    a.name
                )));
            }
            if !(a.privileged_fraction > 0.0 && a.privileged_fraction < 1.0) {
                return Err(Error::DegenerateSpec(format!(
                    "attribute `{}` has an empty group (fraction {})",
                    a.name, a.privileged_fraction
                )));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> ColumnSchema {
        let sensitive: Vec<&str> = self.attributes.iter().map(|a| a.name.as_str()).collect();
        ColumnSchema::new(
            &[PROXY_FEATURE, NOISE_FEATURE],
            &sensitive,
            LABEL_COLUMN,
            PREDICTION_COLUMN,
        )
    }
}

/// Exactly round(fraction * n) ones (kept inside [1, n-1]), shuffled.
fn group_column(n: usize, fraction: f64, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let ones = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut col: Vec<u8> = (0..n).map(|i| u8::from(i < ones)).collect();
    col.shuffle(rng);
    col
}

/// Draw a dataset from `spec`. Same spec and seed give the same dataset.
pub fn generate(spec: &SyntheticSpec) -> Result<AuditDataset> {
    spec.validate()?;
    let n = spec.n_rows;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut sensitive = BTreeMap::new();
    for a in &spec.attributes {
        sensitive.insert(
            a.name.clone(),
            group_column(n, a.privileged_fraction, &mut rng),
        );
    }
    let primary = &sensitive[&spec.attributes[0].name];

    let mut labels = Vec::with_capacity(n);
    let mut predictions = Vec::with_capacity(n);
    let mut proxy = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    for &g in primary.iter() {
        let targets = if g == 1 {
            &spec.privileged
        } else {
            &spec.unprivileged
        };
        let pi = targets.prevalence(spec.base_rate)?;
        let y = rng.gen_bool(pi);
        let p = match (targets.tpr, targets.fpr) {
            (Some(tpr), Some(fpr)) if (tpr - fpr).abs() >= 1e-12 => {
                if y {
                    tpr
                } else {
                    fpr
                }
            }
            _ => targets.favorable_rate,
        };
        labels.push(u8::from(y));
        predictions.push(u8::from(rng.gen_bool(p)));
        proxy.push(Some(f64::from(g) + rng.gen_range(-0.75..0.75)));
        noise.push(Some(rng.gen_range(0.0..1.0)));
    }

    let features = BTreeMap::from([
        (PROXY_FEATURE.to_string(), FeatureColumn::Numeric(proxy)),
        (NOISE_FEATURE.to_string(), FeatureColumn::Numeric(noise)),
    ]);
    AuditDataset::from_columns(
        spec.schema(),
        labels,
        predictions,
        sensitive,
        features,
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{compute, Metric, OVERALL};

    #[test]
    fn reference_entries() {
        let t = reference_vectors();
        assert_eq!(t.baseline.values[0], Some(0.187));
        assert_eq!(t.gender.values[4], Some(0.273));
        assert_eq!(t.racial.values[3], Some(0.074));
        assert_eq!(t.racial.names, DEFAULT_BI_METRICS.to_vec());
    }

    #[test]
    fn deterministic() {
        let spec = SyntheticSpec::biased(0.7, 0.35, 500, 9);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let c = generate(&SyntheticSpec { seed: 10, ..spec }).unwrap();
        assert_ne!(a.to_csv(), c.to_csv());
    }

    #[test]
    fn parity_spec_gives_small_spd() {
        let ds = generate(&SyntheticSpec::biased(0.5, 0.5, 10_000, 42)).unwrap();
        let spd = compute(&ds, Metric::Spd, "sex").unwrap().value.unwrap();
        assert!(spd.abs() < 0.05, "{spd}");
    }

    #[test]
    fn biased_spec_hits_target_spd() {
        let ds = generate(&SyntheticSpec::biased(0.7, 0.35, 10_000, 42)).unwrap();
        let spd = compute(&ds, Metric::Spd, "sex").unwrap().value.unwrap();
        assert!((spd - 0.35).abs() < 0.03, "{spd}");
    }

    #[test]
    fn rate_targets_are_consistent() {
        let targets = GroupTargets {
            favorable_rate: 0.5,
            tpr: Some(0.8),
            fpr: Some(0.2),
        };
        let spec = SyntheticSpec {
            privileged: targets,
            unprivileged: targets,
            ..SyntheticSpec::biased(0.5, 0.5, 20_000, 1)
        };
        let ds = generate(&spec).unwrap();
        let eod = compute(&ds, Metric::Eod, "sex").unwrap().value.unwrap();
        let recall = compute(&ds, Metric::Recall, OVERALL)
            .unwrap()
            .value
            .unwrap();
        assert!(eod.abs() < 0.03, "{eod}");
        assert!((recall - 0.8).abs() < 0.02, "{recall}");
    }

    #[test]
    fn rejects_degenerate_specs() {
        let mut spec = SyntheticSpec::biased(0.7, 0.35, 9, 1);
        assert!(matches!(generate(&spec), Err(Error::DegenerateSpec(_))));
        spec.n_rows = 100;
        spec.attributes[0].privileged_fraction = 0.0;
        assert!(matches!(generate(&spec), Err(Error::DegenerateSpec(_))));
        spec.attributes[0].privileged_fraction = 0.5;
        spec.privileged = GroupTargets {
            favorable_rate: 0.95,
            tpr: Some(0.8),
            fpr: Some(0.2),
        };
        assert!(matches!(generate(&spec), Err(Error::DegenerateSpec(_))));
    }

    #[test]
    fn small_fraction_still_has_both_groups() {
        let spec = SyntheticSpec {
            attributes: vec![SyntheticAttribute {
                name: "race".into(),
                privileged_fraction: 0.01,
            }],
            ..SyntheticSpec::biased(0.7, 0.35, 10, 3)
        };
        let ds = generate(&spec).unwrap();
        assert_eq!(
            ds.sensitive("race")
                .unwrap()
                .iter()
                .filter(|&&v| v == 1)
                .count(),
            1
        );
    }

    #[test]
    fn proxy_feature_is_flagged() {
        let ds = generate(&SyntheticSpec::biased(0.7, 0.35, 1000, 5)).unwrap();
        let findings = crate::proxy::detect_proxies(&ds, 0.5).unwrap();
        let zip = findings
            .iter()
            .find(|f| f.feature == PROXY_FEATURE)
            .unwrap();
        let noise = findings
            .iter()
            .find(|f| f.feature == NOISE_FEATURE)
            .unwrap();
        assert!(zip.flagged);
        assert!(!noise.flagged);
    }
}
