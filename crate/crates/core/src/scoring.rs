//! Bias Index, Fairness Score and threshold verdicts.
//!
//! The Bias Index of one sensitive attribute is the root-mean-square deviation
//! of its fairness-metric vector from a reference vector (by default the
//! ideal-parity vector). The Fairness Score is one minus the RMS of the
//! per-attribute Bias Indices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricResult, OVERALL};
use crate::thresholds::{Bounds, ThresholdSpec};

pub const DEFAULT_BI_METRICS: [Metric; 5] = [
    Metric::Spd,
    Metric::Ndi,
    Metric::Eod,
    Metric::Aod,
    Metric::Eo,
];

/// Ordered metric values for one sensitive attribute. `None` is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub attribute: String,
    pub names: Vec<Metric>,
    pub values: Vec<Option<f64>>,
}

impl MetricVector {
    pub fn new(attribute: &str, names: &[Metric], values: &[f64]) -> Self {
        Self {
            attribute: attribute.to_string(),
            names: names.to_vec(),
            values: values.iter().copied().map(Some).collect(),
        }
    }

    /// Vector of parity values for `names`.
    pub fn ideal(attribute: &str, names: &[Metric]) -> Self {
        Self {
            attribute: attribute.to_string(),
            names: names.to_vec(),
            values: names.iter().map(|m| Some(m.parity())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasIndex {
    pub value: f64,
    /// Metrics that entered the RMS.
    pub n: usize,
    /// Metrics dropped because either side was undefined.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub excluded: Vec<Metric>,
}

/// sqrt(mean((evaluated - reference)^2)) over metrics defined on both sides.
pub fn bias_index(evaluated: &MetricVector, reference: &MetricVector) -> Result<BiasIndex> {
    if evaluated.names != reference.names {
        return Err(Error::VectorMismatch(format!(
            "metric names differ: {:?} vs {:?}",
            evaluated.names, reference.names
        )));
    }
    if evaluated.values.len() != evaluated.names.len()
        || reference.values.len() != reference.names.len()
    {
        return Err(Error::VectorMismatch(
            "value count differs from metric count".into(),
        ));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut excluded = Vec::new();
    for ((name, e), r) in evaluated
        .names
        .iter()
        .zip(&evaluated.values)
        .zip(&reference.values)
    {
        match (e, r) {
            (Some(e), Some(r)) if e.is_finite() && r.is_finite() => {
                sum += (e - r).powi(2);
                n += 1;
            }
            _ => excluded.push(*name),
        }
    }
    if n == 0 {
        return Err(Error::VectorMismatch(
            "no metric is defined in both vectors".into(),
        ));
    }
    Ok(BiasIndex {
        value: (sum / n as f64).sqrt(),
        n,
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessScore {
    pub raw: f64,
    pub clamped: f64,
}

/// 1 - sqrt(mean(BI^2)); the raw value goes negative once BIs exceed 1.
pub fn fairness_score(bias_indices: &[f64]) -> Result<FairnessScore> {
    if bias_indices.is_empty() {
        return Err(Error::EmptyList);
    }
    if let Some(bad) = bias_indices.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "bias index {bad} is not a non-negative real"
        )));
    }
    let m = bias_indices.len() as f64;
    let raw = 1.0 - (bias_indices.iter().map(|b| b * b).sum::<f64>() / m).sqrt();
    Ok(FairnessScore {
        raw,
        clamped: raw.clamp(0.0, 1.0),
    })
}

fn default_bi_metrics() -> Vec<Metric> {
    DEFAULT_BI_METRICS.to_vec()
}

fn yes() -> bool {
    true
}

/// How Bias Index vectors are assembled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    #[serde(default = "default_bi_metrics")]
    pub metrics: Vec<Metric>,
    /// Set to false to drop EO, e.g. when comparing against tables that
    /// report EO on a different definition.
    #[serde(default = "yes")]
    pub include_eo: bool,
    /// Baseline metric values per sensitive attribute; attributes without a
    /// baseline are compared against the ideal-parity vector.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub baseline: BTreeMap<String, BTreeMap<Metric, f64>>,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            metrics: default_bi_metrics(),
            include_eo: true,
            baseline: BTreeMap::new(),
        }
    }
}

impl ScoringConfig {
    pub fn bi_metrics(&self) -> Vec<Metric> {
        self.metrics
            .iter()
            .copied()
            .filter(|&m| self.include_eo || m != Metric::Eo)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let metrics = self.bi_metrics();
        if metrics.is_empty() {
            return Err(Error::InvalidParameter(
                "bias index needs at least one metric".into(),
            ));
        }
        if metrics.contains(&Metric::Di) {
            return Err(Error::InvalidParameter(
                "DI is a ratio metric; use NDI in bias index vectors".into(),
            ));
        }
        let mut sorted = metrics.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != metrics.len() {
            return Err(Error::InvalidParameter(
                "duplicate bias index metric".into(),
            ));
        }
        Ok(())
    }

    fn reference(&self, attribute: &str) -> (MetricVector, ReferenceKind) {
        let names = self.bi_metrics();
        match self.baseline.get(attribute) {
            Some(base) => (
                MetricVector {
                    attribute: attribute.to_string(),
                    values: names.iter().map(|m| base.get(m).copied()).collect(),
                    names,
                },
                ReferenceKind::Baseline,
            ),
            None => (
                MetricVector::ideal(attribute, &names),
                ReferenceKind::IdealParity,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    IdealParity,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCheck {
    pub metric: Metric,
    pub attribute: String,
    pub value: Option<f64>,
    pub bounds: Bounds,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeBias {
    pub evaluated: MetricVector,
    pub reference: ReferenceKind,
    pub bias_index: Option<BiasIndex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessVerdict {
    pub checks: Vec<MetricCheck>,
    pub overall_pass: bool,
    pub bias: BTreeMap<String, AttributeBias>,
    pub fairness_score: Option<f64>,
    pub fairness_score_clamped: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FairnessVerdict {
    pub fn bias_index(&self, attribute: &str) -> Option<f64> {
        self.bias
            .get(attribute)
            .and_then(|b| b.bias_index.as_ref())
            .map(|b| b.value)
    }
}

/// Sensitive attributes in order of first appearance among group results.
fn attributes_of(results: &[MetricResult]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in results {
        if r.metric.is_group_metric() && !out.contains(&r.attribute) {
            out.push(r.attribute.clone());
        }
    }
    out
}

fn find<'a>(
    results: &'a [MetricResult],
    metric: Metric,
    attribute: &str,
) -> Result<&'a MetricResult> {
    let scope = if metric.is_group_metric() {
        attribute
    } else {
        OVERALL
    };
    results
        .iter()
        .find(|r| r.metric == metric && r.attribute == scope)
        .ok_or_else(|| Error::MissingResult {
            metric: metric.to_string(),
            attribute: scope.to_string(),
        })
}

/// Check every selected metric on every sensitive attribute and compute the
/// Bias Index per attribute and the Fairness Score across attributes.
/// Dataset-level metrics (THEIL and the performance ratios) are checked once.
pub fn verdict(
    results: &[MetricResult],
    thresholds: &ThresholdSpec,
    config: &ScoringConfig,
) -> Result<FairnessVerdict> {
    config.validate()?;
    let attributes = attributes_of(results);
    if attributes.is_empty() {
        return Err(Error::MissingResult {
            metric: "any group metric".into(),
            attribute: "any sensitive attribute".into(),
        });
    }
    let mut checks = Vec::new();
    for (&metric, bound) in &thresholds.bounds {
        let scopes: Vec<&str> = if metric.is_group_metric() {
            attributes.iter().map(String::as_str).collect()
        } else {
            vec![OVERALL]
        };
        for attribute in scopes {
            let r = find(results, metric, attribute)?;
            let (pass, reason) = match r.value {
                None => (false, Some("undefined".to_string())),
                Some(v) if bound.bounds.contains(v) => (true, None),
                Some(_) => (false, Some("out of bounds".to_string())),
            };
            checks.push(MetricCheck {
                metric,
                attribute: attribute.to_string(),
                value: r.value,
                bounds: bound.bounds,
                pass,
                reason,
            });
        }
    }

    let names = config.bi_metrics();
    let mut warnings = Vec::new();
    let mut bias = BTreeMap::new();
    let mut indices = Vec::new();
    for attribute in &attributes {
        let values = names
            .iter()
            .map(|&m| find(results, m, attribute).map(|r| r.value))
            .collect::<Result<Vec<_>>>()?;
        let evaluated = MetricVector {
            attribute: attribute.clone(),
            names: names.clone(),
            values,
        };
        let (reference, kind) = config.reference(attribute);
        let bi = match bias_index(&evaluated, &reference) {
            Ok(bi) => {
                if !bi.excluded.is_empty() {
                    warnings.push(format!(
                        "{attribute}: bias index excludes undefined {}",
                        bi.excluded
                            .iter()
                            .map(|m| m.name())
                            .collect::<Vec<_>>()
                            .join(", ")
                    ));
                }
                indices.push(bi.value);
                Some(bi)
            }
            Err(e) => {
                warnings.push(format!("{attribute}: bias index undefined ({e})"));
                None
            }
        };
        bias.insert(
            attribute.clone(),
            AttributeBias {
                evaluated,
                reference: kind,
                bias_index: bi,
            },
        );
    }
    let fs = if indices.is_empty() {
        None
    } else {
        Some(fairness_score(&indices)?)
    };

    Ok(FairnessVerdict {
        overall_pass: checks.iter().all(|c| c.pass),
        checks,
        bias,
        fairness_score: fs.map(|f| f.raw),
        fairness_score_clamped: fs.map(|f| f.clamped),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::RiskCategory;
    use crate::thresholds::{resolve_thresholds, SectorPolicy};

    const BASELINE: [f64; 5] = [0.187, 0.753, 0.226, 0.176, 0.176];
    const RACIAL: [f64; 5] = [0.106, 0.368, 0.094, 0.074, 0.074];
    const GENDER: [f64; 5] = [-0.287, -0.699, -0.368, -0.273, 0.273];

    /// Direct evaluation of the RMS formula, written out term by term.
    fn rms_oracle(a: &[f64], b: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..a.len() {
            let d = a[i] - b[i];
            acc += d * d;
        }
        (acc / a.len() as f64).sqrt()
    }

    #[test]
    fn bias_index_fixtures() {
        let names = DEFAULT_BI_METRICS;
        let base = MetricVector::new("m", &names, &BASELINE);
        let racial = MetricVector::new("m", &names, &RACIAL);
        let gender = MetricVector::new("m", &names, &GENDER);
        assert_eq!(bias_index(&base, &base).unwrap().value, 0.0);

        let r = bias_index(&racial, &base).unwrap().value;
        assert!((r - rms_oracle(&RACIAL, &BASELINE)).abs() < 1e-15);
        assert!((r - 0.1965).abs() < 5e-4, "{r}");
        let g = bias_index(&gender, &base).unwrap().value;
        assert!((g - 0.7612).abs() < 5e-4, "{g}");
    }

    #[test]
    fn fairness_score_fixtures() {
        assert_eq!(fairness_score(&[0.0]).unwrap().raw, 1.0);
        assert_eq!(fairness_score(&[0.0, 0.0, 0.0]).unwrap().raw, 1.0);
        assert!((fairness_score(&[0.1965]).unwrap().raw - 0.8035).abs() < 1e-12);
        let fs = fairness_score(&[0.1965, 0.7612]).unwrap();
        let oracle = 1.0 - ((0.1965f64.powi(2) + 0.7612f64.powi(2)) / 2.0).sqrt();
        assert!((fs.raw - oracle).abs() < 1e-15);
        assert!((fs.raw - 0.4441).abs() < 5e-4);
        assert_eq!(fairness_score(&[]).unwrap_err(), Error::EmptyList);
        let neg = fairness_score(&[1.5, 2.0]).unwrap();
        assert!(neg.raw < 0.0);
        assert_eq!(neg.clamped, 0.0);
        assert!(fairness_score(&[-0.1]).is_err());
    }

    #[test]
    fn undefined_entries_are_excluded_pairwise() {
        let names = [Metric::Spd, Metric::Eod, Metric::Eo];
        let mut e = MetricVector::new("a", &names, &[0.3, 0.0, 0.4]);
        e.values[1] = None;
        let r = MetricVector::ideal("a", &names);
        let bi = bias_index(&e, &r).unwrap();
        assert_eq!(bi.n, 2);
        assert_eq!(bi.excluded, vec![Metric::Eod]);
        assert!((bi.value - ((0.09 + 0.16) / 2.0f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mismatched_vectors_rejected() {
        let a = MetricVector::new("a", &[Metric::Spd], &[0.1]);
        let b = MetricVector::new("a", &[Metric::Eod], &[0.1]);
        assert!(matches!(bias_index(&a, &b), Err(Error::VectorMismatch(_))));
    }

    fn result(metric: Metric, attribute: &str, value: Option<f64>) -> MetricResult {
        MetricResult {
            metric,
            attribute: attribute.into(),
            value,
            defined: value.is_some(),
            ci_lower: None,
            ci_upper: None,
            groups: None,
            warnings: vec![],
        }
    }

    fn results_for(attr: &str, spd: Option<f64>, di: Option<f64>) -> Vec<MetricResult> {
        vec![
            result(Metric::Spd, attr, spd),
            result(Metric::Di, attr, di),
            result(Metric::Ndi, attr, di.map(|d| d - 1.0)),
            result(Metric::Eod, attr, Some(0.0)),
            result(Metric::Aod, attr, Some(0.0)),
            result(Metric::Eo, attr, Some(0.0)),
        ]
    }

    #[test]
    fn verdict_pass_boundary_and_undefined() {
        let th = resolve_thresholds(RiskCategory::Medium, &SectorPolicy::generic()).unwrap();
        let cfg = ScoringConfig::default();

        let v = verdict(&results_for("race", Some(0.05), Some(1.0)), &th, &cfg).unwrap();
        assert!(v.overall_pass);
        let spd = v.checks.iter().find(|c| c.metric == Metric::Spd).unwrap();
        assert!(spd.pass);

        let v = verdict(&results_for("race", Some(0.10), Some(1.0)), &th, &cfg).unwrap();
        assert!(
            v.checks
                .iter()
                .find(|c| c.metric == Metric::Spd)
                .unwrap()
                .pass
        );

        let v = verdict(&results_for("race", Some(0.05), None), &th, &cfg).unwrap();
        let di = v.checks.iter().find(|c| c.metric == Metric::Di).unwrap();
        assert!(!di.pass);
        assert_eq!(di.reason.as_deref(), Some("undefined"));
        assert!(!v.overall_pass);
        // NDI undefined drops out of the bias index with a warning
        assert_eq!(v.bias["race"].bias_index.as_ref().unwrap().n, 4);
        assert!(!v.warnings.is_empty());
    }

    #[test]
    fn verdict_needs_every_selected_metric() {
        let th = resolve_thresholds(RiskCategory::Medium, &SectorPolicy::generic()).unwrap();
        let mut rs = results_for("race", Some(0.0), Some(1.0));
        rs.retain(|r| r.metric != Metric::Aod);
        assert!(matches!(
            verdict(&rs, &th, &ScoringConfig::default()),
            Err(Error::MissingResult { .. })
        ));
    }

    #[test]
    fn verdict_bias_index_and_score_across_attributes() {
        let th = resolve_thresholds(RiskCategory::Medium, &SectorPolicy::generic()).unwrap();
        let mut rs = results_for("race", Some(0.3), Some(1.0));
        rs.extend(results_for("sex", Some(0.0), Some(1.0)));
        let v = verdict(&rs, &th, &ScoringConfig::default()).unwrap();
        let bi_race = (0.09f64 / 5.0).sqrt();
        assert!((v.bias_index("race").unwrap() - bi_race).abs() < 1e-15);
        assert_eq!(v.bias_index("sex").unwrap(), 0.0);
        let fs = 1.0 - ((bi_race * bi_race) / 2.0).sqrt();
        assert!((v.fairness_score.unwrap() - fs).abs() < 1e-15);
        assert_eq!(v.checks.len(), 10);
        assert!(!v.overall_pass);
    }

    #[test]
    fn baseline_reference_and_eo_switch() {
        let th = resolve_thresholds(RiskCategory::Medium, &SectorPolicy::generic()).unwrap();
        let mut rs = results_for("race", Some(0.2), Some(1.5));
        rs.iter_mut()
            .filter(|r| r.metric == Metric::Eo)
            .for_each(|r| r.value = Some(0.9));
        let mut cfg = ScoringConfig {
            include_eo: false,
            ..Default::default()
        };
        cfg.baseline.insert(
            "race".into(),
            BTreeMap::from([
                (Metric::Spd, 0.2),
                (Metric::Ndi, 0.5),
                (Metric::Eod, 0.0),
                (Metric::Aod, 0.0),
            ]),
        );
        let v = verdict(&rs, &th, &cfg).unwrap();
        let b = &v.bias["race"];
        assert_eq!(b.reference, ReferenceKind::Baseline);
        assert_eq!(b.bias_index.as_ref().unwrap().value, 0.0);
        assert_eq!(b.evaluated.names.len(), 4);
    }

    #[test]
    fn di_not_allowed_in_bias_vector() {
        let cfg = ScoringConfig {
            metrics: vec![Metric::Spd, Metric::Di],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
