//! Proxy detection: association between each feature and each sensitive
//! attribute. Findings are reported, never acted on.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{AuditDataset, FeatureColumn};
use crate::error::{Error, Result};

pub const DEFAULT_PROXY_THRESHOLD: f64 = 0.5;

/// Categorical features with more levels than this are not scored.
pub const MAX_CATEGORICAL_LEVELS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssociationMeasure {
    AbsPearson,
    CramersV,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyFinding {
    pub feature: String,
    pub sensitive_attribute: String,
    pub association: f64,
    pub measure: AssociationMeasure,
    pub flagged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// One finding per (feature, sensitive attribute) pair, sorted by association
/// descending (ties broken by feature then attribute name).
pub fn detect_proxies(dataset: &AuditDataset, threshold: f64) -> Result<Vec<ProxyFinding>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!(
            "proxy threshold {threshold} outside [0,1]"
        )));
    }
    let mut findings = Vec::new();
    for (feature, column) in dataset.features() {
        for attribute in dataset.sensitive_attributes() {
            let sensitive = dataset.sensitive(attribute)?;
            let (measure, outcome) = match column {
                FeatureColumn::Numeric(values) => (
                    AssociationMeasure::AbsPearson,
                    abs_pearson(values, sensitive),
                ),
                FeatureColumn::Categorical(values) => {
                    (AssociationMeasure::CramersV, cramers_v(values, sensitive))
                }
            };
            let (association, warning) = match outcome {
                Ok(a) => (a, None),
                Err(w) => (0.0, Some(w)),
            };
            findings.push(ProxyFinding {
                feature: feature.clone(),
                sensitive_attribute: attribute.clone(),
                association,
                measure,
                flagged: association >= threshold,
                warning,
            });
        }
    }
    findings.sort_by(|a, b| {
        b.association
            .total_cmp(&a.association)
            .then_with(|| a.feature.cmp(&b.feature))
            .then_with(|| a.sensitive_attribute.cmp(&b.sensitive_attribute))
    });
    Ok(findings)
}

/// |Pearson r| over rows where the feature is present. `Err` carries the
/// warning when the association is undefined.
fn abs_pearson(x: &[Option<f64>], s: &[u8]) -> std::result::Result<f64, String> {
    let pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(s)
        .filter_map(|(x, &s)| x.map(|x| (x, f64::from(s))))
        .collect();
    if pairs.len() < 2 {
        return Err("fewer than two non-missing values".into());
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err("constant column: association undefined".into());
    }
    if syy == 0.0 {
        return Err("sensitive attribute constant over non-missing rows".into());
    }
    Ok((sxy / (sxx * syy).sqrt()).abs().min(1.0))
}

/// Cramér's V for a k x 2 contingency table. With two sensitive levels,
/// V = sqrt(chi2 / n).
fn cramers_v(x: &[Option<String>], s: &[u8]) -> std::result::Result<f64, String> {
    let mut table: BTreeMap<&str, [f64; 2]> = BTreeMap::new();
    let mut n = 0.0;
    for (x, &s) in x.iter().zip(s) {
        if let Some(level) = x {
            table.entry(level.as_str()).or_insert([0.0; 2])[s as usize] += 1.0;
            n += 1.0;
        }
    }
    if table.len() > MAX_CATEGORICAL_LEVELS {
        return Err(format!(
            "{} levels exceed the {MAX_CATEGORICAL_LEVELS}-level limit; Cramér's V skipped",
            table.len()
        ));
    }
    if table.len() < 2 {
        return Err("constant column: association undefined".into());
    }
    let col_totals = table
        .values()
        .fold([0.0; 2], |acc, r| [acc[0] + r[0], acc[1] + r[1]]);
    if col_totals[0] == 0.0 || col_totals[1] == 0.0 {
        return Err("sensitive attribute constant over non-missing rows".into());
    }
    let mut chi2 = 0.0;
    for row in table.values() {
        let row_total = row[0] + row[1];
        for (j, &observed) in row.iter().enumerate() {
            let expected = row_total * col_totals[j] / n;
            chi2 += (observed - expected).powi(2) / expected;
        }
    }
    Ok((chi2 / n).sqrt().min(1.0))
}
