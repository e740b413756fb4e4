//! Full metric evaluation with a memo keyed by dataset fingerprint.

use std::collections::HashMap;

use parking_lot::Mutex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bootstrap_ci, compute, BootstrapConfig, Metric, MetricResult, OVERALL};
use crate::data::AuditDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRequest {
    /// `None` disables confidence intervals.
    pub bootstrap: Option<BootstrapConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    fingerprint: String,
    metric: Metric,
    attribute: String,
    seed: Option<u64>,
    replicates: usize,
    level_bits: u64,
}

/// Memo of computed results, shared across report stages and requests.
#[derive(Debug, Default)]
pub struct MetricCache {
    entries: Mutex<HashMap<CacheKey, MetricResult>>,
}

impl MetricCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.entries.lock().clear();
    }

    /// Point value plus interval for one metric, memoized.
    pub fn get_or_compute(
        &self,
        fingerprint: &str,
        dataset: &AuditDataset,
        metric: Metric,
        attribute: &str,
        bootstrap: Option<&BootstrapConfig>,
    ) -> Result<MetricResult> {
        let key = CacheKey {
            fingerprint: fingerprint.to_string(),
            metric,
            attribute: attribute.to_string(),
            seed: bootstrap.map(|b| b.seed),
            replicates: bootstrap.map_or(0, |b| b.replicates),
            level_bits: bootstrap.map_or(0, |b| b.level.to_bits()),
        };
        if let Some(hit) = self.entries.lock().get(&key) {
            return Ok(hit.clone());
        }
        let result = evaluate_one(dataset, metric, attribute, bootstrap)?;
        self.entries.lock().insert(key, result.clone());
        Ok(result)
    }
}

fn evaluate_one(
    dataset: &AuditDataset,
    metric: Metric,
    attribute: &str,
    bootstrap: Option<&BootstrapConfig>,
) -> Result<MetricResult> {
    let mut result = compute(dataset, metric, attribute)?;
    let Some(cfg) = bootstrap else {
        return Ok(result);
    };
    if !result.defined {
        result
            .warnings
            .push("metric undefined on the full dataset; interval omitted".into());
        return Ok(result);
    }
    match bootstrap_ci(metric, dataset, attribute, cfg) {
        Ok(ci) => {
            result.ci_lower = Some(ci.lower);
            result.ci_upper = Some(ci.upper);
        }
        Err(e @ Error::TooManyDegenerateReplicates { .. }) => {
            result.warnings.push(format!("interval omitted: {e}"));
        }
        Err(e) => return Err(e),
    }
    Ok(result)
}

/// Every group metric for every sensitive attribute (schema order), followed
/// by the dataset-level metrics under `overall`.
pub fn evaluate_all(
    dataset: &AuditDataset,
    request: &EvaluationRequest,
    cache: &MetricCache,
) -> Result<Vec<MetricResult>> {
    if let Some(b) = &request.bootstrap {
        b.validate()?;
    }
    let fingerprint = dataset.fingerprint();
    let mut jobs: Vec<(Metric, &str)> = Vec::new();
    for attribute in dataset.sensitive_attributes() {
        jobs.extend(Metric::GROUP.iter().map(|&m| (m, attribute.as_str())));
    }
    jobs.extend(Metric::DATASET.iter().map(|&m| (m, OVERALL)));
    jobs.par_iter()
        .map(|&(metric, attribute)| {
            cache.get_or_compute(
                &fingerprint,
                dataset,
                metric,
                attribute,
                request.bootstrap.as_ref(),
            )
        })
        .collect()
}
