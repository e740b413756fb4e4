//! Seeded percentile bootstrap.
//!
//! Attempt `k` draws its resample from a ChaCha stream selected by `k`, so the
//! interval depends only on (dataset, metric, seed, replicates, level) and
//! not on evaluation order or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{metric_value, scoped_groups, GroupConfusion, Metric};
use crate::data::AuditDataset;
use crate::error::{Error, Result};

pub const DEFAULT_REPLICATES: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.95;
pub const MIN_REPLICATES: usize = 100;
/// Redraw budget as a multiple of the requested replicates.
pub const REDRAW_FACTOR: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    pub level: f64,
}

impl BootstrapConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            replicates: DEFAULT_REPLICATES,
            seed,
            level: DEFAULT_LEVEL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < MIN_REPLICATES {
            return Err(Error::InvalidParameter(format!(
                "replicates must be at least {MIN_REPLICATES}, got {}",
                self.replicates
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "confidence level must lie in (0,1), got {}",
                self.level
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    /// Attempts drawn, including discarded degenerate ones.
    pub attempts: usize,
}

/// Linear-interpolation quantile of sorted data (R type 7).
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn resample(
    labels: &[u8],
    predictions: &[u8],
    groups: &[u8],
    seed: u64,
    attempt: u64,
) -> GroupConfusion {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt);
    let n = labels.len();
    let mut gc = GroupConfusion::default();
    for _ in 0..n {
        let i = rng.gen_range(0..n);
        gc.group_mut(groups[i]).record(labels[i], predictions[i]);
    }
    gc
}

/// Percentile interval for `metric` at `config.level`.
///
/// Degenerate resamples (metric undefined) are discarded and redrawn, up to
/// `REDRAW_FACTOR * replicates` attempts in total. The returned interval is
/// widened, if necessary, to contain the full-sample point value.
pub fn bootstrap_ci(
    metric: Metric,
    dataset: &AuditDataset,
    attribute: &str,
    config: &BootstrapConfig,
) -> Result<ConfidenceInterval> {
    config.validate()?;
    let groups = scoped_groups(dataset, metric, attribute)?;
    let (labels, predictions) = (dataset.labels(), dataset.predictions());
    let point = metric_value(
        metric,
        &GroupConfusion::from_rows(labels, predictions, &groups),
    )
    .ok_or_else(|| Error::MetricUndefined {
        metric: metric.to_string(),
        attribute: attribute.to_string(),
    })?;

    let budget = config.replicates * REDRAW_FACTOR;
    let mut values = Vec::with_capacity(config.replicates);
    let mut attempts = 0usize;
    while values.len() < config.replicates && attempts < budget {
        let batch = (config.replicates - values.len()).min(budget - attempts);
        let drawn: Vec<Option<f64>> = (attempts..attempts + batch)
            .into_par_iter()
            .map(|k| {
                let gc = resample(labels, predictions, &groups, config.seed, k as u64);
                metric_value(metric, &gc)
            })
            .collect();
        attempts += batch;
        values.extend(drawn.into_iter().flatten());
    }
    if values.len() < config.replicates {
        return Err(Error::TooManyDegenerateReplicates {
            attempts,
            accepted: values.len(),
        });
    }

    values.sort_by(f64::total_cmp);
    let alpha = 1.0 - config.level;
    let lower = percentile(&values, alpha / 2.0).min(point);
    let upper = percentile(&values, 1.0 - alpha / 2.0).max(point);
    Ok(ConfidenceInterval {
        lower,
        upper,
        attempts,
    })
}
