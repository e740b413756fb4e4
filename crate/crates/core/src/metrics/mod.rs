//! Group fairness and performance metrics.
//!
//! Every metric is a function of per-group confusion counts, so evaluation
//! reduces a dataset (or a bootstrap resample of it) to a [`GroupConfusion`]
//! and derives values from the counts. Zero denominators produce `None`,
//! the undefined sentinel; it is never coerced to zero.

mod bootstrap;
mod cache;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::AuditDataset;
use crate::error::{Error, Result};

pub use bootstrap::{
    bootstrap_ci, percentile, BootstrapConfig, ConfidenceInterval, DEFAULT_LEVEL,
    DEFAULT_REPLICATES, MIN_REPLICATES, REDRAW_FACTOR,
};
pub use cache::{evaluate_all, EvaluationRequest, MetricCache};

/// Attribute label used for dataset-level metrics.
pub const OVERALL: &str = "overall";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Metric {
    Spd,
    Di,
    Ndi,
    Eod,
    Aod,
    Eo,
    Theil,
    Accuracy,
    Precision,
    Recall,
    Specificity,
    Fpr,
    Fnr,
}

impl Metric {
    pub const ALL: [Metric; 13] = [
        Metric::Spd,
        Metric::Di,
        Metric::Ndi,
        Metric::Eod,
        Metric::Aod,
        Metric::Eo,
        Metric::Theil,
        Metric::Accuracy,
        Metric::Precision,
        Metric::Recall,
        Metric::Specificity,
        Metric::Fpr,
        Metric::Fnr,
    ];

    /// Metrics that compare the privileged and unprivileged groups of one
    /// sensitive attribute.
    pub const GROUP: [Metric; 6] = [
        Metric::Spd,
        Metric::Di,
        Metric::Ndi,
        Metric::Eod,
        Metric::Aod,
        Metric::Eo,
    ];

    /// Metrics computed over the whole dataset.
    pub const DATASET: [Metric; 7] = [
        Metric::Theil,
        Metric::Accuracy,
        Metric::Precision,
        Metric::Recall,
        Metric::Specificity,
        Metric::Fpr,
        Metric::Fnr,
    ];

    pub fn is_group_metric(self) -> bool {
        Self::GROUP.contains(&self)
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Spd => "SPD",
            Metric::Di => "DI",
            Metric::Ndi => "NDI",
            Metric::Eod => "EOD",
            Metric::Aod => "AOD",
            Metric::Eo => "EO",
            Metric::Theil => "THEIL",
            Metric::Accuracy => "ACCURACY",
            Metric::Precision => "PRECISION",
            Metric::Recall => "RECALL",
            Metric::Specificity => "SPECIFICITY",
            Metric::Fpr => "FPR",
            Metric::Fnr => "FNR",
        }
    }

    /// Value at which the metric indicates no disparity.
    pub fn parity(self) -> f64 {
        match self {
            Metric::Di => 1.0,
            _ => 0.0,
        }
    }

    /// Natural range of the metric.
    pub fn domain(self) -> (f64, f64) {
        match self {
            Metric::Spd | Metric::Eod | Metric::Aod => (-1.0, 1.0),
            Metric::Eo => (0.0, 2.0),
            Metric::Ndi => (-1.0, f64::INFINITY),
            Metric::Di | Metric::Theil => (0.0, f64::INFINITY),
            _ => (0.0, 1.0),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown metric `{s}`")))
    }
}

/// Confusion counts for one group of rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Confusion {
    #[inline]
    pub fn record(&mut self, label: u8, prediction: u8) {
        match (label, prediction) {
            (1, 1) => self.tp += 1,
            (0, 1) => self.fp += 1,
            (0, 0) => self.tn += 1,
            _ => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn selection_rate(&self) -> Option<f64> {
        ratio(self.tp + self.fp, self.total())
    }

    pub fn tpr(&self) -> Option<f64> {
        ratio(self.tp, self.positives())
    }

    pub fn fpr(&self) -> Option<f64> {
        ratio(self.fp, self.negatives())
    }

    pub fn tnr(&self) -> Option<f64> {
        ratio(self.tn, self.negatives())
    }

    pub fn fnr(&self) -> Option<f64> {
        ratio(self.fn_, self.positives())
    }
}

impl std::ops::Add for Confusion {
    type Output = Confusion;

    fn add(self, o: Confusion) -> Confusion {
        Confusion {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

/// Count outcomes for the rows in `mask`.
pub fn confusion_counts(labels: &[u8], predictions: &[u8], mask: &[usize]) -> Confusion {
    debug_assert_eq!(labels.len(), predictions.len());
    let mut c = Confusion::default();
    for &i in mask {
        c.record(labels[i], predictions[i]);
    }
    c
}

/// Standard performance ratios; `None` marks a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceMetrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
}

pub fn performance_metrics(c: &Confusion) -> PerformanceMetrics {
    PerformanceMetrics {
        accuracy: ratio(c.tp + c.tn, c.total()),
        precision: ratio(c.tp, c.tp + c.fp),
        recall: c.tpr(),
        specificity: c.tnr(),
        fpr: c.fpr(),
        fnr: c.fnr(),
    }
}

/// Confusion counts split by one sensitive attribute.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupConfusion {
    pub privileged: Confusion,
    pub unprivileged: Confusion,
}

impl GroupConfusion {
    /// Counts over all rows; `groups[i] == 1` marks privileged rows.
    pub fn from_rows(labels: &[u8], predictions: &[u8], groups: &[u8]) -> Self {
        let mut gc = GroupConfusion::default();
        for ((&y, &p), &g) in labels.iter().zip(predictions).zip(groups) {
            gc.group_mut(g).record(y, p);
        }
        gc
    }

    pub fn from_dataset(dataset: &AuditDataset, attribute: &str) -> Result<Self> {
        let groups = dataset.sensitive(attribute)?;
        Ok(Self::from_rows(
            dataset.labels(),
            dataset.predictions(),
            groups,
        ))
    }

    #[inline]
    pub fn group_mut(&mut self, g: u8) -> &mut Confusion {
        if g == 1 {
            &mut self.privileged
        } else {
            &mut self.unprivileged
        }
    }

    pub fn total(&self) -> Confusion {
        self.privileged + self.unprivileged
    }
}

fn diff(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? - b?)
}

fn disparate_impact(gc: &GroupConfusion) -> Option<f64> {
    let p = gc.privileged.selection_rate()?;
    let u = gc.unprivileged.selection_rate()?;
    if u == 0.0 {
        // both zero: parity by convention
        (p == 0.0).then_some(1.0)
    } else {
        Some(p / u)
    }
}

/// Rate differences (FPR, TPR) between privileged and unprivileged groups,
/// defined only when both groups have positive and negative labels.
fn odds_differences(gc: &GroupConfusion) -> Option<(f64, f64)> {
    let dfpr = diff(gc.privileged.fpr(), gc.unprivileged.fpr())?;
    let dtpr = diff(gc.privileged.tpr(), gc.unprivileged.tpr())?;
    Some((dfpr, dtpr))
}

/// Theil index over benefits b = prediction - label + 1. Counts determine it:
/// false negatives have b = 0, correct rows b = 1, false positives b = 2.
fn theil_from_counts(c: &Confusion) -> Option<f64> {
    let n = c.total() as f64;
    let correct = (c.tp + c.tn) as f64;
    let fp = c.fp as f64;
    if n == 0.0 {
        return None;
    }
    let mu = (correct + 2.0 * fp) / n;
    if mu == 0.0 {
        return None;
    }
    let term = |b: f64| {
        let r = b / mu;
        r * r.ln()
    };
    let mut sum = 0.0;
    if correct > 0.0 {
        sum += correct * term(1.0);
    }
    if fp > 0.0 {
        sum += fp * term(2.0);
    }
    Some((sum / n).max(0.0))
}

/// Evaluate `metric` from counts. Dataset-level metrics use the pooled counts.
pub fn metric_value(metric: Metric, gc: &GroupConfusion) -> Option<f64> {
    match metric {
        Metric::Spd => diff(
            gc.privileged.selection_rate(),
            gc.unprivileged.selection_rate(),
        ),
        Metric::Di => disparate_impact(gc),
        Metric::Ndi => disparate_impact(gc).map(|d| d - 1.0),
        Metric::Eod => diff(gc.privileged.tpr(), gc.unprivileged.tpr()),
        Metric::Aod => odds_differences(gc).map(|(f, t)| 0.5 * (f + t)),
        Metric::Eo => odds_differences(gc).map(|(f, t)| f.abs() + t.abs()),
        Metric::Theil => theil_from_counts(&gc.total()),
        Metric::Accuracy => performance_metrics(&gc.total()).accuracy,
        Metric::Precision => performance_metrics(&gc.total()).precision,
        Metric::Recall => gc.total().tpr(),
        Metric::Specificity => gc.total().tnr(),
        Metric::Fpr => gc.total().fpr(),
        Metric::Fnr => gc.total().fnr(),
    }
}

/// Per-group rates behind a group metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub n: u64,
    pub selection_rate: Option<f64>,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
}

impl From<&Confusion> for GroupRates {
    fn from(c: &Confusion) -> Self {
        GroupRates {
            n: c.total(),
            selection_rate: c.selection_rate(),
            tpr: c.tpr(),
            fpr: c.fpr(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBreakdown {
    pub privileged: GroupRates,
    pub unprivileged: GroupRates,
}

/// One metric value, optionally with a bootstrap interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub metric: Metric,
    pub attribute: String,
    pub value: Option<f64>,
    pub defined: bool,
    #[serde(default)]
    pub ci_lower: Option<f64>,
    #[serde(default)]
    pub ci_upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<GroupBreakdown>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl MetricResult {
    fn point(metric: Metric, attribute: &str, gc: &GroupConfusion) -> Self {
        let value = metric_value(metric, gc);
        let groups = metric.is_group_metric().then(|| GroupBreakdown {
            privileged: (&gc.privileged).into(),
            unprivileged: (&gc.unprivileged).into(),
        });
        MetricResult {
            metric,
            attribute: attribute.to_string(),
            value,
            defined: value.is_some(),
            ci_lower: None,
            ci_upper: None,
            groups,
            warnings: Vec::new(),
        }
    }

    pub fn has_ci(&self) -> bool {
        self.ci_lower.is_some() && self.ci_upper.is_some()
    }
}

/// Confusion counts for the scope of `metric`: per-group for group metrics,
/// pooled (all rows privileged) for dataset-level metrics.
pub(crate) fn scoped_groups<'a>(
    dataset: &'a AuditDataset,
    metric: Metric,
    attribute: &str,
) -> Result<std::borrow::Cow<'a, [u8]>> {
    if metric.is_group_metric() {
        if attribute == OVERALL {
            return Err(Error::InvalidParameter(format!(
                "{metric} needs a sensitive attribute"
            )));
        }
        Ok(std::borrow::Cow::Borrowed(dataset.sensitive(attribute)?))
    } else {
        if attribute != OVERALL {
            dataset.sensitive(attribute)?;
        }
        Ok(std::borrow::Cow::Owned(vec![1; dataset.n_rows()]))
    }
}

/// Point value of `metric`. Group metrics need a sensitive attribute;
/// dataset-level metrics are reported under [`OVERALL`].
pub fn compute(dataset: &AuditDataset, metric: Metric, attribute: &str) -> Result<MetricResult> {
    let groups = scoped_groups(dataset, metric, attribute)?;
    let gc = GroupConfusion::from_rows(dataset.labels(), dataset.predictions(), &groups);
    let label = if metric.is_group_metric() {
        attribute
    } else {
        OVERALL
    };
    Ok(MetricResult::point(metric, label, &gc))
}

/// P(Ŷ=1 | A=1) − P(Ŷ=1 | A=0).
pub fn spd(dataset: &AuditDataset, attribute: &str) -> Result<MetricResult> {
    compute(dataset, Metric::Spd, attribute)
}

/// P(Ŷ=1 | A=1) / P(Ŷ=1 | A=0); 1 when both rates are zero.
pub fn di(dataset: &AuditDataset, attribute: &str) -> Result<MetricResult> {
    compute(dataset, Metric::Di, attribute)
}

pub fn ndi(dataset: &AuditDataset, attribute: &str) -> Result<MetricResult> {
    compute(dataset, Metric::Ndi, attribute)
}

/// TPR difference.
pub fn eod(dataset: &AuditDataset, attribute: &str) -> Result<MetricResult> {
    compute(dataset, Metric::Eod, attribute)
}

/// Mean of the FPR and TPR differences. Opposite-sign differences cancel.
pub fn aod(dataset: &AuditDataset, attribute: &str) -> Result<MetricResult> {
    compute(dataset, Metric::Aod, attribute)
}

/// Sum of absolute FPR and TPR differences.
pub fn eo(dataset: &AuditDataset, attribute: &str) -> Result<MetricResult> {
    compute(dataset, Metric::Eo, attribute)
}

pub fn theil_index(dataset: &AuditDataset) -> MetricResult {
    compute(dataset, Metric::Theil, OVERALL).expect("dataset-level metric needs no attribute")
}

/// False positive and false negative rates for one cell of the cross product
/// of sensitive attribute values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupRates {
    pub subgroup: String,
    pub values: Vec<(String, u8)>,
    pub n: u64,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
}

/// One row per combination of attribute values, privileged-first order
/// (all attributes = 1 first).
pub fn subgroup_misclassification(
    dataset: &AuditDataset,
    attributes: &[String],
) -> Result<Vec<SubgroupRates>> {
    if attributes.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one attribute is required".into(),
        ));
    }
    let columns: Vec<&[u8]> = attributes
        .iter()
        .map(|a| dataset.sensitive(a))
        .collect::<Result<_>>()?;
    let k = attributes.len();
    if k > 16 {
        return Err(Error::InvalidParameter("too many attributes".into()));
    }
    // cell index: bit (k-1-j) set when attribute j is 0
    let mut cells = vec![Confusion::default(); 1 << k];
    for row in 0..dataset.n_rows() {
        let mut idx = 0usize;
        for (j, col) in columns.iter().enumerate() {
            if col[row] == 0 {
                idx |= 1 << (k - 1 - j);
            }
        }
        cells[idx].record(dataset.labels()[row], dataset.predictions()[row]);
    }
    Ok(cells
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let values: Vec<(String, u8)> = attributes
                .iter()
                .enumerate()
                .map(|(j, a)| (a.clone(), u8::from(idx & (1 << (k - 1 - j)) == 0)))
                .collect();
            let subgroup = values
                .iter()
                .map(|(a, v)| format!("{a}={v}"))
                .collect::<Vec<_>>()
                .join(",");
            SubgroupRates {
                subgroup,
                values,
                n: c.total(),
                fpr: c.fpr(),
                fnr: c.fnr(),
            }
        })
        .collect())
}
