//! Structured plot data. Charts are drawn by the consumer from these blocks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricResult, OVERALL};
use crate::scoring::{ScoringConfig, DEFAULT_BI_METRICS};
use crate::session::AuditSession;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    MetricComparison,
    SubgroupRates,
    UncertaintyIntervals,
    FairnessPerformanceTradeoff,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [
        PlotKind::MetricComparison,
        PlotKind::SubgroupRates,
        PlotKind::UncertaintyIntervals,
        PlotKind::FairnessPerformanceTradeoff,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::MetricComparison => "metric-comparison",
            PlotKind::SubgroupRates => "subgroup-rates",
            PlotKind::UncertaintyIntervals => "uncertainty-intervals",
            PlotKind::FairnessPerformanceTradeoff => "fairness-performance-tradeoff",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownPlotKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub values: Vec<Option<f64>>,
}

/// One chart's data: every series has one value per category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub kind: PlotKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub categories: Vec<String>,
    pub series: Vec<Series>,
}

impl PlotData {
    pub fn is_consistent(&self) -> bool {
        self.series
            .iter()
            .all(|s| s.values.len() == self.categories.len())
    }
}

fn value_of(results: &[MetricResult], metric: Metric, attribute: &str) -> Option<f64> {
    let scope = if metric.is_group_metric() {
        attribute
    } else {
        OVERALL
    };
    results
        .iter()
        .find(|r| r.metric == metric && r.attribute == scope)
        .and_then(|r| r.value)
}

fn group_attributes(results: &[MetricResult]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in results.iter().filter(|r| r.metric.is_group_metric()) {
        if !out.contains(&r.attribute) {
            out.push(r.attribute.clone());
        }
    }
    out
}

/// Plot data for `kind` from the session's stored payloads.
pub fn export_plot_data(session: &AuditSession, kind: PlotKind) -> Result<PlotData> {
    let inference = session
        .payloads
        .inference
        .as_ref()
        .ok_or_else(|| Error::PayloadMissing(format!("{kind} needs inference results")))?;
    let results = &inference.results;
    let plot = match kind {
        PlotKind::MetricComparison => {
            let config = session
                .payloads
                .scoring
                .as_ref()
                .map(|s| s.config.clone())
                .unwrap_or_else(|| ScoringConfig {
                    metrics: DEFAULT_BI_METRICS.to_vec(),
                    ..Default::default()
                });
            let names = config.bi_metrics();
            let mut series = Vec::new();
            for attribute in group_attributes(results) {
                series.push(Series {
                    label: attribute.clone(),
                    values: names
                        .iter()
                        .map(|&m| value_of(results, m, &attribute))
                        .collect(),
                });
                if let Some(base) = config.baseline.get(&attribute) {
                    series.push(Series {
                        label: format!("{attribute} (baseline)"),
                        values: names.iter().map(|m| base.get(m).copied()).collect(),
                    });
                }
            }
            PlotData {
                kind,
                title: "Fairness metric comparison".into(),
                x_label: "metric".into(),
                y_label: "value".into(),
                categories: names.iter().map(|m| m.to_string()).collect(),
                series,
            }
        }
        PlotKind::SubgroupRates => PlotData {
            kind,
            title: "Subgroup misclassification rates".into(),
            x_label: "subgroup".into(),
            y_label: "rate".into(),
            categories: inference
                .subgroups
                .iter()
                .map(|s| s.subgroup.clone())
                .collect(),
            series: vec![
                Series {
                    label: "FPR".into(),
                    values: inference.subgroups.iter().map(|s| s.fpr).collect(),
                },
                Series {
                    label: "FNR".into(),
                    values: inference.subgroups.iter().map(|s| s.fnr).collect(),
                },
            ],
        },
        PlotKind::UncertaintyIntervals => {
            let with_ci: Vec<&MetricResult> = results.iter().filter(|r| r.has_ci()).collect();
            if inference.bootstrap.is_none() || with_ci.is_empty() {
                return Err(Error::PayloadMissing(
                    "confidence intervals were not computed".into(),
                ));
            }
            PlotData {
                kind,
                title: "Metric values with bootstrap intervals".into(),
                x_label: "metric".into(),
                y_label: "value".into(),
                categories: with_ci
                    .iter()
                    .map(|r| format!("{}:{}", r.metric, r.attribute))
                    .collect(),
                series: vec![
                    Series {
                        label: "value".into(),
                        values: with_ci.iter().map(|r| r.value).collect(),
                    },
                    Series {
                        label: "lower".into(),
                        values: with_ci.iter().map(|r| r.ci_lower).collect(),
                    },
                    Series {
                        label: "upper".into(),
                        values: with_ci.iter().map(|r| r.ci_upper).collect(),
                    },
                ],
            }
        }
        PlotKind::FairnessPerformanceTradeoff => {
            let scoring = session.payloads.scoring.as_ref().ok_or_else(|| {
                Error::PayloadMissing("trade-off plot needs composite scoring".into())
            })?;
            let attributes = group_attributes(results);
            let accuracy = value_of(results, Metric::Accuracy, OVERALL);
            PlotData {
                kind,
                title: "Fairness versus performance".into(),
                x_label: "sensitive attribute".into(),
                y_label: "value".into(),
                series: vec![
                    Series {
                        label: "accuracy".into(),
                        values: attributes.iter().map(|_| accuracy).collect(),
                    },
                    Series {
                        label: "bias_index".into(),
                        values: attributes
                            .iter()
                            .map(|a| scoring.verdict.bias_index(a))
                            .collect(),
                    },
                ],
                categories: attributes,
            }
        }
    };
    debug_assert!(plot.is_consistent());
    Ok(plot)
}
