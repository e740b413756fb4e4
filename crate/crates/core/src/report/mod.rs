//! Three-part audit report (Summary, Tabulation, Detailed Analysis) assembled
//! from a completed session's payloads. Nothing is recomputed here.

mod plots;
mod render;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricResult, SubgroupRates};
use crate::proxy::ProxyFinding;
use crate::risk::{Domain, RiskCategory, SurveyResponse};
use crate::scoring::MetricCheck;
use crate::session::{AuditSession, Stage};
use crate::thresholds::{MetricBound, ModelProfile};

pub use plots::{export_plot_data, PlotData, PlotKind, Series};
pub use render::{render, ReportFormat};

pub const REPORT_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "nishpaksh";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const THEIL_DEFINITION: &str =
    "generalized entropy (alpha = 1) over benefits b = prediction - label + 1";
pub const EO_DEFINITION: &str = "|FPR(A=1) - FPR(A=0)| + |TPR(A=1) - TPR(A=0)|";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model: ModelProfile,
    pub sector: String,
    pub risk_category: RiskCategory,
    pub fairness_score: Option<f64>,
    pub fairness_score_clamped: Option<f64>,
    pub overall_verdict: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: Metric,
    pub attribute: String,
    pub value: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    /// Bounds and outcome for selected metrics only.
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tabulation {
    pub domain_scores: BTreeMap<Domain, f64>,
    pub process_score: Option<f64>,
    pub technical_score: Option<f64>,
    pub composite_risk_score: f64,
    pub metrics: Vec<MetricRow>,
    pub bias_index: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetailedAnalysis {
    pub survey_responses: Vec<SurveyResponse>,
    pub proxy_findings: Vec<ProxyFinding>,
    pub subgroup_misclassification: Vec<SubgroupRates>,
    pub checks: Vec<MetricCheck>,
    pub plots: Vec<PlotData>,
    pub threshold_provenance: BTreeMap<Metric, MetricBound>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportProvenance {
    pub tool: String,
    pub tool_version: String,
    pub threshold_table_version: String,
    pub dataset_fingerprint: String,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub confidence_level: Option<f64>,
    pub theil_definition: String,
    pub eo_definition: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub report_version: u32,
    pub session_id: String,
    pub session_revision: u64,
    pub summary: Summary,
    pub tabulation: Tabulation,
    pub detailed_analysis: DetailedAnalysis,
    pub provenance: ReportProvenance,
}

impl AuditReport {
    pub fn to_canonical_json(&self) -> String {
        canonical::to_string(self).expect("report serializes")
    }
}

fn metric_row(r: &MetricResult, checks: &[MetricCheck]) -> MetricRow {
    let check = checks
        .iter()
        .find(|c| c.metric == r.metric && c.attribute == r.attribute);
    MetricRow {
        metric: r.metric,
        attribute: r.attribute.clone(),
        value: r.value,
        ci_lower: r.ci_lower,
        ci_upper: r.ci_upper,
        lower_bound: check.and_then(|c| c.bounds.lower),
        upper_bound: check.and_then(|c| c.bounds.upper),
        pass: check.map(|c| c.pass),
    }
}

/// Assemble the report for a completed session.
pub fn generate_report(session: &AuditSession) -> Result<AuditReport> {
    if session.stage != Stage::Complete {
        return Err(Error::SessionIncomplete(session.stage.to_string()));
    }
    let missing = |s: &str| Error::CorruptCheckpoint(format!("complete session lacks {s} payload"));
    let p = &session.payloads;
    let survey = p.survey.as_ref().ok_or_else(|| missing("survey"))?;
    let config = p.thresholds.as_ref().ok_or_else(|| missing("threshold"))?;
    let proxy = p.proxy.as_ref().ok_or_else(|| missing("proxy"))?;
    let inference = p.inference.as_ref().ok_or_else(|| missing("inference"))?;
    let scoring = p.scoring.as_ref().ok_or_else(|| missing("scoring"))?;
    let verdict = &scoring.verdict;

    let mut warnings: Vec<String> = inference.warnings.clone();
    for r in &inference.results {
        warnings.extend(
            r.warnings
                .iter()
                .map(|w| format!("{} on {}: {w}", r.metric, r.attribute)),
        );
    }
    for f in &proxy.findings {
        if let Some(w) = &f.warning {
            warnings.push(format!(
                "proxy {} vs {}: {w}",
                f.feature, f.sensitive_attribute
            ));
        }
    }
    warnings.extend(verdict.warnings.iter().cloned());

    let plots = PlotKind::ALL
        .iter()
        .filter_map(|&k| export_plot_data(session, k).ok())
        .collect();

    Ok(AuditReport {
        report_version: REPORT_VERSION,
        session_id: session.session_id.clone(),
        session_revision: session.revision,
        summary: Summary {
            model: config.model.clone(),
            sector: config.policy.sector.clone(),
            risk_category: survey.profile.category,
            fairness_score: verdict.fairness_score,
            fairness_score_clamped: verdict.fairness_score_clamped,
            overall_verdict: if verdict.overall_pass {
                Outcome::Pass
            } else {
                Outcome::Fail
            },
        },
        tabulation: Tabulation {
            domain_scores: survey.profile.domain_scores.clone(),
            process_score: survey.profile.process_score,
            technical_score: survey.profile.technical_score,
            composite_risk_score: survey.profile.composite,
            metrics: inference
                .results
                .iter()
                .map(|r| metric_row(r, &verdict.checks))
                .collect(),
            bias_index: verdict
                .bias
                .iter()
                .map(|(a, b)| (a.clone(), b.bias_index.as_ref().map(|bi| bi.value)))
                .collect(),
        },
        detailed_analysis: DetailedAnalysis {
            survey_responses: survey.responses.clone(),
            proxy_findings: proxy.findings.clone(),
            subgroup_misclassification: inference.subgroups.clone(),
            checks: verdict.checks.clone(),
            plots,
            threshold_provenance: config.thresholds.bounds.clone(),
            warnings,
        },
        provenance: ReportProvenance {
            tool: TOOL_NAME.into(),
            tool_version: TOOL_VERSION.into(),
            threshold_table_version: config.thresholds.table_version.clone(),
            dataset_fingerprint: inference.dataset_fingerprint.clone(),
            seed: inference.bootstrap.map(|b| b.seed),
            replicates: inference.bootstrap.map(|b| b.replicates),
            confidence_level: inference.bootstrap.map(|b| b.level),
            theil_definition: THEIL_DEFINITION.into(),
            eo_definition: EO_DEFINITION.into(),
        },
    })
}
