//! Builds stage payloads from raw inputs. Shared by the CLI, the HTTP service
//! and tests so that every front end produces the same session documents.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::canonical;
use crate::data::AuditDataset;
use crate::error::Result;
use crate::metrics::{
    evaluate_all, subgroup_misclassification, BootstrapConfig, EvaluationRequest, Metric,
    MetricCache,
};
use crate::proxy::{detect_proxies, DEFAULT_PROXY_THRESHOLD};
use crate::risk::{score_survey, RiskConfig, RiskProfile, SurveyItem, SurveyResponse};
use crate::scoring::{verdict, ScoringConfig};
use crate::session::{
    AuditSession, InferencePayload, ProxyPayload, ScoringPayload, StagePayload, SurveyPayload,
    ThresholdPayload,
};
use crate::thresholds::{Bounds, ModelProfile, SectorPolicy, ThresholdSpec, ThresholdTable};

fn default_proxy_threshold() -> f64 {
    DEFAULT_PROXY_THRESHOLD
}

/// Everything an audit needs besides the dataset and the survey answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub model: ModelProfile,
    #[serde(default = "SectorPolicy::generic")]
    pub policy: SectorPolicy,
    #[serde(default)]
    pub user_overrides: BTreeMap<Metric, Bounds>,
    #[serde(default = "default_proxy_threshold")]
    pub proxy_threshold: f64,
    #[serde(default)]
    pub scoring: ScoringConfig,
    #[serde(default)]
    pub risk: RiskConfig,
}

pub fn survey_payload(
    bank: &[SurveyItem],
    responses: &[SurveyResponse],
    risk_config: &RiskConfig,
) -> Result<SurveyPayload> {
    let profile = score_survey(bank, responses, risk_config)?;
    let mut responses = responses.to_vec();
    responses.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    Ok(SurveyPayload {
        responses,
        risk_config: risk_config.clone(),
        profile,
    })
}

pub fn threshold_payload(
    profile: &RiskProfile,
    model: &ModelProfile,
    policy: &SectorPolicy,
    user_overrides: &BTreeMap<Metric, Bounds>,
    table: &ThresholdTable,
) -> Result<ThresholdPayload> {
    model.validate()?;
    let thresholds = table.resolve(profile.category, policy, user_overrides)?;
    Ok(ThresholdPayload {
        model: model.clone(),
        policy: policy.clone(),
        user_overrides: user_overrides.clone(),
        thresholds,
    })
}

pub fn proxy_payload(dataset: &AuditDataset, proxy_threshold: f64) -> Result<ProxyPayload> {
    Ok(ProxyPayload {
        dataset_fingerprint: dataset.fingerprint(),
        schema: dataset.schema().clone(),
        n_rows: dataset.n_rows(),
        proxy_threshold,
        findings: detect_proxies(dataset, proxy_threshold)?,
    })
}

pub fn inference_payload(
    dataset: &AuditDataset,
    bootstrap: Option<BootstrapConfig>,
    cache: &MetricCache,
) -> Result<InferencePayload> {
    let results = evaluate_all(dataset, &EvaluationRequest { bootstrap }, cache)?;
    let subgroups = subgroup_misclassification(dataset, dataset.sensitive_attributes())?;
    Ok(InferencePayload {
        dataset_fingerprint: dataset.fingerprint(),
        bootstrap,
        results,
        subgroups,
        warnings: Vec::new(),
    })
}

pub fn scoring_payload(
    thresholds: &ThresholdSpec,
    inference: &InferencePayload,
    config: &ScoringConfig,
) -> Result<ScoringPayload> {
    Ok(ScoringPayload {
        config: config.clone(),
        verdict: verdict(&inference.results, thresholds, config)?,
    })
}

pub struct AuditInputs<'a> {
    pub dataset: &'a AuditDataset,
    pub responses: &'a [SurveyResponse],
    pub config: &'a AuditConfig,
    pub bootstrap: Option<BootstrapConfig>,
    pub question_bank: &'a [SurveyItem],
    pub table: &'a ThresholdTable,
}

/// Session id derived from the inputs, so identical runs name their outputs
/// identically.
pub fn derive_session_id(inputs: &AuditInputs<'_>) -> Result<String> {
    let mut responses = inputs.responses.to_vec();
    responses.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    let mut h = Sha256::new();
    for part in [
        inputs.dataset.fingerprint(),
        canonical::to_string(&responses)?,
        canonical::to_string(inputs.config)?,
        canonical::to_string(&inputs.bootstrap)?,
        canonical::to_string(&inputs.question_bank)?,
        canonical::to_string(inputs.table)?,
    ] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    Ok(format!("audit-{}", &hex::encode(h.finalize())[..16]))
}

/// Run all five stages on a fresh session.
pub fn run_audit(inputs: &AuditInputs<'_>, cache: &MetricCache) -> Result<AuditSession> {
    let mut session = AuditSession::with_id(derive_session_id(inputs)?);
    let c = inputs.config;
    let survey = survey_payload(inputs.question_bank, inputs.responses, &c.risk)?;
    let profile = survey.profile.clone();
    session.complete_stage(StagePayload::Survey(survey))?;
    let thresholds = threshold_payload(
        &profile,
        &c.model,
        &c.policy,
        &c.user_overrides,
        inputs.table,
    )?;
    let spec = thresholds.thresholds.clone();
    session.complete_stage(StagePayload::Thresholds(thresholds))?;
    session.complete_stage(StagePayload::Proxy(proxy_payload(
        inputs.dataset,
        c.proxy_threshold,
    )?))?;
    let inference = inference_payload(inputs.dataset, inputs.bootstrap, cache)?;
    let scoring = scoring_payload(&spec, &inference, &c.scoring)?;
    session.complete_stage(StagePayload::Inference(inference))?;
    session.complete_stage(StagePayload::Scoring(scoring))?;
    Ok(session)
}
