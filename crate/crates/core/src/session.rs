//! Five-stage audit workflow with canonical JSON checkpoints.
//!
//! A stage payload exists iff that stage has been completed, and stages
//! complete strictly in order. Amending a completed stage discards every
//! later payload and rewinds the stage pointer.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::data::ColumnSchema;
use crate::error::{Error, Result};
use crate::metrics::{BootstrapConfig, Metric, MetricResult, SubgroupRates};
use crate::proxy::ProxyFinding;
use crate::risk::{RiskConfig, RiskProfile, SurveyResponse};
use crate::scoring::{FairnessVerdict, ScoringConfig};
use crate::thresholds::{Bounds, ModelProfile, SectorPolicy, ThresholdSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// Conventional file suffix for session checkpoints.
pub const CHECKPOINT_SUFFIX: &str = ".nishpaksh.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    SurveyIntake,
    ThresholdSpecification,
    ProxyFeatureReview,
    Inference,
    CompositeScoring,
    Complete,
}

impl Stage {
    /// The five working stages, in order.
    pub const WORK: [Stage; 5] = [
        Stage::SurveyIntake,
        Stage::ThresholdSpecification,
        Stage::ProxyFeatureReview,
        Stage::Inference,
        Stage::CompositeScoring,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn next(self) -> Stage {
        match self {
            Stage::SurveyIntake => Stage::ThresholdSpecification,
            Stage::ThresholdSpecification => Stage::ProxyFeatureReview,
            Stage::ProxyFeatureReview => Stage::Inference,
            Stage::Inference => Stage::CompositeScoring,
            Stage::CompositeScoring | Stage::Complete => Stage::Complete,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyPayload {
    pub responses: Vec<SurveyResponse>,
    pub risk_config: RiskConfig,
    pub profile: RiskProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPayload {
    pub model: ModelProfile,
    pub policy: SectorPolicy,
    #[serde(default)]
    pub user_overrides: BTreeMap<Metric, Bounds>,
    pub thresholds: ThresholdSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyPayload {
    pub dataset_fingerprint: String,
    pub schema: ColumnSchema,
    pub n_rows: usize,
    pub proxy_threshold: f64,
    pub findings: Vec<ProxyFinding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferencePayload {
    pub dataset_fingerprint: String,
    /// `None` when confidence intervals were disabled.
    pub bootstrap: Option<BootstrapConfig>,
    pub results: Vec<MetricResult>,
    pub subgroups: Vec<SubgroupRates>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringPayload {
    pub config: ScoringConfig,
    pub verdict: FairnessVerdict,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Payloads {
    pub survey: Option<SurveyPayload>,
    pub thresholds: Option<ThresholdPayload>,
    pub proxy: Option<ProxyPayload>,
    pub inference: Option<InferencePayload>,
    pub scoring: Option<ScoringPayload>,
}

impl Payloads {
    pub fn has(&self, stage: Stage) -> bool {
        match stage {
            Stage::SurveyIntake => self.survey.is_some(),
            Stage::ThresholdSpecification => self.thresholds.is_some(),
            Stage::ProxyFeatureReview => self.proxy.is_some(),
            Stage::Inference => self.inference.is_some(),
            Stage::CompositeScoring => self.scoring.is_some(),
            Stage::Complete => false,
        }
    }

    fn clear_after(&mut self, stage: Stage) {
        for s in Stage::WORK.iter().filter(|s| **s > stage) {
            match s {
                Stage::SurveyIntake => self.survey = None,
                Stage::ThresholdSpecification => self.thresholds = None,
                Stage::ProxyFeatureReview => self.proxy = None,
                Stage::Inference => self.inference = None,
                Stage::CompositeScoring => self.scoring = None,
                Stage::Complete => {}
            }
        }
    }

    fn store(&mut self, payload: StagePayload) {
        match payload {
            StagePayload::Survey(p) => self.survey = Some(p),
            StagePayload::Thresholds(p) => self.thresholds = Some(p),
            StagePayload::Proxy(p) => self.proxy = Some(p),
            StagePayload::Inference(p) => self.inference = Some(p),
            StagePayload::Scoring(p) => self.scoring = Some(p),
        }
    }
}

/// Result of one stage, submitted to [`AuditSession::complete_stage`].
#[derive(Debug, Clone, PartialEq)]
pub enum StagePayload {
    Survey(SurveyPayload),
    Thresholds(ThresholdPayload),
    Proxy(ProxyPayload),
    Inference(InferencePayload),
    Scoring(ScoringPayload),
}

fn reject(msg: impl Into<String>) -> Error {
    Error::PayloadValidation(msg.into())
}

impl StagePayload {
    pub fn stage(&self) -> Stage {
        match self {
            StagePayload::Survey(_) => Stage::SurveyIntake,
            StagePayload::Thresholds(_) => Stage::ThresholdSpecification,
            StagePayload::Proxy(_) => Stage::ProxyFeatureReview,
            StagePayload::Inference(_) => Stage::Inference,
            StagePayload::Scoring(_) => Stage::CompositeScoring,
        }
    }

    /// Check the payload on its own and against the earlier stages' payloads.
    pub fn validate(&self, earlier: &Payloads) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::PayloadValidation(_) => e,
            other => reject(other.to_string()),
        };
        match self {
            StagePayload::Survey(p) => p.profile.validate(&p.risk_config.bands).map_err(wrap),
            StagePayload::Thresholds(p) => {
                p.model.validate().map_err(wrap)?;
                p.thresholds.validate().map_err(wrap)?;
                let survey = earlier
                    .survey
                    .as_ref()
                    .ok_or_else(|| reject("survey payload missing"))?;
                if p.thresholds.category != survey.profile.category {
                    return Err(reject(format!(
                        "thresholds resolved for {} but survey risk category is {}",
                        p.thresholds.category, survey.profile.category
                    )));
                }
                Ok(())
            }
            StagePayload::Proxy(p) => {
                p.schema.validate().map_err(wrap)?;
                if p.n_rows == 0 || p.dataset_fingerprint.is_empty() {
                    return Err(reject("dataset fingerprint and row count are required"));
                }
                if !(0.0..=1.0).contains(&p.proxy_threshold) {
                    return Err(reject("proxy threshold outside [0,1]"));
                }
                if p.findings
                    .iter()
                    .any(|f| f.flagged != (f.association >= p.proxy_threshold))
                {
                    return Err(reject("proxy finding flag disagrees with threshold"));
                }
                Ok(())
            }
            StagePayload::Inference(p) => {
                let proxy = earlier
                    .proxy
                    .as_ref()
                    .ok_or_else(|| reject("proxy review payload missing"))?;
                if p.dataset_fingerprint != proxy.dataset_fingerprint {
                    return Err(reject(
                        "inference dataset differs from the reviewed dataset",
                    ));
                }
                if p.results.is_empty() {
                    return Err(reject("no metric results"));
                }
                for r in &p.results {
                    if r.defined != r.value.is_some() {
                        return Err(reject(format!("{}: defined flag inconsistent", r.metric)));
                    }
                    if let (Some(v), Some(lo), Some(hi)) = (r.value, r.ci_lower, r.ci_upper) {
                        if !(lo <= v && v <= hi) {
                            return Err(reject(format!(
                                "{} on {}: interval does not contain the value",
                                r.metric, r.attribute
                            )));
                        }
                    }
                }
                Ok(())
            }
            StagePayload::Scoring(p) => {
                earlier
                    .inference
                    .as_ref()
                    .ok_or_else(|| reject("inference payload missing"))?;
                let v = &p.verdict;
                if v.overall_pass != v.checks.iter().all(|c| c.pass) {
                    return Err(reject("overall verdict disagrees with metric checks"));
                }
                if let (Some(raw), Some(clamped)) = (v.fairness_score, v.fairness_score_clamped) {
                    if clamped != raw.clamp(0.0, 1.0) {
                        return Err(reject("clamped fairness score inconsistent"));
                    }
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSession {
    pub schema_version: u32,
    pub session_id: String,
    pub created_at: String,
    pub updated_at: String,
    pub stage: Stage,
    pub revision: u64,
    pub payloads: Payloads,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl AuditSession {
    /// Fresh session with a random id.
    pub fn create() -> Self {
        Self::with_id(uuid::Uuid::new_v4().to_string())
    }

    pub fn with_id(session_id: impl Into<String>) -> Self {
        let t = now();
        Self {
            schema_version: SCHEMA_VERSION,
            session_id: session_id.into(),
            created_at: t.clone(),
            updated_at: t,
            stage: Stage::SurveyIntake,
            revision: 0,
            payloads: Payloads::default(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.stage == Stage::Complete
    }

    fn bump(&mut self) {
        self.revision += 1;
        self.updated_at = now();
    }

    /// Store the payload for the current stage and advance.
    pub fn complete_stage(&mut self, payload: StagePayload) -> Result<()> {
        let requested = payload.stage();
        if requested != self.stage {
            return Err(Error::StageOrderViolation {
                current: self.stage.to_string(),
                requested: requested.to_string(),
            });
        }
        payload.validate(&self.payloads)?;
        self.payloads.store(payload);
        self.stage = requested.next();
        self.bump();
        Ok(())
    }

    /// Replace a completed stage's payload and invalidate everything after it.
    pub fn amend_stage(&mut self, payload: StagePayload) -> Result<()> {
        let stage = payload.stage();
        if !self.payloads.has(stage) {
            return Err(Error::StageNotCompleted(stage.to_string()));
        }
        payload.validate(&self.payloads)?;
        self.payloads.clear_after(stage);
        self.payloads.store(payload);
        self.stage = stage.next();
        self.bump();
        Ok(())
    }

    /// Canonical JSON snapshot.
    pub fn checkpoint(&self) -> String {
        canonical::to_string(self).expect("session state serializes")
    }

    /// Rebuild a session from a checkpoint, re-validating every invariant.
    pub fn restore(document: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(document)
            .map_err(|e| Error::CorruptCheckpoint(format!("not JSON: {e}")))?;
        match value.get("schema_version") {
            Some(v) if v.as_u64() == Some(u64::from(SCHEMA_VERSION)) => {}
            other => {
                return Err(Error::SchemaVersionMismatch {
                    found: other.map_or_else(|| "missing".to_string(), |v| v.to_string()),
                    expected: SCHEMA_VERSION,
                })
            }
        }
        let session: AuditSession =
            serde_json::from_value(value).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        session.check_invariants()?;
        Ok(session)
    }

    fn check_invariants(&self) -> Result<()> {
        let mut replay = Payloads::default();
        for s in Stage::WORK {
            let present = self.payloads.has(s);
            let should = s < self.stage;
            if present != should {
                return Err(Error::CorruptCheckpoint(if present {
                    format!("payload for {s} present but session is at {}", self.stage)
                } else {
                    format!("payload for completed stage {s} is missing")
                }));
            }
            if let Some(p) = self.payload(s) {
                p.validate(&replay)
                    .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
                replay.store(p);
            }
        }
        Ok(())
    }

    fn payload(&self, stage: Stage) -> Option<StagePayload> {
        let p = &self.payloads;
        match stage {
            Stage::SurveyIntake => p.survey.clone().map(StagePayload::Survey),
            Stage::ThresholdSpecification => p.thresholds.clone().map(StagePayload::Thresholds),
            Stage::ProxyFeatureReview => p.proxy.clone().map(StagePayload::Proxy),
            Stage::Inference => p.inference.clone().map(StagePayload::Inference),
            Stage::CompositeScoring => p.scoring.clone().map(StagePayload::Scoring),
            Stage::Complete => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::{default_question_bank, score_survey};

    fn survey(rating: i64) -> StagePayload {
        let bank = default_question_bank();
        let responses: Vec<SurveyResponse> = bank
            .iter()
            .map(|i| SurveyResponse {
                item_id: i.id.clone(),
                rating,
            })
            .collect();
        let cfg = RiskConfig::default();
        let profile = score_survey(&bank, &responses, &cfg).unwrap();
        StagePayload::Survey(SurveyPayload {
            responses,
            risk_config: cfg,
            profile,
        })
    }

    #[test]
    fn fresh_session() {
        let a = AuditSession::create();
        let b = AuditSession::create();
        assert_eq!(a.stage, Stage::SurveyIntake);
        assert_eq!(a.revision, 0);
        assert_ne!(a.session_id, b.session_id);
        assert_eq!(a.payloads, Payloads::default());
        let v: serde_json::Value = serde_json::from_str(&a.checkpoint()).unwrap();
        assert_eq!(v["stage"], "SurveyIntake");
        assert_eq!(v["schema_version"], 1);
    }

    #[test]
    fn survey_advances_and_order_is_enforced() {
        let mut s = AuditSession::create();
        s.complete_stage(survey(3)).unwrap();
        assert_eq!(s.stage, Stage::ThresholdSpecification);
        assert_eq!(s.revision, 1);
        let err = s.complete_stage(survey(3)).unwrap_err();
        assert!(matches!(err, Error::StageOrderViolation { .. }));
        assert_eq!(s.revision, 1);
    }

    #[test]
    fn amend_requires_completed_stage() {
        let mut s = AuditSession::create();
        assert_eq!(
            s.amend_stage(survey(2)).unwrap_err(),
            Error::StageNotCompleted("SurveyIntake".into())
        );
        s.complete_stage(survey(2)).unwrap();
        s.amend_stage(survey(4)).unwrap();
        assert_eq!(s.stage, Stage::ThresholdSpecification);
        assert_eq!(s.revision, 2);
        assert_eq!(s.payloads.survey.as_ref().unwrap().profile.composite, 4.0);
    }

    #[test]
    fn restore_rejects_bad_documents() {
        let mut s = AuditSession::create();
        s.complete_stage(survey(1)).unwrap();
        let doc = s.checkpoint();
        let back = AuditSession::restore(&doc).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.checkpoint(), doc);

        let mut v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        v["schema_version"] = 2.into();
        assert!(matches!(
            AuditSession::restore(&v.to_string()),
            Err(Error::SchemaVersionMismatch { .. })
        ));
        v.as_object_mut().unwrap().remove("schema_version");
        assert!(matches!(
            AuditSession::restore(&v.to_string()),
            Err(Error::SchemaVersionMismatch { .. })
        ));

        // payload for a stage that has not been reached
        let mut v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        v["stage"] = "SurveyIntake".into();
        assert!(matches!(
            AuditSession::restore(&v.to_string()),
            Err(Error::CorruptCheckpoint(_))
        ));

        // tampered profile
        let mut v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        v["payloads"]["survey"]["profile"]["category"] = "High".into();
        assert!(matches!(
            AuditSession::restore(&v.to_string()),
            Err(Error::CorruptCheckpoint(_))
        ));
        assert!(matches!(
            AuditSession::restore("not json"),
            Err(Error::CorruptCheckpoint(_))
        ));
    }
}
