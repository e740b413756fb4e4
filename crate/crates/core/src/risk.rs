//! Seven-domain lifecycle questionnaire: scoring, aggregation and risk
//! categories. Ratings run from 1 (very low risk) to 5 (very high risk).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_BANK: &str = include_str!("../assets/question_bank.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Domain {
    Data,
    Model,
    PipelineInfra,
    InterfaceIntegration,
    Deployment,
    HumanInLoop,
    SystemLevel,
}

impl Domain {
    pub const ALL: [Domain; 7] = [
        Domain::Data,
        Domain::Model,
        Domain::PipelineInfra,
        Domain::InterfaceIntegration,
        Domain::Deployment,
        Domain::HumanInLoop,
        Domain::SystemLevel,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Domain::Data => "Data",
            Domain::Model => "Model",
            Domain::PipelineInfra => "Pipeline and Infrastructure",
            Domain::InterfaceIntegration => "Interface and Integration",
            Domain::Deployment => "Deployment",
            Domain::HumanInLoop => "Human-in-the-Loop",
            Domain::SystemLevel => "System Level",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    Process,
    Technical,
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyItem {
    pub id: String,
    pub domain: Domain,
    pub text: String,
    pub factor: Factor,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub item_id: String,
    pub rating: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RiskCategory {
    VeryLow,
    Low,
    Medium,
    MediumHigh,
    High,
}

impl RiskCategory {
    pub const ALL: [RiskCategory; 5] = [
        RiskCategory::VeryLow,
        RiskCategory::Low,
        RiskCategory::Medium,
        RiskCategory::MediumHigh,
        RiskCategory::High,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RiskCategory::VeryLow => "Very Low",
            RiskCategory::Low => "Low",
            RiskCategory::Medium => "Medium",
            RiskCategory::MediumHigh => "Medium-High",
            RiskCategory::High => "High",
        }
    }
}

impl fmt::Display for RiskCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Cut points between consecutive categories. Buckets are half-open
/// `[lo, hi)` except the last, which is closed at 5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskBands {
    pub cut_points: [f64; 4],
}

impl Default for RiskBands {
    fn default() -> Self {
        Self {
            cut_points: [1.8, 2.6, 3.4, 4.2],
        }
    }
}

impl RiskBands {
    pub fn validate(&self) -> Result<()> {
        let mut prev = 1.0;
        for &c in &self.cut_points {
            if !(c > prev && c <= 5.0) {
                return Err(Error::InvalidParameter(format!(
                    "risk cut points must increase strictly within (1,5]: {:?}",
                    self.cut_points
                )));
            }
            prev = c;
        }
        Ok(())
    }

    pub fn classify(&self, composite: f64) -> Result<RiskCategory> {
        if !(1.0..=5.0).contains(&composite) {
            return Err(Error::OutOfRange(composite));
        }
        let idx = self
            .cut_points
            .iter()
            .take_while(|&&c| composite >= c)
            .count();
        Ok(RiskCategory::ALL[idx])
    }
}

/// Map a composite score to its category with the default equal-width bands.
pub fn classify_risk(composite: f64) -> Result<RiskCategory> {
    RiskBands::default().classify(composite)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskProfile {
    pub domain_scores: BTreeMap<Domain, f64>,
    pub process_score: Option<f64>,
    pub technical_score: Option<f64>,
    pub composite: f64,
    pub category: RiskCategory,
}

/// Weights and bands applied when aggregating a survey.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RiskConfig {
    /// Missing domains weigh 1.0.
    #[serde(default)]
    pub domain_weights: BTreeMap<Domain, f64>,
    #[serde(default)]
    pub bands: RiskBands,
}

pub fn default_question_bank() -> Vec<SurveyItem> {
    serde_json::from_str(DEFAULT_BANK).expect("bundled question bank is valid JSON")
}

pub fn parse_question_bank(json: &str) -> Result<Vec<SurveyItem>> {
    let items: Vec<SurveyItem> =
        serde_json::from_str(json).map_err(|e| Error::InvalidQuestionBank(e.to_string()))?;
    validate_question_bank(&items)?;
    Ok(items)
}

pub fn validate_question_bank(items: &[SurveyItem]) -> Result<()> {
    let mut ids = BTreeSet::new();
    for item in items {
        if !ids.insert(item.id.as_str()) {
            return Err(Error::InvalidQuestionBank(format!(
                "duplicate item id `{}`",
                item.id
            )));
        }
        if !(item.weight.is_finite() && item.weight > 0.0) {
            return Err(Error::InvalidQuestionBank(format!(
                "item `{}` has non-positive weight",
                item.id
            )));
        }
    }
    let missing: Vec<String> = Domain::ALL
        .iter()
        .filter(|d| !items.iter().any(|i| i.domain == **d))
        .map(|d| d.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::InvalidQuestionBank(format!(
            "no items for domains {}",
            missing.join(", ")
        )));
    }
    Ok(())
}

fn weighted_mean(pairs: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let (num, den) = pairs.fold((0.0, 0.0), |(n, d), (w, x)| (n + w * x, d + w));
    (den > 0.0).then(|| (num / den).clamp(1.0, 5.0))
}

/// Ratings keyed by item id, after checking ids, duplicates and range.
fn index_responses<'a>(
    items: &[SurveyItem],
    responses: &'a [SurveyResponse],
) -> Result<HashMap<&'a str, f64>> {
    let known: BTreeSet<&str> = items.iter().map(|i| i.id.as_str()).collect();
    let mut ratings = HashMap::with_capacity(responses.len());
    for r in responses {
        if !known.contains(r.item_id.as_str()) {
            return Err(Error::UnknownItem(r.item_id.clone()));
        }
        if !(1..=5).contains(&r.rating) {
            return Err(Error::InvalidRating {
                item_id: r.item_id.clone(),
                rating: r.rating,
            });
        }
        if ratings
            .insert(r.item_id.as_str(), r.rating as f64)
            .is_some()
        {
            return Err(Error::DuplicateResponse(r.item_id.clone()));
        }
    }
    Ok(ratings)
}

fn missing_ids<'a>(
    items: impl Iterator<Item = &'a SurveyItem>,
    ratings: &HashMap<&str, f64>,
) -> Vec<String> {
    items
        .filter(|i| !ratings.contains_key(i.id.as_str()))
        .map(|i| i.id.clone())
        .collect()
}

/// Weighted mean rating of one domain's items.
pub fn score_domain(
    items: &[SurveyItem],
    responses: &[SurveyResponse],
    domain: Domain,
) -> Result<f64> {
    let domain_items: Vec<SurveyItem> = items
        .iter()
        .filter(|i| i.domain == domain)
        .cloned()
        .collect();
    let relevant: Vec<SurveyResponse> = responses
        .iter()
        .filter(|r| domain_items.iter().any(|i| i.id == r.item_id))
        .cloned()
        .collect();
    let ratings = index_responses(&domain_items, &relevant)?;
    let missing = missing_ids(domain_items.iter(), &ratings);
    if !missing.is_empty() {
        return Err(Error::MissingResponse(missing));
    }
    weighted_mean(
        domain_items
            .iter()
            .map(|i| (i.weight, ratings[i.id.as_str()])),
    )
    .ok_or_else(|| Error::IncompleteDomains(vec![domain.to_string()]))
}

/// Weighted mean of the seven domain scores.
pub fn aggregate_risk(
    domain_scores: &BTreeMap<Domain, f64>,
    domain_weights: &BTreeMap<Domain, f64>,
) -> Result<f64> {
    let missing: Vec<String> = Domain::ALL
        .iter()
        .filter(|d| !domain_scores.contains_key(d))
        .map(|d| d.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteDomains(missing));
    }
    let mut pairs = Vec::with_capacity(7);
    for d in Domain::ALL {
        let w = domain_weights.get(&d).copied().unwrap_or(1.0);
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weight for domain {d} must be positive"
            )));
        }
        let s = domain_scores[&d];
        if !(1.0..=5.0).contains(&s) {
            return Err(Error::OutOfRange(s));
        }
        pairs.push((w, s));
    }
    Ok(weighted_mean(pairs.into_iter()).expect("positive weights"))
}

/// Score a complete survey into a [`RiskProfile`].
pub fn score_survey(
    items: &[SurveyItem],
    responses: &[SurveyResponse],
    config: &RiskConfig,
) -> Result<RiskProfile> {
    validate_question_bank(items)?;
    config.bands.validate()?;
    let ratings = index_responses(items, responses)?;
    let missing = missing_ids(items.iter(), &ratings);
    if !missing.is_empty() {
        return Err(Error::MissingResponse(missing));
    }
    let mut domain_scores = BTreeMap::new();
    for d in Domain::ALL {
        let score = weighted_mean(
            items
                .iter()
                .filter(|i| i.domain == d)
                .map(|i| (i.weight, ratings[i.id.as_str()])),
        )
        .ok_or_else(|| Error::IncompleteDomains(vec![d.to_string()]))?;
        domain_scores.insert(d, score);
    }
    let factor_score = |f: Factor| {
        weighted_mean(
            items
                .iter()
                .filter(|i| i.factor == f)
                .map(|i| (i.weight, ratings[i.id.as_str()])),
        )
    };
    let composite = aggregate_risk(&domain_scores, &config.domain_weights)?;
    Ok(RiskProfile {
        process_score: factor_score(Factor::Process),
        technical_score: factor_score(Factor::Technical),
        category: config.bands.classify(composite)?,
        domain_scores,
        composite,
    })
}

impl RiskProfile {
    /// Internal consistency check used when a profile is loaded from storage.
    pub fn validate(&self, bands: &RiskBands) -> Result<()> {
        if self.domain_scores.len() != Domain::ALL.len() {
            return Err(Error::IncompleteDomains(
                Domain::ALL
                    .iter()
                    .filter(|d| !self.domain_scores.contains_key(d))
                    .map(|d| d.to_string())
                    .collect(),
            ));
        }
        let lo = self
            .domain_scores
            .values()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .domain_scores
            .values()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if self.composite < lo - 1e-9 || self.composite > hi + 1e-9 {
            return Err(Error::PayloadValidation(
                "composite is not a convex combination of domain scores".into(),
            ));
        }
        if bands.classify(self.composite)? != self.category {
            return Err(Error::PayloadValidation(
                "risk category does not match composite score".into(),
            ));
        }
        Ok(())
    }
}
