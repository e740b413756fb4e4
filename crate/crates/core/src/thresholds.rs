//! Model accountability metadata, sector policy and risk-calibrated metric
//! thresholds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::risk::RiskCategory;

const DEFAULT_TABLE: &str = include_str!("../assets/thresholds.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelType {
    MachineLearning,
    DeepLearning,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    BinaryClassification,
    /// Reserved; rejected by [`ModelProfile::validate`].
    Regression,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelProfile {
    pub model_type: ModelType,
    pub task: Task,
    #[serde(default)]
    pub purpose: String,
    #[serde(default)]
    pub intended_use: String,
    #[serde(default)]
    pub version: String,
}

impl ModelProfile {
    pub fn validate(&self) -> Result<()> {
        match self.task {
            Task::BinaryClassification => Ok(()),
            Task::Regression => Err(Error::UnsupportedTask("regression".into())),
        }
    }
}

/// A bound pair; `None` on either side is open.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Bounds {
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
}

impl Bounds {
    pub fn new(lower: Option<f64>, upper: Option<f64>) -> Self {
        Self { lower, upper }
    }

    /// Closed containment test.
    pub fn contains(&self, value: f64) -> bool {
        self.lower.is_none_or(|l| value >= l) && self.upper.is_none_or(|u| value <= u)
    }

    /// `self` lies within `outer`.
    pub fn is_within(&self, outer: &Bounds) -> bool {
        let lower_ok = match (self.lower, outer.lower) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(b)) => a >= b,
        };
        let upper_ok = match (self.upper, outer.upper) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(b)) => a <= b,
        };
        lower_ok && upper_ok
    }

    fn check(&self, metric: Metric) -> Result<()> {
        let invalid = |reason: String| Error::InvalidOverride {
            metric: metric.to_string(),
            reason,
        };
        for v in [self.lower, self.upper].into_iter().flatten() {
            if !v.is_finite() {
                return Err(invalid("bounds must be finite".into()));
            }
        }
        if let (Some(l), Some(u)) = (self.lower, self.upper) {
            if l > u {
                return Err(invalid(format!("lower {l} exceeds upper {u}")));
            }
        }
        if !self.contains(metric.parity()) {
            return Err(invalid(format!(
                "bounds exclude the parity value {}",
                metric.parity()
            )));
        }
        Ok(())
    }

    /// Scale each side's distance from parity by `factor`, then clamp to the
    /// metric's natural range.
    fn scaled(&self, metric: Metric, factor: f64) -> Bounds {
        let p = metric.parity();
        let (lo, hi) = metric.domain();
        let scale = |b: f64| (p + factor * (b - p)).clamp(lo, hi);
        Bounds {
            lower: self.lower.map(scale),
            upper: self.upper.map(scale),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    DefaultTable,
    SectorOverride,
    UserOverride,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBound {
    #[serde(flatten)]
    pub bounds: Bounds,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorPolicy {
    pub sector: String,
    pub selected_metrics: Vec<Metric>,
    #[serde(default)]
    pub threshold_overrides: BTreeMap<Metric, Bounds>,
}

impl SectorPolicy {
    /// Generic policy selecting the default-table fairness metrics.
    pub fn generic() -> Self {
        Self {
            sector: "generic".into(),
            selected_metrics: vec![
                Metric::Spd,
                Metric::Di,
                Metric::Eod,
                Metric::Aod,
                Metric::Eo,
            ],
            threshold_overrides: BTreeMap::new(),
        }
    }

    pub fn validate(&self, table: &ThresholdTable) -> Result<()> {
        if self.selected_metrics.is_empty() {
            return Err(Error::InvalidPolicy("no metrics selected".into()));
        }
        if !self
            .selected_metrics
            .iter()
            .any(|m| matches!(m, Metric::Spd | Metric::Di))
        {
            return Err(Error::InvalidPolicy(
                "selected metrics must include SPD or DI".into(),
            ));
        }
        for m in &self.selected_metrics {
            if !table.bounds.contains_key(m) && !self.threshold_overrides.contains_key(m) {
                return Err(Error::InvalidPolicy(format!(
                    "{m} has no default threshold; supply an override"
                )));
            }
        }
        for (m, b) in &self.threshold_overrides {
            b.check(*m)?;
        }
        Ok(())
    }
}

/// Versioned default bounds plus per-category strictness factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub version: String,
    pub category_scale: BTreeMap<RiskCategory, f64>,
    pub bounds: BTreeMap<Metric, Bounds>,
}

impl Default for ThresholdTable {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_TABLE).expect("bundled threshold table is valid")
    }
}

impl ThresholdTable {
    pub fn parse(json: &str) -> Result<Self> {
        let table: ThresholdTable =
            serde_json::from_str(json).map_err(|e| Error::InvalidThresholdTable(e.to_string()))?;
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev = f64::INFINITY;
        for c in RiskCategory::ALL {
            let f = *self
                .category_scale
                .get(&c)
                .ok_or_else(|| Error::InvalidThresholdTable(format!("missing scale for {c}")))?;
            // factors must not increase with risk, or strictness is not monotone
            if !(f.is_finite() && f > 0.0 && f <= prev) {
                return Err(Error::InvalidThresholdTable(
                    "category scale factors must be positive and non-increasing with risk".into(),
                ));
            }
            prev = f;
        }
        for (m, b) in &self.bounds {
            b.check(*m)
                .map_err(|e| Error::InvalidThresholdTable(e.to_string()))?;
        }
        Ok(())
    }

    /// Resolve thresholds for the policy's selected metrics: the default bound
    /// scaled for `category`, replaced by a sector override, replaced in turn
    /// by a user override.
    pub fn resolve(
        &self,
        category: RiskCategory,
        policy: &SectorPolicy,
        user_overrides: &BTreeMap<Metric, Bounds>,
    ) -> Result<ThresholdSpec> {
        self.validate()?;
        for (m, b) in user_overrides {
            b.check(*m)?;
        }
        policy.validate(self)?;
        let factor = self.category_scale[&category];
        let mut bounds = BTreeMap::new();
        for &m in &policy.selected_metrics {
            let bound = if let Some(b) = user_overrides.get(&m) {
                MetricBound {
                    bounds: *b,
                    provenance: Provenance::UserOverride,
                }
            } else if let Some(b) = policy.threshold_overrides.get(&m) {
                MetricBound {
                    bounds: *b,
                    provenance: Provenance::SectorOverride,
                }
            } else {
                MetricBound {
                    bounds: self.bounds[&m].scaled(m, factor),
                    provenance: Provenance::DefaultTable,
                }
            };
            bounds.insert(m, bound);
        }
        let spec = ThresholdSpec {
            table_version: self.version.clone(),
            category,
            sector: policy.sector.clone(),
            bounds,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Thresholds from the bundled table with no user overrides.
pub fn resolve_thresholds(category: RiskCategory, policy: &SectorPolicy) -> Result<ThresholdSpec> {
    ThresholdTable::default().resolve(category, policy, &BTreeMap::new())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub table_version: String,
    pub category: RiskCategory,
    pub sector: String,
    pub bounds: BTreeMap<Metric, MetricBound>,
}

impl ThresholdSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() {
            return Err(Error::InvalidPolicy("no metric bounds".into()));
        }
        for (m, b) in &self.bounds {
            b.bounds.check(*m)?;
        }
        Ok(())
    }

    pub fn selected_metrics(&self) -> impl Iterator<Item = Metric> + '_ {
        self.bounds.keys().copied()
    }
}
