//! Fairness auditing for binary classifiers: lifecycle risk survey,
//! risk-calibrated thresholds, group fairness metrics with bootstrap
//! intervals, Bias Index and Fairness Score, resumable sessions and reports.

pub mod canonical;
pub mod data;
pub mod error;
pub mod fixtures;
pub mod metrics;
pub mod pipeline;
pub mod proxy;
pub mod report;
pub mod risk;
pub mod scoring;
pub mod session;
pub mod thresholds;

pub use data::{load_csv, AuditDataset, ColumnSchema, FeatureColumn};
pub use error::{ApiError, Error, ErrorClass, Result};
pub use metrics::{Metric, MetricResult};
pub use report::{generate_report, render, AuditReport, ReportFormat};
pub use risk::{RiskCategory, RiskProfile, SurveyItem, SurveyResponse};
pub use scoring::{bias_index, fairness_score, FairnessVerdict, MetricVector};
pub use session::{AuditSession, Stage, StagePayload};
pub use thresholds::{ThresholdSpec, ThresholdTable};
