//! Validated tabular dataset and CSV ingestion.
//!
//! Sensitive attributes are binary with the privileged group encoded as `1`.
//! Labels and predictions are binary with the favorable outcome encoded as `1`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Column roles for a dataset. Supplied out-of-band, never inferred.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    #[serde(default)]
    pub feature_columns: Vec<String>,
    pub sensitive_columns: Vec<String>,
    pub label_column: String,
    pub prediction_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_column: Option<String>,
}

impl ColumnSchema {
    pub fn new(features: &[&str], sensitive: &[&str], label: &str, prediction: &str) -> Self {
        Self {
            feature_columns: features.iter().map(|s| s.to_string()).collect(),
            sensitive_columns: sensitive.iter().map(|s| s.to_string()).collect(),
            label_column: label.to_string(),
            prediction_column: prediction.to_string(),
            score_column: None,
        }
    }

    /// All column names in serialization order.
    pub fn all_columns(&self) -> Vec<&str> {
        let mut cols: Vec<&str> = self.feature_columns.iter().map(String::as_str).collect();
        cols.extend(self.sensitive_columns.iter().map(String::as_str));
        cols.push(&self.label_column);
        cols.push(&self.prediction_column);
        if let Some(s) = &self.score_column {
            cols.push(s);
        }
        cols
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensitive_columns.is_empty() {
            return Err(Error::InvalidSchema(
                "at least one sensitive column is required".into(),
            ));
        }
        if self.label_column.is_empty() || self.prediction_column.is_empty() {
            return Err(Error::InvalidSchema(
                "label and prediction columns are required".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for name in self.all_columns() {
            if name.is_empty() {
                return Err(Error::InvalidSchema("empty column name".into()));
            }
            if !seen.insert(name) {
                return Err(Error::InvalidSchema(format!(
                    "column `{name}` is assigned more than one role"
                )));
            }
        }
        Ok(())
    }
}

/// A non-sensitive feature column. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum FeatureColumn {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl FeatureColumn {
    fn cell(&self, row: usize) -> String {
        match self {
            FeatureColumn::Numeric(v) => v[row].map(|x| x.to_string()).unwrap_or_default(),
            FeatureColumn::Categorical(v) => v[row].clone().unwrap_or_default(),
        }
    }
}

/// Validated, immutable audit dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditDataset {
    schema: ColumnSchema,
    n_rows: usize,
    labels: Vec<u8>,
    predictions: Vec<u8>,
    sensitive: BTreeMap<String, Vec<u8>>,
    features: BTreeMap<String, FeatureColumn>,
    scores: Option<Vec<f64>>,
}

impl AuditDataset {
    /// Assemble a dataset from in-memory columns, applying the same checks as
    /// [`load_csv`].
    pub fn from_columns(
        schema: ColumnSchema,
        labels: Vec<u8>,
        predictions: Vec<u8>,
        sensitive: BTreeMap<String, Vec<u8>>,
        features: BTreeMap<String, FeatureColumn>,
        scores: Option<Vec<f64>>,
    ) -> Result<Self> {
        schema.validate()?;
        let n_rows = labels.len();
        if n_rows == 0 {
            return Err(Error::EmptyFile);
        }
        let check_len = |name: &str, len: usize| {
            if len != n_rows {
                Err(Error::InvalidSchema(format!(
                    "column `{name}` has {len} rows, expected {n_rows}"
                )))
            } else {
                Ok(())
            }
        };
        let check_binary = |name: &str, v: &[u8]| match v.iter().position(|&x| x > 1) {
            Some(row) => Err(Error::NonBinaryValue {
                column: name.to_string(),
                row,
                value: v[row].to_string(),
            }),
            None => Ok(()),
        };
        check_len(&schema.prediction_column, predictions.len())?;
        check_binary(&schema.label_column, &labels)?;
        check_binary(&schema.prediction_column, &predictions)?;
        for name in &schema.sensitive_columns {
            let col = sensitive.get(name).ok_or_else(|| Error::MissingColumn {
                column: name.clone(),
            })?;
            check_len(name, col.len())?;
            check_binary(name, col)?;
        }
        if sensitive.len() != schema.sensitive_columns.len() {
            return Err(Error::InvalidSchema(
                "sensitive columns do not match the schema".into(),
            ));
        }
        for name in &schema.feature_columns {
            let col = features.get(name).ok_or_else(|| Error::MissingColumn {
                column: name.clone(),
            })?;
            let len = match col {
                FeatureColumn::Numeric(v) => v.len(),
                FeatureColumn::Categorical(v) => v.len(),
            };
            check_len(name, len)?;
        }
        if features.len() != schema.feature_columns.len() {
            return Err(Error::InvalidSchema(
                "feature columns do not match the schema".into(),
            ));
        }
        match (&schema.score_column, &scores) {
            (Some(name), Some(s)) => {
                check_len(name, s.len())?;
                if let Some(row) = s.iter().position(|x| !(0.0..=1.0).contains(x)) {
                    return Err(Error::InvalidScore {
                        column: name.clone(),
                        row,
                        value: s[row].to_string(),
                    });
                }
            }
            (None, None) => {}
            _ => {
                return Err(Error::InvalidSchema(
                    "score column and score values must be given together".into(),
                ))
            }
        }
        // Both groups must be present for every attribute.
        for name in &schema.sensitive_columns {
            let ones = sensitive[name].iter().filter(|&&v| v == 1).count();
            if ones == 0 || ones == n_rows {
                return Err(Error::EmptyGroup {
                    attribute: name.clone(),
                });
            }
        }
        Ok(Self {
            schema,
            n_rows,
            labels,
            predictions,
            sensitive,
            features,
            scores,
        })
    }

    pub fn schema(&self) -> &ColumnSchema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn predictions(&self) -> &[u8] {
        &self.predictions
    }

    pub fn scores(&self) -> Option<&[f64]> {
        self.scores.as_deref()
    }

    pub fn features(&self) -> &BTreeMap<String, FeatureColumn> {
        &self.features
    }

    pub fn sensitive_attributes(&self) -> &[String] {
        &self.schema.sensitive_columns
    }

    pub fn sensitive(&self, attribute: &str) -> Result<&[u8]> {
        self.sensitive
            .get(attribute)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownAttribute(attribute.to_string()))
    }

    /// Split row indices into (privileged, unprivileged) for `attribute`.
    pub fn group_partition(&self, attribute: &str) -> Result<(Vec<usize>, Vec<usize>)> {
        let col = self.sensitive(attribute)?;
        let (mut privileged, mut unprivileged) = (Vec::new(), Vec::new());
        for (i, &v) in col.iter().enumerate() {
            if v == 1 {
                privileged.push(i);
            } else {
                unprivileged.push(i);
            }
        }
        Ok((privileged, unprivileged))
    }

    /// Serialize back to CSV in schema column order.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        // Writing into a Vec cannot fail.
        w.write_record(self.schema.all_columns())
            .expect("in-memory write");
        for row in 0..self.n_rows {
            let mut rec: Vec<String> = self
                .schema
                .feature_columns
                .iter()
                .map(|f| self.features[f].cell(row))
                .collect();
            rec.extend(
                self.schema
                    .sensitive_columns
                    .iter()
                    .map(|s| self.sensitive[s][row].to_string()),
            );
            rec.push(self.labels[row].to_string());
            rec.push(self.predictions[row].to_string());
            if let Some(s) = &self.scores {
                rec.push(s[row].to_string());
            }
            w.write_record(&rec).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    /// Content hash (SHA-256 over the canonical CSV form), hex encoded.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_csv());
        format!("sha256:{}", hex::encode(digest))
    }
}

fn parse_binary(raw: &str, column: &str, row: usize) -> Result<u8> {
    let t = raw.trim();
    if t.is_empty() {
        return Err(Error::MissingValue {
            column: column.to_string(),
            row,
        });
    }
    match t.parse::<f64>() {
        Ok(0.0) => Ok(0),
        Ok(1.0) => Ok(1),
        _ => Err(Error::NonBinaryValue {
            column: column.to_string(),
            row,
            value: t.to_string(),
        }),
    }
}

/// Parse a UTF-8 CSV with a header row against `schema`.
///
/// Rows are indexed from 0 (first data row) in error reports. Missing cells
/// are tolerated only in feature columns.
pub fn load_csv<R: Read>(reader: R, schema: &ColumnSchema) -> Result<AuditDataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(Error::Csv(e.to_string())),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::EmptyFile);
    }
    let header_index: BTreeMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim(), i))
        .collect();
    let index_of = |name: &str| {
        header_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
            })
    };
    let label_idx = index_of(&schema.label_column)?;
    let pred_idx = index_of(&schema.prediction_column)?;
    let sens_idx: Vec<(String, usize)> = schema
        .sensitive_columns
        .iter()
        .map(|s| index_of(s).map(|i| (s.clone(), i)))
        .collect::<Result<_>>()?;
    let feat_idx: Vec<(String, usize)> = schema
        .feature_columns
        .iter()
        .map(|s| index_of(s).map(|i| (s.clone(), i)))
        .collect::<Result<_>>()?;
    let score_idx = schema.score_column.as_deref().map(index_of).transpose()?;

    let mut labels = Vec::new();
    let mut predictions = Vec::new();
    let mut sensitive: BTreeMap<String, Vec<u8>> = sens_idx
        .iter()
        .map(|(n, _)| (n.clone(), Vec::new()))
        .collect();
    let mut raw_features: Vec<Vec<Option<String>>> = vec![Vec::new(); feat_idx.len()];
    let mut scores = score_idx.map(|_| Vec::new());

    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        labels.push(parse_binary(&rec[label_idx], &schema.label_column, row)?);
        predictions.push(parse_binary(
            &rec[pred_idx],
            &schema.prediction_column,
            row,
        )?);
        for (name, i) in &sens_idx {
            let v = parse_binary(&rec[*i], name, row)?;
            sensitive.get_mut(name).expect("pre-seeded").push(v);
        }
        for (k, (_, i)) in feat_idx.iter().enumerate() {
            let cell = rec[*i].trim();
            raw_features[k].push((!cell.is_empty()).then(|| cell.to_string()));
        }
        if let (Some(i), Some(out)) = (score_idx, scores.as_mut()) {
            let name = schema.score_column.as_deref().unwrap_or_default();
            let cell = rec[i].trim();
            if cell.is_empty() {
                return Err(Error::MissingValue {
                    column: name.to_string(),
                    row,
                });
            }
            let v: f64 = cell.parse().map_err(|_| Error::InvalidScore {
                column: name.to_string(),
                row,
                value: cell.to_string(),
            })?;
            out.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyFile);
    }

    let features = feat_idx
        .iter()
        .zip(raw_features)
        .map(|((name, _), cells)| (name.clone(), type_feature(cells)))
        .collect();

    AuditDataset::from_columns(
        schema.clone(),
        labels,
        predictions,
        sensitive,
        features,
        scores,
    )
}

/// A feature is numeric when every present cell parses as a finite float.
fn type_feature(cells: Vec<Option<String>>) -> FeatureColumn {
    let numeric: Option<Vec<Option<f64>>> = cells
        .iter()
        .map(|c| match c {
            None => Some(None),
            Some(s) => s.parse::<f64>().ok().filter(|x| x.is_finite()).map(Some),
        })
        .collect();
    match numeric {
        Some(v) => FeatureColumn::Numeric(v),
        None => FeatureColumn::Categorical(cells),
    }
}
