//! Renderers. Markdown and HTML are views over one document model built from
//! the report; JSON is the canonical serialization itself.

use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::Value;

use super::{AuditReport, Outcome};
use crate::canonical;
use crate::error::{Error, Result};

const HTML_TEMPLATE: &str = include_str!("../../assets/report_template.html");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
    Html,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [
        ReportFormat::Json,
        ReportFormat::Markdown,
        ReportFormat::Html,
    ];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
            ReportFormat::Html => "html",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            ReportFormat::Json => "application/json",
            ReportFormat::Markdown => "text/markdown; charset=utf-8",
            ReportFormat::Html => "text/html; charset=utf-8",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "html" => Ok(ReportFormat::Html),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// Render `report` in the requested format.
pub fn render(report: &AuditReport, format: ReportFormat) -> Result<Vec<u8>> {
    Ok(match format {
        ReportFormat::Json => canonical::to_bytes(report)?,
        ReportFormat::Markdown => to_markdown(&document(report)?).into_bytes(),
        ReportFormat::Html => to_html(&document(report)?).into_bytes(),
    })
}

enum Block {
    Heading(String),
    Paragraph(String),
    Table {
        headers: Vec<String>,
        rows: Vec<Vec<String>>,
    },
    Code {
        lang: &'static str,
        id: String,
        body: String,
    },
}

struct Section {
    title: String,
    blocks: Vec<Block>,
}

struct Document {
    title: String,
    subtitle: String,
    sections: Vec<Section>,
}

/// Four significant digits for display; full precision lives in the appendix.
pub(crate) fn sig4(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        return format!("{x:.3e}");
    }
    let decimals = (3 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

fn opt(x: Option<f64>) -> String {
    x.map(sig4).unwrap_or_else(|| "undefined".into())
}

fn bound(x: Option<f64>) -> String {
    x.map(sig4).unwrap_or_else(|| "open".into())
}

fn table(headers: &[&str], rows: Vec<Vec<String>>) -> Block {
    Block::Table {
        headers: headers.iter().map(|h| h.to_string()).collect(),
        rows,
    }
}

fn numeric_leaves(v: &Value, path: String, out: &mut Vec<(String, String)>) {
    match v {
        Value::Number(n) => out.push((path, n.to_string())),
        Value::Object(map) => {
            for (k, child) in map {
                let p = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                numeric_leaves(child, p, out);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                numeric_leaves(child, format!("{path}[{i}]"), out);
            }
        }
        _ => {}
    }
}

fn document(r: &AuditReport) -> Result<Document> {
    let s = &r.summary;
    let t = &r.tabulation;
    let d = &r.detailed_analysis;
    let p = &r.provenance;

    let verdict = match s.overall_verdict {
        Outcome::Pass => "PASS",
        Outcome::Fail => "FAIL",
    };
    let summary = Section {
        title: "Summary".into(),
        blocks: vec![table(
            &["Field", "Value"],
            vec![
                vec!["Overall verdict".into(), verdict.into()],
                vec!["Fairness score".into(), opt(s.fairness_score)],
                vec![
                    "Fairness score (clamped)".into(),
                    opt(s.fairness_score_clamped),
                ],
                vec!["Risk category".into(), s.risk_category.label().into()],
                vec!["Sector".into(), s.sector.clone()],
                vec![
                    "Model type".into(),
                    canonical::to_value(&s.model.model_type)?
                        .as_str()
                        .unwrap_or_default()
                        .into(),
                ],
                vec![
                    "Task".into(),
                    canonical::to_value(&s.model.task)?
                        .as_str()
                        .unwrap_or_default()
                        .into(),
                ],
                vec!["Purpose".into(), s.model.purpose.clone()],
                vec!["Intended use".into(), s.model.intended_use.clone()],
                vec!["Model version".into(), s.model.version.clone()],
            ],
        )],
    };

    let mut risk_rows: Vec<Vec<String>> = t
        .domain_scores
        .iter()
        .map(|(dom, v)| vec![dom.title().to_string(), sig4(*v)])
        .collect();
    risk_rows.push(vec!["Process factors".into(), opt(t.process_score)]);
    risk_rows.push(vec!["Technical factors".into(), opt(t.technical_score)]);
    risk_rows.push(vec!["Composite".into(), sig4(t.composite_risk_score)]);

    let metric_rows = t
        .metrics
        .iter()
        .map(|m| {
            let ci = match (m.ci_lower, m.ci_upper) {
                (Some(l), Some(u)) => format!("[{}, {}]", sig4(l), sig4(u)),
                _ => "-".into(),
            };
            let bounds = match m.pass {
                Some(_) => format!("[{}, {}]", bound(m.lower_bound), bound(m.upper_bound)),
                None => "-".into(),
            };
            let result = match m.pass {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "not selected",
            };
            vec![
                m.metric.to_string(),
                m.attribute.clone(),
                opt(m.value),
                ci,
                bounds,
                result.into(),
            ]
        })
        .collect();
    let bi_rows = t
        .bias_index
        .iter()
        .map(|(a, v)| vec![a.clone(), opt(*v)])
        .collect();
    let tabulation = Section {
        title: "Tabulation".into(),
        blocks: vec![
            Block::Heading("Risk scores".into()),
            table(&["Domain", "Score"], risk_rows),
            Block::Heading("Fairness metrics".into()),
            table(
                &[
                    "Metric",
                    "Attribute",
                    "Value",
                    "Interval",
                    "Bounds",
                    "Result",
                ],
                metric_rows,
            ),
            Block::Heading("Bias index".into()),
            table(&["Attribute", "Bias index"], bi_rows),
        ],
    };

    let mut detail = vec![
        Block::Heading("Survey responses".into()),
        table(
            &["Item", "Rating"],
            d.survey_responses
                .iter()
                .map(|r| vec![r.item_id.clone(), r.rating.to_string()])
                .collect(),
        ),
        Block::Heading("Proxy findings".into()),
    ];
    if d.proxy_findings.is_empty() {
        detail.push(Block::Paragraph("No feature columns were screened.".into()));
    } else {
        detail.push(table(
            &["Feature", "Attribute", "Association", "Measure", "Flagged"],
            d.proxy_findings
                .iter()
                .map(|f| {
                    vec![
                        f.feature.clone(),
                        f.sensitive_attribute.clone(),
                        sig4(f.association),
                        canonical::to_value(&f.measure)
                            .ok()
                            .and_then(|v| v.as_str().map(str::to_string))
                            .unwrap_or_default(),
                        if f.flagged { "yes" } else { "no" }.into(),
                    ]
                })
                .collect(),
        ));
    }
    detail.push(Block::Heading("Subgroup misclassification".into()));
    detail.push(table(
        &["Subgroup", "Rows", "FPR", "FNR"],
        d.subgroup_misclassification
            .iter()
            .map(|g| vec![g.subgroup.clone(), g.n.to_string(), opt(g.fpr), opt(g.fnr)])
            .collect(),
    ));
    detail.push(Block::Heading("Threshold provenance".into()));
    detail.push(table(
        &["Metric", "Lower", "Upper", "Source"],
        d.threshold_provenance
            .iter()
            .map(|(m, b)| {
                vec![
                    m.to_string(),
                    bound(b.bounds.lower),
                    bound(b.bounds.upper),
                    canonical::to_value(&b.provenance)
                        .ok()
                        .and_then(|v| v.as_str().map(str::to_string))
                        .unwrap_or_default(),
                ]
            })
            .collect(),
    ));
    detail.push(Block::Heading("Plot data".into()));
    for plot in &d.plots {
        detail.push(Block::Code {
            lang: "json",
            id: format!("plot-{}", plot.kind),
            body: canonical::to_string(plot)?,
        });
    }
    detail.push(Block::Heading("Warnings".into()));
    if d.warnings.is_empty() {
        detail.push(Block::Paragraph("None.".into()));
    } else {
        detail.push(table(
            &["Warning"],
            d.warnings.iter().map(|w| vec![w.clone()]).collect(),
        ));
    }
    detail.push(Block::Heading("Provenance".into()));
    detail.push(table(
        &["Field", "Value"],
        vec![
            vec!["Tool".into(), format!("{} {}", p.tool, p.tool_version)],
            vec!["Threshold table".into(), p.threshold_table_version.clone()],
            vec!["Dataset fingerprint".into(), p.dataset_fingerprint.clone()],
            vec![
                "Seed".into(),
                p.seed.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
            ],
            vec![
                "Replicates".into(),
                p.replicates
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "-".into()),
            ],
            vec!["Confidence level".into(), opt(p.confidence_level)],
            vec!["THEIL".into(), p.theil_definition.clone()],
            vec!["EO".into(), p.eo_definition.clone()],
        ],
    ));

    let mut leaves = Vec::new();
    numeric_leaves(&canonical::to_value(r)?, String::new(), &mut leaves);
    let appendix = Section {
        title: "Appendix: full-precision values".into(),
        blocks: vec![table(
            &["Path", "Value"],
            leaves.into_iter().map(|(k, v)| vec![k, v]).collect(),
        )],
    };

    Ok(Document {
        title: "Fairness Audit Report".into(),
        subtitle: format!("Session {} (revision {})", r.session_id, r.session_revision),
        sections: vec![
            summary,
            tabulation,
            Section {
                title: "Detailed Analysis".into(),
                blocks: detail,
            },
            appendix,
        ],
    })
}

fn md_cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

fn to_markdown(doc: &Document) -> String {
    let mut out = format!("# {}\n\n{}\n", doc.title, doc.subtitle);
    for section in &doc.sections {
        let _ = write!(out, "\n## {}\n", section.title);
        for block in &section.blocks {
            match block {
                Block::Heading(h) => {
                    let _ = write!(out, "\n### {h}\n");
                }
                Block::Paragraph(p) => {
                    let _ = write!(out, "\n{p}\n");
                }
                Block::Table { headers, rows } => {
                    out.push('\n');
                    let cells: Vec<String> = headers.iter().map(|h| md_cell(h)).collect();
                    let _ = writeln!(out, "| {} |", cells.join(" | "));
                    let _ = writeln!(out, "|{}", "---|".repeat(headers.len()));
                    for row in rows {
                        let cells: Vec<String> = row.iter().map(|c| md_cell(c)).collect();
                        let _ = writeln!(out, "| {} |", cells.join(" | "));
                    }
                }
                Block::Code { lang, body, .. } => {
                    let _ = write!(out, "\n```{lang}\n{body}\n```\n");
                }
            }
        }
    }
    out
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn to_html(doc: &Document) -> String {
    let mut body = String::new();
    for section in &doc.sections {
        let _ = write!(body, "<section>\n<h2>{}</h2>\n", esc(&section.title));
        for block in &section.blocks {
            match block {
                Block::Heading(h) => {
                    let _ = writeln!(body, "<h3>{}</h3>", esc(h));
                }
                Block::Paragraph(p) => {
                    let _ = writeln!(body, "<p>{}</p>", esc(p));
                }
                Block::Table { headers, rows } => {
                    body.push_str("<table>\n<thead><tr>");
                    for h in headers {
                        let _ = write!(body, "<th>{}</th>", esc(h));
                    }
                    body.push_str("</tr></thead>\n<tbody>\n");
                    for row in rows {
                        body.push_str("<tr>");
                        for c in row {
                            let _ = write!(body, "<td>{}</td>", esc(c));
                        }
                        body.push_str("</tr>\n");
                    }
                    body.push_str("</tbody>\n</table>\n");
                }
                Block::Code { id, body: code, .. } => {
                    // Inline data block so charts can be drawn offline.
                    let _ = write!(
                        body,
                        "<pre>{}</pre>\n<script type=\"application/json\" id=\"{}\">{}</script>\n",
                        esc(code),
                        esc(id),
                        code.replace("</", "<\\/")
                    );
                }
            }
        }
        body.push_str("</section>\n");
    }
    HTML_TEMPLATE
        .replace("{{title}}", &esc(&doc.title))
        .replace("{{subtitle}}", &esc(&doc.subtitle))
        .replace("{{body}}", &body)
}
