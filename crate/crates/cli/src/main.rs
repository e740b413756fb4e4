//! `nishpaksh` command-line front end.
//!
//! Exit codes: 0 success or audit pass, 1 audit ran and failed, 2 usage
//! error, 3 validation or domain error (ApiError JSON on stderr).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nishpaksh_core::fixtures::{generate, reference_vectors, GroupTargets, SyntheticSpec};
use nishpaksh_core::metrics::{
    compute, BootstrapConfig, Metric, MetricCache, DEFAULT_LEVEL, DEFAULT_REPLICATES, OVERALL,
};
use nishpaksh_core::pipeline::{run_audit, AuditConfig, AuditInputs};
use nishpaksh_core::report::{generate_report, render, ReportFormat};
use nishpaksh_core::risk::{default_question_bank, parse_question_bank, score_survey, RiskConfig};
use nishpaksh_core::scoring::{bias_index, fairness_score, MetricVector, DEFAULT_BI_METRICS};
use nishpaksh_core::session::{AuditSession, CHECKPOINT_SUFFIX};
use nishpaksh_core::{
    canonical, load_csv, AuditDataset, ColumnSchema, Error, Result, SurveyItem, SurveyResponse,
    ThresholdTable,
};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(
    name = "nishpaksh",
    version,
    about = "Fairness audits for binary classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run complete audits.
    #[command(subcommand)]
    Audit(AuditCommand),
    /// Score the lifecycle risk survey.
    #[command(subcommand)]
    Survey(SurveyCommand),
    /// Compute fairness and performance metrics.
    #[command(subcommand)]
    Metrics(MetricsCommand),
    /// Bias Index and Fairness Score arithmetic.
    #[command(subcommand)]
    Score(ScoreCommand),
    /// Render reports from checkpoints.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Reference vectors and synthetic datasets.
    #[command(subcommand)]
    Fixtures(FixturesCommand),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum AuditCommand {
    /// Execute all five stages and write the checkpoint and reports.
    Run(AuditRunArgs),
}

#[derive(Args)]
struct BankArg {
    /// Question bank JSON replacing the bundled one.
    #[arg(long, env = "NISHPAKSH_QUESTION_BANK")]
    question_bank: Option<PathBuf>,
}

#[derive(Args)]
struct BootstrapArgs {
    /// Bootstrap seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    replicates: usize,
    /// Confidence level of the intervals.
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    level: f64,
    /// Skip bootstrap intervals.
    #[arg(long)]
    no_intervals: bool,
}

impl BootstrapArgs {
    fn config(&self) -> Option<BootstrapConfig> {
        (!self.no_intervals).then_some(BootstrapConfig {
            replicates: self.replicates,
            seed: self.seed,
            level: self.level,
        })
    }
}

#[derive(Args)]
struct AuditRunArgs {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Column schema JSON.
    #[arg(long)]
    schema: PathBuf,
    /// Survey responses JSON.
    #[arg(long)]
    survey: PathBuf,
    /// Audit configuration JSON (model profile, sector policy, overrides).
    #[arg(long)]
    config: PathBuf,
    /// Threshold table JSON replacing the bundled one.
    #[arg(long)]
    thresholds: Option<PathBuf>,
    #[command(flatten)]
    bank: BankArg,
    #[command(flatten)]
    bootstrap: BootstrapArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum SurveyCommand {
    /// Print the RiskProfile for a set of responses.
    Score {
        #[arg(long)]
        responses: PathBuf,
        #[command(flatten)]
        bank: BankArg,
    },
}

#[derive(Subcommand)]
enum MetricsCommand {
    /// Print MetricResult JSON for one sensitive attribute.
    Compute {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        attribute: String,
        /// Metrics to compute (default: all).
        #[arg(long = "metric")]
        metrics: Vec<Metric>,
        #[command(flatten)]
        bootstrap: BootstrapArgs,
    },
}

#[derive(Subcommand)]
enum ScoreCommand {
    /// Bias Index of an evaluated vector against a reference vector.
    Bi {
        /// JSON text or file: array, metric map or metric vector object.
        #[arg(long)]
        evaluated: String,
        /// Same forms as --evaluated; defaults to ideal parity.
        #[arg(long)]
        reference: Option<String>,
        /// Metric order for plain arrays.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BI_METRICS.to_vec())]
        metrics: Vec<Metric>,
    },
    /// Fairness Score from per-attribute Bias Indices.
    Fs {
        /// JSON array of Bias Indices, inline or as a file.
        #[arg(long)]
        bi: String,
    },
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Render the report of a completed checkpoint.
    Render {
        #[arg(long)]
        checkpoint: PathBuf,
        /// json, markdown or html.
        #[arg(long, default_value = "json")]
        format: String,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FixturesCommand {
    /// Print the reference comparison vectors.
    Reference,
    /// Write a synthetic dataset and its schema.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Favorable-outcome rate of the privileged group.
    #[arg(long)]
    p1: f64,
    /// Favorable-outcome rate of the unprivileged group.
    #[arg(long)]
    p0: f64,
    #[arg(long, default_value_t = 1000)]
    rows: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Shared TPR target for both groups (requires --fpr).
    #[arg(long, requires = "fpr")]
    tpr: Option<f64>,
    /// Shared FPR target for both groups (requires --tpr).
    #[arg(long, requires = "tpr")]
    fpr: Option<f64>,
    /// Full SyntheticSpec JSON; overrides the other options.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Schema JSON output path.
    #[arg(long)]
    schema_out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// Listen address (default from NISHPAKSH_ADDR or 127.0.0.1:8680).
    #[arg(long)]
    addr: Option<String>,
    /// Session directory (default from NISHPAKSH_DATA_DIR).
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

enum Outcome {
    Done,
    AuditFailed,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).map_err(|e| Error::Json(format!("{}: {e}", path.display())))
}

/// Inline JSON if it parses, otherwise a path to a JSON file.
fn inline_or_file<T: serde::de::DeserializeOwned>(arg: &str) -> Result<T> {
    match serde_json::from_str(arg) {
        Ok(v) => Ok(v),
        Err(_) if Path::new(arg).is_file() => read_json(Path::new(arg)),
        Err(e) => Err(Error::Json(e.to_string())),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(&canonical::to_bytes(value)?)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn question_bank(arg: &BankArg) -> Result<Vec<SurveyItem>> {
    match &arg.question_bank {
        Some(path) => parse_question_bank(&read(path)?),
        None => Ok(default_question_bank()),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ResponsesFile {
    List(Vec<SurveyResponse>),
    Wrapped { responses: Vec<SurveyResponse> },
}

impl ResponsesFile {
    fn into_vec(self) -> Vec<SurveyResponse> {
        match self {
            ResponsesFile::List(v) | ResponsesFile::Wrapped { responses: v } => v,
        }
    }
}

fn load_dataset(data: &Path, schema: &Path) -> Result<AuditDataset> {
    let schema: ColumnSchema = read_json(schema)?;
    let file = fs::File::open(data).map_err(|e| Error::Io(format!("{}: {e}", data.display())))?;
    load_csv(std::io::BufReader::new(file), &schema)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    session_id: &'a str,
    overall_verdict: nishpaksh_core::report::Outcome,
    risk_category: nishpaksh_core::RiskCategory,
    fairness_score: Option<f64>,
    fairness_score_clamped: Option<f64>,
    outputs: Vec<String>,
}

fn audit_run(args: &AuditRunArgs) -> Result<Outcome> {
    let dataset = load_dataset(&args.data, &args.schema)?;
    let responses = read_json::<ResponsesFile>(&args.survey)?.into_vec();
    let config: AuditConfig = read_json(&args.config)?;
    let table = match &args.thresholds {
        Some(path) => ThresholdTable::parse(&read(path)?)?,
        None => ThresholdTable::default(),
    };
    let bank = question_bank(&args.bank)?;
    let inputs = AuditInputs {
        dataset: &dataset,
        responses: &responses,
        config: &config,
        bootstrap: args.bootstrap.config(),
        question_bank: &bank,
        table: &table,
    };
    let session = run_audit(&inputs, &MetricCache::new())?;
    let report = generate_report(&session)?;

    fs::create_dir_all(&args.out)?;
    let id = &session.session_id;
    let mut outputs = Vec::new();
    let checkpoint = args.out.join(format!("{id}{CHECKPOINT_SUFFIX}"));
    fs::write(&checkpoint, session.checkpoint())?;
    outputs.push(checkpoint.display().to_string());
    for format in ReportFormat::ALL {
        let path = args.out.join(format!("{id}.report.{}", format.extension()));
        fs::write(&path, render(&report, format)?)?;
        outputs.push(path.display().to_string());
    }
    let s = &report.summary;
    print_json(&RunSummary {
        session_id: id,
        overall_verdict: s.overall_verdict,
        risk_category: s.risk_category,
        fairness_score: s.fairness_score,
        fairness_score_clamped: s.fairness_score_clamped,
        outputs,
    })?;
    Ok(match s.overall_verdict {
        nishpaksh_core::report::Outcome::Pass => Outcome::Done,
        nishpaksh_core::report::Outcome::Fail => Outcome::AuditFailed,
    })
}

fn metrics_compute(
    dataset: &AuditDataset,
    attribute: &str,
    metrics: &[Metric],
    bootstrap: Option<BootstrapConfig>,
) -> Result<Vec<nishpaksh_core::MetricResult>> {
    dataset.sensitive(attribute)?;
    let metrics = if metrics.is_empty() {
        Metric::ALL.to_vec()
    } else {
        metrics.to_vec()
    };
    let cache = MetricCache::new();
    let fingerprint = dataset.fingerprint();
    metrics
        .iter()
        .map(|&m| {
            let scope = if m.is_group_metric() {
                attribute
            } else {
                OVERALL
            };
            match &bootstrap {
                Some(b) => cache.get_or_compute(&fingerprint, dataset, m, scope, Some(b)),
                None => compute(dataset, m, scope),
            }
        })
        .collect()
}

#[derive(Deserialize)]
#[serde(untagged)]
enum VectorArg {
    Full(MetricVector),
    Map(BTreeMap<Metric, Option<f64>>),
    List(Vec<Option<f64>>),
}

impl VectorArg {
    fn into_vector(self, attribute: &str, order: &[Metric]) -> Result<MetricVector> {
        Ok(match self {
            VectorArg::Full(v) => v,
            VectorArg::Map(m) => MetricVector {
                attribute: attribute.to_string(),
                names: m.keys().copied().collect(),
                values: m.values().copied().collect(),
            },
            VectorArg::List(values) => {
                if values.len() != order.len() {
                    return Err(Error::VectorMismatch(format!(
                        "{} values for {} metrics ({})",
                        values.len(),
                        order.len(),
                        order
                            .iter()
                            .map(|m| m.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    )));
                }
                MetricVector {
                    attribute: attribute.to_string(),
                    names: order.to_vec(),
                    values,
                }
            }
        })
    }
}

fn generate_fixture(args: &GenerateArgs) -> Result<()> {
    let spec = match &args.spec {
        Some(path) => read_json(path)?,
        None => {
            let targets = |p: f64| GroupTargets {
                favorable_rate: p,
                tpr: args.tpr,
                fpr: args.fpr,
            };
            SyntheticSpec {
                privileged: targets(args.p1),
                unprivileged: targets(args.p0),
                ..SyntheticSpec::biased(args.p1, args.p0, args.rows, args.seed)
            }
        }
    };
    let dataset = generate(&spec)?;
    fs::write(&args.out, dataset.to_csv())?;
    fs::write(&args.schema_out, canonical::to_bytes(dataset.schema())?)?;
    print_json(&serde_json::json!({
        "rows": dataset.n_rows(),
        "fingerprint": dataset.fingerprint(),
    }))
}

fn serve(args: &ServeArgs) -> Result<()> {
    let mut config = nishpaksh_server::ServerConfig::from_env()?;
    if let Some(addr) = &args.addr {
        config.addr = addr
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("`{addr}` is not host:port")))?;
    }
    if let Some(dir) = &args.data_dir {
        config.data_dir = dir.clone();
    }
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(nishpaksh_server::serve(config))
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Audit(AuditCommand::Run(args)) => return audit_run(&args),
        Command::Survey(SurveyCommand::Score { responses, bank }) => {
            let responses = read_json::<ResponsesFile>(&responses)?.into_vec();
            print_json(&score_survey(
                &question_bank(&bank)?,
                &responses,
                &RiskConfig::default(),
            )?)?;
        }
        Command::Metrics(MetricsCommand::Compute {
            data,
            schema,
            attribute,
            metrics,
            bootstrap,
        }) => {
            let dataset = load_dataset(&data, &schema)?;
            print_json(&metrics_compute(
                &dataset,
                &attribute,
                &metrics,
                bootstrap.config(),
            )?)?;
        }
        Command::Score(ScoreCommand::Bi {
            evaluated,
            reference,
            metrics,
        }) => {
            let e = inline_or_file::<VectorArg>(&evaluated)?.into_vector("evaluated", &metrics)?;
            let r = match reference {
                Some(r) => inline_or_file::<VectorArg>(&r)?.into_vector("reference", &e.names)?,
                None => MetricVector::ideal("reference", &e.names),
            };
            print_json(&bias_index(&e, &r)?)?;
        }
        Command::Score(ScoreCommand::Fs { bi }) => {
            let values: Vec<f64> = inline_or_file(&bi)?;
            print_json(&fairness_score(&values)?)?;
        }
        Command::Report(ReportCommand::Render {
            checkpoint,
            format,
            out,
        }) => {
            let format: ReportFormat = format.parse()?;
            let session = AuditSession::restore(&read(&checkpoint)?)?;
            let bytes = render(&generate_report(&session)?, format)?;
            match out {
                Some(path) => fs::write(path, bytes)?,
                None => std::io::stdout().lock().write_all(&bytes)?,
            }
        }
        Command::Fixtures(FixturesCommand::Reference) => {
            let t = reference_vectors();
            print_json(&serde_json::json!({
                "baseline": t.baseline,
                "racial": t.racial,
                "gender": t.gender,
            }))?;
        }
        Command::Fixtures(FixturesCommand::Generate(args)) => generate_fixture(&args)?,
        Command::Serve(args) => serve(&args)?,
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::AuditFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!(
                "{}",
                canonical::to_string(&e.to_api_error()).unwrap_or_else(|_| e.to_string())
            );
            ExitCode::from(3)
        }
    }
}
