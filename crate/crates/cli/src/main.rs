use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use iatpoll_core::pipeline::{AnalysisOutcome, AnalysisRequest, Layout, SchemeSpec};
use iatpoll_core::simulator::{generate_cohort, CohortConfig};
use iatpoll_service::{
    analyze_record, bundle_from_cohort, Bundle, ServiceConfig, SimulatedTimeline, Store, StudyId,
};

#[derive(Parser)]
#[command(name = "iatpoll", version, about = "Paired IAT and questionnaire studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort and write it as a bundle directory.
    Simulate(SimulateArgs),
    /// Load a bundle directory into a data directory.
    Import(ImportArgs),
    /// Run an analysis on a stored study or directly on a bundle.
    Analyze(AnalyzeArgs),
    /// Print the last stored analysis of a study.
    Report(ReportArgs),
    /// Write a stored study out as a bundle directory.
    Export(ExportArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 25)]
    n: usize,
    /// Fraction of respondents who shift their answers toward the desirable pole.
    #[arg(long, default_value_t = 0.15)]
    prevalence: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "simulated")]
    study_id: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ImportArgs {
    #[arg(long, env = "IATPOLL_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    #[arg(long)]
    bundle: PathBuf,
    /// Store under this id instead of the one in the bundle.
    #[arg(long)]
    study: Option<String>,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long, env = "IATPOLL_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    #[arg(long)]
    study: String,
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, env = "IATPOLL_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    /// Stored study to analyse; the result is recorded in its log.
    #[arg(long, conflicts_with = "bundle", required_unless_present = "bundle")]
    study: Option<String>,
    /// Analyse a bundle directory without storing anything.
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Weighting scheme: uniform, variance-rank, reverse-deviation-rank, manual,
    /// optimized, optimized-pearson, or comma-separated weights. Repeatable.
    #[arg(long = "scheme", value_parser = parse_scheme)]
    schemes: Vec<SchemeSpec>,
    #[arg(long)]
    k_outliers: Option<usize>,
    /// Use the reduced row layout instead of the full grid.
    #[arg(long)]
    compact: bool,
    /// Seed for the weight search restarts.
    #[arg(long)]
    search_seed: Option<u64>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    study: StudyArgs,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    study: StudyArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bind: Option<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

fn parse_scheme(name: &str) -> Result<SchemeSpec, String> {
    SchemeSpec::parse(name).ok_or_else(|| format!("unknown scheme `{name}`"))
}

fn open_store(data_dir: &Path) -> Result<Store> {
    Store::open(data_dir, Default::default())
        .with_context(|| format!("opening data directory {}", data_dir.display()))
}

fn render(outcome: &AnalysisOutcome, format: Format) -> Result<String> {
    Ok(match format {
        Format::Table => {
            let mut out = outcome.report.to_table();
            for s in &outcome.skipped {
                out.push_str(&format!("skipped {}: {}\n", s.respondent, s.reason));
            }
            out
        }
        Format::Csv => outcome.report.to_csv(),
        Format::Json => serde_json::to_string_pretty(outcome)? + "\n",
    })
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let id = StudyId::new(&args.study_id).map_err(|e| anyhow!("{e}"))?;
    let cohort = generate_cohort(&CohortConfig {
        n: args.n,
        sdr_prevalence: args.prevalence,
        seed: args.seed,
        ..CohortConfig::default()
    })?;
    let bundle = bundle_from_cohort(&cohort, id, SimulatedTimeline::default(), args.seed)?;
    bundle
        .write_dir(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "wrote {} respondents ({} misreporting) to {}",
        cohort.respondents.len(),
        cohort.shy_count(),
        args.out.display()
    );
    Ok(())
}

fn import(args: ImportArgs) -> Result<()> {
    let bundle = Bundle::read_dir(&args.bundle)
        .with_context(|| format!("reading bundle {}", args.bundle.display()))?;
    let store = open_store(&args.data_dir)?;
    let record = store.import(args.study.as_deref(), &bundle)?;
    println!("{}", record.id);
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let mut request = AnalysisRequest::default();
    if !args.schemes.is_empty() {
        request.schemes = args.schemes;
    }
    if let Some(k) = args.k_outliers {
        request.k_outliers = k;
    }
    if args.compact {
        request.layout = Layout::Compact;
    }
    if let Some(seed) = args.search_seed {
        request.search.seed = seed;
    }
    let outcome = match (args.study, args.bundle) {
        (Some(study), _) => {
            let store = open_store(&args.data_dir)?;
            store.run_analysis(&study, Some(request))?.outcome
        }
        (None, Some(dir)) => {
            let bundle = Bundle::read_dir(&dir)
                .with_context(|| format!("reading bundle {}", dir.display()))?;
            let record = bundle.parse()?.to_record()?;
            analyze_record(&record, &request)?
        }
        (None, None) => bail!("either --study or --bundle is required"),
    };
    print!("{}", render(&outcome, args.format)?);
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let store = open_store(&args.study.data_dir)?;
    let stored = store
        .report(&args.study.study)?
        .ok_or_else(|| anyhow!("no analysis has been run for study `{}`", args.study.study))?;
    print!("{}", render(&stored.outcome, args.format)?);
    Ok(())
}

fn export(args: ExportArgs) -> Result<()> {
    let store = open_store(&args.study.data_dir)?;
    store.export(&args.study.study)?.write_dir(&args.out)?;
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let mut config = ServiceConfig::load(args.config.as_deref())?;
    if let Some(bind) = args.bind {
        config.bind = bind;
    }
    if let Some(dir) = args.data_dir {
        config.data_dir = dir;
    }
    let store = Arc::new(Store::open(&config.data_dir, config.study.clone())?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&config.bind)
            .await
            .with_context(|| format!("binding {}", config.bind))?;
        tracing::info!(addr = %listener.local_addr()?, data_dir = %config.data_dir.display(), "listening");
        iatpoll_service::http::serve(listener, store).await?;
        Ok(())
    })
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::Import(a) => import(a),
        Command::Analyze(a) => analyze(a),
        Command::Report(a) => report(a),
        Command::Export(a) => export(a),
        Command::Serve(a) => serve(a),
    }
}
