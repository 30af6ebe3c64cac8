use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use tracing_subscriber::EnvFilter;

use bondtca::impact::ImpactModel;
use bondtca::pipeline::{self, RunConfig};
use bondtca::regress::Model;
use bondtca::spread::MidConvention;
use bondtca::{Error, Result};

/// Corporate-bond transaction cost analysis.
///
/// Settings come from an optional TOML file; flags override it.
#[derive(Parser, Debug)]
#[command(name = "bondtca", version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for every artifact (and the default location of inputs).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Seed for synthetic data and cross-validation folds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Raw trade tape CSV.
    #[arg(long, global = true)]
    tape: Option<PathBuf>,
    /// Bond reference CSV.
    #[arg(long, global = true)]
    reference: Option<PathBuf>,
    /// Weekly market context CSV.
    #[arg(long, global = true)]
    context: Option<PathBuf>,
    /// Holiday calendar, one ISO date per line.
    #[arg(long, global = true)]
    calendar: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic tape, reference data, context, calendar and manifest.
    Generate(GenerateArgs),
    /// Parse, reconcile and filter the tape.
    Ingest,
    /// Identify riskless principal trades and sign every trade.
    Classify(ClassifyArgs),
    /// Realized spreads, weekly means and one-sided spreads.
    Spread(SpreadArgs),
    /// Weekly feature matrix.
    Features,
    /// Cross-validated cost regression.
    Fit(FitArgs),
    /// Transient impact kernels and signature plots.
    Impact(ImpactArgs),
    /// Combined JSON summary with asymmetry and stationarity tests.
    Report,
    /// Every stage from ingest to report.
    Pipeline(PipelineArgs),
}

#[derive(Args, Debug, Default)]
struct GenerateArgs {
    /// Synthetic bonds.
    #[arg(long)]
    n_bonds: Option<usize>,
    /// Signed events per bond.
    #[arg(long)]
    n_events: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct ClassifyArgs {
    /// Cap volumes at 1MM (high yield) / 5MM (investment grade) first.
    #[arg(long)]
    cap_volumes: bool,
}

#[derive(Args, Debug, Default)]
struct SpreadArgs {
    /// Largest gap in seconds between the two trades of a pair (exclusive).
    #[arg(long)]
    window_secs: Option<i64>,
    /// Sign convention for the mid-price.
    #[arg(long, value_parser = parse_mid)]
    mid_convention: Option<MidConvention>,
}

#[derive(Args, Debug, Default)]
struct FitArgs {
    /// ols, ridge, lasso, lslasso or en.
    #[arg(long, value_parser = parse_model)]
    model: Option<Model>,
    /// Log-uniform lambda grid as lo:hi:points.
    #[arg(long, value_parser = parse_grid)]
    lambda_grid: Option<(f64, f64, usize)>,
    /// Elastic-net mixing parameter (replaces the searched set).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    k_folds: Option<usize>,
    /// Training weeks, e.g. 2015-W02..2015-W20.
    #[arg(long)]
    train_range: Option<String>,
    /// Test weeks; must start after the training range ends.
    #[arg(long)]
    test_range: Option<String>,
}

#[derive(Args, Debug, Default)]
struct ImpactArgs {
    /// tim1 or tim2.
    #[arg(long, value_parser = parse_impact_model)]
    model: Option<ImpactModel>,
    /// Volume exponent applied to signs.
    #[arg(long)]
    alpha: Option<f64>,
    /// Kernel length N.
    #[arg(long)]
    n: Option<usize>,
    /// Response lags L (at least N).
    #[arg(long)]
    l: Option<usize>,
    /// Bonds analysed, by signed-trade count.
    #[arg(long)]
    top_k: Option<usize>,
    /// Events a bond needs to enter the aggregate kernel.
    #[arg(long)]
    min_events: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct PipelineArgs {
    /// Generate the synthetic fixture first.
    #[arg(long)]
    generate: bool,
    #[command(flatten)]
    synth: GenerateArgs,
    #[command(flatten)]
    classify: ClassifyArgs,
    #[command(flatten)]
    spread: SpreadArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long = "impact-model", value_parser = parse_impact_model)]
    impact_model: Option<ImpactModel>,
    #[arg(long)]
    top_k: Option<usize>,
}

fn parse_model(s: &str) -> std::result::Result<Model, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_impact_model(s: &str) -> std::result::Result<ImpactModel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_mid(s: &str) -> std::result::Result<MidConvention, String> {
    match s {
        "paper" => Ok(MidConvention::Paper),
        "corrected" => Ok(MidConvention::Corrected),
        _ => Err(format!("unknown mid convention {s:?} (expected paper or corrected)")),
    }
}

fn parse_grid(s: &str) -> std::result::Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(format!("expected lo:hi:points, got {s:?}"));
    };
    let num = |t: &str| t.parse::<f64>().map_err(|_| format!("bad number {t:?}"));
    Ok((
        num(lo)?,
        num(hi)?,
        n.parse().map_err(|_| format!("bad point count {n:?}"))?,
    ))
}

fn apply_common(cfg: &mut RunConfig, c: &Common) {
    if let Some(v) = &c.out_dir {
        cfg.paths.out_dir = v.clone();
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    for (slot, flag) in [
        (&mut cfg.paths.tape, &c.tape),
        (&mut cfg.paths.reference, &c.reference),
        (&mut cfg.paths.context, &c.context),
        (&mut cfg.paths.calendar, &c.calendar),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
}

fn apply_generate(cfg: &mut RunConfig, a: &GenerateArgs) {
    if let Some(v) = a.n_bonds {
        cfg.synth.fixture.n_bonds = v;
    }
    if let Some(v) = a.n_events {
        cfg.synth.n_events = v;
    }
}

fn apply_classify(cfg: &mut RunConfig, a: &ClassifyArgs) {
    if a.cap_volumes {
        cfg.classify.cap_volumes = true;
    }
}

fn apply_spread(cfg: &mut RunConfig, a: &SpreadArgs) {
    if let Some(v) = a.window_secs {
        cfg.spread.window_secs = v;
    }
    if let Some(v) = a.mid_convention {
        cfg.spread.mid_convention = v;
    }
}

fn apply_fit(cfg: &mut RunConfig, a: &FitArgs) {
    let r = &mut cfg.regression;
    if let Some(v) = a.model {
        r.model = v;
    }
    if a.lambda_grid.is_some() {
        r.lambda_grid = a.lambda_grid;
    }
    if let Some(v) = a.alpha {
        r.alphas = vec![v];
    }
    if let Some(v) = a.k_folds {
        r.k_folds = v;
    }
    if a.train_range.is_some() {
        r.train_range.clone_from(&a.train_range);
    }
    if a.test_range.is_some() {
        r.test_range.clone_from(&a.test_range);
    }
}

fn apply_impact(cfg: &mut RunConfig, a: &ImpactArgs) {
    let i = &mut cfg.impact;
    if let Some(v) = a.model {
        i.model = v;
    }
    if let Some(v) = a.alpha {
        i.alpha = v;
    }
    if let Some(v) = a.n {
        i.n = v;
    }
    if let Some(v) = a.l {
        i.l = v;
    }
    if let Some(v) = a.top_k {
        i.top_k = v;
    }
    if let Some(v) = a.min_events {
        i.min_events = v;
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    apply_common(&mut cfg, &cli.common);
    match &cli.command {
        Command::Generate(a) => apply_generate(&mut cfg, a),
        Command::Classify(a) => apply_classify(&mut cfg, a),
        Command::Spread(a) => apply_spread(&mut cfg, a),
        Command::Fit(a) => apply_fit(&mut cfg, a),
        Command::Impact(a) => apply_impact(&mut cfg, a),
        Command::Pipeline(a) => {
            apply_generate(&mut cfg, &a.synth);
            apply_classify(&mut cfg, &a.classify);
            apply_spread(&mut cfg, &a.spread);
            apply_fit(&mut cfg, &a.fit);
            apply_impact(
                &mut cfg,
                &ImpactArgs {
                    model: a.impact_model,
                    top_k: a.top_k,
                    ..ImpactArgs::default()
                },
            );
        }
        Command::Ingest | Command::Features | Command::Report => {}
    }
    cfg.validate()?;

    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&cfg.paths.out_dir).map_err(|e| Error::io(&cfg.paths.out_dir, e))?;

    match cli.command {
        Command::Generate(_) => pipeline::run_generate(&cfg),
        Command::Ingest => pipeline::run_ingest(&cfg).map(drop),
        Command::Classify(_) => pipeline::run_classify(&cfg).map(drop),
        Command::Spread(_) => pipeline::run_spread(&cfg),
        Command::Features => pipeline::run_features(&cfg).map(drop),
        Command::Fit(_) => pipeline::run_fit(&cfg).map(drop),
        Command::Impact(_) => pipeline::run_impact(&cfg).map(drop),
        Command::Report => pipeline::run_report(&cfg).map(drop),
        Command::Pipeline(a) => pipeline::run_pipeline(&cfg, a.generate),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("BONDTCA_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({ "error": { "kind": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() } });
            eprintln!("{body}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
