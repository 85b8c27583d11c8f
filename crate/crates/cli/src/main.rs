use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use defaultbench_core::bench::{
    self, format_stats, generate_synthetic, read_metrics_csv, write_reports, BenchError, ExperimentConfig, Preset,
    SyntheticSpec, DATA_DIR_ENV, EXIT_PARTIAL,
};
use defaultbench_core::loan_data::{FIRST_VINTAGE, LAST_VINTAGE};

#[derive(Parser, Debug)]
#[command(name = "defaultbench", version)]
#[command(about = "Mortgage default prediction benchmark: original vs SMOTE-resampled training")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full experiment and write reports.
    Run(ConfigArgs),
    /// Write synthetic vintages in the loan-level file layout.
    Generate(GenerateArgs),
    /// Rebuild ranking, comparison and timing tables from a metrics CSV.
    Report(ReportArgs),
    /// Print size and class balance per vintage and regime.
    Inspect(ConfigArgs),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// TOML experiment configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Directory holding sample_{year}/ folders (also read from DEFAULTBENCH_DATA_DIR).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated vintage years.
    #[arg(long, value_delimiter = ',')]
    vintages: Option<Vec<u16>>,
    #[arg(long)]
    customer_sample: Option<usize>,
    /// "full" or "desk".
    #[arg(long)]
    preset: Option<String>,
    /// Override any configuration key, e.g. --set resample.k=3 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Output data directory.
    #[arg(short, long)]
    out: PathBuf,
    /// Comma-separated vintage years (default: all).
    #[arg(long, value_delimiter = ',')]
    vintages: Option<Vec<u16>>,
    #[arg(long, default_value_t = 2000)]
    customers: usize,
    #[arg(long, default_value_t = 45)]
    rows_per_customer: usize,
    /// Share of performance rows with a default code (default: the vintage's regime rate).
    #[arg(long)]
    default_rate: Option<f64>,
    #[arg(long, default_value_t = 4)]
    informative_features: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// metrics.csv written by a previous run.
    #[arg(long, default_value = "results/metrics.csv")]
    metrics: PathBuf,
    /// Directory for the tables (default: next to the metrics file).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn resolve(args: &ConfigArgs) -> Result<ExperimentConfig, BenchError> {
    let env = std::env::var(DATA_DIR_ENV).ok();
    let mut config = ExperimentConfig::resolve(args.config.as_deref(), env.as_deref(), &args.sets)?;
    if let Some(dir) = &args.data_dir {
        config.data_dir = dir.clone();
    }
    if let Some(dir) = &args.output_dir {
        config.output_dir = dir.clone();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(v) = &args.vintages {
        config.vintages = v.clone();
    }
    if let Some(n) = args.customer_sample {
        config.customer_sample = n;
    }
    if let Some(p) = &args.preset {
        config.preset = match p.as_str() {
            "full" => Preset::Full,
            "desk" => Preset::Desk,
            other => return Err(BenchError::Config(format!("unknown preset `{other}`"))),
        };
    }
    config.validate()?;
    Ok(config)
}

fn run(args: &ConfigArgs) -> Result<ExitCode, BenchError> {
    let config = resolve(args)?;
    let summary = bench::run(&config)?;
    println!(
        "{} reports for {} vintage(s) written to {}",
        summary.reports.len(),
        summary.splits.len(),
        summary.output_dir.display()
    );
    for (year, reason) in &summary.skipped {
        eprintln!("vintage {year} skipped: {reason}");
    }
    if summary.is_partial() {
        eprintln!("{} cell(s) failed; see diagnostics.log", summary.failed_cells());
        return Ok(ExitCode::from(EXIT_PARTIAL as u8));
    }
    Ok(ExitCode::SUCCESS)
}

fn generate(args: &GenerateArgs) -> Result<ExitCode, BenchError> {
    let years = args.vintages.clone().unwrap_or_else(|| (FIRST_VINTAGE..=LAST_VINTAGE).collect());
    for year in years {
        let mut spec = SyntheticSpec::regime_preset(year, args.customers, args.seed)?;
        spec.rows_per_customer = args.rows_per_customer;
        spec.informative_features = args.informative_features;
        if let Some(rate) = args.default_rate {
            spec.default_rate = rate;
        }
        let g = generate_synthetic(&spec, &args.out)?;
        println!(
            "{year}: {} customers, {} rows, {} defaulted rows ({:.4}%)",
            g.customers,
            g.rows,
            g.defaulted_rows,
            100.0 * g.default_rate()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn report(args: &ReportArgs) -> anyhow::Result<ExitCode> {
    let reports = read_metrics_csv(&args.metrics)?;
    let out = args
        .out
        .clone()
        .or_else(|| args.metrics.parent().map(PathBuf::from))
        .context("cannot tell where to write the tables")?;
    let with_timing = args.metrics.with_file_name("timing_cells.csv").exists();
    let written = write_reports(&reports, &out, with_timing)?;
    for w in written {
        println!("{}", out.join(w.name).display());
    }
    Ok(ExitCode::SUCCESS)
}

fn inspect(args: &ConfigArgs) -> Result<ExitCode, BenchError> {
    let config = resolve(args)?;
    print!("{}", format_stats(&bench::inspect(&config)?));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => run(args),
        Command::Generate(args) => generate(args),
        Command::Inspect(args) => inspect(args),
        Command::Report(args) => report(args).map_err(|e| match e.downcast::<BenchError>() {
            Ok(b) => b,
            Err(other) => BenchError::Report(format!("{other:#}")),
        }),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
