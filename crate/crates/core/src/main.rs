use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use paretogen::config::ExperimentConfig;
use paretogen::pipeline;
use paretogen::Error;

#[derive(Parser)]
#[command(name = "paretogen", about = "Budget-conditioned architecture generation", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML); defaults apply for anything omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (everything here is single-threaded; values above 1
    /// are accepted and ignored).
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_path(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.to_string_lossy().into_owned();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every phase and write all artifacts plus a manifest.
    Pipeline {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Generate one architecture at a budget from a finished run.
    Generate {
        /// Run directory written by `pipeline`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        budget: f64,
        /// Sampling seed (defaults to one derived from the run's seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sample raw candidates at a budget and write their cost histogram.
    Histogram {
        /// Run directory written by `pipeline`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        budget: f64,
        /// Number of samples.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Where to write the per-sample CSV.
        #[arg(long, default_value = "histogram.csv")]
        csv: PathBuf,
    },
    /// Compare reward variants and independent search on one config.
    Compare {
        #[command(flatten)]
        common: ConfigArgs,
    },
    /// Sweep the number of grid budgets K at equal total compute.
    Ksweep {
        #[command(flatten)]
        common: ConfigArgs,
        /// K values to sweep, comma-separated.
        #[arg(long = "k-values", value_delimiter = ',', required = true)]
        k_values: Vec<usize>,
        /// Where to write the sweep CSV.
        #[arg(long, default_value = "ksweep.csv")]
        csv: PathBuf,
    },
    /// Validate a benchmark CSV and write its normalized form.
    ImportBench {
        /// Input benchmark CSV.
        #[arg(long)]
        input: PathBuf,
        /// Normalized output CSV.
        #[arg(long)]
        output: PathBuf,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("report serialize: {e}")))?;
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Pipeline { common } => {
            let cfg = common.load()?;
            let manifest = pipeline::cmd_pipeline(&cfg)?;
            print_json(&manifest)
        }
        Command::Generate { out, budget, seed } => {
            let report = pipeline::cmd_generate(&out, budget, seed)?;
            print_json(&report)
        }
        Command::Histogram { out, budget, n, csv } => {
            let report = pipeline::cmd_histogram(&out, budget, n, &csv)?;
            print_json(&report)
        }
        Command::Compare { common } => {
            let cfg = common.load()?;
            let report = pipeline::cmd_compare(&cfg)?;
            print_json(&report)
        }
        Command::Ksweep { common, k_values, csv } => {
            let cfg = common.load()?;
            let rows = pipeline::cmd_ksweep(&cfg, &k_values)?;
            let mut text = String::from("k,steps,mid_budget,mid_quality,mean_quality,hypervolume\n");
            for r in &rows {
                text.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.k, r.steps, r.mid_budget, r.mid_quality, r.mean_quality, r.hypervolume
                ));
            }
            std::fs::write(&csv, &text)?;
            print_json(&rows)
        }
        Command::ImportBench { input, output } => {
            let report = pipeline::cmd_import_bench(&input, &output)?;
            print_json(&report)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
