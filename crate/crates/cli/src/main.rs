use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use exqr_cli::config::TestbedChoice;
use exqr_cli::{replay, run, Mode, RunConfig, RunReport};
use exqr_core::samplers::MarginalPrior;

/// Bayesian extreme quantiles and bivariate extreme quantile regions.
#[derive(Debug, Parser)]
#[command(name = "exqr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a dataset from a testbed and write it as CSV.
    Simulate(RunArgs),
    /// Fit one margin and summarize its extreme quantiles.
    FitUni(RunArgs),
    /// Fit two margins and their dependence, then extract quantile regions.
    FitBiv(RunArgs),
    /// Recompute region summaries from the output directory of a fit.
    Regions(RunArgs),
    /// Convergence diagnostics for the output directory of a fit.
    Diagnostics(RunArgs),
    /// Repeat the run recorded in a manifest.
    Replay {
        manifest: PathBuf,
        /// Write to this directory instead of the recorded one.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Print the default configuration as TOML.
    DefaultConfig,
}

/// Overrides applied on top of the configuration file.
#[derive(Debug, Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Data CSV, or the output directory of a fit for regions/diagnostics.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    censoring_level: Option<f64>,
    /// Comma-separated exceedance probabilities.
    #[arg(long, value_delimiter = ',')]
    probabilities: Option<Vec<f64>>,
    #[arg(long)]
    credibility: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Name of the covariate column.
    #[arg(long)]
    covariate: Option<String>,
    #[arg(long)]
    covariate_value: Option<f64>,
    /// Exit with status 2 when adaptation checks fail.
    #[arg(long)]
    check_invariants: bool,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    tau0: Option<f64>,
    /// Marginal prior: A, B or C.
    #[arg(long)]
    marginal_prior: Option<MarginalPrior>,
    /// Testbed to simulate from.
    #[arg(long)]
    testbed: Option<String>,
    /// Number of simulated observations.
    #[arg(long)]
    n: Option<usize>,
}

impl RunArgs {
    fn resolve(self, mode: Mode) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        c.mode = mode;
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set! {
            seed => c.seed,
            output_dir => c.output_dir,
            censoring_level => c.censoring_level,
            probabilities => c.probabilities,
            credibility => c.credibility,
            grid_points => c.grid_points,
            thin => c.thin,
            iterations => c.chain.iterations,
            burn_in => c.chain.burn_in,
            tau0 => c.chain.tau0,
            marginal_prior => c.chain.marginal_prior,
            n => c.simulate.n,
        }
        if let Some(v) = self.input {
            c.input = Some(v);
        }
        if let Some(v) = self.covariate {
            c.columns.covariate = Some(v);
        }
        if let Some(v) = self.covariate_value {
            c.covariate_value = Some(v);
        }
        if let Some(v) = self.testbed {
            c.simulate.testbed = TestbedChoice::Named(v);
        }
        c.check_invariants |= self.check_invariants;
        Ok(c)
    }
}

fn report(r: &RunReport) -> ExitCode {
    let m = &r.manifest;
    println!(
        "{}: wrote {} file(s) to {}",
        m.mode,
        m.outputs.len() + 1,
        m.config.output_dir.display()
    );
    for c in &r.checks {
        println!("  {} {} = {:.4}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.value);
    }
    if r.success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = (|| -> anyhow::Result<ExitCode> {
        let (args, mode) = match cli.command {
            Command::Simulate(a) => (a, Mode::Simulate),
            Command::FitUni(a) => (a, Mode::FitUni),
            Command::FitBiv(a) => (a, Mode::FitBiv),
            Command::Regions(a) => (a, Mode::Regions),
            Command::Diagnostics(a) => (a, Mode::Diagnostics),
            Command::Replay { manifest, output_dir } => {
                let r = replay(&manifest, output_dir)
                    .with_context(|| format!("replaying {}", manifest.display()))?;
                return Ok(report(&r));
            }
            Command::DefaultConfig => {
                print!("{}", RunConfig::default().to_toml());
                return Ok(ExitCode::SUCCESS);
            }
        };
        let config = args.resolve(mode)?;
        let r = run(&config).with_context(|| format!("{mode} run failed"))?;
        Ok(report(&r))
    })();
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
