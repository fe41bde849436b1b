mod commands;
mod config;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "thermoqsl", version, about = "Thermal speed limits and adiabatic thresholds for driven spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// key = value config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// tfic, qxyc or mfic.
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long = "n-sites", global = true)]
    n_sites: Option<usize>,
    #[arg(long = "J", global = true, allow_negative_numbers = true)]
    coupling: Option<f64>,
    #[arg(long = "B", global = true, allow_negative_numbers = true)]
    field: Option<f64>,
    /// List "a,b,c", range "start:stop:count", or "start:stop:count:log".
    #[arg(long, global = true)]
    beta: Option<String>,
    #[arg(long, global = true)]
    gamma: Option<String>,
    /// λ values for the spectrum command, same grid syntax as --beta.
    #[arg(long, global = true, allow_negative_numbers = true)]
    lambda: Option<String>,
    #[arg(long = "lambda-max", global = true)]
    lambda_max: Option<f64>,
    #[arg(long = "n-records", global = true)]
    n_records: Option<usize>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Worker threads for sweep points; defaults to the number of CPUs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigenvalues of H0 and of H_lambda at the requested lambda values.
    Spectrum,
    /// delta_v, chi_F, threshold rates and f over a beta grid, ED next to closed forms.
    Threshold,
    /// Bound traces along the linear ramp for each (beta, gamma) point.
    Dynamics,
    /// Runs the acceptance criteria and writes a JSON report.
    Verify {
        /// Comma-separated criterion ids (e.g. AC-1,AC-4); all when omitted.
        #[arg(long)]
        only: Option<String>,
    },
}

impl Cli {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            cfg.apply_text(&text)
                .with_context(|| format!("in config {}", path.display()))?;
        }
        let overrides: [(&str, Option<String>); 11] = [
            ("model.kind", self.model.clone()),
            ("model.n_sites", self.n_sites.map(|v| v.to_string())),
            ("model.J", self.coupling.map(|v| v.to_string())),
            ("model.B", self.field.map(|v| v.to_string())),
            ("sweep.beta", self.beta.clone()),
            ("sweep.gamma", self.gamma.clone()),
            ("sweep.lambda", self.lambda.clone()),
            ("sweep.lambda_max", self.lambda_max.map(|v| v.to_string())),
            ("sweep.n_records", self.n_records.map(|v| v.to_string())),
            ("alpha", self.alpha.map(|v| v.to_string())),
            ("output.format", self.format.clone()),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, &v).with_context(|| format!("flag for {key}"))?;
            }
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if let Command::Verify { only: Some(ids) } = &self.command {
            cfg.set("verify.only", ids)?;
        }
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let cfg = cli.resolve()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().context("building worker pool")?;
    pool.install(|| match &cli.command {
        Command::Spectrum => {
            output::emit(cfg.out.as_deref(), &commands::spectrum(&cfg)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Threshold => {
            output::emit(cfg.out.as_deref(), &commands::threshold(&cfg)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Dynamics => {
            commands::write_all(&commands::dynamics(&cfg)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { .. } => {
            let outcome = commands::verify(&cfg)?;
            for r in &outcome.results {
                eprintln!("{}", r.summary_line());
            }
            output::emit(cfg.out.as_deref(), &outcome.report)?;
            Ok(if outcome.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
