use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ifprony_cli::config::parse_estimators;
use ifprony_cli::experiment::load_signal;
use ifprony_cli::figures::{
    figure1a_config, figure1b_config, figure2_config, figure3_config, run_and_write, run_custom,
};
use ifprony_cli::output::{write_signal_csv, write_truth_csv};
use ifprony_cli::{CliError, Estimator, ExperimentConfig, SigmaSpec};
use log::info;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "ifprony",
    version,
    about = "IF estimation of interfering modes: Prony vs ridge estimators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of prony, if-sr, if-fsstr, if-fsstr-og
    #[arg(long)]
    estimators: Option<String>,
    /// Window width in seconds, or a sweep min:max:steps
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesise the configured signal and write it as CSV
    Synth(Common),
    /// Run the configured estimators (Prony by default)
    Analyze(Common),
    /// Run and score several estimators (all four by default)
    Compare(Common),
    /// Three tones, two of them interfering
    Fig1a(Common),
    /// Two close parallel linear chirps
    Fig1b(Common),
    /// Error against window width for all four estimators
    Fig2(Common),
    /// Sinusoidal FM modes analysed with Q = 2 and Q = 3
    Fig3(Common),
}

fn resolve(
    common: &Common,
    preset: Option<ExperimentConfig>,
) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&common.config, preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(p)) => p,
        (None, None) => {
            return Err(CliError::Config(
                "--config is required for this command".into(),
            ))
        }
    };
    if let Some(list) = &common.estimators {
        cfg.estimators = parse_estimators(list)?;
    }
    if let Some(s) = &common.sigma {
        cfg.sigma = s.parse::<SigmaSpec>()?;
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output
        .clone()
        .unwrap_or_else(|| Path::new("out").join(&cfg.name))
}

fn synth(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let dir = out_dir(cfg);
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.clone(),
        source,
    })?;
    let (signal, truth) = load_signal(cfg)?;
    let mut files = vec![dir.join("signal.csv")];
    write_signal_csv(&signal, &files[0])?;
    if let Some(t) = &truth {
        files.push(dir.join("truth.csv"));
        write_truth_csv(t, signal.fs, &files[1])?;
    }
    let manifest = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&json!({
        "name": cfg.name,
        "label": "synthetic signal",
        "library_version": ifprony::VERSION,
        "cli_version": env!("CARGO_PKG_VERSION"),
        "determinism": ifprony_cli::output::DETERMINISM,
        "config": cfg,
    }))
    .map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::write(&manifest, text + "\n").map_err(|source| CliError::Io {
        path: manifest.clone(),
        source,
    })?;
    files.push(manifest);
    Ok(files)
}

fn execute(command: Command) -> Result<Vec<PathBuf>, CliError> {
    match command {
        Command::Synth(c) => synth(&resolve(&c, None)?),
        Command::Analyze(c) => {
            let cfg = resolve(&c, None)?;
            run_custom(&cfg, &out_dir(&cfg))
        }
        Command::Compare(c) => {
            let mut cfg = resolve(&c, None)?;
            if c.estimators.is_none() {
                cfg.estimators = Estimator::ALL.to_vec();
            }
            run_custom(&cfg, &out_dir(&cfg))
        }
        Command::Fig1a(c) => figure("fig1a", &c, figure1a_config()),
        Command::Fig1b(c) => figure("fig1b", &c, figure1b_config()),
        Command::Fig2(c) => figure("fig2", &c, figure2_config()),
        Command::Fig3(c) => figure("fig3", &c, figure3_config()),
    }
}

fn figure(name: &str, c: &Common, preset: ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let cfg = resolve(c, Some(preset))?;
    run_and_write(name, &cfg, &out_dir(&cfg))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // usage errors are configuration errors; clap's own code 2 is taken
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(files) => {
            for f in &files {
                info!("wrote {}", f.display());
            }
            if let Some(m) = files.last() {
                println!("{}", m.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
