//! Reproducible experiment runner behind the `fiid` binary.
//!
//! Every invocation produces one report: a JSON object with a schema version,
//! the full configuration (seed included), the result and a `runtime` section.
//! Everything outside `runtime` is a pure function of the configuration.

pub mod args;
pub mod error;
pub mod experiments;

use std::collections::hash_map::RandomState;
use std::fs;
use std::hash::BuildHasher;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use args::{Cli, Command, Format, OUT_DIR_ENV};
use error::CliError;

pub const SCHEMA_VERSION: &str = "1.0.0";

/// Everything that determines a report's content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub command: Command,
    pub seed: u64,
    pub format: Format,
}

/// Rendered output of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub report: Value,
    /// Bytes for the primary output in the configured format.
    pub body: String,
}

fn entropy_seed() -> u64 {
    RandomState::new().hash_one(Instant::now())
}

impl ExperimentConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        if let Command::Replay(replay) = &cli.command {
            let text = fs::read_to_string(&replay.report)?;
            let report: Value = serde_json::from_str(last_line(&text))?;
            let config = report
                .get("config")
                .cloned()
                .ok_or_else(|| CliError::Validation(format!("{} has no config field", replay.report.display())))?;
            return Ok(serde_json::from_value(config)?);
        }
        Ok(ExperimentConfig {
            command: cli.command.clone(),
            seed: cli.seed.unwrap_or_else(entropy_seed),
            format: cli.format,
        })
    }

    /// Default file name inside the output directory.
    pub fn file_name(&self) -> String {
        format!("{}-{}.{}", self.command.name(), self.seed, self.format.extension())
    }
}

/// Last non-empty line: the report of a JSON-lines stream, or the whole file.
fn last_line(text: &str) -> &str {
    let trimmed = text.trim_end();
    if trimmed.starts_with('{') && trimmed.contains("\n{") {
        trimmed.rsplit('\n').next().unwrap_or(trimmed)
    } else {
        trimmed
    }
}

/// Runs the experiment and renders it; `runtime` reflects this process.
pub fn run(config: &ExperimentConfig) -> Result<Rendered, CliError> {
    let start = Instant::now();
    let outcome = experiments::run_command(&config.command, config.seed)?;
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "report",
        "subcommand": config.command.name(),
        "config": serde_json::to_value(config)?,
        "result": outcome.result,
        "runtime": {
            "wall_seconds": start.elapsed().as_secs_f64(),
            "threads": rayon::current_num_threads(),
        },
    });
    let body = match config.format {
        Format::Csv => outcome.csv,
        Format::Json => {
            let mut body = String::new();
            for record in &outcome.records {
                body.push_str(&serde_json::to_string(record)?);
                body.push('\n');
            }
            if outcome.records.is_empty() {
                body.push_str(&serde_json::to_string_pretty(&report)?);
            } else {
                body.push_str(&serde_json::to_string(&report)?);
            }
            body.push('\n');
            body
        }
    };
    Ok(Rendered { report, body })
}

/// Where the output goes: `--out`, else the output directory, else stdout.
pub fn output_path(cli_out: Option<&Path>, config: &ExperimentConfig) -> Option<PathBuf> {
    if let Some(p) = cli_out {
        return Some(p.to_path_buf());
    }
    std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()).map(|d| PathBuf::from(d).join(config.file_name()))
}

/// Writes the body; CSV written to a file gets its JSON report alongside.
pub fn write_output(path: Option<&Path>, config: &ExperimentConfig, rendered: &Rendered) -> Result<(), CliError> {
    match path {
        None => {
            let mut out = io::stdout().lock();
            out.write_all(rendered.body.as_bytes())?;
            out.flush()?;
        }
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, &rendered.body)?;
            if config.format == Format::Csv {
                let mut sidecar = path.as_os_str().to_owned();
                sidecar.push(".report.json");
                fs::write(PathBuf::from(sidecar), serde_json::to_string_pretty(&rendered.report)? + "\n")?;
            }
        }
    }
    Ok(())
}

/// Parsed command line to exit code, with errors reported on stderr.
pub fn main_with(cli: Cli) -> i32 {
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("fiid: resource limit: cannot start worker pool: {e}");
            return 3;
        }
    };
    let result = pool.install(|| -> Result<(), CliError> {
        let config = ExperimentConfig::from_cli(&cli)?;
        let rendered = run(&config)?;
        write_output(output_path(cli.out.as_deref(), &config).as_deref(), &config, &rendered)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("fiid: {e}");
            e.exit_code()
        }
    }
}
