use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use leadsel_cli::config::ExperimentConfig;
use leadsel_cli::output::emit_plot_data;
use leadsel_cli::run::run_experiment;
use leadsel_cli::CliError;
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "leadsel", about = "Leader-selection bounds for consensus networks", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; config-relative output paths land here.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Thread count for parallel candidate scans (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Build the configured graph and emit it as JSON.
    Graph {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Parse and validate a config, reporting every problem.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn read_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    let cfg = ExperimentConfig::parse(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(config: &Path, out: &Path, threads: Option<usize>) -> Result<bool, CliError> {
    if let Some(k) = threads {
        // Ignore the error if a pool already exists (tests call this twice).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    let cfg = read_config(config)?;
    let report = run_experiment(&cfg)?;
    let csv_path = out.join(&cfg.output.path);
    let (csv, json) = emit_plot_data(&report, &csv_path)?;
    eprintln!("wrote {} and {}", csv.display(), json.display());
    Ok(report.any_nonconverged)
}

/// Minimal view of a config containing at least a `[graph]` table; full
/// experiment configs parse too (extra keys are ignored here).
#[derive(Deserialize)]
struct GraphOnly {
    format_version: u32,
    graph: leadsel_core::graph::GraphSpec,
}

#[derive(serde::Serialize)]
struct GraphJson<'a> {
    format_version: u32,
    n: usize,
    edges: &'a [(usize, usize)],
    coords: Option<&'a [[f64; 2]]>,
}

fn cmd_graph(config: &Path, out: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(config)
        .map_err(|source| CliError::Io { path: config.display().to_string(), source })?;
    let spec: GraphOnly = toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    if spec.format_version != leadsel_cli::config::FORMAT_VERSION {
        return Err(CliError::Config(format!(
            "format_version: expected {}, got {}",
            leadsel_cli::config::FORMAT_VERSION,
            spec.format_version
        )));
    }
    let g = spec.graph.build().map_err(|e| CliError::Config(e.to_string()))?;
    let payload = GraphJson {
        format_version: leadsel_cli::config::FORMAT_VERSION,
        n: g.n(),
        edges: g.edges(),
        coords: g.coords(),
    };
    fs::create_dir_all(out)
        .map_err(|source| CliError::Io { path: out.display().to_string(), source })?;
    let path = out.join("graph.json");
    let mut bytes = serde_json::to_vec_pretty(&payload).expect("graph serialization cannot fail");
    bytes.push(b'\n');
    fs::write(&path, bytes)
        .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<bool, CliError> = match &cli.cmd {
        Cmd::Run { config, out, threads } => cmd_run(config, out, *threads),
        Cmd::Graph { config, out } => cmd_graph(config, out).map(|()| false),
        Cmd::Validate { config } => read_config(config).map(|_| {
            println!("configuration OK");
            false
        }),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("warning: a solver did not converge; see the report diagnostics");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
