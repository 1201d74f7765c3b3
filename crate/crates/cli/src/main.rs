use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sparsepath_cli::commands;
use sparsepath_cli::config::RunConfig;
use sparsepath_cli::error::Result;
use sparsepath_cli::simulate;

#[derive(Parser)]
#[command(name = "sparsepath", version, about = "Solution paths for penalized GLMs with empirical Bayes selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set eta=0.25,1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    penalty: Option<String>,
    /// Penalty parameter; a comma-separated list traces one path per value.
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut overrides = Vec::new();
        for (k, v) in [("loss", &self.loss), ("penalty", &self.penalty), ("eta", &self.eta)] {
            if let Some(v) = v {
                overrides.push(format!("{k}={v}"));
            }
        }
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        // explicit --set entries win over the shortcuts
        overrides.extend(self.set.iter().cloned());
        RunConfig::resolve(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Trace the solution path; writes path.csv and events.json.
    Path {
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Trace paths and select a model; also writes report.json.
    Select {
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit with regularization blocks; also writes report.json and curves.csv.
    Genreg {
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Re-score the rows of an existing path.csv; writes scores.json.
    Score {
        data: PathBuf,
        path_csv: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the simulation study; writes metrics.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Path { data, common } => commands::cmd_path(&data, &common.config()?, &common.out),
        Command::Select { data, common } => commands::cmd_select(&data, &common.config()?, &common.out),
        Command::Genreg { data, common } => commands::cmd_genreg(&data, &common.config()?, &common.out).map(|_| ()),
        Command::Score { data, path_csv, common } => {
            commands::cmd_score(&data, &common.config()?, &path_csv, &common.out)
        }
        Command::Simulate { common } => simulate::cmd_simulate(&common.config()?, &common.out).map(|_| ()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sparsepath: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
