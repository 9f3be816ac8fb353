use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use log::error;
use logbump_cli::{parse_config, run, write_failure, CliError, Experiment, RunOptions};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    GaussonCheck,
    Ground,
    Blimit,
    Multibump,
    Decompose,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::GaussonCheck => Experiment::GaussonCheck,
            Command::Ground => Experiment::Ground,
            Command::Blimit => Experiment::Blimit,
            Command::Multibump => Experiment::Multibump,
            Command::Decompose => Experiment::Decompose,
        }
    }
}

#[derive(Debug, Parser)]
#[command(version, about = "Run a logbump experiment from a TOML config")]
struct Args {
    #[arg(value_enum)]
    experiment: Command,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Also write fields as CSV.
    #[arg(long)]
    dump_csv: bool,
    /// Solve blimit sweeps concurrently.
    #[arg(long)]
    concurrent: bool,
}

fn execute(args: &Args) -> Result<(i32, PathBuf), (CliError, PathBuf)> {
    let fallback = args.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        (
            CliError::Config(format!("cannot read {}: {e}", args.config.display())),
            fallback.clone(),
        )
    })?;
    let cfg =
        parse_config(&text, Some(args.experiment.into())).map_err(|e| (e, fallback.clone()))?;
    let out = args.out.clone().unwrap_or_else(|| cfg.output.clone());
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| (CliError::Config(format!("thread pool: {e}")), out.clone()))?;
    }
    let opts = RunOptions {
        out: Some(out.clone()),
        dump_csv: args.dump_csv,
        concurrent: args.concurrent,
    };
    let manifest = run(&cfg, &opts).map_err(|e| (e, out.clone()))?;
    for a in manifest.assertions.iter().filter(|a| !a.pass) {
        error!("{} failed: {}", a.name, a.detail);
    }
    Ok((manifest.status.exit_code(), out))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let code = match execute(&args) {
        Ok((code, out)) => {
            if code != 0 {
                let msg = "experiment assertions did not pass; see manifest.json";
                let kind = if code == 4 {
                    "not-converged"
                } else {
                    "assertion"
                };
                if let Err(e) = write_failure(&out, code, kind, msg) {
                    error!("{e}");
                }
            }
            code
        }
        Err((e, out)) => {
            error!("{e}");
            let code = e.exit_code();
            if let Err(w) = write_failure(&out, code, e.kind(), &e.to_string()) {
                error!("{w}");
            }
            code
        }
    };
    ExitCode::from(code as u8)
}
