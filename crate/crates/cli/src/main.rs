mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use commands::Usage;
use config::RunConfig;

const EXIT_INTERNAL: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<mmidict::Error>() {
        Some(e) if e.is_validation() => EXIT_USAGE,
        _ => EXIT_INTERNAL,
    }
}

fn real_main(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Usage("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let command = match (cli.command, cli.config) {
        (Some(c), _) => c,
        (None, Some(path)) => {
            let mut recorded = RunConfig::read(&path).map_err(|e| Usage(format!("{e:#}")))?.invocation;
            if let Some(dir) = cli.into {
                *recorded.out_mut() = dir;
            }
            recorded
        }
        (None, None) => return Err(Usage("a subcommand or --config is required".into()).into()),
    };
    commands::run(&command)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
