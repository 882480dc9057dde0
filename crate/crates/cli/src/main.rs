use std::process::ExitCode;

use clap::Parser;
use sysrisk_cli::{execute, init_threads, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = cli.common.resolve().and_then(|cfg| {
        init_threads(cfg.threads);
        execute(&cli.command, &cfg)
    });
    match result {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            println!("wrote {} files to {}", outcome.artifacts.len() + 1, outcome.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sysrisk {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
