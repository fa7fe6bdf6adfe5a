use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use diffsar_cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let env_config = std::env::var_os(diffsar_cli::config::CONFIG_ENV).map(PathBuf::from);
    match run(&cli, env_config.as_deref()) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
