use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = palpsim_cli::Cli::parse();
    match palpsim_cli::execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("palpsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
