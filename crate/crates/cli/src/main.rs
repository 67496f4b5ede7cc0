mod config;
mod study;

use clap::Parser;

use config::{Cli, RunConfig};

fn main() {
    let cli = Cli::parse();
    let code = match RunConfig::from_cli(cli) {
        Ok(config) => study::run(&config),
        Err(e) => {
            eprintln!("error: {e}");
            study::EXIT_CONFIG
        }
    };
    std::process::exit(code);
}
