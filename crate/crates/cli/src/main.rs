use clap::Parser;

use gml_cli::{run, Cli, RunConfig, EXIT_STRUCTURAL, TOL_ENV};

fn main() {
    let cli = Cli::parse();
    let code = match RunConfig::from_cli(cli, std::env::var(TOL_ENV).ok()) {
        Ok(cfg) => run(cfg),
        Err(msg) => {
            eprintln!("gml: {msg}");
            EXIT_STRUCTURAL
        }
    };
    std::process::exit(code);
}
