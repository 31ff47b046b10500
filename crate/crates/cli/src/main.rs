use clap::Parser;

use kirchhoff_cli::config::{Cli, RunConfig};
use kirchhoff_cli::run::{run, Failure};

fn main() {
    let cli = Cli::parse();
    let result = RunConfig::from_cli(&cli)
        .map_err(|e| Failure::Usage(e.to_string()))
        .and_then(|cfg| run(&cfg));
    match result {
        Ok(a) => {
            for f in &a.files {
                println!("wrote {}", f.display());
            }
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
