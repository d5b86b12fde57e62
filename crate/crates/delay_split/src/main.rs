//! Thin binary wrapper over the library CLI.

use clap::Parser;

fn main() {
    let cli = delay_split::cli::Cli::parse();
    std::process::exit(delay_split::cli::run(cli));
}
