use clap::Parser;

use fw_unicycle::cli::{execute, Cli};

fn main() {
    std::process::exit(execute(Cli::parse()));
}
