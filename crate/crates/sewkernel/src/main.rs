use clap::Parser;
use sewkernel::cli::{configure_threads, diagnostic, run, Cli, EXIT_INVALID};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("{}", diagnostic(&e));
        std::process::exit(EXIT_INVALID);
    }
    std::process::exit(run(&cli));
}
