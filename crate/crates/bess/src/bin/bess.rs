use clap::Parser;

fn main() {
    let cli = bess::cli::Cli::parse();
    std::process::exit(bess::cli::run_cli(cli));
}
