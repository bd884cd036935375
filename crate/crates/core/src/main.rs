use clap::Parser;

fn main() {
    let cli = bergman::cli::Cli::parse();
    std::process::exit(bergman::cli::run(&cli));
}
