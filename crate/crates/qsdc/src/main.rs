use clap::Parser;

fn main() {
    let cli = qsdc::cli::Cli::parse();
    std::process::exit(qsdc::cli::execute(cli));
}
