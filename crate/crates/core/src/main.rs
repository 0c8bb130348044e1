use clap::Parser;

fn main() {
    let cli = pedpath::cli::Cli::parse();
    std::process::exit(pedpath::cli::run(cli));
}
