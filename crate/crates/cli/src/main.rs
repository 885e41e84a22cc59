use clap::Parser;

fn main() {
    let code = geoaffinity_cli::run(geoaffinity_cli::Cli::parse());
    std::process::exit(code);
}
