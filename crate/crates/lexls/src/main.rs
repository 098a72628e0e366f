use clap::Parser;

fn main() {
    let cli = lexls::Cli::parse();
    std::process::exit(lexls::execute(&cli));
}
