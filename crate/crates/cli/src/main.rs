use clap::Parser;
use fiid_cli::args::Cli;

fn main() {
    // clap exits with code 2 on usage errors
    let cli = Cli::parse();
    std::process::exit(fiid_cli::main_with(cli));
}
