use clap::Parser;

fn main() {
    let cli = racovert_cli::Cli::parse();
    if let Err(e) = cli.run() {
        eprintln!("racovert: {e}");
        std::process::exit(e.exit_code());
    }
}
