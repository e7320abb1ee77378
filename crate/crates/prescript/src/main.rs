use clap::Parser;

fn main() {
    // Usage errors exit 2 via clap; runtime failures exit 1 below.
    let cli = prescript::cli::Cli::parse();
    if let Err(e) = prescript::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
