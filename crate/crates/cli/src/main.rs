use clap::Parser;
use rsvp_cli::commands::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(rsvp_cli::exit_code(&err));
    }
}
