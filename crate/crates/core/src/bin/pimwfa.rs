use std::io;
use std::process::ExitCode;

use clap::Parser;

use pim_wfa::bench::{run, Cli};

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    let stdout = io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pimwfa: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
