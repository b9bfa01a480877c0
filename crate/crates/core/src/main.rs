use clap::error::ErrorKind;
use clap::Parser;

use audiocap::cli::{run, Cli, CliError};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let message = e.to_string();
            let message = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            let err = CliError {
                kind: "InvalidArgument".into(),
                message: message.to_string(),
                exit_code: 1,
            };
            eprintln!("{}", err.record());
            std::process::exit(1);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("{}", e.record());
        std::process::exit(e.exit_code);
    }
}
