use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = catspec::Cli::parse();
    let result = catspec::configure_threads().and_then(|()| catspec::run(&cli));
    match result {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
