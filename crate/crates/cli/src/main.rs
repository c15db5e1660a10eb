use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(aerialdet_cli::run(std::env::args_os()))
}
