use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(mammonet_cli::run(std::env::args_os()))
}
