use std::process::ExitCode;

fn main() -> ExitCode {
    stabkit_cli::run(std::env::args_os())
}
