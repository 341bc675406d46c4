use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(lingsub::cli::run(std::env::args_os()))
}
