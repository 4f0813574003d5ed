use std::process::ExitCode;

fn main() -> ExitCode {
    corrkit::cli::main_with(std::env::args_os())
}
