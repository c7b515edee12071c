use std::process::ExitCode;

fn main() -> ExitCode {
    roughscat::cli::main_with_args(std::env::args_os())
}
