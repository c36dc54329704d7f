use std::process::ExitCode;

fn main() -> ExitCode {
    harem::cli::main_with(std::env::args_os())
}
