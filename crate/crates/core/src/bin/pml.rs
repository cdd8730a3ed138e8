use std::process::ExitCode;

fn main() -> ExitCode {
    pml::cli::main_with_args(std::env::args_os())
}
