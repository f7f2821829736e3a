use std::process::ExitCode;

fn main() -> ExitCode {
    t2bm::cli::main_with(std::env::args_os())
}
