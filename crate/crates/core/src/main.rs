use std::process::ExitCode;

fn main() -> ExitCode {
    hydrosched::cli::init_logging();
    hydrosched::cli::run(std::env::args_os())
}
