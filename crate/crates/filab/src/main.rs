use std::process::ExitCode;

fn main() -> ExitCode {
    filab::cli::main()
}
