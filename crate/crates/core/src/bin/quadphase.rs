use std::process::ExitCode;

fn main() -> ExitCode {
    quadphase::cli::main_entry()
}
