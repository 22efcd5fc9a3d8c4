use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(hjcli::run(std::env::args()) as u8)
}
