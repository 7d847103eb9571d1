use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(bandgroup::cli::dispatch(std::env::args_os()) as u8)
}
