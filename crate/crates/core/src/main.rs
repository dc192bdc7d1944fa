use std::process::ExitCode;

fn main() -> ExitCode {
    let cmd = match loggas::cli::parse_args(std::env::args_os()) {
        Ok(cmd) => cmd,
        Err(e) => {
            // Help and version requests are not usage errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(loggas::cli::dispatch(&cmd) as u8)
}
