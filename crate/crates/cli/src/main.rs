use std::io::{self, Write};
use std::process::ExitCode;

fn main() -> ExitCode {
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let mut err = io::stderr();
    let result = sfann_cli::run(std::env::args_os(), &mut out, &mut err);
    let flushed = out.flush();
    match result {
        Ok(()) if flushed.is_ok() => ExitCode::SUCCESS,
        Ok(()) => ExitCode::from(sfann_cli::EXIT_IO as u8),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
