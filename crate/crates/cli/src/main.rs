use std::io::Write;
use std::process::ExitCode;

use binocov::SnapTolerance;

fn main() -> ExitCode {
    let outcome = binocov_cli::run(
        std::env::args_os(),
        std::env::var_os(SnapTolerance::ENV_VAR),
    );
    let mut code = outcome.code;
    if std::io::stdout()
        .write_all(outcome.stdout.as_bytes())
        .and_then(|_| std::io::stdout().flush())
        .is_err()
    {
        code = binocov_cli::exit::IO;
    }
    let _ = std::io::stderr().write_all(outcome.stderr.as_bytes());
    ExitCode::from(code as u8)
}
