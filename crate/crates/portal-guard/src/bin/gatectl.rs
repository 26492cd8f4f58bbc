use std::io::{self, Write};
use std::process::ExitCode;

use portal_guard::gatectl::{run, Console};

fn main() -> ExitCode {
    let stdin = io::stdin();
    let mut stdin = stdin.lock();
    let mut stdout = io::stdout().lock();
    let mut stderr = io::stderr().lock();
    let mut prompt = |message: &str| rpassword::prompt_password(message);
    let code = run(
        std::env::args_os(),
        &mut Console {
            stdin: &mut stdin,
            stdout: &mut stdout,
            stderr: &mut stderr,
            prompt: &mut prompt,
        },
    );
    let _ = stdout.flush();
    ExitCode::from(code)
}
