use std::io;

fn main() {
    let stdin = io::stdin();
    let stdout = io::stdout();
    let stderr = io::stderr();
    let code = perm1324_cli::run(
        std::env::args_os(),
        perm1324_cli::Io {
            input: &mut stdin.lock(),
            out: &mut stdout.lock(),
            err: &mut stderr.lock(),
        },
    );
    std::process::exit(code);
}
