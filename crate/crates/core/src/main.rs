use std::io::Write;

fn main() {
    let out = modalstat::cli::run_command(std::env::args_os());
    let _ = std::io::stdout().write_all(&out.stdout);
    let _ = std::io::stderr().write_all(&out.stderr);
    std::process::exit(out.status);
}
