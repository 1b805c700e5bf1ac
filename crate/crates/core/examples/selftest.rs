//! Runs the CLI self-test in-process.

fn main() {
    let code = psdfactor::cli::run(["psdfactor", "selftest"], &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
