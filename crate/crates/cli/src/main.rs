fn main() {
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = cubegrasp_cli::run(std::env::args_os(), &mut stdout) {
        eprintln!("{}", e.line());
        std::process::exit(e.code.exit_status());
    }
}
