fn main() -> std::process::ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let mut stdout = std::io::stdout().lock();
    let (code, err) = sdi_cli::run_args(&argv, &mut stdout);
    if let Some(line) = err {
        eprintln!("{line}");
    }
    std::process::ExitCode::from(code.code() as u8)
}
