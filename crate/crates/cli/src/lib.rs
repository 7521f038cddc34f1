//! The `sdi` command-line tool and HTTP API.

use std::io::Write;

pub mod args;
pub mod commands;
pub mod exit;
pub mod grid;
pub mod image;
pub mod manifest;
pub mod scene;
pub mod server;

pub use args::{Cli, Command, SceneCommand};
pub use exit::{CliError, CliResult, ExitCode};

/// Runs a parsed command. `argv` (without the program name) is recorded in
/// the manifest.
pub fn run(cli: Cli, argv: Vec<String>, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Scene(SceneCommand::Export(a)) => commands::scene_export(&a, argv, out),
        Command::Fit(a) => commands::fit(&a, argv, out),
        Command::Solve(a) => commands::solve(&a, argv, out),
        Command::Bench(a) => commands::bench(&a, argv, out),
        Command::CompareDensity(a) => commands::compare_density_cmd(&a, argv, out),
        Command::Serve(a) => server::run_serve(&a, out),
    }
}

/// Parses `argv` (program name first) and runs it, returning the exit code
/// and the one-line error message, if any.
pub fn run_args(argv: &[String], out: &mut dyn Write) -> (ExitCode, Option<String>) {
    use clap::Parser;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return (ExitCode::Ok, None);
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                let _ = write!(out, "{e}");
            }
            let text = e.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            let msg = first.trim().trim_start_matches("error:").trim();
            return (ExitCode::Usage, Some(CliError::new(ExitCode::Usage, msg).line()));
        }
    };
    match run(cli, argv.iter().skip(1).cloned().collect(), out) {
        Ok(()) => (ExitCode::Ok, None),
        Err(e) => (e.code, Some(e.line())),
    }
}
