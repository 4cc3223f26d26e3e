mod args;
mod commands;

use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, GlobalArgs};
use commands::Report;

/// Exit status for unusable input of any kind.
const EXIT_INVALID: u8 = 2;
/// Exit status when an integral or search fails to converge.
const EXIT_NUMERIC: u8 = 3;

fn fail(code: u8, kind: &str, message: &str) -> ExitCode {
    let message = message.lines().next().unwrap_or_default().trim();
    eprintln!("error code={code} kind={kind} message={message:?}");
    ExitCode::from(code)
}

fn render(command: &str, global: &GlobalArgs, report: &Report) -> String {
    let mut out = String::new();
    if !global.no_header {
        out.push_str(&format!("# bitarq {}\n", env!("CARGO_PKG_VERSION")));
        out.push_str(&format!("# command: {command}\n"));
        let config: Vec<String> = report
            .config
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        out.push_str(&format!("# config: {}\n", config.join(" ")));
        out.push_str(&format!("# seed: {}\n", global.seed));
        if !global.reproducible {
            let now = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            out.push_str(&format!("# generated_unix: {now}\n"));
        }
        for note in &report.notes {
            out.push_str(&format!("# {note}\n"));
        }
    }
    out.push_str(&report.body);
    out
}

fn write_output(path: Option<&Path>, text: &str) -> io::Result<()> {
    match path {
        None => io::stdout().lock().write_all(text.as_bytes()),
        Some(path) => fs::write(path, text).inspect_err(|_| {
            // never leave a truncated table behind
            let _ = fs::remove_file(path);
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            return fail(EXIT_INVALID, "usage", text.trim_start_matches("error: "));
        }
    };
    if cli.global.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.threads)
            .build_global()
        {
            return fail(EXIT_INVALID, "threads", &e.to_string());
        }
    }
    let report = match commands::run(&cli.command, cli.global.seed) {
        Ok(report) => report,
        Err(e) if e.is_numeric() => return fail(EXIT_NUMERIC, "numeric", &e.to_string()),
        Err(e) => return fail(EXIT_INVALID, "invalid-config", &e.to_string()),
    };
    let text = render(cli.command.name(), &cli.global, &report);
    match write_output(cli.global.output.as_deref(), &text) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(EXIT_INVALID, "io", &e.to_string()),
    }
}
