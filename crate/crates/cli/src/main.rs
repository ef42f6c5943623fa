mod args;
mod commands;
mod error;
mod report;
mod selftest;
mod sweep;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use args::{Cli, Command, GlobalOpts, Seed, DEFAULT_SEED};
use commands::Ctx;
use error::{CliError, CliResult};
use report::Format;

/// Where the rendered report goes.
enum Sink {
    Stdout,
    File(String),
}

fn resolve_output(g: &GlobalOpts) -> (Format, Sink) {
    let flag = if g.json {
        Some(Format::Json)
    } else if g.csv {
        Some(Format::Csv)
    } else {
        None
    };
    match g.out.as_deref() {
        None => (flag.unwrap_or(Format::Human), Sink::Stdout),
        Some("json") => (Format::Json, Sink::Stdout),
        Some("csv") => (Format::Csv, Sink::Stdout),
        Some("human") => (Format::Human, Sink::Stdout),
        Some(path) => {
            let by_ext = if path.ends_with(".json") {
                Format::Json
            } else if path.ends_with(".csv") {
                Format::Csv
            } else {
                Format::Human
            };
            (flag.unwrap_or(by_ext), Sink::File(path.to_string()))
        }
    }
}

fn run(cli: Cli) -> CliResult<i32> {
    if cli.global.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.threads)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let ctx = match cli.global.seed {
        None => Ctx {
            seed: DEFAULT_SEED,
            seed_source: "default",
        },
        Some(Seed::Fixed(s)) => Ctx {
            seed: s,
            seed_source: "fixed",
        },
        Some(Seed::Random) => Ctx {
            seed: rand::random(),
            seed_source: "random",
        },
    };
    let (format, sink) = resolve_output(&cli.global);
    let start = Instant::now();
    let report = match &cli.command {
        Command::Measure(a) => commands::measure(a, &ctx),
        Command::EpsBound(a) => commands::eps_bound(a, &ctx),
        Command::Criteria(a) => commands::criteria(a, &ctx),
        Command::Percolate(a) => commands::percolate(a, &ctx),
        Command::Deformed(a) => commands::deformed(a, &ctx),
        Command::Locc(a) => commands::locc(a, &ctx),
        Command::Sweep(a) => sweep::sweep(a, &ctx),
        Command::Selftest(a) => selftest::selftest(a, &ctx),
    }?;
    // timing stays off the machine-readable output so reruns are byte-identical
    eprintln!("{}: {:.3?}", report.command, start.elapsed());
    let text = report.render(format);
    match sink {
        Sink::Stdout => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(CliError::Output)?;
        }
        Sink::File(path) => std::fs::write(&path, text).map_err(CliError::Output)?,
    }
    Ok(report.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
