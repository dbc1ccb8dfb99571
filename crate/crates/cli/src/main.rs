use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scribble_cli::{
    run_bench, run_render, run_serve, run_validate, BenchOptions, CliError, Record, RenderOptions,
    ServeOptions,
};

/// Hand-drawn animations that follow tracked objects and people in video.
#[derive(Debug, Parser)]
#[command(name = "scribble", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Render overlays and/or composites for a frame sequence.
    Render(RenderOptions),
    /// Time the per-frame pipeline on synthetic frames.
    Bench(BenchOptions),
    /// Check a scene file.
    Validate {
        #[arg(long)]
        scene: PathBuf,
    },
    /// Run the authoring session server.
    Serve(ServeOptions),
}

fn run(cmd: Cmd, out: &mut dyn Write) -> Result<Option<Record>, CliError> {
    Ok(match cmd {
        Cmd::Render(opts) => Some(Record::Render(run_render(&opts, out)?)),
        Cmd::Bench(opts) => Some(Record::Bench(run_bench(&opts)?)),
        Cmd::Validate { scene } => Some(Record::Validate(run_validate(&scene)?)),
        Cmd::Serve(opts) => {
            run_serve(&opts, out)?;
            None
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("SCRIBBLE_LOG", "warn"))
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let mut stdout = io::stdout().lock();
    match run(cli.command, &mut stdout) {
        Ok(record) => {
            if let Some(record) = record {
                if let Err(e) = record.write_line(&mut stdout) {
                    eprintln!("cannot write report: {e}");
                    return ExitCode::from(2);
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = Record::error(&e).write_line(&mut io::stderr());
            ExitCode::from(e.exit_code())
        }
    }
}
