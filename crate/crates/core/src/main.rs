use std::path::PathBuf;
use std::process::ExitCode as ProcessExit;

use clap::{Parser, ValueEnum};
use wstring::cli::{init_threads, run, ExitCode, RunOptions};
use wstring::config::Command;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Constants,
    Profiles,
    Radial,
    Verify,
    Solve,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Constants => Command::Constants,
            Cmd::Profiles => Command::Profiles,
            Cmd::Radial => Command::Radial,
            Cmd::Verify => Command::Verify,
            Cmd::Solve => Command::Solve,
        }
    }
}

/// Multistring solutions of a coupled Liouville-type system: constants,
/// profiles, radial corrections, identity checks and the planar solver.
#[derive(Debug, Parser)]
#[command(name = "wstring", version)]
struct Args {
    command: Cmd,
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, hide = true, default_value_t = 8.0)]
    rho1_coefficient: f64,
}

fn main() -> ProcessExit {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ProcessExit::from(ExitCode::Config.code() as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ProcessExit::SUCCESS;
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ProcessExit::from(ExitCode::Config.code() as u8);
    }
    let opts = RunOptions { out_dir: args.out, rho1_coefficient: args.rho1_coefficient };
    let out = run(args.command.into(), &args.config, &opts);
    if out.code == ExitCode::Ok {
        print!("{}", out.text);
    } else if out.text.starts_with("error:") {
        eprint!("{}", out.text);
    } else {
        print!("{}", out.text);
    }
    ProcessExit::from(out.code.code() as u8)
}
