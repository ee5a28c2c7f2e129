use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use reserve_exchange::cli::{run, Command, Flags};
use reserve_exchange::coalition::TieBreak;
use reserve_exchange::scenario::Scenario;

/// Clears a reserve-capacity market over inter-area tie-lines and prices it.
#[derive(Parser, Debug)]
#[command(name = "reserve-exchange", version)]
struct Args {
    /// clear, vcg, mlc, leastcore, manipulate, montecarlo, certify-groves or casestudy.
    command: String,

    /// Scenario file (JSON). `casestudy` defaults to the bundled fixture.
    scenario: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    samples: Option<usize>,

    /// Factor applied to the coalition's bids by `manipulate`.
    #[arg(long)]
    scale: Option<f64>,

    /// Comma-separated area names, e.g. `a1,a2`.
    #[arg(long, value_delimiter = ',')]
    coalition: Option<Vec<String>>,

    /// Feasibility tolerance of the least-core programs.
    #[arg(long)]
    tol: Option<f64>,

    #[arg(long, value_enum)]
    tie_break: Option<TieBreakArg>,

    /// Write the machine-readable report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TieBreakArg {
    LexMinMax,
    Vertex,
}

// 1: casestudy reference mismatch, 2: bad input, 3: engine failure.
fn main() -> ExitCode {
    let args = Args::parse();
    let command: Command = match args.command.parse() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let scenario = match &args.scenario {
        Some(p) => match Scenario::load(p) {
            Ok(s) => Some(s),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => None,
    };
    let flags = Flags {
        seed: args.seed,
        samples: args.samples,
        scale: args.scale,
        coalition: args.coalition,
        tol: args.tol,
        tie_break: args.tie_break.map(|t| match t {
            TieBreakArg::LexMinMax => TieBreak::LexMinMax,
            TieBreakArg::Vertex => TieBreak::Vertex,
        }),
    };
    let report = match run(command, scenario.as_ref(), &flags) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            return ExitCode::from(if e.code() == "lp-failure" { 3 } else { 2 });
        }
    };
    print!("{}", report.render());
    if let Some(path) = &args.out {
        if let Err(e) = std::fs::write(path, report.to_json() + "\n") {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
