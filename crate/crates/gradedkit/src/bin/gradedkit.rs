//! Command-line driver: parse a structure document, run a verification
//! command, and emit a machine-readable report.
//!
//! Exit codes: 0 when the overall verdict is PASS, 1 when it is FAIL, and 2
//! for usage, parse, or dispatch errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use gradedkit::dsl::{emit_report, parse_spec, run_command, Command, Options, SpecDocument};
use gradedkit::symplectic::Mode;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CommandArg {
    /// Verify the document's defining identities.
    Verify,
    /// Emit the structure differential on generators (and cross-check it).
    Ce,
    /// Normalize the document's closed mixed form.
    Normalize,
    /// Round-trip between Courant and shifted symplectic presentations.
    Convert,
    /// Dirac/Poisson/coisotropy checks.
    Dirac,
    /// Homotopy transfer along a companion retract document.
    Transfer,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Command {
        match c {
            CommandArg::Verify => Command::Verify,
            CommandArg::Ce => Command::Ce,
            CommandArg::Normalize => Command::Normalize,
            CommandArg::Convert => Command::Convert,
            CommandArg::Dirac => Command::Dirac,
            CommandArg::Transfer => Command::Transfer,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    /// Symbolic comparisons (exact, default).
    Strict,
    /// Pointwise comparisons at deterministic sample points.
    Sampled,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    /// Human-readable summary.
    Text,
    /// Deterministic JSON (schema `gradedkit-report/1`).
    Json,
}

/// Exact verification of graded geometric structures.
#[derive(Parser, Debug)]
#[command(name = "gradedkit", version)]
struct Cli {
    /// The command to run.
    #[arg(value_enum)]
    command: CommandArg,
    /// The structure document.
    file: PathBuf,
    /// Companion document (required by `transfer`: a retract document).
    file2: Option<PathBuf>,
    /// Nondegeneracy comparison mode.
    #[arg(long, value_enum, default_value = "strict")]
    mode: ModeArg,
    /// Seed for deterministic sample points.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Report output format.
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// Number of extra sample points beyond the deterministic base set.
    #[arg(long, default_value_t = 4)]
    samples: usize,
}

fn load(path: &PathBuf) -> Result<SpecDocument, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    parse_spec(&path.display().to_string(), &text).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let doc = match load(&cli.file) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let companion = match &cli.file2 {
        Some(path) => match load(path) {
            Ok(d) => Some(d),
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => None,
    };
    let opts = Options {
        mode: match cli.mode {
            ModeArg::Strict => Mode::Strict,
            ModeArg::Sampled => Mode::Sampled,
        },
        seed: cli.seed,
        samples: cli.samples,
    };
    let report = match run_command(cli.command.into(), &doc, companion.as_ref(), &opts) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let format = match cli.format {
        FormatArg::Text => "text",
        FormatArg::Json => "json",
    };
    match emit_report(&report, format) {
        Ok(out) => print!("{out}"),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if report.verdict == "pass" {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
