use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bisep_cli::commands::{
    cmd_check, cmd_decompose, cmd_gen, cmd_roundtrip, GenKind, GenOptions, Negative, Outcome, RoundtripOptions,
    EXIT_INPUT,
};
use bisep_core::harness::{DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP};
use bisep_core::Field;
use clap::{Parser, Subcommand, ValueEnum};

/// Check, decompose and generate linear maps between matrix algebras.
///
/// Exit codes: 0 success, 1 I/O or input error, 2 property or recovery
/// failure, 3 map not invertible.
#[derive(Parser)]
#[command(name = "bisep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Superop,
    #[value(name = "big_superop")]
    BigSuperop,
}

#[derive(Clone, Copy, ValueEnum)]
enum FieldArg {
    Real,
    Complex,
}

impl From<FieldArg> for Field {
    fn from(f: FieldArg) -> Field {
        match f {
            FieldArg::Real => Field::Real,
            FieldArg::Complex => Field::Complex,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether the map in an instance file is biseparating.
    Check {
        path: PathBuf,
        /// Relative tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Use this many random zero-product pairs instead of the exact test.
        #[arg(long)]
        sampled: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recover alpha and S (or phi, alpha(x), S_x) from an instance file.
    Decompose {
        path: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Write a generated instance and, for positive instances, its ground truth.
    Gen {
        kind: KindArg,
        /// Output file; ground truth goes to <stem>.truth.json next to it.
        out: PathBuf,
        #[arg(long)]
        n: usize,
        /// Number of points (block instances).
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "real")]
        field: FieldArg,
        /// Range for |alpha| as lo,hi.
        #[arg(long, value_parser = parse_range)]
        alpha: Option<(f64, f64)>,
        #[arg(long, default_value_t = DEFAULT_COND_CAP)]
        cond_cap: f64,
        /// transpose | mixing | perturb:<eps>
        #[arg(long, value_parser = Negative::parse)]
        negative: Option<Negative>,
    },
    /// Run generate, check, decompose and verify over a grid of instances.
    Roundtrip {
        #[arg(long, default_value_t = 6)]
        max_n: usize,
        #[arg(long, default_value_t = 4)]
        max_k: usize,
        #[arg(long, default_value_t = 25)]
        seeds: u64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, value_enum, default_value = "real")]
        field: FieldArg,
    },
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("lo: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("hi: {e}"))?;
    Ok((lo, hi))
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Check { path, tol, sampled, seed } => cmd_check(&path, tol, sampled, seed),
        Command::Decompose { path, tol } => cmd_decompose(&path, tol),
        Command::Gen {
            kind,
            out,
            n,
            k,
            seed,
            field,
            alpha,
            cond_cap,
            negative,
        } => cmd_gen(&GenOptions {
            kind: match kind {
                KindArg::Superop => GenKind::Superop,
                KindArg::BigSuperop => GenKind::BigSuperop,
            },
            n,
            k,
            seed,
            field: field.into(),
            alpha_range: alpha.unwrap_or(DEFAULT_ALPHA_RANGE),
            cond_cap,
            negative,
            out,
        }),
        Command::Roundtrip {
            max_n,
            max_k,
            seeds,
            tol,
            field,
        } => cmd_roundtrip(&RoundtripOptions {
            max_n,
            max_k,
            seeds,
            tol,
            field: field.into(),
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let outcome = run(cli.command);
    // a closed pipe must not turn into a panic
    let _ = writeln!(std::io::stdout(), "{}", outcome.report.to_json());
    if let Some(msg) = &outcome.report.error {
        eprintln!("error: {msg}");
    }
    ExitCode::from(outcome.exit as u8)
}
