use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use tt_amen::solvers::{Method, SolverConfig};
use tt_bench::{run_experiment, OracleMode, OutputPaths, ProblemKind, ProblemSpec, RhsKind};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProblemArg {
    Laplacian,
    RandomSpdTt,
    File,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RhsArg {
    Ones,
    Random,
    File,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OracleArg {
    Auto,
    On,
    Off,
}

/// Solve `A x = y` in tensor-train format and record the convergence trace.
///
/// The dense reference solve is skipped above `TT_ORACLE_CAP` unknowns
/// (default 65536) unless `--oracle on` is given.
#[derive(Debug, Parser)]
#[command(name = "tt-bench", version)]
struct Args {
    #[arg(long, value_enum, default_value = "laplacian")]
    problem: ProblemArg,
    #[arg(long = "dim", default_value_t = 3)]
    dim: usize,
    #[arg(long = "mode-size", default_value_t = 8)]
    mode_size: usize,
    /// Use the raw (-1, 2, -1) stencil without the 1/h² factor.
    #[arg(long)]
    unscaled: bool,
    /// Operator file for `--problem file`.
    #[arg(long)]
    operator: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "ones")]
    rhs: RhsArg,
    #[arg(long = "rhs-rank", default_value_t = 1)]
    rhs_rank: usize,
    /// Right-hand side file for `--rhs file`.
    #[arg(long = "rhs-file")]
    rhs_file: Option<PathBuf>,
    #[arg(long, default_value = "nongreedy", value_parser = parse_method)]
    method: Method,
    #[arg(long = "kick-rank", default_value_t = 5)]
    kick_rank: usize,
    #[arg(long = "trunc-tol", default_value_t = 1e-4)]
    trunc_tol: f64,
    #[arg(long = "res-tol", default_value_t = 1e-4)]
    res_tol: f64,
    #[arg(long = "max-sweeps", default_value_t = 20)]
    max_sweeps: usize,
    #[arg(long = "rank-cap", default_value_t = 64)]
    rank_cap: usize,
    #[arg(long = "stop-tol", default_value_t = 1e-10)]
    stop_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep sweeping after the energy stagnates.
    #[arg(long = "no-stagnation-stop")]
    no_stagnation_stop: bool,
    #[arg(long, value_enum, default_value = "auto")]
    oracle: OracleArg,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: tt_amen::Error| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let spec = ProblemSpec {
        kind: match args.problem {
            ProblemArg::Laplacian => ProblemKind::Laplacian,
            ProblemArg::RandomSpdTt => ProblemKind::RandomSpdTt,
            ProblemArg::File => ProblemKind::File,
        },
        d: args.dim,
        n: args.mode_size,
        scaled: !args.unscaled,
        rhs: match args.rhs {
            RhsArg::Ones => RhsKind::Ones,
            RhsArg::Random => RhsKind::Random,
            RhsArg::File => RhsKind::File,
        },
        rhs_rank: args.rhs_rank,
        seed: args.seed,
        operator_path: args.operator,
        rhs_path: args.rhs_file,
    };
    let cfg = SolverConfig {
        method: args.method,
        kick_rank: args.kick_rank,
        truncation_tol: args.trunc_tol,
        residual_tol: args.res_tol,
        max_sweeps: args.max_sweeps,
        rank_cap: args.rank_cap,
        stop_tol: args.stop_tol,
        seed: args.seed,
        stop_on_stagnation: !args.no_stagnation_stop,
        ..SolverConfig::default()
    };
    let oracle = match args.oracle {
        OracleArg::Auto => OracleMode::Auto,
        OracleArg::On => OracleMode::On,
        OracleArg::Off => OracleMode::Off,
    };
    let out = OutputPaths {
        trace: args.trace,
        summary: args.summary,
    };
    match run_experiment(&spec, &cfg, oracle, &out) {
        Ok(res) => {
            let err = res.oracle_error.map_or("n/a".to_string(), |e| format!("{e:.3e}"));
            println!(
                "{} d={} n={}: {:?} after {} sweeps, residual {:.3e}, A-norm error {err}, ranks {:?}",
                cfg.method, spec.d, spec.n, res.termination, res.sweeps, res.final_residual, res.final_ranks
            );
            ExitCode::from(res.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("tt-bench: {e}");
            ExitCode::from(1)
        }
    }
}
