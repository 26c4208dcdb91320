//! `gaussrbf`: generate point sets, solve for Gaussian RBF weights, evaluate
//! interpolants, sweep box widths and run scaling benchmarks.
//!
//! Exit status: 0 on success, 1 for usage, input or I/O errors, 2 when a
//! solve stops at `--max-iters` without converging (outputs are still written).

mod commands;
mod io;
mod summary;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gaussrbf::{GmresParams, SchwarzVariant, TestFunction};

#[derive(Debug, Parser)]
#[command(name = "gaussrbf", version, about = "Linear-time Gaussian RBF interpolation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a lattice or quasi-scattered point file with sampled values.
    Generate(GenerateArgs),
    /// Solve for interpolation weights.
    Solve(SolveArgs),
    /// Evaluate an interpolant at query sites.
    Eval(EvalArgs),
    /// Time one solve per (B/sigma, D/B) pair.
    Sweep(SweepArgs),
    /// Size and thread scaling series.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FunctionArg {
    Franke,
    Zero,
    Plane,
}

impl From<FunctionArg> for TestFunction {
    fn from(f: FunctionArg) -> Self {
        match f {
            FunctionArg::Franke => TestFunction::Franke,
            FunctionArg::Zero => TestFunction::Zero,
            FunctionArg::Plane => TestFunction::Plane,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Rasm,
    Asm,
}

impl From<VariantArg> for SchwarzVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Rasm => SchwarzVariant::Rasm,
            VariantArg::Asm => SchwarzVariant::Asm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalMode {
    Exact,
    Truncated,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Lattice spacing h.
    #[arg(long, required_unless_present = "side", conflicts_with = "side")]
    lattice_h: Option<f64>,
    /// Points per side; sets h = extent / (side - 1).
    #[arg(long)]
    side: Option<usize>,
    /// Jitter every lattice point by U[0, h/2) per axis with this seed.
    #[arg(long)]
    scatter_seed: Option<u64>,
    /// xmin,ymin,xmax,ymax.
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = [0.0, 0.0, 1.0, 1.0])]
    domain: Vec<f64>,
    #[arg(long, value_enum, default_value_t = FunctionArg::Franke)]
    function: FunctionArg,
    /// Point file; stdout if omitted (no metadata sidecar then).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Box widths are absolute lengths. Unset widths follow the defaults:
/// B = 5 sigma, D = 1.9 B, T = B + 4 sigma (B = 6 sigma, T = B + 6 sigma with `--scattered`).
#[derive(Debug, Args)]
struct BoxArgs {
    /// Gaussian width sigma.
    #[arg(long)]
    sigma: f64,
    /// Cell width B.
    #[arg(long)]
    cell_width: Option<f64>,
    /// Overlap box width D.
    #[arg(long)]
    overlap_width: Option<f64>,
    /// Truncation box width T.
    #[arg(long)]
    trunc_width: Option<f64>,
    /// Use the quasi-scattered defaults.
    #[arg(long)]
    scattered: bool,
}

#[derive(Debug, Args)]
struct GmresArgs {
    #[arg(long, value_enum, default_value_t = VariantArg::Rasm)]
    variant: VariantArg,
    #[arg(long, default_value_t = GmresParams::default().rtol)]
    rtol: f64,
    #[arg(long, default_value_t = GmresParams::default().atol)]
    atol: f64,
    #[arg(long, default_value_t = GmresParams::default().restart)]
    restart: usize,
    #[arg(long, default_value_t = GmresParams::default().max_iters)]
    max_iters: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Point file with values.
    #[arg(long, short)]
    input: PathBuf,
    #[command(flatten)]
    boxes: BoxArgs,
    #[command(flatten)]
    gmres: GmresArgs,
    /// Run summary (JSON); stdout if omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Residual history, `iter,residual`.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    weights: PathBuf,
    /// Centers (the point file that was solved).
    #[arg(long)]
    points: PathBuf,
    /// Query sites, header `x,y` or `x,y,f`.
    #[arg(long, required_unless_present = "query_lattice", conflicts_with = "query_lattice")]
    queries: Option<PathBuf>,
    /// Query on a lattice of this spacing over the centers' bounding box.
    #[arg(long)]
    query_lattice: Option<f64>,
    #[command(flatten)]
    boxes: BoxArgs,
    #[arg(long, value_enum, default_value_t = EvalMode::Exact)]
    mode: EvalMode,
    /// `x,y,s` records; stdout if omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long)]
    sigma: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    b_over_sigma: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    d_over_b: Vec<f64>,
    /// T - B in units of sigma; defaults to 4 (6 with `--scattered`).
    #[arg(long)]
    trunc_margin: Option<f64>,
    #[arg(long)]
    scattered: bool,
    #[command(flatten)]
    gmres: GmresArgs,
    /// CSV table; stdout if omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Lattice points per side, e.g. 101,201,401.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long = "threads", value_delimiter = ',', default_value = "1")]
    thread_counts: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    h_over_sigma: f64,
    /// Jitter the lattices (seed 7) and use the quasi-scattered defaults.
    #[arg(long)]
    scattered: bool,
    /// Timed runs per cell; the fastest is kept.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::Rasm)]
    variant: VariantArg,
    #[arg(long, default_value_t = GmresParams::default().rtol)]
    rtol: f64,
    #[arg(long, default_value_t = GmresParams::default().atol)]
    atol: f64,
    #[arg(long, default_value_t = GmresParams::default().max_iters)]
    max_iters: usize,
    /// Per-run CSV; stdout if omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Fitted slopes and thread ratios (JSON); stdout if omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Solve(a) => commands::solve(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(commands::Status::Done) => ExitCode::SUCCESS,
        Ok(commands::Status::NotConverged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
