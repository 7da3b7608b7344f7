//! Command surface over the pipeline: `relax` builds and certifies the
//! relaxation, `solve` computes the saddle point (synchronously or under
//! simulated asynchrony), `analyze` evaluates the bounds against a trace,
//! `bench-gap` sweeps assignment benchmarks, `oracle` enumerates small
//! pure-integer instances exactly.
//!
//! Exit codes: 0 success; 1 i/o, parse, or validation error; 2 strict
//! feasibility (granularity) failure in `relax`; 3 solver not converged in
//! `solve --mode sync`; 4 envelope violation in `analyze`.

mod cmds;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "granular-milp",
    version,
    about = "Relax, tighten, and solve mixed-integer linear programs with feasibility certificates"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Sync,
    Async,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Init {
    ProjectedOrigin,
    BoxCenter,
    UpperCorner,
    LowerCorner,
}

impl From<Init> for granular_milp::InitPolicy {
    fn from(i: Init) -> Self {
        match i {
            Init::ProjectedOrigin => Self::ProjectedOrigin,
            Init::BoxCenter => Self::BoxCenter,
            Init::UpperCorner => Self::UpperCorner,
            Init::LowerCorner => Self::LowerCorner,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Certify granularity and build the tightened relaxation.
    Relax {
        /// Problem JSON file.
        problem: PathBuf,
        /// Enlargement parameter; auto-selected from the ladder when absent.
        #[arg(long)]
        xi: Option<f64>,
        #[arg(long, default_value_t = 0.3)]
        alpha: f64,
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        /// Fixed tightening amount; the evaluated violation bound when absent.
        #[arg(long)]
        phi_inflation: Option<f64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Solve the relaxed saddle problem and round the result.
    Solve {
        /// Relaxation JSON produced by `relax`.
        relaxed: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Sync)]
        mode: Mode,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// Delay bound between dual epochs (async mode).
        #[arg(long = "B", default_value_t = 1)]
        b: usize,
        #[arg(long, default_value_t = 1.0)]
        comp_rate: f64,
        #[arg(long, default_value_t = 1.0)]
        comm_rate: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Iteration budget (sync) or tick budget (async).
        #[arg(long, default_value_t = 2_000_000)]
        iters: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Primal agent count (async); one agent per coordinate when absent.
        #[arg(long)]
        primal_agents: Option<usize>,
        /// Dual agent count (async); one agent per row when absent.
        #[arg(long)]
        dual_agents: Option<usize>,
        #[arg(long, value_enum, default_value_t = Init::ProjectedOrigin)]
        init: Init,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Evaluate bound dominance and convergence envelopes for a trace.
    Analyze {
        /// Trace CSV produced by `solve`.
        trace: PathBuf,
        /// Relaxation JSON produced by `relax`.
        relaxed: PathBuf,
        /// Solution JSON produced by `solve`; defaults to the trace sibling.
        #[arg(long)]
        solution: Option<PathBuf>,
        /// User-supplied Hoffman constant; sampled estimate when absent.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        sigma_samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Generate an assignment benchmark and sweep asynchrony configurations.
    BenchGap {
        #[arg(long, default_value_t = 20)]
        p: usize,
        #[arg(long, default_value_t = 20)]
        q: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Communication rates to sweep.
        #[arg(long, value_delimiter = ',', default_value = "1.0,0.75,0.5,0.1")]
        comm_rates: Vec<f64>,
        /// Computation rates to sweep.
        #[arg(long, value_delimiter = ',')]
        comp_rates: Vec<f64>,
        /// Tightening amounts to sweep (run at comm rate 0.5).
        #[arg(long, value_delimiter = ',')]
        phi_sweep: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        ticks: usize,
        #[arg(long = "B", default_value_t = 10)]
        b: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.02)]
        delta: f64,
        #[arg(long)]
        xi: Option<f64>,
        /// Capacity fraction of expected full-load consumption.
        #[arg(long, default_value_t = 0.25)]
        t_factor: f64,
        /// Dual step multiplier over the conservative choice.
        #[arg(long, default_value_t = 10.0)]
        beta_scale: f64,
        #[arg(long, value_enum, default_value_t = Init::LowerCorner)]
        init: Init,
        #[arg(long)]
        primal_agents: Option<usize>,
        #[arg(long)]
        dual_agents: Option<usize>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Exhaustive minimization of a small pure-integer instance.
    Oracle {
        problem: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("GRANULAR_MILP_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n >= 1 => granular_milp::par::configure_threads(n),
            _ => {
                eprintln!("GRANULAR_MILP_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(1);
            }
        }
    }
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Relax {
            problem,
            xi,
            alpha,
            delta,
            phi_inflation,
            out_dir,
        } => cmds::relax(&problem, xi, alpha, delta, phi_inflation, &out_dir),
        Cmd::Solve {
            relaxed,
            mode,
            gamma,
            beta,
            b,
            comp_rate,
            comm_rate,
            seed,
            iters,
            tol,
            primal_agents,
            dual_agents,
            init,
            out_dir,
        } => cmds::solve(cmds::SolveArgs {
            relaxed,
            sync: matches!(mode, Mode::Sync),
            gamma,
            beta,
            b,
            comp_rate,
            comm_rate,
            seed,
            iters,
            tol,
            primal_agents,
            dual_agents,
            init: init.into(),
            out_dir,
        }),
        Cmd::Analyze {
            trace,
            relaxed,
            solution,
            sigma,
            sigma_samples,
            seed,
            out_dir,
        } => cmds::analyze(&trace, &relaxed, solution, sigma, sigma_samples, seed, &out_dir),
        Cmd::BenchGap {
            p,
            q,
            seed,
            comm_rates,
            comp_rates,
            phi_sweep,
            ticks,
            b,
            alpha,
            delta,
            xi,
            t_factor,
            beta_scale,
            init,
            primal_agents,
            dual_agents,
            out_dir,
        } => cmds::bench_gap(cmds::BenchArgs {
            p,
            q,
            seed,
            comm_rates,
            comp_rates,
            phi_sweep,
            ticks,
            b,
            alpha,
            delta,
            xi,
            t_factor,
            beta_scale,
            init: init.into(),
            primal_agents,
            dual_agents,
            out_dir,
        }),
        Cmd::Oracle { problem, out_dir } => cmds::oracle(&problem, &out_dir),
    };
    ExitCode::from(code)
}
