use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use switchopt::adjoint::optimality_theta;
use switchopt::artifacts::Artifacts;
use switchopt::config::RunConfig;
use switchopt::error::{Error, Result};
use switchopt::model::SwitchedProblem;
use switchopt::project::project_rk;
use switchopt::signal::{read_signal_csv, write_signal_csv, Grid, RelaxedSignal};
use switchopt::sim::{cost_j, simulate, write_trajectory_csv};
use switchopt::solver::{oracle_enumerate, solve};
use switchopt::topology::TopologyKind;
use switchopt::verify::Suite;

#[derive(Parser)]
#[command(name = "switchopt", version, about = "Switched-system optimal control by relaxation and projection")]
struct Cli {
    /// Accepted for compatibility; every command is deterministic.
    #[arg(long, global = true)]
    seedless: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ProblemArgs {
    /// Run configuration (TOML). Defaults to the built-in example.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured topology.
    #[arg(long)]
    topology: Option<TopologyKind>,
}

impl ProblemArgs {
    fn load(&self) -> Result<(RunConfig, SwitchedProblem)> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::for_problem("paper_example"),
        };
        if let Some(t) = self.topology {
            cfg.solver.topology = t;
        }
        let problem = cfg.load_problem()?;
        Ok((cfg, problem))
    }

    fn signal(&self, cfg: &RunConfig, problem: &SwitchedProblem, path: Option<&Path>) -> Result<RelaxedSignal> {
        match path {
            Some(p) => read_signal(p),
            None => Ok(cfg.initial_signal(problem)?.into_relaxed()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver and write history, solution, trajectory and plot.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fixed projection order instead of the adaptive choice.
        #[arg(long)]
        k: Option<u32>,
    },
    /// Project a relaxed signal CSV onto a pure one.
    Project {
        signal: PathBuf,
        #[arg(long)]
        k: u32,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a signal (default: the configured initial signal).
    Simulate {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        signal: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the optimality function and the descent vertex of a signal.
    Theta {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        signal: Option<PathBuf>,
        /// Also write the vertex-valued minimizer as a signal CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive search over pure signals on a coarse uniform grid.
    Oracle {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance checks and print a pass/fail table.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Solve { problem: args, out, k } => {
            let (mut cfg, problem) = args.load()?;
            if let Some(k) = k {
                cfg.solver.fixed_k = Some(k);
                cfg.solver.validate()?;
            }
            let s0 = cfg.initial_signal(&problem)?;
            let x0 = problem.x0().to_vec();
            let outcome = solve(&problem, &x0, &s0, &cfg.solver)?;
            let dir = out.unwrap_or_else(|| cfg.output_path());
            let artifacts = Artifacts::render(
                &problem,
                &x0,
                &outcome,
                cfg.solver.substeps,
                cfg.emit_plots,
                !cfg.record_wall_time,
            )?;
            let written = artifacts.write_to(&dir)?;
            let last = outcome.final_record();
            println!(
                "{}: {} after {} iterations, J = {}, x(t_f) = {:?}",
                problem.name(),
                outcome.status,
                last.iter,
                last.j,
                last.terminal_state
            );
            for p in written {
                println!("wrote {}", p.display());
            }
            Ok(outcome.status.exit_code() as u8)
        }
        Command::Project { signal, k, out } => {
            let s = read_signal(&signal)?;
            let p = project_rk(&s, k)?;
            write_output(out.as_deref(), |w| write_signal_csv(p.as_relaxed(), w))?;
            Ok(0)
        }
        Command::Simulate { problem: args, signal, out } => {
            let (cfg, problem) = args.load()?;
            let s = args.signal(&cfg, &problem, signal.as_deref())?;
            let traj = simulate(&problem, &s, problem.x0(), cfg.solver.substeps)?;
            eprintln!("J = {}", cost_j(&problem, &traj));
            write_output(out.as_deref(), |w| write_trajectory_csv(&traj, w))?;
            Ok(0)
        }
        Command::Theta { problem: args, signal, out } => {
            let (cfg, problem) = args.load()?;
            let s = args.signal(&cfg, &problem, signal.as_deref())?;
            let th = optimality_theta(&problem, &s, problem.x0(), cfg.solver.substeps)?;
            println!("theta = {}", th.theta);
            println!("direction = {}", mode_string(&th.direction.modes()));
            if let Some(path) = out {
                write_output(Some(&path), |w| write_signal_csv(th.direction.as_relaxed(), w))?;
            }
            Ok(0)
        }
        Command::Oracle { problem: args, n, out } => {
            let (cfg, problem) = args.load()?;
            let grid = Grid::uniform(problem.t_f(), n)?;
            let (best, j) = oracle_enumerate(&problem, problem.x0(), &grid, cfg.solver.substeps)?;
            println!("best J = {j}");
            println!("modes = {}", mode_string(&best.modes()));
            if let Some(path) = out {
                write_output(Some(&path), |w| write_signal_csv(best.as_relaxed(), w))?;
            }
            Ok(0)
        }
        Command::Verify => {
            let report = Suite::default().run();
            print!("{}", report.render());
            Ok(report.exit_code() as u8)
        }
    }
}

fn read_signal(path: &Path) -> Result<RelaxedSignal> {
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_signal_csv(f)
}

fn write_output(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut f = File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            body(&mut f)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)
        }
    }
}

/// Modes numbered from 1, as in the problem statement.
fn mode_string(modes: &[usize]) -> String {
    modes.iter().map(|m| (m + 1).to_string()).collect::<Vec<_>>().join(" ")
}
