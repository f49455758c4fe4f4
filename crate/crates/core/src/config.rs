//! TOML run configuration and the piecewise-affine problem file format.
//!
//! A run config names a problem (a built-in name or a path to a problem
//! file), the solver settings and where artifacts go:
//!
//! ```toml
//! problem = "paper_example"
//! output_dir = "out"
//! emit_plots = true
//!
//! [solver]
//! topology = "terminal_state"
//! max_iter = 200
//! ```
//!
//! A problem file describes each mode as `ẋ = c + A x + sum g(x_j) e_i`
//! with piecewise-affine scalar functions `g`:
//!
//! ```toml
//! name = "ramp"
//! t_f = 1.0
//! x0 = [0.0, 0.0]
//!
//! [cost]
//! kind = "distance"        # distance | half_squared | zero
//! target = [1.0, 1.0]
//!
//! [[modes]]
//! constant = [1.0, 0.0]
//!
//! [[modes]]
//! linear = [0.0, 0.0, 1.0, 0.0]   # row-major n_x * n_x
//! [[modes.terms]]
//! output = 1
//! input = 0
//! breakpoints = [0.5]
//! pieces = [{ slope = 1.0, offset = 0.0 }, { slope = 0.0, offset = 0.5 }]
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{
    builtin_problem, EuclideanDistance, HalfSquaredDistance, ModeField, Piece, PiecewiseScalar,
    SeparableField, SwitchedProblem, TerminalCost, ZeroCost,
};
use crate::signal::{initial_signal_paper, read_signal_csv, Grid, PureSignal, RelaxedSignal};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in problem name or path to a problem file.
    pub problem: String,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_true")]
    pub emit_plots: bool,
    /// Optional signal CSV to start from.
    #[serde(default)]
    pub initial_signal: Option<PathBuf>,
    /// Write measured wall time into the history; `false` writes zeros so
    /// repeated runs give identical files.
    #[serde(default = "default_true")]
    pub record_wall_time: bool,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    pub fn for_problem(problem: &str) -> Self {
        Self {
            problem: problem.to_string(),
            solver: SolverConfig::default(),
            output_dir: default_output_dir(),
            emit_plots: true,
            initial_signal: None,
            record_wall_time: true,
            base_dir: PathBuf::from("."),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.solver.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg =
            Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Built-in names win over file paths.
    pub fn load_problem(&self) -> Result<SwitchedProblem> {
        match builtin_problem(&self.problem) {
            Ok(p) => Ok(p),
            Err(Error::UnknownProblem(_)) => {
                let path = self.resolve(Path::new(&self.problem));
                if path.is_file() {
                    load_problem_file(&path)
                } else {
                    Err(Error::UnknownProblem(self.problem.clone()))
                }
            }
            Err(e) => Err(e),
        }
    }

    /// The explicit initial signal, the single-switch signal for the
    /// built-in example, or mode 1 throughout.
    pub fn initial_signal(&self, problem: &SwitchedProblem) -> Result<PureSignal> {
        let grid = Grid::uniform(problem.t_f(), self.solver.n)?;
        if let Some(path) = &self.initial_signal {
            let path = self.resolve(path);
            let file = fs::File::open(&path)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            return PureSignal::from_relaxed(read_signal_csv(file)?, PureSignal::DEFAULT_TOL);
        }
        if self.problem == "paper_example" {
            return initial_signal_paper(&grid);
        }
        let s = RelaxedSignal::from_modes(grid.clone(), problem.n_sigma(), &vec![0; grid.n_cells()])?;
        PureSignal::from_relaxed(s, 0.0)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    name: String,
    t_f: f64,
    x0: Vec<f64>,
    cost: CostSpec,
    modes: Vec<ModeSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
enum CostKind {
    Distance,
    HalfSquared,
    Zero,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostSpec {
    kind: CostKind,
    #[serde(default)]
    target: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeSpec {
    #[serde(default)]
    constant: Option<Vec<f64>>,
    #[serde(default)]
    linear: Option<Vec<f64>>,
    #[serde(default)]
    terms: Vec<TermSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermSpec {
    output: usize,
    input: usize,
    #[serde(default)]
    breakpoints: Vec<f64>,
    pieces: Vec<AffineSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct AffineSpec {
    #[serde(default)]
    slope: f64,
    #[serde(default)]
    offset: f64,
}

pub fn parse_problem(text: &str) -> Result<SwitchedProblem> {
    let file: ProblemFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let n_x = file.x0.len();
    let mut modes: Vec<Arc<dyn ModeField>> = Vec::with_capacity(file.modes.len());
    for (i, m) in file.modes.into_iter().enumerate() {
        let ctx = |e: Error| Error::Problem(format!("mode {}: {e}", i + 1));
        let mut field = SeparableField::new(n_x);
        if let Some(c) = m.constant {
            field = field.with_constant(c).map_err(ctx)?;
        }
        if let Some(a) = m.linear {
            field = field.with_linear(a).map_err(ctx)?;
        }
        for t in m.terms {
            let pieces = t
                .pieces
                .iter()
                .map(|p| Piece::Affine {
                    slope: p.slope,
                    offset: p.offset,
                })
                .collect();
            let func = PiecewiseScalar::new(t.breakpoints, pieces).map_err(ctx)?;
            field = field.with_term(t.output, t.input, func).map_err(ctx)?;
        }
        modes.push(Arc::new(field));
    }
    let target = || {
        file.cost
            .target
            .clone()
            .ok_or_else(|| Error::Problem("cost target is required for this cost kind".into()))
    };
    let cost: Arc<dyn TerminalCost> = match file.cost.kind {
        CostKind::Distance => Arc::new(EuclideanDistance { target: target()? }),
        CostKind::HalfSquared => Arc::new(HalfSquaredDistance { target: target()? }),
        CostKind::Zero => Arc::new(ZeroCost),
    };
    SwitchedProblem::new(&file.name, file.x0, file.t_f, modes, cost)
}

pub fn load_problem_file(path: &Path) -> Result<SwitchedProblem> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_problem(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::TopologyKind;

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::parse("problem = \"paper_example\"\n[solver]\ntopology = \"full_trajectory\"\nk0 = 6\n").unwrap();
        assert_eq!(cfg.solver.topology, TopologyKind::FullTrajectory);
        assert_eq!(cfg.solver.k0, 6);
        assert_eq!(cfg.solver.n, 256);
        assert!(cfg.emit_plots);
        assert_eq!(cfg.load_problem().unwrap().name(), "paper_example");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = RunConfig::parse("problem = \"paper_example\"\n[solver]\nomgea = 0.3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(RunConfig::parse("problem = \"p\"\n[solver]\nomega = 1.5\n").is_err());
    }

    #[test]
    fn unknown_problem() {
        let cfg = RunConfig::for_problem("no_such_problem");
        assert!(matches!(cfg.load_problem(), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn piecewise_affine_file_matches_closed_form() {
        let text = r#"
name = "ramp"
t_f = 1.0
x0 = [0.0, 0.0]
[cost]
kind = "half_squared"
target = [1.0, 1.0]
[[modes]]
constant = [1.0, 0.0]
[[modes]]
[[modes.terms]]
output = 1
input = 0
breakpoints = [0.5]
pieces = [{ slope = 1.0 }, { offset = 0.5 }]
"#;
        let p = parse_problem(text).unwrap();
        assert_eq!((p.n_x(), p.n_sigma()), (2, 2));
        let mut out = [0.0; 2];
        p.eval_mode(1, 0.0, &[0.25, 0.0], &[], &mut out);
        assert_eq!(out, [0.0, 0.25]);
        p.eval_mode(1, 0.0, &[0.75, 0.0], &[], &mut out);
        assert_eq!(out, [0.0, 0.5]);
        let mut jac = [0.0; 4];
        p.eval_mode_jacobian(1, 0.0, &[0.5, 0.0], &[], &mut jac);
        assert_eq!(jac, [0.0, 0.0, 0.0, 0.0]);
        assert!((p.cost(&[0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn problem_file_errors() {
        let bad_pieces = r#"
name = "x"
t_f = 1.0
x0 = [0.0]
[cost]
kind = "zero"
[[modes]]
[[modes.terms]]
output = 0
input = 0
breakpoints = [0.0, 1.0]
pieces = [{ slope = 1.0 }]
"#;
        assert!(parse_problem(bad_pieces).is_err());
        let missing_target = "name = \"x\"\nt_f = 1.0\nx0 = [0.0]\n[cost]\nkind = \"distance\"\n[[modes]]\n";
        assert!(parse_problem(missing_target).is_err());
    }
}
