//! Files produced by a solver run.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{SwitchedProblem, EXAMPLE_STALL_POINT, EXAMPLE_TARGET};
use crate::plot::{terminal_states_svg, Marker};
use crate::signal::write_signal_csv;
use crate::sim::{simulate, write_trajectory_csv};
use crate::solver::{write_history_csv, SolveOutcome};

pub const HISTORY_CSV: &str = "history.csv";
pub const SOLUTION_CSV: &str = "solution_signal.csv";
pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const TERMINAL_SVG: &str = "terminal_states.svg";

/// In-memory run artifacts, `(file name, bytes)` in a fixed order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifacts {
    pub files: Vec<(&'static str, Vec<u8>)>,
}

impl Artifacts {
    /// With `mask_timing` the wall-clock column is zeroed, which makes the
    /// output a pure function of problem, config and initial signal.
    pub fn render(
        problem: &SwitchedProblem,
        x0: &[f64],
        outcome: &SolveOutcome,
        substeps: usize,
        emit_plots: bool,
        mask_timing: bool,
    ) -> Result<Self> {
        let mut files = Vec::new();

        let mut buf = Vec::new();
        write_history_csv(&outcome.history, &mut buf, mask_timing)?;
        files.push((HISTORY_CSV, buf));

        let mut buf = Vec::new();
        write_signal_csv(outcome.solution.as_relaxed(), &mut buf)?;
        files.push((SOLUTION_CSV, buf));

        let traj = simulate(problem, outcome.solution.as_relaxed(), x0, substeps)?;
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf)?;
        files.push((TRAJECTORY_CSV, buf));

        if emit_plots && problem.n_x() >= 2 {
            let states: Vec<Vec<f64>> =
                outcome.history.iter().map(|r| r.terminal_state.clone()).collect();
            let markers = if problem.name() == "paper_example" {
                vec![Marker::new("A", EXAMPLE_TARGET), Marker::new("B", EXAMPLE_STALL_POINT)]
            } else {
                Vec::new()
            };
            let title = format!(
                "Terminal states, {} ({} iterations, {})",
                problem.name(),
                outcome.history.len(),
                outcome.status
            );
            files.push((TERMINAL_SVG, terminal_states_svg(&title, &states, &markers)?.into_bytes()));
        }
        Ok(Self { files })
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| *n == name).map(|(_, b)| b.as_slice())
    }

    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        self.files
            .iter()
            .map(|(name, bytes)| {
                let path = dir.join(name);
                fs::write(&path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                Ok(path)
            })
            .collect()
    }
}
