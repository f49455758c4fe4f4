//! Forward simulation of the relaxed dynamics and the cost/constraint
//! functionals evaluated on the resulting trajectory.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{relaxed_field_into, SwitchedProblem};
use crate::signal::RelaxedSignal;

/// Default RK4 substeps per control cell.
pub const DEFAULT_SUBSTEPS: usize = 4;

/// State samples at every substep boundary of every control cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    signal: RelaxedSignal,
    substeps: usize,
    n_x: usize,
    times: Vec<f64>,
    states: Vec<f64>,
}

impl Trajectory {
    pub fn signal(&self) -> &RelaxedSignal {
        &self.signal
    }

    pub fn substeps(&self) -> usize {
        self.substeps
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    /// `N * M + 1`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, j: usize) -> &[f64] {
        &self.states[j * self.n_x..(j + 1) * self.n_x]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn initial_state(&self) -> &[f64] {
        self.state(0)
    }

    pub fn terminal_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// Sample index range `[j0, j0 + M]` of a control cell.
    pub fn cell_samples(&self, cell: usize) -> std::ops::RangeInclusive<usize> {
        cell * self.substeps..=(cell + 1) * self.substeps
    }

    pub fn same_layout(&self, other: &Trajectory) -> bool {
        self.n_x == other.n_x && self.substeps == other.substeps && self.times == other.times
    }
}

pub(crate) fn check_signal(problem: &SwitchedProblem, s: &RelaxedSignal) -> Result<()> {
    if s.n_sigma() != problem.n_sigma() {
        return Err(Error::Dimension {
            context: "signal mode count",
            expected: problem.n_sigma(),
            got: s.n_sigma(),
        });
    }
    if s.n_u() != problem.n_u() {
        return Err(Error::Dimension {
            context: "signal input dimension",
            expected: problem.n_u(),
            got: s.n_u(),
        });
    }
    if (s.grid().t_f() - problem.t_f()).abs() > 1e-12 * problem.t_f().max(1.0) {
        return Err(Error::GridMismatch {
            context: "signal horizon differs from the problem horizon",
        });
    }
    Ok(())
}

/// Fixed-step classical RK4 with `substeps` equal steps per control cell,
/// holding `(d, u)` constant within the cell.
pub fn simulate(
    problem: &SwitchedProblem,
    s: &RelaxedSignal,
    x0: &[f64],
    substeps: usize,
) -> Result<Trajectory> {
    check_signal(problem, s)?;
    if x0.len() != problem.n_x() {
        return Err(Error::Dimension {
            context: "initial state",
            expected: problem.n_x(),
            got: x0.len(),
        });
    }
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be at least 1".into()));
    }
    let n_x = problem.n_x();
    let n = s.n_cells();
    let total = n * substeps + 1;
    let mut times = Vec::with_capacity(total);
    let mut states = Vec::with_capacity(total * n_x);
    times.push(0.0);
    states.extend_from_slice(x0);

    let mut x = x0.to_vec();
    let mut k1 = vec![0.0; n_x];
    let mut k2 = vec![0.0; n_x];
    let mut k3 = vec![0.0; n_x];
    let mut k4 = vec![0.0; n_x];
    let mut tmp = vec![0.0; n_x];
    let mut scratch = vec![0.0; n_x];

    for cell in 0..n {
        let (a, b) = s.grid().cell(cell);
        let h = (b - a) / substeps as f64;
        let d = s.d_row(cell);
        let u = s.u_row(cell);
        for step in 0..substeps {
            let t = a + step as f64 * h;
            relaxed_field_into(problem, t, &x, u, d, &mut k1, &mut scratch);
            axpy_into(&x, 0.5 * h, &k1, &mut tmp);
            relaxed_field_into(problem, t + 0.5 * h, &tmp, u, d, &mut k2, &mut scratch);
            axpy_into(&x, 0.5 * h, &k2, &mut tmp);
            relaxed_field_into(problem, t + 0.5 * h, &tmp, u, d, &mut k3, &mut scratch);
            axpy_into(&x, h, &k3, &mut tmp);
            relaxed_field_into(problem, t + h, &tmp, u, d, &mut k4, &mut scratch);
            for i in 0..n_x {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Blowup {
                    quantity: "state",
                    cell,
                    t: t + h,
                });
            }
            let t_next = if step + 1 == substeps { b } else { t + h };
            times.push(t_next);
            states.extend_from_slice(&x);
        }
    }

    Ok(Trajectory {
        signal: s.clone(),
        substeps,
        n_x,
        times,
        states,
    })
}

fn axpy_into(x: &[f64], a: f64, y: &[f64], out: &mut [f64]) {
    for i in 0..x.len() {
        out[i] = x[i] + a * y[i];
    }
}

/// `J = h(x(t_f))`.
pub fn cost_j(problem: &SwitchedProblem, traj: &Trajectory) -> f64 {
    problem.cost(traj.terminal_state())
}

/// Max constraint value over trajectory samples, or `Unconstrained` when
/// the problem has no constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psi {
    Unconstrained,
    Value(f64),
}

impl Psi {
    pub fn value(self) -> Option<f64> {
        match self {
            Psi::Unconstrained => None,
            Psi::Value(v) => Some(v),
        }
    }

    /// Feasible or unconstrained.
    pub fn is_feasible(self) -> bool {
        match self {
            Psi::Unconstrained => true,
            Psi::Value(v) => v <= 0.0,
        }
    }
}

pub fn psi(problem: &SwitchedProblem, traj: &Trajectory) -> Psi {
    if !problem.is_constrained() {
        return Psi::Unconstrained;
    }
    let mut best = f64::NEG_INFINITY;
    for j in 0..traj.len() {
        let x = traj.state(j);
        for c in problem.constraints() {
            best = best.max(c.value(x));
        }
    }
    Psi::Value(best)
}

/// `P(xi_1, xi_2)` from already evaluated `J` and `Psi` values.
pub fn compare_p_values(j1: f64, psi1: Psi, j2: f64, psi2: Psi) -> f64 {
    match (psi1, psi2) {
        (Psi::Value(p1), Psi::Value(p2)) if p1 > 0.0 => p2 - p1,
        (Psi::Value(_), Psi::Value(p2)) => (j2 - j1).max(p2),
        _ => j2 - j1,
    }
}

pub fn compare_p(problem: &SwitchedProblem, traj1: &Trajectory, traj2: &Trajectory) -> f64 {
    compare_p_values(
        cost_j(problem, traj1),
        psi(problem, traj1),
        cost_j(problem, traj2),
        psi(problem, traj2),
    )
}

/// Writes `t,x_1..x_n`, one row per sample.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=traj.n_x).map(|i| format!("x_{i}")));
    w.write_record(&header)?;
    for j in 0..traj.len() {
        let mut rec = vec![traj.times[j].to_string()];
        rec.extend(traj.state(j).iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
