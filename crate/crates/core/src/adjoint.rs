//! Costate integration, first-order sensitivities and the relaxed
//! optimality function.
//!
//! For dynamics affine in the switching weights, the directional
//! derivative of `J = h(x(t_f))` along a weight perturbation `eta` is
//!
//! ```text
//! DJ(xi; eta) = int_0^{t_f} p(t)^T sum_i eta_i(t) f_i(t, x(t), u(t)) dt
//! ```
//!
//! with `p` solving `ṗ = -(df/dx)^T p`, `p(t_f) = grad h(x(t_f))`. Since
//! the weights are constant per cell, everything reduces to the per-cell
//! mode integrals `H[c][i] = int_cell p^T f_i dt`.

use crate::error::{Error, Result};
use crate::model::{eval_cost_gradient, relaxed_field_into, relaxed_jacobian_into, SwitchedProblem};
use crate::project::project_rk;
use crate::signal::{PureSignal, RelaxedSignal, SignalDirection};
use crate::sim::{cost_j, simulate, Trajectory};

/// Costate samples on the sampling layout of a forward [`Trajectory`].
#[derive(Debug, Clone, PartialEq)]
pub struct CostateTrajectory {
    n_x: usize,
    costates: Vec<f64>,
    kink: bool,
}

impl CostateTrajectory {
    pub fn len(&self) -> usize {
        self.costates.len() / self.n_x
    }

    pub fn is_empty(&self) -> bool {
        self.costates.is_empty()
    }

    pub fn costate(&self, j: usize) -> &[f64] {
        &self.costates[j * self.n_x..(j + 1) * self.n_x]
    }

    pub fn terminal(&self) -> &[f64] {
        self.costate(self.len() - 1)
    }

    /// True when the terminal condition used the cost's kink convention.
    pub fn at_cost_kink(&self) -> bool {
        self.kink
    }
}

/// Backward RK4 for `ṗ = -(sum_i d_i df_i/dx)^T p` along `traj`, on the
/// same steps as the forward pass. States between samples come from the
/// cubic Hermite interpolant of the forward solution.
pub fn integrate_costate(problem: &SwitchedProblem, traj: &Trajectory) -> Result<CostateTrajectory> {
    let n_x = problem.n_x();
    if traj.n_x() != n_x {
        return Err(Error::Dimension {
            context: "trajectory state",
            expected: n_x,
            got: traj.n_x(),
        });
    }
    let s = traj.signal();
    let m = traj.substeps();
    let len = traj.len();
    let grad = eval_cost_gradient(problem, traj.terminal_state())?;

    let mut costates = vec![0.0; len * n_x];
    costates[(len - 1) * n_x..].copy_from_slice(&grad.grad);

    let mut p = grad.grad.clone();
    let mut jac = vec![0.0; n_x * n_x];
    let mut jac_scratch = vec![0.0; n_x * n_x];
    let mut f0 = vec![0.0; n_x];
    let mut f1 = vec![0.0; n_x];
    let mut x_mid = vec![0.0; n_x];
    let mut scratch = vec![0.0; n_x];
    let mut k1 = vec![0.0; n_x];
    let mut k2 = vec![0.0; n_x];
    let mut k3 = vec![0.0; n_x];
    let mut k4 = vec![0.0; n_x];
    let mut tmp = vec![0.0; n_x];
    let times = traj.times();

    for j in (0..len - 1).rev() {
        let cell = j / m;
        let d = s.d_row(cell);
        let u = s.u_row(cell);
        let (t0, t1) = (times[j], times[j + 1]);
        let h = t1 - t0;
        let (x0, x1) = (traj.state(j), traj.state(j + 1));

        relaxed_field_into(problem, t0, x0, u, d, &mut f0, &mut scratch);
        relaxed_field_into(problem, t1, x1, u, d, &mut f1, &mut scratch);
        for i in 0..n_x {
            x_mid[i] = 0.5 * (x0[i] + x1[i]) + h / 8.0 * (f0[i] - f1[i]);
        }
        let t_mid = 0.5 * (t0 + t1);

        // Reverse time: dp/dtau = A^T p with tau = -t.
        relaxed_jacobian_into(problem, t1, x1, u, d, &mut jac, &mut jac_scratch);
        transpose_mul(&jac, &p, &mut k1);
        relaxed_jacobian_into(problem, t_mid, &x_mid, u, d, &mut jac, &mut jac_scratch);
        axpy(&p, 0.5 * h, &k1, &mut tmp);
        transpose_mul(&jac, &tmp, &mut k2);
        axpy(&p, 0.5 * h, &k2, &mut tmp);
        transpose_mul(&jac, &tmp, &mut k3);
        relaxed_jacobian_into(problem, t0, x0, u, d, &mut jac, &mut jac_scratch);
        axpy(&p, h, &k3, &mut tmp);
        transpose_mul(&jac, &tmp, &mut k4);
        for i in 0..n_x {
            p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Blowup {
                quantity: "costate",
                cell,
                t: t0,
            });
        }
        costates[j * n_x..(j + 1) * n_x].copy_from_slice(&p);
    }

    Ok(CostateTrajectory {
        n_x,
        costates,
        kink: grad.kink,
    })
}

fn transpose_mul(a: &[f64], p: &[f64], out: &mut [f64]) {
    let n = p.len();
    for c in 0..n {
        out[c] = (0..n).map(|r| a[r * n + c] * p[r]).sum();
    }
}

fn axpy(x: &[f64], a: f64, y: &[f64], out: &mut [f64]) {
    for i in 0..x.len() {
        out[i] = x[i] + a * y[i];
    }
}

/// `H[c][i] = int_cell p^T f_i dt` (trapezoidal rule on the RK substeps).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeIntegrals {
    n_sigma: usize,
    values: Vec<f64>,
}

impl ModeIntegrals {
    pub fn compute(
        problem: &SwitchedProblem,
        traj: &Trajectory,
        costate: &CostateTrajectory,
    ) -> Self {
        let n_sigma = problem.n_sigma();
        let n_x = problem.n_x();
        let s = traj.signal();
        let times = traj.times();
        let mut values = vec![0.0; s.n_cells() * n_sigma];
        let mut f = vec![0.0; n_x];
        for cell in 0..s.n_cells() {
            let u = s.u_row(cell);
            for i in 0..n_sigma {
                let mut prev: Option<(f64, f64)> = None;
                let mut acc = 0.0;
                for j in traj.cell_samples(cell) {
                    problem.eval_mode(i, times[j], traj.state(j), u, &mut f);
                    let g: f64 = costate.costate(j).iter().zip(&f).map(|(a, b)| a * b).sum();
                    if let Some((t_prev, g_prev)) = prev {
                        acc += 0.5 * (times[j] - t_prev) * (g + g_prev);
                    }
                    prev = Some((times[j], g));
                }
                values[cell * n_sigma + i] = acc;
            }
        }
        Self { n_sigma, values }
    }

    pub fn n_cells(&self) -> usize {
        self.values.len() / self.n_sigma
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        &self.values[c * self.n_sigma..(c + 1) * self.n_sigma]
    }

    pub fn directional(&self, eta: &SignalDirection) -> Result<f64> {
        if eta.grid().n_cells() != self.n_cells() || eta.n_sigma() != self.n_sigma {
            return Err(Error::GridMismatch {
                context: "direction does not match the linearization grid",
            });
        }
        Ok((0..self.n_cells())
            .map(|c| {
                self.cell(c)
                    .iter()
                    .zip(eta.row(c))
                    .map(|(h, e)| h * e)
                    .sum::<f64>()
            })
            .sum())
    }

    /// Lowest-index minimizing mode of each cell.
    pub fn argmin_modes(&self) -> Vec<usize> {
        (0..self.n_cells())
            .map(|c| {
                let row = self.cell(c);
                row.iter()
                    .enumerate()
                    .fold(0, |best, (i, &v)| if v < row[best] { i } else { best })
            })
            .collect()
    }
}

/// `DJ(xi; eta)` along `traj` (which must have been simulated from `xi`).
pub fn directional_derivative_j(
    problem: &SwitchedProblem,
    traj: &Trajectory,
    costate: &CostateTrajectory,
    eta: &SignalDirection,
) -> Result<f64> {
    if eta.grid() != traj.signal().grid() {
        return Err(Error::GridMismatch {
            context: "direction grid differs from the trajectory grid",
        });
    }
    ModeIntegrals::compute(problem, traj, costate).directional(eta)
}

/// Everything first-order about one signal: trajectory, cost, costate,
/// mode integrals.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub traj: Trajectory,
    pub cost: f64,
    pub costate: CostateTrajectory,
    pub integrals: ModeIntegrals,
}

impl Linearization {
    pub fn new(
        problem: &SwitchedProblem,
        s: &RelaxedSignal,
        x0: &[f64],
        substeps: usize,
    ) -> Result<Self> {
        let traj = simulate(problem, s, x0, substeps)?;
        let cost = cost_j(problem, &traj);
        let costate = integrate_costate(problem, &traj)?;
        let integrals = ModeIntegrals::compute(problem, &traj, &costate);
        Ok(Self {
            traj,
            cost,
            costate,
            integrals,
        })
    }

    pub fn signal(&self) -> &RelaxedSignal {
        self.traj.signal()
    }

    /// `theta = min_{xi'} DJ(xi; xi' - xi)` and the vertex-valued minimizer.
    pub fn theta(&self) -> Result<Theta> {
        let s = self.signal();
        let modes = self.integrals.argmin_modes();
        let theta = (0..s.n_cells())
            .map(|c| {
                let h = self.integrals.cell(c);
                let h_min = h[modes[c]];
                // sum_i d_i (H_min - H_i) equals H_min - d.H on the simplex
                // and is nonpositive term by term.
                s.d_row(c)
                    .iter()
                    .zip(h)
                    .map(|(d, hi)| d * (h_min - hi))
                    .sum::<f64>()
            })
            .sum();
        let direction = PureSignal::from_modes(s.grid().clone(), s.n_sigma(), &modes)?;
        Ok(Theta { theta, direction })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theta {
    pub theta: f64,
    /// Vertex-valued minimizer of the linearized cost.
    pub direction: PureSignal,
}

/// Relaxed optimality function at `s`.
pub fn optimality_theta(
    problem: &SwitchedProblem,
    s: &RelaxedSignal,
    x0: &[f64],
    substeps: usize,
) -> Result<Theta> {
    Linearization::new(problem, s, x0, substeps)?.theta()
}

/// Checks of the optimality-function properties at one signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaCertificate {
    pub theta: f64,
    /// `theta <= tol`.
    pub nonpositive: bool,
    /// `theta` evaluated at the projected pure signal.
    pub theta_at_projection: f64,
}

pub fn theta_is_valid_certificates(
    problem: &SwitchedProblem,
    s: &RelaxedSignal,
    x0: &[f64],
    substeps: usize,
    k: u32,
    tol: f64,
) -> Result<ThetaCertificate> {
    let theta = optimality_theta(problem, s, x0, substeps)?.theta;
    let projected = project_rk(s, k)?;
    let theta_at_projection = optimality_theta(problem, projected.as_relaxed(), x0, substeps)?.theta;
    Ok(ThetaCertificate {
        theta,
        nonpositive: theta <= tol,
        theta_at_projection,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{paper_example, ClosureField, HalfSquaredDistance, ZeroCost};
    use crate::signal::{initial_signal_paper, Grid};
    use std::sync::Arc;

    fn scalar_linear(a: f64) -> SwitchedProblem {
        let field = ClosureField::new(
            move |_t: f64, x: &[f64], _u: &[f64], out: &mut [f64]| out[0] = a * x[0],
            move |_t: f64, _x: &[f64], _u: &[f64], out: &mut [f64]| out[0] = a,
        );
        SwitchedProblem::new(
            "linear",
            vec![1.0],
            1.0,
            vec![Arc::new(field)],
            Arc::new(HalfSquaredDistance { target: vec![0.0] }),
        )
        .unwrap()
    }

    #[test]
    fn zero_cost_gives_zero_costate_and_theta() {
        let p = paper_example().with_cost(Arc::new(ZeroCost));
        let s = initial_signal_paper(&Grid::uniform(2.0, 64).unwrap()).unwrap();
        let lin = Linearization::new(&p, s.as_relaxed(), &[0.0, 0.0], 4).unwrap();
        assert!(lin.costate.costates.iter().all(|&v| v == 0.0));
        let th = lin.theta().unwrap();
        assert_eq!(th.theta, 0.0);
        assert!(th.direction.modes().iter().all(|&m| m == 0));
    }

    #[test]
    fn linear_system_costate_is_exponential() {
        let a = -0.7;
        let p = scalar_linear(a);
        let s = RelaxedSignal::constant(Grid::uniform(1.0, 50).unwrap(), &[1.0]).unwrap();
        let traj = simulate(&p, &s, &[1.0], 4).unwrap();
        let co = integrate_costate(&p, &traj).unwrap();
        let xf = traj.terminal_state()[0];
        for (j, &t) in traj.times().iter().enumerate() {
            let expect = (a * (1.0 - t)).exp() * xf;
            assert!((co.costate(j)[0] - expect).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn mode2_costate_matches_closed_form() {
        let p = paper_example();
        let s = RelaxedSignal::constant(Grid::uniform(2.0, 64).unwrap(), &[0.0, 1.0]).unwrap();
        let traj = simulate(&p, &s, &[0.0, 0.0], 4).unwrap();
        let co = integrate_costate(&p, &traj).unwrap();
        let r13 = 13f64.sqrt();
        assert!((co.terminal()[0] + 3.0 / r13).abs() < 1e-12);
        assert!((co.terminal()[1] + 2.0 / r13).abs() < 1e-12);
        for (j, &t) in traj.times().iter().enumerate() {
            let p2 = -2.0 / r13;
            let p1 = -3.0 / r13 + 2.0 * p2 * (2.0 - t);
            assert!((co.costate(j)[0] - p1).abs() < 1e-8);
            assert!((co.costate(j)[1] - p2).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_is_linear_in_direction() {
        let p = paper_example();
        let g = Grid::uniform(2.0, 32).unwrap();
        let s = RelaxedSignal::constant(g.clone(), &[0.7, 0.3]).unwrap();
        let lin = Linearization::new(&p, &s, &[0.0, 0.0], 4).unwrap();
        let target = RelaxedSignal::from_modes(g.clone(), 2, &[1; 32]).unwrap();
        let eta = SignalDirection::between(&s, &target).unwrap();
        let dj = directional_derivative_j(&p, &lin.traj, &lin.costate, &eta).unwrap();
        let dj3 = directional_derivative_j(&p, &lin.traj, &lin.costate, &eta.scaled(3.0)).unwrap();
        assert!((dj3 - 3.0 * dj).abs() <= 1e-12 * dj.abs().max(1.0));
        let zero = SignalDirection::zero(g, 2);
        assert_eq!(
            directional_derivative_j(&p, &lin.traj, &lin.costate, &zero).unwrap(),
            0.0
        );
    }

    #[test]
    fn theta_is_negative_at_reference_start() {
        let p = paper_example();
        let s = initial_signal_paper(&Grid::uniform(2.0, 256).unwrap()).unwrap();
        let th = optimality_theta(&p, s.as_relaxed(), &[0.0, 0.0], 4).unwrap();
        assert!(th.theta < -1e-6, "theta = {}", th.theta);
    }

    #[test]
    fn certificates_report_projection() {
        let p = paper_example();
        let s = RelaxedSignal::constant(Grid::uniform(2.0, 64).unwrap(), &[0.5, 0.5]).unwrap();
        let cert = theta_is_valid_certificates(&p, &s, &[0.0, 0.0], 4, 6, 1e-10).unwrap();
        assert!(cert.nonpositive);
        assert!(cert.theta_at_projection <= 1e-10);
    }
}
