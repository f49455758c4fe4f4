//! The outer iteration `xi^{i+1} = R_k(Gamma_r(xi^i))`.
//!
//! `Gamma_r` repeats a conditional-gradient step with Armijo backtracking
//! (`Gamma_hat`) until the accumulated decrease reaches `gamma * theta_r`.
//! The projection order `k` is the smallest one whose cost/constraint
//! change under projection `Q(xi, k)` stays below `(omega - 1) gamma theta_p`.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adjoint::Linearization;
use crate::error::{Error, Result};
use crate::model::SwitchedProblem;
use crate::project::{common_refinement, project_rk, q_bound, scan_k, KChoice};
use crate::signal::{convex_combine, Grid, PureSignal, RelaxedSignal};
use crate::sim::{cost_j, psi, simulate, Psi, DEFAULT_SUBSTEPS};
use crate::topology::{topo_distance, TopologyKind};

/// Armijo steps below this are treated as no progress.
pub const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Stop once `theta_p > -epsilon`.
    pub epsilon: f64,
    pub omega: f64,
    /// Sufficient-descent coefficient used by both the `l` rule and the
    /// projection bound.
    pub gamma: f64,
    pub k0: u32,
    pub k_max: u32,
    pub fixed_k: Option<u32>,
    pub l_max: usize,
    pub armijo_alpha: f64,
    pub armijo_beta: f64,
    pub max_iter: usize,
    /// Cells of the uniform descent grid.
    pub n: usize,
    pub substeps: usize,
    pub topology: TopologyKind,
    /// Full-trajectory movement below which an iteration counts as stalled.
    pub stall_floor: f64,
}


impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            omega: 0.5,
            gamma: 0.01,
            k0: 8,
            k_max: 16,
            fixed_k: None,
            l_max: 20,
            armijo_alpha: 0.5,
            armijo_beta: 0.5,
            max_iter: 200,
            n: 256,
            substeps: DEFAULT_SUBSTEPS,
            topology: TopologyKind::TerminalState,
            stall_floor: 1e-4,
        }
    }
}

/// Consecutive stalled iterations that end a full-trajectory run.
pub const STALL_PATIENCE: usize = 3;

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return bad(format!("omega must be in (0, 1), got {}", self.omega));
        }
        if !(self.gamma >= 0.0) {
            return bad(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if self.k0 == 0 || self.k0 > self.k_max {
            return bad(format!(
                "need 1 <= k0 <= k_max, got k0 = {}, k_max = {}",
                self.k0, self.k_max
            ));
        }
        if self.fixed_k == Some(0) {
            return bad("fixed_k must be at least 1".into());
        }
        if self.l_max == 0 {
            return bad("l_max must be at least 1".into());
        }
        for (name, v) in [("armijo_alpha", self.armijo_alpha), ("armijo_beta", self.armijo_beta)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must be in (0, 1), got {v}"));
            }
        }
        if self.n == 0 || self.substeps == 0 {
            return bad("n and substeps must be at least 1".into());
        }
        if !(self.stall_floor >= 0.0) {
            return bad(format!("stall_floor must be >= 0, got {}", self.stall_floor));
        }
        Ok(())
    }
}

/// One `Gamma_hat` step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub signal: RelaxedSignal,
    pub theta: f64,
    pub j_before: f64,
    pub j_after: f64,
    /// Accepted Armijo step, `None` when no step was taken.
    pub lambda: Option<f64>,
}

/// Conditional-gradient step from `s` towards the vertex minimizer of the
/// linearized cost, with Armijo backtracking `lambda = 1, beta, beta^2, ...`.
pub fn gamma_hat_step(
    problem: &SwitchedProblem,
    x0: &[f64],
    s: &RelaxedSignal,
    cfg: &SolverConfig,
) -> Result<StepOutcome> {
    let lin = Linearization::new(problem, s, x0, cfg.substeps)?;
    step_from(problem, x0, &lin, cfg)
}

fn step_from(
    problem: &SwitchedProblem,
    x0: &[f64],
    lin: &Linearization,
    cfg: &SolverConfig,
) -> Result<StepOutcome> {
    let s = lin.signal();
    let th = lin.theta()?;
    let unchanged = |theta| StepOutcome {
        signal: s.clone(),
        theta,
        j_before: lin.cost,
        j_after: lin.cost,
        lambda: None,
    };
    if !(th.theta < 0.0) {
        return Ok(unchanged(th.theta));
    }
    let target = th.direction.as_relaxed();
    let mut lambda = 1.0;
    while lambda >= MIN_STEP {
        let candidate = convex_combine(s, target, lambda)?;
        let j = cost_j(problem, &simulate(problem, &candidate, x0, cfg.substeps)?);
        if j - lin.cost <= cfg.armijo_alpha * lambda * th.theta {
            return Ok(StepOutcome {
                signal: candidate,
                theta: th.theta,
                j_before: lin.cost,
                j_after: j,
                lambda: Some(lambda),
            });
        }
        lambda *= cfg.armijo_beta;
    }
    Ok(unchanged(th.theta))
}

/// `Gamma_r(s) = Gamma_hat^l(s)`.
#[derive(Debug, Clone)]
pub struct GammaR {
    pub signal: RelaxedSignal,
    pub l: usize,
    /// `theta_r` at the starting signal.
    pub theta: f64,
    pub j_start: f64,
    pub j_end: f64,
    pub psi_start: Psi,
    pub psi_end: Psi,
    /// The sufficient-descent inequality `J(end) - J(start) <= gamma theta`
    /// was reached within `l_max` steps.
    pub certified: bool,
    /// Cost after every accepted step, starting with `j_start`.
    pub costs: Vec<f64>,
    pub lambdas: Vec<f64>,
}

/// Repeats [`gamma_hat_step`] until `J(Gamma_hat^l(s)) - J(s) <= gamma theta_r(s)`.
pub fn gamma_r(
    problem: &SwitchedProblem,
    x0: &[f64],
    s: &RelaxedSignal,
    cfg: &SolverConfig,
) -> Result<GammaR> {
    let start = Linearization::new(problem, s, x0, cfg.substeps)?;
    gamma_r_from(problem, x0, start, cfg)
}

fn gamma_r_from(
    problem: &SwitchedProblem,
    x0: &[f64],
    start: Linearization,
    cfg: &SolverConfig,
) -> Result<GammaR> {
    let theta = start.theta()?.theta;
    let j_start = start.cost;
    let psi_start = psi(problem, &start.traj);
    let target = cfg.gamma * theta;
    let mut costs = vec![j_start];
    let mut lambdas = vec![];
    let mut current = start;
    let mut certified = false;
    let mut l = 0;
    while l < cfg.l_max {
        let step = step_from(problem, x0, &current, cfg)?;
        l += 1;
        let Some(lambda) = step.lambda else {
            l -= 1;
            certified = theta >= 0.0;
            break;
        };
        lambdas.push(lambda);
        costs.push(step.j_after);
        current = Linearization::new(problem, &step.signal, x0, cfg.substeps)?;
        if current.cost - j_start <= target {
            certified = true;
            break;
        }
    }
    Ok(GammaR {
        psi_end: psi(problem, &current.traj),
        j_end: current.cost,
        signal: current.traj.signal().clone(),
        l,
        theta,
        j_start,
        psi_start,
        certified,
        costs,
        lambdas,
    })
}

/// Evaluates `Q(xi, k)` for many `k` against one cached `Gamma_r(xi)`.
pub struct QEvaluator<'a> {
    problem: &'a SwitchedProblem,
    x0: Vec<f64>,
    substeps: usize,
    feasible: bool,
    gamma: GammaR,
}

impl<'a> QEvaluator<'a> {
    /// Runs `Gamma_r` from `s` (starting at the problem's initial state).
    pub fn new(problem: &'a SwitchedProblem, s: &RelaxedSignal, cfg: &SolverConfig) -> Result<Self> {
        let x0 = problem.x0().to_vec();
        let gamma = gamma_r(problem, &x0, s, cfg)?;
        Ok(Self::from_gamma(problem, &x0, gamma, cfg.substeps))
    }

    pub fn from_gamma(
        problem: &'a SwitchedProblem,
        x0: &[f64],
        gamma: GammaR,
        substeps: usize,
    ) -> Self {
        Self {
            problem,
            x0: x0.to_vec(),
            substeps,
            feasible: gamma.psi_start.is_feasible(),
            gamma,
        }
    }

    pub fn gamma(&self) -> &GammaR {
        &self.gamma
    }

    pub fn into_gamma(self) -> GammaR {
        self.gamma
    }

    /// Projection of the cached `Gamma_r` output and its `Q` value.
    pub fn evaluate(&mut self, k: u32) -> Result<(PureSignal, f64, f64, Psi)> {
        let projected = project_rk(&self.gamma.signal, k)?;
        let traj = simulate(self.problem, projected.as_relaxed(), &self.x0, self.substeps)?;
        let j = cost_j(self.problem, &traj);
        let ps = psi(self.problem, &traj);
        let q = q_value(
            self.feasible,
            self.gamma.j_end,
            self.gamma.psi_end,
            j,
            ps,
        );
        Ok((projected, q, j, ps))
    }

    pub fn q(&mut self, k: u32) -> Result<f64> {
        Ok(self.evaluate(k)?.1)
    }
}

/// `Q` from evaluated quantities: `J` and `Psi` change under projection
/// for feasible starts, `Psi` change only for infeasible ones.
pub fn q_value(start_feasible: bool, j_gamma: f64, psi_gamma: Psi, j_proj: f64, psi_proj: Psi) -> f64 {
    match (psi_gamma, psi_proj) {
        (Psi::Value(a), Psi::Value(b)) => {
            if start_feasible {
                (j_proj - j_gamma).max(b - a)
            } else {
                b - a
            }
        }
        _ => j_proj - j_gamma,
    }
}

/// `Q(s, k)`.
pub fn q_function(
    problem: &SwitchedProblem,
    s: &RelaxedSignal,
    k: u32,
    cfg: &SolverConfig,
) -> Result<f64> {
    QEvaluator::new(problem, s, cfg)?.q(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Stationary,
    Stalled,
    MaxIter,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Stationary => 0,
            Status::Stalled => 2,
            Status::MaxIter => 3,
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Stationary => "stationary",
            Status::Stalled => "stalled",
            Status::MaxIter => "max_iter",
        })
    }
}

/// Telemetry of one outer iteration. Fields about the transition to the
/// next iterate are `None` on the final record.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Cost of the pure iterate.
    pub j: f64,
    /// `theta_p` of the pure iterate.
    pub theta: f64,
    pub psi: Psi,
    pub terminal_state: Vec<f64>,
    /// Relaxed iterate the descent started from, its cost and `theta_r`.
    pub j_relaxed: Option<f64>,
    pub theta_r: Option<f64>,
    /// `J(Gamma_r(xi))`.
    pub j_gamma: Option<f64>,
    pub l_used: Option<usize>,
    pub k_used: Option<u32>,
    pub q_value: Option<f64>,
    pub q_bound: Option<f64>,
    /// `l` reached the sufficient-descent inequality.
    pub gamma_certified: bool,
    /// `k` met the projection bound.
    pub k_certified: bool,
    /// Full-trajectory distance to the previous pure iterate.
    pub movement: Option<f64>,
    pub wall_ms: f64,
}

impl IterationRecord {
    pub fn flagged(&self) -> bool {
        self.l_used.is_some() && !(self.gamma_certified && self.k_certified)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: PureSignal,
    pub history: Vec<IterationRecord>,
    pub status: Status,
}

impl SolveOutcome {
    pub fn final_record(&self) -> &IterationRecord {
        self.history.last().expect("history is never empty")
    }
}

/// Runs the outer iteration from the pure signal `s0`.
pub fn solve(
    problem: &SwitchedProblem,
    x0: &[f64],
    s0: &PureSignal,
    cfg: &SolverConfig,
) -> Result<SolveOutcome> {
    cfg.validate()?;
    let grid = Grid::uniform(problem.t_f(), cfg.n)?;
    let clock = Instant::now();
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut pure = s0.clone();
    let mut previous: Option<PureSignal> = None;
    let mut stalled_for = 0;
    let mut status = Status::MaxIter;

    for iter in 0..=cfg.max_iter {
        let lin = Linearization::new(problem, pure.as_relaxed(), x0, cfg.substeps)?;
        let theta_p = lin.theta()?.theta;
        let movement = match &previous {
            Some(prev) if cfg.topology == TopologyKind::FullTrajectory => {
                Some(full_trajectory_gap(problem, x0, prev, &pure, cfg.substeps)?)
            }
            _ => None,
        };
        let mut record = IterationRecord {
            iter,
            j: lin.cost,
            theta: theta_p,
            psi: psi(problem, &lin.traj),
            terminal_state: lin.traj.terminal_state().to_vec(),
            j_relaxed: None,
            theta_r: None,
            j_gamma: None,
            l_used: None,
            k_used: None,
            q_value: None,
            q_bound: None,
            gamma_certified: false,
            k_certified: false,
            movement,
            wall_ms: 0.0,
        };

        if let Some(m) = movement {
            stalled_for = if m < cfg.stall_floor { stalled_for + 1 } else { 0 };
        }
        let done = if theta_p > -cfg.epsilon {
            Some(Status::Stationary)
        } else if stalled_for >= STALL_PATIENCE {
            Some(Status::Stalled)
        } else if iter == cfg.max_iter {
            Some(Status::MaxIter)
        } else {
            None
        };
        if let Some(st) = done {
            status = st;
            record.wall_ms = clock.elapsed().as_secs_f64() * 1e3;
            history.push(record);
            break;
        }

        let relaxed = pure.as_relaxed().resample(&grid)?;
        let gr = gamma_r(problem, x0, &relaxed, cfg)?;
        record.j_relaxed = Some(gr.j_start);
        record.theta_r = Some(gr.theta);
        record.j_gamma = Some(gr.j_end);
        record.l_used = Some(gr.l);
        record.gamma_certified = gr.certified;

        let bound = q_bound(cfg.omega, cfg.gamma, theta_p);
        let mut q_eval = QEvaluator::from_gamma(problem, x0, gr, cfg.substeps);
        let choice = match cfg.fixed_k {
            Some(k) => {
                let q = q_eval.q(k)?;
                Ok(KChoice { k, q, bound })
            }
            None => scan_k(cfg.k0, cfg.k_max, bound, |k| q_eval.q(k)),
        };
        let (k, q, k_ok) = match choice {
            Ok(c) => (c.k, c.q, c.q <= bound),
            Err(Error::KNotFound { best_q, .. }) => (cfg.k_max, best_q, false),
            Err(e) => return Err(e),
        };
        let q = if cfg.fixed_k.is_none() && !k_ok { q_eval.q(k)? } else { q };
        record.k_used = Some(k);
        record.q_value = Some(q);
        record.q_bound = Some(bound);
        record.k_certified = k_ok;

        let next = project_rk(&q_eval.gamma().signal, k)?;
        record.wall_ms = clock.elapsed().as_secs_f64() * 1e3;
        history.push(record);
        previous = Some(std::mem::replace(&mut pure, next));
    }

    Ok(SolveOutcome {
        solution: pure,
        history,
        status,
    })
}

fn full_trajectory_gap(
    problem: &SwitchedProblem,
    x0: &[f64],
    a: &PureSignal,
    b: &PureSignal,
    substeps: usize,
) -> Result<f64> {
    let (ra, rb) = common_refinement(a.as_relaxed(), b.as_relaxed())?;
    let ta = simulate(problem, &ra, x0, substeps)?;
    let tb = simulate(problem, &rb, x0, substeps)?;
    topo_distance(TopologyKind::FullTrajectory, &ta, &tb)
}

/// Minimum-cost vertex signal on a coarse grid by exhaustive simulation.
/// Ties go to the lexicographically smallest mode sequence.
pub fn oracle_enumerate(
    problem: &SwitchedProblem,
    x0: &[f64],
    grid: &Grid,
    substeps: usize,
) -> Result<(PureSignal, f64)> {
    const BUDGET: u128 = 1 << 20;
    let n = grid.n_cells();
    let base = problem.n_sigma() as u128;
    let candidates = (0..n).try_fold(1u128, |acc, _| acc.checked_mul(base));
    let candidates = match candidates {
        Some(c) if c <= BUDGET => c,
        other => {
            return Err(Error::EnumerationBudget {
                candidates: other.unwrap_or(u128::MAX),
                budget: BUDGET,
            })
        }
    };
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut modes = vec![0usize; n];
    for code in 0..candidates {
        // Most significant digit first, so codes run in lexicographic order.
        let mut c = code;
        for slot in modes.iter_mut().rev() {
            *slot = (c % base) as usize;
            c /= base;
        }
        let s = RelaxedSignal::from_modes(grid.clone(), problem.n_sigma(), &modes)?;
        let j = cost_j(problem, &simulate(problem, &s, x0, substeps)?);
        if best.as_ref().is_none_or(|(_, bj)| j < *bj) {
            best = Some((modes.clone(), j));
        }
    }
    let (modes, j) = best.expect("at least one candidate");
    Ok((PureSignal::from_modes(grid.clone(), problem.n_sigma(), &modes)?, j))
}

/// Writes `iter,J,theta,psi,k,l,Q,x1_tf..,wall_ms`. Missing transition
/// values are left empty. With `mask_timing` the wall-clock column is
/// written as zero so repeated runs produce identical bytes.
pub fn write_history_csv<W: Write>(
    history: &[IterationRecord],
    out: W,
    mask_timing: bool,
) -> Result<()> {
    let n_x = history.first().map_or(0, |r| r.terminal_state.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["iter", "J", "theta", "psi", "k", "l", "Q"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=n_x).map(|i| format!("x{i}_tf")));
    header.push("wall_ms".into());
    w.write_record(&header)?;
    for r in history {
        let mut rec = vec![
            r.iter.to_string(),
            r.j.to_string(),
            r.theta.to_string(),
            match r.psi {
                Psi::Unconstrained => "unconstrained".to_string(),
                Psi::Value(v) => v.to_string(),
            },
            r.k_used.map(|v| v.to_string()).unwrap_or_default(),
            r.l_used.map(|v| v.to_string()).unwrap_or_default(),
            r.q_value.map(|v| v.to_string()).unwrap_or_default(),
        ];
        rec.extend(r.terminal_state.iter().map(f64::to_string));
        rec.push(if mask_timing {
            "0".to_string()
        } else {
            format!("{:.3}", r.wall_ms)
        });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
