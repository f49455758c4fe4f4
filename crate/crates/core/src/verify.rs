//! End-to-end acceptance checks, shared by `switchopt verify` and the
//! acceptance test target.
//!
//! Every check is deterministic and its report line contains no timings,
//! so two runs print identical bytes.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::adjoint::{optimality_theta, Linearization};
use crate::artifacts::Artifacts;
use crate::error::Result;
use crate::model::{
    paper_example_with_tables, q1_table, q2_table, PiecewiseScalar, SwitchedProblem, ZeroCost,
    EXAMPLE_STALL_POINT, EXAMPLE_TARGET,
};
use crate::project::{project_rk, projection_error};
use crate::signal::{convex_combine, initial_signal_paper, Grid, RelaxedSignal, SignalDirection};
use crate::sim::{cost_j, simulate, DEFAULT_SUBSTEPS};
use crate::solver::{gamma_r, oracle_enumerate, solve, SolveOutcome, SolverConfig, Status};
use crate::topology::TopologyKind;

/// Wall-clock budget of each reproduction run.
pub const RUN_BUDGET: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    /// Gates the exit code.
    pub gating: bool,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        Self {
            name,
            gating: true,
            pass,
            detail,
        }
    }

    fn from_result(name: &'static str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((pass, detail)) => Self::new(name, pass, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{}  {:<28} {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub checks: Vec<CheckResult>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| c.gating).all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(out, "{}", c.line());
        }
        let gating: Vec<_> = self.checks.iter().filter(|c| c.gating).collect();
        let _ = writeln!(
            out,
            "{}/{} checks passed",
            gating.iter().filter(|c| c.pass).count(),
            gating.len()
        );
        out
    }
}

/// Solver runs on the two-mode example from its initial signal.
#[derive(Debug, Clone)]
pub struct ReproRun {
    pub outcome: SolveOutcome,
    pub within_budget: bool,
    pub cfg: SolverConfig,
}

/// The example problem plus the `q` tables it was built from.
#[derive(Debug, Clone)]
pub struct Suite {
    pub problem: SwitchedProblem,
    pub q1: PiecewiseScalar,
    pub q2: PiecewiseScalar,
}

impl Default for Suite {
    fn default() -> Self {
        Self::with_tables(q1_table(), q2_table())
    }
}

const X0: [f64; 2] = [0.0, 0.0];

impl Suite {
    pub fn with_tables(q1: PiecewiseScalar, q2: PiecewiseScalar) -> Self {
        Self {
            problem: paper_example_with_tables(q1.clone(), q2.clone()),
            q1,
            q2,
        }
    }

    pub fn run(&self) -> Report {
        let terminal = self.repro(TopologyKind::TerminalState);
        let trajectory = self.repro(TopologyKind::FullTrajectory);
        let checks = vec![
            self.check_tables(),
            check_terminal_run(&terminal),
            check_trajectory_run(&trajectory),
            self.check_theta_validity(),
            self.check_gradient(),
            self.check_exhaustive_theta(),
            self.check_projection(),
            self.check_pure_relaxed(),
            self.check_oracle_polish(),
            check_telemetry(&terminal),
            self.check_determinism(&terminal, &trajectory),
        ];
        Report { checks }
    }

    pub fn repro(&self, topology: TopologyKind) -> Result<ReproRun> {
        let cfg = SolverConfig {
            topology,
            ..SolverConfig::default()
        };
        let s0 = initial_signal_paper(&Grid::uniform(self.problem.t_f(), cfg.n)?)?;
        let clock = Instant::now();
        let outcome = solve(&self.problem, &X0, &s0, &cfg)?;
        Ok(ReproRun {
            outcome,
            within_budget: clock.elapsed() <= RUN_BUDGET,
            cfg,
        })
    }

    /// Continuity of both `q` tables at every breakpoint.
    pub fn check_tables(&self) -> CheckResult {
        let j1 = self.q1.max_jump();
        let j2 = self.q2.max_jump();
        CheckResult::new(
            "model_tables_continuous",
            j1 <= 1e-12 && j2 <= 1e-12,
            format!("max jump q1 {j1:.3e}, q2 {j2:.3e} (tol 1e-12)"),
        )
    }

    /// `theta <= 1e-10` on 100 structured signals, `theta == 0` for `h = 0`.
    pub fn check_theta_validity(&self) -> CheckResult {
        CheckResult::from_result(
            "theta_validity",
            (|| {
                let grid = Grid::uniform(self.problem.t_f(), 64)?;
                let mut worst = f64::NEG_INFINITY;
                for idx in 0..100 {
                    let s = structured_signal(&grid, idx)?;
                    let th = optimality_theta(&self.problem, &s, &X0, DEFAULT_SUBSTEPS)?.theta;
                    worst = worst.max(th);
                }
                let flat = self.problem.clone().with_cost(Arc::new(ZeroCost));
                let mut zero_ok = true;
                for idx in 0..10 {
                    let s = structured_signal(&grid, idx)?;
                    let th = optimality_theta(&flat, &s, &X0, DEFAULT_SUBSTEPS)?.theta;
                    zero_ok &= th == 0.0;
                }
                Ok((
                    worst <= 1e-10 && zero_ok,
                    format!("max theta {worst:.3e} over 100 signals; theta == 0 for h = 0: {zero_ok}"),
                ))
            })(),
        )
    }

    /// Adjoint directional derivative against forward differences.
    pub fn check_gradient(&self) -> CheckResult {
        CheckResult::from_result(
            "gradient_oracle",
            (|| {
                let grid = Grid::uniform(self.problem.t_f(), 64)?;
                let mut worst_rel = 0.0f64;
                let mut first_order = true;
                for idx in 0..10 {
                    let s = structured_signal(&grid, 2 * idx)?;
                    let t = structured_signal(&grid, 2 * idx + 1)?;
                    let g = gradient_check(&self.problem, &s, &t)?;
                    worst_rel = worst_rel.max(g.rel_error);
                    first_order &= g.first_order;
                }
                Ok((
                    worst_rel <= 1e-3 && first_order,
                    format!(
                        "max rel error {worst_rel:.3e} at lambda 1e-5 (tol 1e-3); quotients converge: {first_order}"
                    ),
                ))
            })(),
        )
    }

    /// `theta` against the minimum of `DJ` over all vertex directions, N = 8.
    pub fn check_exhaustive_theta(&self) -> CheckResult {
        CheckResult::from_result(
            "exhaustive_theta",
            (|| {
                let grid = Grid::uniform(self.problem.t_f(), 8)?;
                let mut worst = 0.0f64;
                for idx in 0..6 {
                    let s = structured_signal(&grid, idx)?;
                    let lin = Linearization::new(&self.problem, &s, &X0, DEFAULT_SUBSTEPS)?;
                    let theta = lin.theta()?.theta;
                    let brute = brute_force_theta(&lin, &s)?;
                    worst = worst.max((theta - brute).abs());
                }
                Ok((
                    worst <= 1e-10,
                    format!("max |theta - brute force| {worst:.3e} over 6 signals x 256 directions"),
                ))
            })(),
        )
    }

    pub fn check_projection(&self) -> CheckResult {
        CheckResult::from_result(
            "projection_exactness",
            (|| {
                let grid = Grid::uniform(self.problem.t_f(), 64)?;
                let mut duty = 0.0f64;
                let mut decreasing = true;
                for idx in (0..).filter(|i| i % 5 != 4).take(10) {
                    let s = structured_signal(&grid, idx)?;
                    for k in [3, 6, 12] {
                        duty = duty.max(duty_cycle_error(&s, k)?);
                    }
                    let e6 = projection_error(&self.problem, &s, 6, TopologyKind::FullTrajectory, &X0, DEFAULT_SUBSTEPS)?;
                    let e12 = projection_error(&self.problem, &s, 12, TopologyKind::FullTrajectory, &X0, DEFAULT_SUBSTEPS)?;
                    decreasing &= e12 < e6;
                }
                let mut aligned = 0.0f64;
                let coarse = Grid::uniform(self.problem.t_f(), 64)?;
                for idx in 0..5 {
                    let modes = vertex_pattern(64, idx);
                    let s = RelaxedSignal::from_modes(coarse.clone(), 2, &modes)?;
                    for kind in [TopologyKind::TerminalState, TopologyKind::FullTrajectory] {
                        aligned = aligned.max(projection_error(&self.problem, &s, 6, kind, &X0, DEFAULT_SUBSTEPS)?);
                    }
                }
                Ok((
                    duty <= 1e-12 && decreasing && aligned <= 1e-9,
                    format!(
                        "duty error {duty:.3e}; error(k=12) < error(k=6) on 10 signals: {decreasing}; aligned error {aligned:.3e}"
                    ),
                ))
            })(),
        )
    }

    pub fn check_pure_relaxed(&self) -> CheckResult {
        CheckResult::from_result(
            "pure_relaxed_equivalence",
            (|| {
                let grid = Grid::uniform(self.problem.t_f(), 64)?;
                let mut worst = 0.0f64;
                for idx in 0..10 {
                    let modes = vertex_pattern(64, idx);
                    let s = RelaxedSignal::from_modes(grid.clone(), 2, &modes)?;
                    let relaxed = simulate(&self.problem, &s, &X0, DEFAULT_SUBSTEPS)?;
                    let direct = direct_mode_integration(&self.problem, &grid, &modes, DEFAULT_SUBSTEPS);
                    for (j, x) in direct.iter().enumerate() {
                        for (a, b) in x.iter().zip(relaxed.state(j)) {
                            worst = worst.max((a - b).abs());
                        }
                    }
                }
                let end = |m: usize| -> Result<Vec<f64>> {
                    let s = RelaxedSignal::from_modes(grid.clone(), 2, &vec![m; 64])?;
                    Ok(simulate(&self.problem, &s, &X0, DEFAULT_SUBSTEPS)?.terminal_state().to_vec())
                };
                let (m1, m2) = (end(0)?, end(1)?);
                let e1 = dist(&m1, &[4.0, 0.0]);
                let e2 = dist(&m2, &[0.0, 0.0]);
                Ok((
                    worst <= 1e-12 && e1 <= 1e-9 && e2 <= 1e-9,
                    format!(
                        "max deviation {worst:.3e}; mode 1 only ends at ({:.6}, {:.6}), mode 2 only at ({:.6}, {:.6})",
                        m1[0], m1[1], m2[0], m2[1]
                    ),
                ))
            })(),
        )
    }

    pub fn check_oracle_polish(&self) -> CheckResult {
        CheckResult::from_result(
            "oracle_polish",
            (|| {
                let grid = Grid::uniform(self.problem.t_f(), 8)?;
                let (best, best_cost) = oracle_enumerate(&self.problem, &X0, &grid, DEFAULT_SUBSTEPS)?;
                let polished = gamma_r(&self.problem, &X0, best.as_relaxed(), &SolverConfig::default())?;
                Ok((
                    polished.j_end <= best_cost + 1e-9,
                    format!(
                        "oracle J {best_cost:.9}, after Gamma_r {:.9} (l = {})",
                        polished.j_end, polished.l
                    ),
                ))
            })(),
        )
    }

    /// Runs both topologies a second time and compares artifacts bytewise.
    pub fn check_determinism(
        &self,
        terminal: &Result<ReproRun>,
        trajectory: &Result<ReproRun>,
    ) -> CheckResult {
        CheckResult::from_result(
            "determinism",
            (|| {
                let mut same = true;
                let mut files = 0;
                for (first, kind) in [
                    (terminal, TopologyKind::TerminalState),
                    (trajectory, TopologyKind::FullTrajectory),
                ] {
                    let first = first.as_ref().map_err(Clone::clone)?;
                    let second = self.repro(kind)?;
                    let a = Artifacts::render(&self.problem, &X0, &first.outcome, first.cfg.substeps, true, true)?;
                    let b = Artifacts::render(&self.problem, &X0, &second.outcome, second.cfg.substeps, true, true)?;
                    same &= a == b;
                    files += a.files.len();
                }
                Ok((same, format!("{files} CSV/SVG artifacts byte-identical across repeated runs: {same}")))
            })(),
        )
    }
}

/// Terminal-state topology run reaches `A` and stops as stationary.
pub fn check_terminal_run(run: &Result<ReproRun>) -> CheckResult {
    CheckResult::from_result(
        "terminal_topology_target",
        run.as_ref().map_err(Clone::clone).map(|r| {
            let last = r.outcome.final_record();
            let d = dist(&last.terminal_state, &EXAMPLE_TARGET);
            let pass = r.outcome.status == Status::Stationary
                && last.j <= 0.05
                && d <= 0.05
                && r.within_budget;
            (
                pass,
                format!(
                    "status {}, J {:.6}, |x(tf) - A| {:.4}, {} iterations{}",
                    r.outcome.status,
                    last.j,
                    d,
                    r.outcome.history.len(),
                    budget_note(r)
                ),
            )
        }),
    )
}

/// Trajectory topology run stops short of the optimum.
pub fn check_trajectory_run(run: &Result<ReproRun>) -> CheckResult {
    CheckResult::from_result(
        "trajectory_topology_stall",
        run.as_ref().map_err(Clone::clone).map(|r| {
            let last = r.outcome.final_record();
            let d = dist(&last.terminal_state, &EXAMPLE_STALL_POINT);
            let pass = matches!(r.outcome.status, Status::Stationary | Status::Stalled)
                && last.j >= 0.5
                && r.within_budget;
            (
                pass,
                format!(
                    "status {}, J {:.6}, |x(tf) - B| {:.4} (target <= 0.15, J in 1 +- 0.1: {}){}",
                    r.outcome.status,
                    last.j,
                    d,
                    d <= 0.15 && (last.j - 1.0).abs() <= 0.1,
                    budget_note(r)
                ),
            )
        }),
    )
}

/// Sufficient-descent and projection bounds on every certified iteration.
pub fn check_telemetry(run: &Result<ReproRun>) -> CheckResult {
    CheckResult::from_result(
        "framework_telemetry",
        run.as_ref().map_err(Clone::clone).map(|r| {
            let gamma = r.cfg.gamma;
            let mut checked = 0;
            let mut violations = 0;
            let mut flagged = 0;
            for rec in r.outcome.history.iter().filter(|rec| rec.l_used.is_some()) {
                if rec.flagged() {
                    flagged += 1;
                    continue;
                }
                checked += 1;
                let (Some(jr), Some(jg), Some(tr), Some(q), Some(b)) =
                    (rec.j_relaxed, rec.j_gamma, rec.theta_r, rec.q_value, rec.q_bound)
                else {
                    violations += 1;
                    continue;
                };
                if jg - jr > gamma * tr || q > b {
                    violations += 1;
                }
            }
            (
                checked >= 1 && violations == 0,
                format!("{checked} certified iterations, {violations} violations, {flagged} flagged"),
            )
        }),
    )
}

fn budget_note(r: &ReproRun) -> &'static str {
    if r.within_budget {
        ""
    } else {
        ", over the 60 s budget"
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Deterministic two-mode test signals. Index 5m+4 is vertex valued; the
/// others mix smooth waves and steps with weights in [0.02, 0.98].
pub fn structured_signal(grid: &Grid, idx: usize) -> Result<RelaxedSignal> {
    let n = grid.n_cells();
    if idx % 5 == 4 {
        return RelaxedSignal::from_modes(grid.clone(), 2, &vertex_pattern(n, idx));
    }
    let f = idx as f64;
    let t_f = grid.t_f();
    let mut d = Vec::with_capacity(2 * n);
    for c in 0..n {
        let t = grid.midpoint(c) / t_f;
        let wave = 0.5
            + 0.45 * ((1.0 + 0.37 * f) * std::f64::consts::TAU * t + 0.91 * f).sin()
            + 0.03 * ((7.0 + f) * t).cos();
        let step = if (t * (2.0 + (idx % 3) as f64)).fract() < 0.5 { 0.85 } else { 0.2 };
        let w = if idx.is_multiple_of(2) { wave } else { 0.5 * (wave + step) };
        let d1 = w.clamp(0.02, 0.98);
        d.push(d1);
        d.push(1.0 - d1);
    }
    RelaxedSignal::from_weights(grid.clone(), 2, d)
}

/// Mode sequence from a fixed integer hash; always contains both modes
/// when `n >= 2`.
pub fn vertex_pattern(n: usize, idx: usize) -> Vec<usize> {
    let mut state = (idx as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut modes: Vec<usize> = (0..n)
        .map(|_| {
            state ^= state >> 29;
            state = state.wrapping_mul(0xBF58_476D_1CE4_E5B9);
            state ^= state >> 32;
            // Runs of equal modes, like real switching signals.
            usize::from(state % 7 < 3)
        })
        .collect();
    if n >= 2 {
        modes[0] = 0;
        modes[n - 1] = 1;
    }
    modes
}

/// Forward-difference check of `DJ(s; t - s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub dj: f64,
    pub fd: f64,
    pub rel_error: f64,
    /// The difference quotients converge as `lambda -> 0`.
    pub first_order: bool,
}

pub fn gradient_check(
    problem: &SwitchedProblem,
    s: &RelaxedSignal,
    t: &RelaxedSignal,
) -> Result<GradientCheck> {
    let x0 = problem.x0();
    let lin = Linearization::new(problem, s, x0, DEFAULT_SUBSTEPS)?;
    let eta = SignalDirection::between(s, t)?;
    let dj = lin.integrals.directional(&eta)?;
    let fd = |lambda: f64| -> Result<f64> {
        let c = convex_combine(s, t, lambda)?;
        Ok((cost_j(problem, &simulate(problem, &c, x0, DEFAULT_SUBSTEPS)?) - lin.cost) / lambda)
    };
    let scale = dj.abs().max(1.0);
    let q: Vec<f64> = [1e-2, 1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&l| fd(l))
        .collect::<Result<_>>()?;
    let f5 = q[3];
    // The quotients must settle as lambda shrinks: over two decades their
    // successive gaps drop at least tenfold, unless already at rounding
    // level. The limit differs from `dj` by the O(h) gap between the
    // continuous adjoint and the discrete forward map, so it is compared
    // with `dj` separately (`rel_error`).
    let early = (q[0] - q[1]).abs();
    let late = (q[2] - q[3]).abs();
    let first_order = late <= 1e-7 * scale || late <= 0.1 * early;
    Ok(GradientCheck {
        dj,
        fd: f5,
        rel_error: (dj - f5).abs() / scale,
        first_order,
    })
}

/// `min_v DJ(s; v - s)` over every vertex-valued `v` on the grid of `s`.
pub fn brute_force_theta(lin: &Linearization, s: &RelaxedSignal) -> Result<f64> {
    let n = s.n_cells();
    let n_sigma = s.n_sigma();
    let total = n_sigma.pow(n as u32);
    let mut best = f64::INFINITY;
    let mut modes = vec![0usize; n];
    for code in 0..total {
        let mut c = code;
        for m in modes.iter_mut() {
            *m = c % n_sigma;
            c /= n_sigma;
        }
        let v = RelaxedSignal::from_modes(s.grid().clone(), n_sigma, &modes)?;
        let eta = SignalDirection::between(s, &v)?;
        best = best.min(lin.integrals.directional(&eta)?);
    }
    Ok(best)
}

/// Largest per-cell duty-cycle change under `R_k`.
pub fn duty_cycle_error(s: &RelaxedSignal, k: u32) -> Result<f64> {
    let p = project_rk(s, k)?;
    let cells = 1usize << k;
    let t_f = s.grid().t_f();
    let mut worst = 0.0f64;
    for i in 0..cells {
        let a = i as f64 * t_f / cells as f64;
        let b = if i + 1 == cells { t_f } else { (i + 1) as f64 * t_f / cells as f64 };
        let before = s.mode_integrals(a, b);
        let after = p.as_relaxed().mode_integrals(a, b);
        for (x, y) in before.iter().zip(&after) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}

/// RK4 on the single active field, independent of the relaxed-field path.
pub fn direct_mode_integration(
    problem: &SwitchedProblem,
    grid: &Grid,
    modes: &[usize],
    substeps: usize,
) -> Vec<Vec<f64>> {
    let n = problem.n_x();
    let mut x = problem.x0().to_vec();
    let mut out = vec![x.clone()];
    let f = |m: usize, t: f64, x: &[f64]| {
        let mut o = vec![0.0; n];
        problem.eval_mode(m, t, x, &[], &mut o);
        o
    };
    let axpy = |x: &[f64], a: f64, k: &[f64]| -> Vec<f64> {
        x.iter().zip(k).map(|(p, q)| p + a * q).collect()
    };
    for (c, &m) in modes.iter().enumerate() {
        let (lo, _) = grid.cell(c);
        let h = grid.width(c) / substeps as f64;
        for j in 0..substeps {
            let t = lo + j as f64 * h;
            let k1 = f(m, t, &x);
            let k2 = f(m, t + 0.5 * h, &axpy(&x, 0.5 * h, &k1));
            let k3 = f(m, t + 0.5 * h, &axpy(&x, 0.5 * h, &k2));
            let k4 = f(m, t + h, &axpy(&x, h, &k3));
            for i in 0..n {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            out.push(x.clone());
        }
    }
    out
}
