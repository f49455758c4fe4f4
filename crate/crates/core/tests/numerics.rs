use std::sync::Arc;

use switchopt::adjoint::{optimality_theta, Linearization};
use switchopt::model::{
    paper_example, ClosureField, HalfSquaredDistance, ModeField, SwitchedProblem, ZeroCost,
};
use switchopt::project::{adapt_k, scan_k};
use switchopt::signal::{
    initial_signal_paper, read_signal_csv, write_signal_csv, Grid, PureSignal, RelaxedSignal,
};
use switchopt::sim::{cost_j, simulate};
use switchopt::solver::{gamma_r, oracle_enumerate, solve, write_history_csv, SolverConfig, Status};
use switchopt::topology::TopologyKind;
use switchopt::verify::{brute_force_theta, gradient_check, structured_signal};
use switchopt::Error;

/// Mode 1 is `x' = -x^2`, mode 2 is `x' = 0`: under weight `a` on mode 1
/// the solution is `x0 / (1 + a x0 t)`.
fn decay_problem() -> SwitchedProblem {
    let decay: Arc<dyn ModeField> = Arc::new(ClosureField::new(
        |_, x: &[f64], _, out: &mut [f64]| out[0] = -x[0] * x[0],
        |_, x: &[f64], _, out: &mut [f64]| out[0] = -2.0 * x[0],
    ));
    let hold: Arc<dyn ModeField> = Arc::new(ClosureField::new(
        |_, _: &[f64], _, out: &mut [f64]| out[0] = 0.0,
        |_, _: &[f64], _, out: &mut [f64]| out[0] = 0.0,
    ));
    SwitchedProblem::new(
        "decay",
        vec![1.0],
        1.0,
        vec![decay, hold],
        Arc::new(HalfSquaredDistance { target: vec![0.6] }),
    )
    .unwrap()
}

#[test]
fn rk4_is_fourth_order_on_a_smooth_system() {
    let p = decay_problem();
    let a = 0.7;
    let s = RelaxedSignal::constant(Grid::uniform(1.0, 4).unwrap(), &[a, 1.0 - a]).unwrap();
    let exact = 1.0 / (1.0 + a);
    let err = |m| (simulate(&p, &s, &[1.0], m).unwrap().terminal_state()[0] - exact).abs();
    for m in [1, 2, 4] {
        let ratio = err(m) / err(2 * m);
        assert!((8.0..=32.0).contains(&ratio), "M = {m}: ratio {ratio}");
    }
}

#[test]
fn adjoint_gradient_matches_finite_differences() {
    let grid = Grid::uniform(2.0, 64).unwrap();
    let p = paper_example();
    for i in 0..6 {
        let s = structured_signal(&grid, 2 * i).unwrap();
        let t = structured_signal(&grid, 2 * i + 1).unwrap();
        let g = gradient_check(&p, &s, &t).unwrap();
        assert!(g.rel_error <= 1e-3, "pair {i}: {g:?}");
        assert!(g.first_order, "pair {i}: {g:?}");
    }
    let p = decay_problem();
    let grid = Grid::uniform(1.0, 16).unwrap();
    let s = RelaxedSignal::constant(grid.clone(), &[0.3, 0.7]).unwrap();
    let t = RelaxedSignal::from_modes(grid, 2, &[0, 1].repeat(8)).unwrap();
    let g = gradient_check(&p, &s, &t).unwrap();
    assert!(g.rel_error <= 1e-4, "{g:?}");
}

#[test]
fn theta_matches_exhaustive_vertex_search() {
    let p = paper_example();
    let grid = Grid::uniform(2.0, 8).unwrap();
    for i in 0..6 {
        let s = structured_signal(&grid, i).unwrap();
        let lin = Linearization::new(&p, &s, &[0.0, 0.0], 4).unwrap();
        let th = lin.theta().unwrap().theta;
        let brute = brute_force_theta(&lin, &s).unwrap();
        assert!((th - brute).abs() <= 1e-9 * brute.abs().max(1.0), "{i}: {th} vs {brute}");
        assert!(th <= 0.0);
    }
}

#[test]
fn theta_is_zero_for_a_constant_cost() {
    let p = paper_example().with_cost(Arc::new(ZeroCost));
    let s = initial_signal_paper(&Grid::uniform(2.0, 64).unwrap()).unwrap();
    let th = optimality_theta(&p, s.as_relaxed(), &[0.0, 0.0], 4).unwrap();
    assert_eq!(th.theta, 0.0);
    let out = solve(&p, &[0.0, 0.0], &s, &SolverConfig { n: 64, ..SolverConfig::default() }).unwrap();
    assert_eq!(out.status, Status::Stationary);
    assert_eq!(out.history.len(), 1);
}

#[test]
fn gamma_r_descends_monotonically() {
    let p = paper_example();
    let cfg = SolverConfig { n: 64, ..SolverConfig::default() };
    let grid = Grid::uniform(2.0, 64).unwrap();
    for i in [0, 3, 7] {
        let s = structured_signal(&grid, i).unwrap();
        let g = gamma_r(&p, &[0.0, 0.0], &s, &cfg).unwrap();
        assert!(g.l <= cfg.l_max);
        assert_eq!(g.costs.len(), g.l + 1);
        for w in g.costs.windows(2) {
            assert!(w[1] <= w[0], "{:?}", g.costs);
        }
        if g.certified && g.theta < 0.0 {
            assert!(g.j_end - g.j_start <= cfg.gamma * g.theta + 1e-12);
        }
        for &lam in &g.lambdas {
            assert!(lam > 0.0 && lam <= 1.0);
        }
    }
}

#[test]
fn scan_k_picks_the_smallest_qualifying_order() {
    let q = |k: u32| Ok(1.0 / f64::from(k));
    assert_eq!(scan_k(1, 10, 0.3, q).unwrap().k, 4);
    match scan_k(1, 3, 0.1, q) {
        Err(Error::KNotFound { best_k, .. }) => assert_eq!(best_k, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn larger_omega_never_picks_a_coarser_projection() {
    let p = decay_problem();
    let grid = Grid::uniform(1.0, 16).unwrap();
    let s = RelaxedSignal::constant(grid, &[0.5, 0.5]).unwrap();
    let theta = optimality_theta(&p, &s, &[1.0], 4).unwrap().theta;
    assert!(theta < 0.0);
    let mut prev: Option<Option<u32>> = None;
    for omega in [0.05, 0.2, 0.4, 0.6, 0.8, 0.95] {
        let cfg = SolverConfig { omega, n: 16, k0: 1, k_max: 12, ..SolverConfig::default() };
        let k = adapt_k(&p, &s, theta, &cfg).ok().map(|c| c.k);
        if let Some(prev) = prev {
            match (prev, k) {
                (Some(a), Some(b)) => assert!(a <= b, "omega {omega}: {a} then {b}"),
                (None, Some(b)) => panic!("omega {omega} found k = {b} where a looser bound failed"),
                _ => {}
            }
        }
        prev = Some(k);
    }
}

#[test]
fn oracle_reaches_the_target_on_a_coarse_grid() {
    let p = paper_example();
    let (best, j) = oracle_enumerate(&p, &[0.0, 0.0], &Grid::uniform(2.0, 8).unwrap(), 4).unwrap();
    assert!(j < 1e-9, "J = {j}");
    assert_eq!(best.modes(), vec![0, 0, 1, 1, 1, 1, 0, 0]);
    let too_big = oracle_enumerate(&p, &[0.0, 0.0], &Grid::uniform(2.0, 40).unwrap(), 4);
    assert!(matches!(too_big, Err(Error::EnumerationBudget { .. })));
}

#[test]
fn initial_signal_lands_near_the_published_start() {
    let p = paper_example();
    let s = initial_signal_paper(&Grid::uniform(2.0, 256).unwrap()).unwrap();
    let traj = simulate(&p, s.as_relaxed(), &[0.0, 0.0], 4).unwrap();
    let x = traj.terminal_state();
    assert!((x[0] - 3.0625).abs() < 1e-3 && (x[1] - 0.879).abs() < 1e-3, "{x:?}");
    assert!((cost_j(&p, &traj) - 1.1228).abs() < 1e-3);
}

#[test]
fn solve_is_deterministic() {
    let p = paper_example();
    let s0 = initial_signal_paper(&Grid::uniform(2.0, 256).unwrap()).unwrap();
    let cfg = SolverConfig { topology: TopologyKind::FullTrajectory, ..SolverConfig::default() };
    let run = || {
        let out = solve(&p, &[0.0, 0.0], &s0, &cfg).unwrap();
        let mut buf = Vec::new();
        write_history_csv(&out.history, &mut buf, true).unwrap();
        let mut sig = Vec::new();
        write_signal_csv(out.solution.as_relaxed(), &mut sig).unwrap();
        (out.status, buf, sig)
    };
    let a = run();
    assert_eq!(a, run());
    assert_eq!(a.0, Status::Stalled);
}

#[test]
fn signal_csv_round_trips() {
    let grid = Grid::from_boundaries(vec![0.0, 0.125, 0.5, 1.0 / 3.0 + 0.5, 2.0]).unwrap();
    let s = RelaxedSignal::from_weights(grid, 2, vec![0.1, 0.9, 1.0, 0.0, 0.3, 0.7, 0.0, 1.0]).unwrap();
    let mut buf = Vec::new();
    write_signal_csv(&s, &mut buf).unwrap();
    let back = read_signal_csv(buf.as_slice()).unwrap();
    assert_eq!(back, s);
    assert!(PureSignal::from_relaxed(back, 1e-9).is_err());
    assert!(read_signal_csv("t0,t1,d1,d2\n0,1,0.5,0.6\n".as_bytes()).is_err());
}
