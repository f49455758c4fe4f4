//! Frequency-modulation projection of relaxed signals onto pure ones.
//!
//! The horizon is split into `2^k` equal cells. With two modes, each cell
//! `[tau, tau + delta)` becomes mode 2 on `[tau, T1)`, mode 1 on the
//! centered pulse `[T1, T2)` and mode 2 on `[T2, tau + delta)`, where
//!
//! ```text
//! T1 = tau + (1/2) int_cell d_2 dt,   T2 = T1 + int_cell d_1 dt.
//! ```
//!
//! With more modes the cell is filled by consecutive runs of length
//! `int_cell d_i dt` in mode order. Either way every cell keeps its duty
//! cycles, and pulse edges become boundaries of the output grid.

use crate::error::{Error, Result};
use crate::model::SwitchedProblem;
use crate::signal::{Grid, PureSignal, RelaxedSignal};
use crate::sim::simulate;
use crate::solver::{QEvaluator, SolverConfig};
use crate::topology::{topo_distance, TopologyKind};

/// Smallest admissible projection cell width.
pub const MIN_CELL_WIDTH: f64 = 1e-12;

pub fn projection_cell_count(k: u32) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidArgument("projection order k must be at least 1".into()));
    }
    if k >= 48 {
        return Err(Error::ProjectionTooFine { k, width: 0.0 });
    }
    Ok(1usize << k)
}

/// `R_k(s)`.
pub fn project_rk(s: &RelaxedSignal, k: u32) -> Result<PureSignal> {
    let cells = projection_cell_count(k)?;
    let t_f = s.grid().t_f();
    let width = t_f / cells as f64;
    if width < MIN_CELL_WIDTH {
        return Err(Error::ProjectionTooFine { k, width });
    }
    let n_sigma = s.n_sigma();
    let n_u = s.n_u();

    let mut boundaries = vec![0.0];
    let mut d = Vec::new();
    let mut u = Vec::new();
    let mut last_mode: Option<usize> = None;
    let mut push = |end: f64, mode: usize, u_avg: &[f64], boundaries: &mut Vec<f64>, floor: usize| {
        if end <= *boundaries.last().expect("non-empty") {
            return;
        }
        // Runs of one mode within a cell are merged. Merging across cells
        // would hide the 2^k partition, so cell edges always stay.
        let n = boundaries.len();
        if last_mode == Some(mode) && n > floor {
            boundaries[n - 1] = end;
            return;
        }
        boundaries.push(end);
        d.extend((0..n_sigma).map(|i| if i == mode { 1.0 } else { 0.0 }));
        u.extend_from_slice(u_avg);
        last_mode = Some(mode);
    };

    for i in 0..cells {
        let start = i as f64 * t_f / cells as f64;
        let end = if i + 1 == cells {
            t_f
        } else {
            (i + 1) as f64 * t_f / cells as f64
        };
        let floor = boundaries.len();
        let duty = s.mode_integrals(start, end);
        let u_avg = cell_input_average(s, start, end);
        if n_sigma == 2 {
            let t1 = (start + 0.5 * duty[1]).min(end);
            let t2 = (t1 + duty[0]).min(end);
            push(t1, 1, &u_avg, &mut boundaries, floor);
            push(t2, 0, &u_avg, &mut boundaries, floor);
            push(end, 1, &u_avg, &mut boundaries, floor);
        } else {
            let mut t = start;
            let last_active = duty.iter().rposition(|&v| v > 0.0).unwrap_or(n_sigma - 1);
            for (mode, &len) in duty.iter().enumerate() {
                let next = if mode == last_active { end } else { (t + len).min(end) };
                push(next, mode, &u_avg, &mut boundaries, floor);
                t = next;
                if mode == last_active {
                    break;
                }
            }
        }
    }
    let grid = Grid::from_boundaries(boundaries)?;
    let out = RelaxedSignal::new(grid, n_sigma, d, n_u, u)?;
    PureSignal::from_relaxed(out, 0.0)
}

fn cell_input_average(s: &RelaxedSignal, a: f64, b: f64) -> Vec<f64> {
    if s.n_u() == 0 {
        return Vec::new();
    }
    let mut acc = vec![0.0; s.n_u()];
    for c in 0..s.n_cells() {
        let (lo, hi) = s.grid().cell(c);
        let overlap = hi.min(b) - lo.max(a);
        if overlap > 0.0 {
            for (v, x) in acc.iter_mut().zip(s.u_row(c)) {
                *v += x * overlap;
            }
        }
    }
    acc.iter().map(|v| v / (b - a)).collect()
}

/// Puts both signals on the union of their grids.
pub fn common_refinement(
    a: &RelaxedSignal,
    b: &RelaxedSignal,
) -> Result<(RelaxedSignal, RelaxedSignal)> {
    let grid = a.grid().union(b.grid())?;
    Ok((a.resample(&grid)?, b.resample(&grid)?))
}

/// `||g(R_k(s)) - g(s)||_Y`, both simulated on their common refinement.
pub fn projection_error(
    problem: &SwitchedProblem,
    s: &RelaxedSignal,
    k: u32,
    kind: TopologyKind,
    x0: &[f64],
    substeps: usize,
) -> Result<f64> {
    let projected = project_rk(s, k)?;
    let (a, b) = common_refinement(s, projected.as_relaxed())?;
    let ta = simulate(problem, &a, x0, substeps)?;
    let tb = simulate(problem, &b, x0, substeps)?;
    topo_distance(kind, &ta, &tb)
}

/// Result of the `k` scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KChoice {
    pub k: u32,
    pub q: f64,
    pub bound: f64,
}

/// Right-hand side `(omega - 1) * gamma * theta_p` of the projection
/// sufficient-decrease bound.
pub fn q_bound(omega: f64, gamma: f64, theta_p: f64) -> f64 {
    (omega - 1.0) * gamma * theta_p
}

/// Smallest `k` in `[k_min, k_max]` with `q(k) <= bound`. When none
/// qualifies, the error carries the best `(k, Q)` seen.
pub fn scan_k<F>(k_min: u32, k_max: u32, bound: f64, mut q: F) -> Result<KChoice>
where
    F: FnMut(u32) -> Result<f64>,
{
    let mut best: Option<(u32, f64)> = None;
    for k in k_min..=k_max {
        let qk = q(k)?;
        if qk <= bound {
            return Ok(KChoice { k, q: qk, bound });
        }
        if best.is_none_or(|(_, bq)| qk < bq) {
            best = Some((k, qk));
        }
    }
    let (best_k, best_q) = best.unwrap_or((k_max, f64::INFINITY));
    Err(Error::KNotFound {
        k_min,
        k_max,
        bound,
        best_k,
        best_q,
    })
}

/// Picks the projection order for the iterate `s` with `theta_p(s) < 0`.
pub fn adapt_k(
    problem: &SwitchedProblem,
    s: &RelaxedSignal,
    theta_p: f64,
    cfg: &SolverConfig,
) -> Result<KChoice> {
    if !(theta_p < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "adapt_k needs theta_p < 0, got {theta_p}"
        )));
    }
    let mut q = QEvaluator::new(problem, s, cfg)?;
    let bound = q_bound(cfg.omega, cfg.gamma, theta_p);
    scan_k(cfg.k0, cfg.k_max, bound, |k| q.q(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::paper_example;

    fn per_cell_duty(s: &RelaxedSignal, k: u32) -> Vec<Vec<f64>> {
        let n = 1usize << k;
        let t_f = s.grid().t_f();
        (0..n)
            .map(|i| s.mode_integrals(i as f64 * t_f / n as f64, (i + 1) as f64 * t_f / n as f64))
            .collect()
    }

    #[test]
    fn half_duty_k1_gives_centered_pulses() {
        let s = RelaxedSignal::constant(Grid::uniform(2.0, 4).unwrap(), &[0.5, 0.5]).unwrap();
        let p = project_rk(&s, 1).unwrap();
        assert_eq!(
            p.grid().boundaries(),
            &[0.0, 0.25, 0.75, 1.0, 1.25, 1.75, 2.0]
        );
        assert_eq!(p.modes(), vec![1, 0, 1, 1, 0, 1]);
    }

    #[test]
    fn full_duty_fills_cells() {
        let s = RelaxedSignal::constant(Grid::uniform(2.0, 4).unwrap(), &[1.0, 0.0]).unwrap();
        let p = project_rk(&s, 3).unwrap();
        assert!(p.modes().iter().all(|&m| m == 0));
        assert_eq!(p.grid().n_cells(), 8);
    }

    #[test]
    fn aligned_pure_signal_keeps_durations() {
        let g = Grid::uniform(2.0, 8).unwrap();
        let s = RelaxedSignal::from_modes(g, 2, &[0, 1, 1, 0, 0, 0, 1, 0]).unwrap();
        let p = project_rk(&s, 3).unwrap();
        let a = per_cell_duty(&s, 3);
        let b = per_cell_duty(p.as_relaxed(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert!((x[0] - y[0]).abs() <= 1e-12);
        }
        assert_eq!(p.modes(), vec![0, 1, 1, 0, 0, 0, 1, 0]);
    }

    #[test]
    fn three_modes_are_sequential() {
        let s =
            RelaxedSignal::constant(Grid::uniform(1.0, 2).unwrap(), &[0.25, 0.5, 0.25]).unwrap();
        let p = project_rk(&s, 1).unwrap();
        assert_eq!(p.modes(), vec![0, 1, 2, 0, 1, 2]);
        let b = p.grid().boundaries();
        assert!((b[1] - 0.125).abs() < 1e-15 && (b[2] - 0.375).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_orders() {
        let s = RelaxedSignal::constant(Grid::uniform(2.0, 4).unwrap(), &[0.5, 0.5]).unwrap();
        assert!(matches!(project_rk(&s, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            project_rk(&s, 42),
            Err(Error::ProjectionTooFine { .. })
        ));
    }

    #[test]
    fn aligned_projection_error_vanishes() {
        let p = paper_example();
        let g = Grid::uniform(2.0, 16).unwrap();
        let modes: Vec<usize> = (0..16).map(|c| usize::from(c >= 11)).collect();
        let s = RelaxedSignal::from_modes(g, 2, &modes).unwrap();
        for kind in [TopologyKind::TerminalState, TopologyKind::FullTrajectory] {
            let e = projection_error(&p, &s, 4, kind, &[0.0, 0.0], 4).unwrap();
            assert!(e <= 1e-9, "{kind}: {e}");
        }
    }

    #[test]
    fn scan_takes_first_hit() {
        let c = scan_k(3, 6, 0.5, |k| Ok(1.0 / k as f64)).unwrap();
        assert_eq!(c.k, 3);
        let c = scan_k(1, 6, 0.3, |k| Ok(1.0 / k as f64)).unwrap();
        assert_eq!(c.k, 4);
        match scan_k(1, 3, 0.01, |k| Ok(1.0 / k as f64)) {
            Err(Error::KNotFound { best_k, .. }) => assert_eq!(best_k, 3),
            other => panic!("{other:?}"),
        }
        assert!((q_bound(0.5, 0.01, -0.1) - 5e-4).abs() < 1e-18);
    }
}
