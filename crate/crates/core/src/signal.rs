//! Piecewise-constant relaxed and pure switching signals.
//!
//! A signal stores one row `(d, u)` per grid cell. Solver iterates live on
//! uniform grids; projected pure signals carry their exact pulse edges as
//! cell boundaries, so [`Grid`] accepts any strictly increasing partition.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::validate_simplex_row;

/// Partition `0 = t_0 < t_1 < ... < t_N = t_f` of the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    boundaries: Vec<f64>,
}

impl Grid {
    /// `N` equal cells, `t_i = i * t_f / N`, with the last boundary set to
    /// `t_f` exactly.
    pub fn uniform(t_f: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Grid("cell count must be at least 1".into()));
        }
        if !(t_f > 0.0 && t_f.is_finite()) {
            return Err(Error::Grid(format!("horizon must be positive, got {t_f}")));
        }
        let mut boundaries: Vec<f64> = (0..=n).map(|i| i as f64 * t_f / n as f64).collect();
        boundaries[n] = t_f;
        Ok(Self { boundaries })
    }

    pub fn from_boundaries(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::Grid("need at least two boundaries".into()));
        }
        if boundaries[0] != 0.0 {
            return Err(Error::Grid(format!(
                "grid must start at 0, starts at {}",
                boundaries[0]
            )));
        }
        if boundaries.iter().any(|b| !b.is_finite()) {
            return Err(Error::Grid("non-finite boundary".into()));
        }
        if let Some(w) = boundaries.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::Grid(format!(
                "boundaries not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { boundaries })
    }

    pub fn n_cells(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn t_f(&self) -> f64 {
        *self.boundaries.last().expect("non-empty")
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn cell(&self, i: usize) -> (f64, f64) {
        (self.boundaries[i], self.boundaries[i + 1])
    }

    pub fn width(&self, i: usize) -> f64 {
        self.boundaries[i + 1] - self.boundaries[i]
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        0.5 * (self.boundaries[i] + self.boundaries[i + 1])
    }

    /// Index of the cell containing `t` (half-open cells, last one closed).
    pub fn cell_index(&self, t: f64) -> usize {
        let idx = self.boundaries.partition_point(|&b| b <= t);
        idx.saturating_sub(1).min(self.n_cells() - 1)
    }

    /// Union of both boundary sets. Boundaries closer than `1e-14 * t_f`
    /// are merged.
    pub fn union(&self, other: &Grid) -> Result<Grid> {
        if (self.t_f() - other.t_f()).abs() > 1e-12 * self.t_f().max(1.0) {
            return Err(Error::GridMismatch {
                context: "grids cover different horizons",
            });
        }
        let tol = 1e-14 * self.t_f().max(1.0);
        let mut all: Vec<f64> = self
            .boundaries
            .iter()
            .chain(other.boundaries.iter())
            .copied()
            .collect();
        all.sort_by(f64::total_cmp);
        let t_f = self.t_f();
        let mut merged: Vec<f64> = Vec::with_capacity(all.len());
        for b in all {
            match merged.last() {
                Some(&last) if b - last <= tol => {}
                _ => merged.push(b),
            }
        }
        if let Some(last) = merged.last_mut() {
            *last = t_f;
        }
        if merged.len() >= 2 && merged[merged.len() - 1] - merged[merged.len() - 2] <= tol {
            let n = merged.len();
            merged.remove(n - 2);
        }
        Grid::from_boundaries(merged)
    }
}

/// A simplex-valued switching signal `d` with an optional continuous
/// input `u`, constant on every grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSignal {
    grid: Grid,
    n_sigma: usize,
    n_u: usize,
    d: Vec<f64>,
    u: Vec<f64>,
}

impl RelaxedSignal {
    /// `d` and `u` are row-major (`n_cells x n_sigma`, `n_cells x n_u`).
    pub fn new(grid: Grid, n_sigma: usize, d: Vec<f64>, n_u: usize, u: Vec<f64>) -> Result<Self> {
        let n = grid.n_cells();
        if n_sigma == 0 {
            return Err(Error::InvalidArgument("mode count must be at least 1".into()));
        }
        if d.len() != n * n_sigma {
            return Err(Error::Dimension {
                context: "switching weights",
                expected: n * n_sigma,
                got: d.len(),
            });
        }
        if u.len() != n * n_u {
            return Err(Error::Dimension {
                context: "continuous inputs",
                expected: n * n_u,
                got: u.len(),
            });
        }
        for row in d.chunks_exact(n_sigma) {
            validate_simplex_row(row)?;
        }
        Ok(Self {
            grid,
            n_sigma,
            n_u,
            d,
            u,
        })
    }

    /// Switching-only signal (no continuous input).
    pub fn from_weights(grid: Grid, n_sigma: usize, d: Vec<f64>) -> Result<Self> {
        Self::new(grid, n_sigma, d, 0, Vec::new())
    }

    pub fn constant(grid: Grid, row: &[f64]) -> Result<Self> {
        let d = row
            .iter()
            .copied()
            .cycle()
            .take(row.len() * grid.n_cells())
            .collect();
        Self::from_weights(grid, row.len(), d)
    }

    /// Vertex-valued signal from a mode index per cell.
    pub fn from_modes(grid: Grid, n_sigma: usize, modes: &[usize]) -> Result<Self> {
        if modes.len() != grid.n_cells() {
            return Err(Error::Dimension {
                context: "mode sequence",
                expected: grid.n_cells(),
                got: modes.len(),
            });
        }
        let mut d = vec![0.0; modes.len() * n_sigma];
        for (c, &m) in modes.iter().enumerate() {
            if m >= n_sigma {
                return Err(Error::InvalidArgument(format!(
                    "mode {m} out of range for {n_sigma} modes"
                )));
            }
            d[c * n_sigma + m] = 1.0;
        }
        Self::from_weights(grid, n_sigma, d)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    pub fn n_sigma(&self) -> usize {
        self.n_sigma
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn d_row(&self, cell: usize) -> &[f64] {
        &self.d[cell * self.n_sigma..(cell + 1) * self.n_sigma]
    }

    pub fn u_row(&self, cell: usize) -> &[f64] {
        &self.u[cell * self.n_u..(cell + 1) * self.n_u]
    }

    pub fn weights(&self) -> &[f64] {
        &self.d
    }

    pub fn inputs(&self) -> &[f64] {
        &self.u
    }

    /// Exact `int_a^b d_i dt` for every mode.
    pub fn mode_integrals(&self, a: f64, b: f64) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_sigma];
        if b <= a {
            return acc;
        }
        let first = self.grid.cell_index(a);
        for c in first..self.n_cells() {
            let (lo, hi) = self.grid.cell(c);
            if lo >= b {
                break;
            }
            let overlap = hi.min(b) - lo.max(a);
            if overlap > 0.0 {
                for (s, w) in acc.iter_mut().zip(self.d_row(c)) {
                    *s += w * overlap;
                }
            }
        }
        acc
    }

    fn input_integrals(&self, a: f64, b: f64) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_u];
        let first = self.grid.cell_index(a);
        for c in first..self.n_cells() {
            let (lo, hi) = self.grid.cell(c);
            if lo >= b {
                break;
            }
            let overlap = hi.min(b) - lo.max(a);
            if overlap > 0.0 {
                for (s, w) in acc.iter_mut().zip(self.u_row(c)) {
                    *s += w * overlap;
                }
            }
        }
        acc
    }

    /// Averages the signal over each cell of `grid` (duty-cycle averaging).
    /// Exact when every target cell lies inside one source cell.
    pub fn resample(&self, grid: &Grid) -> Result<RelaxedSignal> {
        if (grid.t_f() - self.grid.t_f()).abs() > 1e-12 * self.grid.t_f().max(1.0) {
            return Err(Error::GridMismatch {
                context: "resample onto a different horizon",
            });
        }
        let n = grid.n_cells();
        let mut d = Vec::with_capacity(n * self.n_sigma);
        let mut u = Vec::with_capacity(n * self.n_u);
        for c in 0..n {
            let (a, b) = grid.cell(c);
            let src = self.grid.cell_index(0.5 * (a + b));
            let (sa, sb) = self.grid.cell(src);
            if sa <= a && b <= sb {
                d.extend_from_slice(self.d_row(src));
                u.extend_from_slice(self.u_row(src));
                continue;
            }
            let w = b - a;
            let mut row: Vec<f64> = self.mode_integrals(a, b).iter().map(|v| v / w).collect();
            normalize_row(&mut row);
            d.extend(row);
            u.extend(self.input_integrals(a, b).iter().map(|v| v / w));
        }
        RelaxedSignal::new(grid.clone(), self.n_sigma, d, self.n_u, u)
    }

    fn check_same_layout(&self, other: &RelaxedSignal, context: &'static str) -> Result<()> {
        if self.grid != other.grid || self.n_sigma != other.n_sigma || self.n_u != other.n_u {
            return Err(Error::GridMismatch { context });
        }
        Ok(())
    }
}

/// Clamps tiny negative weights and renormalizes so the row sums to 1.
fn normalize_row(row: &mut [f64]) {
    for v in row.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let s: f64 = row.iter().sum();
    if s > 0.0 {
        row.iter_mut().for_each(|v| *v /= s);
    }
}

/// A relaxed signal whose every row is a simplex vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct PureSignal(RelaxedSignal);

impl PureSignal {
    pub const DEFAULT_TOL: f64 = 1e-9;

    /// Validates vertex rows within `tol` and snaps them to exact vertices.
    pub fn from_relaxed(s: RelaxedSignal, tol: f64) -> Result<Self> {
        let mut s = s;
        let n_sigma = s.n_sigma;
        for c in 0..s.n_cells() {
            let row = &mut s.d[c * n_sigma..(c + 1) * n_sigma];
            let Some(m) = nearest_vertex(row, tol) else {
                return Err(Error::Simplex {
                    row: row.to_vec(),
                    reason: "row is not a simplex vertex".into(),
                });
            };
            row.iter_mut().enumerate().for_each(|(i, v)| {
                *v = if i == m { 1.0 } else { 0.0 };
            });
        }
        Ok(Self(s))
    }

    pub fn from_modes(grid: Grid, n_sigma: usize, modes: &[usize]) -> Result<Self> {
        Ok(Self(RelaxedSignal::from_modes(grid, n_sigma, modes)?))
    }

    pub fn as_relaxed(&self) -> &RelaxedSignal {
        &self.0
    }

    pub fn into_relaxed(self) -> RelaxedSignal {
        self.0
    }

    pub fn grid(&self) -> &Grid {
        self.0.grid()
    }

    /// Active mode in `cell`.
    pub fn mode(&self, cell: usize) -> usize {
        self.0
            .d_row(cell)
            .iter()
            .position(|&v| v == 1.0)
            .expect("pure rows are exact vertices")
    }

    pub fn modes(&self) -> Vec<usize> {
        (0..self.0.n_cells()).map(|c| self.mode(c)).collect()
    }
}

impl AsRef<RelaxedSignal> for PureSignal {
    fn as_ref(&self) -> &RelaxedSignal {
        &self.0
    }
}

fn nearest_vertex(row: &[f64], tol: f64) -> Option<usize> {
    let m = row
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > row[best] { i } else { best });
    let off: f64 = row
        .iter()
        .enumerate()
        .map(|(i, &v)| if i == m { (1.0 - v).abs() } else { v.abs() })
        .fold(0.0, f64::max);
    (off <= tol).then_some(m)
}

/// Difference of two signals on the same grid, `eta = target - base`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalDirection {
    grid: Grid,
    n_sigma: usize,
    d: Vec<f64>,
}

impl SignalDirection {
    pub fn between(base: &RelaxedSignal, target: &RelaxedSignal) -> Result<Self> {
        base.check_same_layout(target, "direction between signals")?;
        Ok(Self {
            grid: base.grid.clone(),
            n_sigma: base.n_sigma,
            d: target.d.iter().zip(&base.d).map(|(t, b)| t - b).collect(),
        })
    }

    pub fn zero(grid: Grid, n_sigma: usize) -> Self {
        let n = grid.n_cells();
        Self {
            grid,
            n_sigma,
            d: vec![0.0; n * n_sigma],
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            n_sigma: self.n_sigma,
            d: self.d.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_sigma(&self) -> usize {
        self.n_sigma
    }

    pub fn row(&self, cell: usize) -> &[f64] {
        &self.d[cell * self.n_sigma..(cell + 1) * self.n_sigma]
    }

    pub fn l2_norm(&self) -> f64 {
        l2_rows(&self.grid, self.n_sigma, &self.d, 0, &[])
    }
}

fn l2_rows(grid: &Grid, n_sigma: usize, d: &[f64], n_u: usize, u: &[f64]) -> f64 {
    (0..grid.n_cells())
        .map(|c| {
            let dd: f64 = d[c * n_sigma..(c + 1) * n_sigma].iter().map(|v| v * v).sum();
            let uu: f64 = u[c * n_u..(c + 1) * n_u].iter().map(|v| v * v).sum();
            (dd + uu) * grid.width(c)
        })
        .sum::<f64>()
        .sqrt()
}

/// Exact L2 norm of the piecewise-constant function `t -> (d(t), u(t))`.
pub fn l2_norm(s: &RelaxedSignal) -> f64 {
    l2_rows(&s.grid, s.n_sigma, &s.d, s.n_u, &s.u)
}

pub fn is_pure(s: &RelaxedSignal, tol: f64) -> bool {
    (0..s.n_cells()).all(|c| nearest_vertex(s.d_row(c), tol).is_some())
}

/// Rowwise `(1 - lambda) a + lambda b`.
pub fn convex_combine(a: &RelaxedSignal, b: &RelaxedSignal, lambda: f64) -> Result<RelaxedSignal> {
    a.check_same_layout(b, "convex combination")?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "combination weight {lambda} outside [0, 1]"
        )));
    }
    let mix = |x: &[f64], y: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(y)
            .map(|(p, q)| (1.0 - lambda) * p + lambda * q)
            .collect()
    };
    Ok(RelaxedSignal {
        grid: a.grid.clone(),
        n_sigma: a.n_sigma,
        n_u: a.n_u,
        d: mix(&a.d, &b.d),
        u: mix(&a.u, &b.u),
    })
}

/// Max over cells of the Euclidean distance between rows.
pub fn signal_sup_distance(a: &RelaxedSignal, b: &RelaxedSignal) -> Result<f64> {
    a.check_same_layout(b, "sup distance")?;
    Ok((0..a.n_cells())
        .map(|c| {
            let dd: f64 = a
                .d_row(c)
                .iter()
                .zip(b.d_row(c))
                .map(|(p, q)| (p - q) * (p - q))
                .sum();
            let uu: f64 = a
                .u_row(c)
                .iter()
                .zip(b.u_row(c))
                .map(|(p, q)| (p - q) * (p - q))
                .sum();
            (dd + uu).sqrt()
        })
        .fold(0.0, f64::max))
}

/// Switch time of the reference initial signal: the 50th boundary of a
/// 64-cell grid over `[0, 2]`.
pub const EXAMPLE_SWITCH_TIME: f64 = 2.0 * 49.0 / 64.0;

/// Mode 1 on cells whose midpoint is at most `t_switch`, mode 2 after.
pub fn initial_signal_switch(grid: &Grid, t_switch: f64) -> Result<PureSignal> {
    let modes: Vec<usize> = (0..grid.n_cells())
        .map(|c| usize::from(grid.midpoint(c) > t_switch))
        .collect();
    PureSignal::from_modes(grid.clone(), 2, &modes)
}

/// The reference initial signal on a grid over `[0, 2]`.
pub fn initial_signal_paper(grid: &Grid) -> Result<PureSignal> {
    if (grid.t_f() - 2.0).abs() > 1e-12 {
        return Err(Error::Grid(format!(
            "initial signal is defined on [0, 2], grid ends at {}",
            grid.t_f()
        )));
    }
    if grid.n_cells() < 64 {
        return Err(Error::Grid(format!(
            "initial signal needs at least 64 cells, got {}",
            grid.n_cells()
        )));
    }
    initial_signal_switch(grid, EXAMPLE_SWITCH_TIME)
}

/// Writes `t_start,t_end,d_1..d_n,u_1..u_m`, one row per cell.
pub fn write_signal_csv<W: Write>(s: &RelaxedSignal, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t_start".to_string(), "t_end".to_string()];
    header.extend((1..=s.n_sigma).map(|i| format!("d_{i}")));
    header.extend((1..=s.n_u).map(|i| format!("u_{i}")));
    w.write_record(&header)?;
    for c in 0..s.n_cells() {
        let (a, b) = s.grid.cell(c);
        let mut rec = vec![a.to_string(), b.to_string()];
        rec.extend(s.d_row(c).iter().map(f64::to_string));
        rec.extend(s.u_row(c).iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the format of [`write_signal_csv`]. Cells must be contiguous.
pub fn read_signal_csv<R: Read>(input: R) -> Result<RelaxedSignal> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.len() < 3 || &header[0] != "t_start" || &header[1] != "t_end" {
        return Err(Error::Csv(
            "expected header t_start,t_end,d_1,...".into(),
        ));
    }
    let n_sigma = header.iter().filter(|h| h.starts_with("d_")).count();
    let n_u = header.iter().filter(|h| h.starts_with("u_")).count();
    if n_sigma == 0 || 2 + n_sigma + n_u != header.len() {
        return Err(Error::Csv(format!("unrecognized columns: {header:?}")));
    }
    let mut boundaries = vec![];
    let mut d = vec![];
    let mut u = vec![];
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec[i].trim().parse::<f64>().map_err(|e| {
                Error::Csv(format!("row {}: column {}: {e}", line + 2, &header[i]))
            })
        };
        let (a, b) = (parse(0)?, parse(1)?);
        match boundaries.last() {
            None => boundaries.push(a),
            Some(&prev) if prev != a => {
                return Err(Error::Csv(format!(
                    "row {}: cell starts at {a} but previous cell ended at {prev}",
                    line + 2
                )))
            }
            _ => {}
        }
        boundaries.push(b);
        for i in 0..n_sigma {
            d.push(parse(2 + i)?);
        }
        for i in 0..n_u {
            u.push(parse(2 + n_sigma + i)?);
        }
    }
    let grid = Grid::from_boundaries(boundaries)?;
    RelaxedSignal::new(grid, n_sigma, d, n_u, u)
}
