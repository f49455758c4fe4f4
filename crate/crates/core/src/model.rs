//! Switched-system problem instances.
//!
//! A [`SwitchedProblem`] bundles the mode vector fields, their state
//! Jacobians, a terminal cost and an optional list of state constraints
//! `h_j(x) <= 0`. The relaxed dynamics are the convex combination
//! `sum_i d_i f_i(t, x, u)` with `d` on the probability simplex.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Absolute tolerance on `sum_i d_i = 1` and on the `[0, 1]` box.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A mode vector field `f_i(t, x, u)` together with its state Jacobian.
pub trait ModeField: Send + Sync {
    fn eval(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]);

    /// Writes `df/dx` row-major (`out[r * n_x + c] = d f_r / d x_c`).
    fn jacobian(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]);
}

/// Gradient of the terminal cost, with a flag raised when the cost is
/// not differentiable at the evaluation point and a convention was used.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGradient {
    pub grad: Vec<f64>,
    pub kink: bool,
}

pub trait TerminalCost: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> CostGradient;
}

/// A scalar state constraint `h_j(x) <= 0`.
pub trait StateConstraint: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
}

impl<F> StateConstraint for F
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn value(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// `h(x) = ||x - target||_2`. The gradient at `x = target` is declared zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanDistance {
    pub target: Vec<f64>,
}

impl TerminalCost for EuclideanDistance {
    fn value(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    fn gradient(&self, x: &[f64]) -> CostGradient {
        let dist = self.value(x);
        if dist == 0.0 {
            return CostGradient {
                grad: vec![0.0; x.len()],
                kink: true,
            };
        }
        CostGradient {
            grad: x
                .iter()
                .zip(&self.target)
                .map(|(a, b)| (a - b) / dist)
                .collect(),
            kink: false,
        }
    }
}

/// `h(x) = ||x - target||^2 / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSquaredDistance {
    pub target: Vec<f64>,
}

impl TerminalCost for HalfSquaredDistance {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .zip(&self.target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> CostGradient {
        CostGradient {
            grad: x.iter().zip(&self.target).map(|(a, b)| a - b).collect(),
            kink: false,
        }
    }
}

/// `h(x) = 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ZeroCost;

impl TerminalCost for ZeroCost {
    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn gradient(&self, x: &[f64]) -> CostGradient {
        CostGradient {
            grad: vec![0.0; x.len()],
            kink: false,
        }
    }
}

/// One branch of a piecewise scalar function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    /// `slope * s + offset`
    Affine { slope: f64, offset: f64 },
    /// `numerator / (pole - s)`
    Reciprocal { numerator: f64, pole: f64 },
}

impl Piece {
    pub fn constant(c: f64) -> Self {
        Piece::Affine {
            slope: 0.0,
            offset: c,
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        match *self {
            Piece::Affine { slope, offset } => slope * s + offset,
            Piece::Reciprocal { numerator, pole } => numerator / (pole - s),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            Piece::Affine { slope, .. } => slope,
            Piece::Reciprocal { numerator, pole } => numerator / ((pole - s) * (pole - s)),
        }
    }
}

/// A scalar function given by a sorted breakpoint list and one piece per
/// interval. Piece `j` covers `[b_{j-1}, b_j)` with `b_{-1} = -inf` and
/// `b_{len} = +inf`, so derivatives at breakpoints are right derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseScalar {
    breakpoints: Vec<f64>,
    pieces: Vec<Piece>,
}

impl PiecewiseScalar {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Piece>) -> Result<Self> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::Problem(format!(
                "piecewise function needs {} pieces for {} breakpoints, got {}",
                breakpoints.len() + 1,
                breakpoints.len(),
                pieces.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Problem(
                "piecewise breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            breakpoints,
            pieces,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn pieces_mut(&mut self) -> &mut [Piece] {
        &mut self.pieces
    }

    fn piece_index(&self, s: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= s)
    }

    pub fn value(&self, s: f64) -> f64 {
        self.pieces[self.piece_index(s)].value(s)
    }

    /// Right derivative.
    pub fn derivative(&self, s: f64) -> f64 {
        self.pieces[self.piece_index(s)].derivative(s)
    }

    /// Largest gap between the left and right branch values over all
    /// breakpoints.
    pub fn max_jump(&self) -> f64 {
        self.breakpoints
            .iter()
            .enumerate()
            .map(|(j, &b)| (self.pieces[j].value(b) - self.pieces[j + 1].value(b)).abs())
            .fold(0.0, f64::max)
    }
}

/// `q_1(x_2)` of the two-mode example. The overlapping `x_2 <= 0` and
/// `[-1, 0)` branches are read as `0` below `-1` and `2 x_2 + 2` on
/// `[-1, 0)`, the only continuous reading.
pub fn q1_table() -> PiecewiseScalar {
    PiecewiseScalar::new(
        vec![-1.0, 0.0, 0.5, 1.0, 2.0],
        vec![
            Piece::constant(0.0),
            Piece::Affine {
                slope: 2.0,
                offset: 2.0,
            },
            Piece::Affine {
                slope: -4.0,
                offset: 2.0,
            },
            Piece::Affine {
                slope: 4.0,
                offset: -2.0,
            },
            Piece::Reciprocal {
                numerator: 4.0,
                pole: 3.0,
            },
            Piece::constant(4.0),
        ],
    )
    .expect("static table")
}

/// `q_2(x_1)` of the two-mode example.
pub fn q2_table() -> PiecewiseScalar {
    PiecewiseScalar::new(
        vec![0.0, 1.0, 2.0, 3.0, 4.0],
        vec![
            Piece::constant(0.0),
            Piece::Affine {
                slope: 2.0,
                offset: 0.0,
            },
            Piece::Affine {
                slope: -2.0,
                offset: 4.0,
            },
            Piece::Affine {
                slope: 2.0,
                offset: -4.0,
            },
            Piece::Affine {
                slope: -2.0,
                offset: 8.0,
            },
            Piece::constant(0.0),
        ],
    )
    .expect("static table")
}

pub fn eval_q1(x2: f64) -> f64 {
    q1_table().value(x2)
}

pub fn eval_q2(x1: f64) -> f64 {
    q2_table().value(x1)
}

/// `ẋ_output += g(x_input)` for a piecewise scalar `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateTerm {
    pub output: usize,
    pub input: usize,
    pub func: PiecewiseScalar,
}

/// Time-invariant field `ẋ = c + A x + sum_terms g(x_input) e_output`.
///
/// Covers the two-mode example and every piecewise-affine field the
/// config format can describe. Continuous inputs are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableField {
    n_x: usize,
    constant: Vec<f64>,
    linear: Vec<f64>,
    terms: Vec<CoordinateTerm>,
}

impl SeparableField {
    pub fn new(n_x: usize) -> Self {
        Self {
            n_x,
            constant: vec![0.0; n_x],
            linear: vec![0.0; n_x * n_x],
            terms: Vec::new(),
        }
    }

    pub fn with_constant(mut self, constant: Vec<f64>) -> Result<Self> {
        check_len("field constant", self.n_x, constant.len())?;
        self.constant = constant;
        Ok(self)
    }

    /// Row-major `n_x * n_x` matrix.
    pub fn with_linear(mut self, linear: Vec<f64>) -> Result<Self> {
        check_len("field linear part", self.n_x * self.n_x, linear.len())?;
        self.linear = linear;
        Ok(self)
    }

    pub fn with_term(mut self, output: usize, input: usize, func: PiecewiseScalar) -> Result<Self> {
        if output >= self.n_x || input >= self.n_x {
            return Err(Error::Problem(format!(
                "term index ({output}, {input}) out of range for n_x = {}",
                self.n_x
            )));
        }
        self.terms.push(CoordinateTerm {
            output,
            input,
            func,
        });
        Ok(self)
    }

    pub fn terms(&self) -> &[CoordinateTerm] {
        &self.terms
    }

    pub fn terms_mut(&mut self) -> &mut [CoordinateTerm] {
        &mut self.terms
    }
}

impl ModeField for SeparableField {
    fn eval(&self, _t: f64, x: &[f64], _u: &[f64], out: &mut [f64]) {
        let n = self.n_x;
        for r in 0..n {
            let row = &self.linear[r * n..(r + 1) * n];
            out[r] = self.constant[r] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        for term in &self.terms {
            out[term.output] += term.func.value(x[term.input]);
        }
    }

    fn jacobian(&self, _t: f64, x: &[f64], _u: &[f64], out: &mut [f64]) {
        let n = self.n_x;
        out[..n * n].copy_from_slice(&self.linear);
        for term in &self.terms {
            out[term.output * n + term.input] += term.func.derivative(x[term.input]);
        }
    }
}

/// A vector field assembled from two closures.
pub struct ClosureField<F, G> {
    field: F,
    jacobian: G,
}

impl<F, G> ClosureField<F, G>
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync,
    G: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(field: F, jacobian: G) -> Self {
        Self { field, jacobian }
    }
}

impl<F, G> ModeField for ClosureField<F, G>
where
    F: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync,
    G: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync,
{
    fn eval(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        (self.field)(t, x, u, out)
    }

    fn jacobian(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        (self.jacobian)(t, x, u, out)
    }
}

/// A switched optimal control problem. Immutable once built and cheap to
/// clone (components are shared).
#[derive(Clone)]
pub struct SwitchedProblem {
    name: String,
    n_x: usize,
    n_u: usize,
    t_f: f64,
    x0: Vec<f64>,
    modes: Vec<Arc<dyn ModeField>>,
    cost: Arc<dyn TerminalCost>,
    constraints: Vec<Arc<dyn StateConstraint>>,
    u_box: Vec<(f64, f64)>,
}

impl fmt::Debug for SwitchedProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SwitchedProblem")
            .field("name", &self.name)
            .field("n_x", &self.n_x)
            .field("n_sigma", &self.modes.len())
            .field("n_u", &self.n_u)
            .field("t_f", &self.t_f)
            .field("x0", &self.x0)
            .field("constraints", &self.constraints.len())
            .finish()
    }
}

impl SwitchedProblem {
    pub fn new(
        name: impl Into<String>,
        x0: Vec<f64>,
        t_f: f64,
        modes: Vec<Arc<dyn ModeField>>,
        cost: Arc<dyn TerminalCost>,
    ) -> Result<Self> {
        let n_x = x0.len();
        if n_x == 0 {
            return Err(Error::Problem("state dimension must be at least 1".into()));
        }
        if modes.is_empty() {
            return Err(Error::Problem("at least one mode is required".into()));
        }
        if !(t_f > 0.0 && t_f.is_finite()) {
            return Err(Error::Problem(format!("horizon must be positive, got {t_f}")));
        }
        Ok(Self {
            name: name.into(),
            n_x,
            n_u: 0,
            t_f,
            x0,
            modes,
            cost,
            constraints: Vec::new(),
            u_box: Vec::new(),
        })
    }

    pub fn with_constraint(mut self, c: Arc<dyn StateConstraint>) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn with_cost(mut self, cost: Arc<dyn TerminalCost>) -> Self {
        self.cost = cost;
        self
    }

    /// Declares a continuous input with the given componentwise box.
    pub fn with_input_box(mut self, u_box: Vec<(f64, f64)>) -> Result<Self> {
        if u_box.iter().any(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::Problem("input box bounds must satisfy lo <= hi".into()));
        }
        self.n_u = u_box.len();
        self.u_box = u_box;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_sigma(&self) -> usize {
        self.modes.len()
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn u_box(&self) -> &[(f64, f64)] {
        &self.u_box
    }

    pub fn modes(&self) -> &[Arc<dyn ModeField>] {
        &self.modes
    }

    pub fn constraints(&self) -> &[Arc<dyn StateConstraint>] {
        &self.constraints
    }

    pub fn is_constrained(&self) -> bool {
        !self.constraints.is_empty()
    }

    pub fn cost(&self, x: &[f64]) -> f64 {
        self.cost.value(x)
    }

    pub fn eval_mode(&self, i: usize, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        self.modes[i].eval(t, x, u, out)
    }

    pub fn eval_mode_jacobian(&self, i: usize, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        self.modes[i].jacobian(t, x, u, out)
    }
}

fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension {
            context,
            expected,
            got,
        });
    }
    Ok(())
}

/// A validated point of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        validate_simplex_row(&d)?;
        Ok(Self(d))
    }

    /// The `i`-th vertex of the `n`-simplex.
    pub fn vertex(n: usize, i: usize) -> Self {
        let mut d = vec![0.0; n];
        d[i] = 1.0;
        Self(d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub(crate) fn validate_simplex_row(d: &[f64]) -> Result<()> {
    if d.is_empty() {
        return Err(Error::Simplex {
            row: d.to_vec(),
            reason: "empty weight vector".into(),
        });
    }
    if let Some(bad) = d
        .iter()
        .find(|&&v| !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&v))
    {
        return Err(Error::Simplex {
            row: d.to_vec(),
            reason: format!("weight {bad} outside [0, 1]"),
        });
    }
    let sum: f64 = d.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Simplex {
            row: d.to_vec(),
            reason: format!("weights sum to {sum}"),
        });
    }
    Ok(())
}

/// `sum_i d_i f_i(t, x, u)`.
pub fn eval_relaxed_field(
    problem: &SwitchedProblem,
    t: f64,
    x: &[f64],
    u: &[f64],
    d: &SimplexPoint,
) -> Result<Vec<f64>> {
    check_len("state", problem.n_x(), x.len())?;
    check_len("input", problem.n_u(), u.len())?;
    check_len("switching weights", problem.n_sigma(), d.len())?;
    validate_simplex_row(d.as_slice())?;
    let mut out = vec![0.0; problem.n_x()];
    let mut scratch = vec![0.0; problem.n_x()];
    relaxed_field_into(problem, t, x, u, d.as_slice(), &mut out, &mut scratch);
    Ok(out)
}

/// Unchecked inner loop. Modes with zero weight are skipped so vertex
/// weights reproduce the single-mode field bit for bit.
pub(crate) fn relaxed_field_into(
    problem: &SwitchedProblem,
    t: f64,
    x: &[f64],
    u: &[f64],
    d: &[f64],
    out: &mut [f64],
    scratch: &mut [f64],
) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (i, &w) in d.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        problem.eval_mode(i, t, x, u, scratch);
        if w == 1.0 {
            out.iter_mut().zip(scratch.iter()).for_each(|(o, s)| *o += s);
        } else {
            out.iter_mut().zip(scratch.iter()).for_each(|(o, s)| *o += w * s);
        }
    }
}

/// Relaxed Jacobian `sum_i d_i df_i/dx`, row-major.
pub(crate) fn relaxed_jacobian_into(
    problem: &SwitchedProblem,
    t: f64,
    x: &[f64],
    u: &[f64],
    d: &[f64],
    out: &mut [f64],
    scratch: &mut [f64],
) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (i, &w) in d.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        problem.eval_mode_jacobian(i, t, x, u, scratch);
        out.iter_mut().zip(scratch.iter()).for_each(|(o, s)| *o += w * s);
    }
}

/// Gradient of the terminal cost, with the kink flag of the cost.
pub fn eval_cost_gradient(problem: &SwitchedProblem, x: &[f64]) -> Result<CostGradient> {
    check_len("state", problem.n_x(), x.len())?;
    Ok(problem.cost.gradient(x))
}

/// Target state `A` of the two-mode example.
pub const EXAMPLE_TARGET: [f64; 2] = [3.0, 2.0];
/// The stationary terminal state `B` reached under the trajectory topology.
pub const EXAMPLE_STALL_POINT: [f64; 2] = [3.0, 1.0];

/// Two-mode example: `f_1 = (q_1(x_2), 0)`, `f_2 = (0, q_2(x_1))`,
/// `h(x) = ||x - (3, 2)||`, horizon 2, start at the origin.
pub fn paper_example() -> SwitchedProblem {
    paper_example_with_tables(q1_table(), q2_table())
}

/// The two-mode example with replacement `q_1` / `q_2` tables.
pub fn paper_example_with_tables(q1: PiecewiseScalar, q2: PiecewiseScalar) -> SwitchedProblem {
    let mode1 = SeparableField::new(2)
        .with_term(0, 1, q1)
        .expect("indices in range");
    let mode2 = SeparableField::new(2)
        .with_term(1, 0, q2)
        .expect("indices in range");
    SwitchedProblem::new(
        "paper_example",
        vec![0.0, 0.0],
        2.0,
        vec![Arc::new(mode1), Arc::new(mode2)],
        Arc::new(EuclideanDistance {
            target: EXAMPLE_TARGET.to_vec(),
        }),
    )
    .expect("valid built-in problem")
}

/// Names accepted by [`builtin_problem`].
pub const BUILTIN_PROBLEMS: &[&str] = &["paper_example"];

pub fn builtin_problem(name: &str) -> Result<SwitchedProblem> {
    match name {
        "paper_example" => Ok(paper_example()),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}
