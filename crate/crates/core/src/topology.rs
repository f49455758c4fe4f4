//! Weak-topology maps `g` and the distances they induce on controls.
//!
//! Two controls are close in the topology generated by `g` when their
//! images under `g` are close. `TerminalState` only looks at `x(t_f)`;
//! `FullTrajectory` looks at the whole path in L2.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    TerminalState,
    FullTrajectory,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopologyKind::TerminalState => "terminal",
            TopologyKind::FullTrajectory => "trajectory",
        })
    }
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "terminal" | "terminal_state" => Ok(TopologyKind::TerminalState),
            "trajectory" | "full_trajectory" => Ok(TopologyKind::FullTrajectory),
            other => Err(Error::InvalidArgument(format!(
                "unknown topology '{other}' (expected terminal or trajectory)"
            ))),
        }
    }
}

/// A point of the image space `Y`.
#[derive(Debug, Clone, PartialEq)]
pub enum TopologyImage {
    Terminal(Vec<f64>),
    Path {
        times: Vec<f64>,
        n_x: usize,
        states: Vec<f64>,
    },
}

impl TopologyImage {
    pub fn sample_count(&self) -> usize {
        match self {
            TopologyImage::Terminal(_) => 1,
            TopologyImage::Path { times, .. } => times.len(),
        }
    }
}

pub fn g_image(kind: TopologyKind, traj: &Trajectory) -> TopologyImage {
    match kind {
        TopologyKind::TerminalState => TopologyImage::Terminal(traj.terminal_state().to_vec()),
        TopologyKind::FullTrajectory => TopologyImage::Path {
            times: traj.times().to_vec(),
            n_x: traj.n_x(),
            states: traj.states().to_vec(),
        },
    }
}

/// `||g(a) - g(b)||_Y`. The path distance is the trapezoidal L2 norm of
/// the sample-wise state difference.
pub fn topo_distance(kind: TopologyKind, a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if !a.same_layout(b) {
        return Err(Error::GridMismatch {
            context: "trajectories have different sampling layouts",
        });
    }
    Ok(match kind {
        TopologyKind::TerminalState => euclid(a.terminal_state(), b.terminal_state()),
        TopologyKind::FullTrajectory => {
            let times = a.times();
            let sq: Vec<f64> = (0..a.len())
                .map(|j| {
                    let e = euclid(a.state(j), b.state(j));
                    e * e
                })
                .collect();
            times
                .windows(2)
                .zip(sq.windows(2))
                .map(|(t, e)| 0.5 * (t[1] - t[0]) * (e[0] + e[1]))
                .sum::<f64>()
                .sqrt()
        }
    })
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}
