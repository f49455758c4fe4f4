use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid simplex point {row:?}: {reason}")]
    Simplex { row: Vec<f64>, reason: String },

    #[error("signal grids differ ({context})")]
    GridMismatch { context: &'static str },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid problem: {0}")]
    Problem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integration blew up in cell {cell} (t = {t}): non-finite {quantity}")]
    Blowup {
        quantity: &'static str,
        cell: usize,
        t: f64,
    },

    #[error("projection cell width {width:e} is below 1e-12 at k = {k}; use a coarser k")]
    ProjectionTooFine { k: u32, width: f64 },

    #[error("no k in [{k_min}, {k_max}] meets the sufficient-decrease bound {bound:e}; best k = {best_k} with Q = {best_q:e}")]
    KNotFound {
        k_min: u32,
        k_max: u32,
        bound: f64,
        best_k: u32,
        best_q: f64,
    },

    #[error("enumeration needs {candidates} candidates, above the budget of {budget}")]
    EnumerationBudget { candidates: u128, budget: u128 },

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
