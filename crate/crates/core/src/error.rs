//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh file {path}:{line}: {msg}")]
    MeshFormat {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("degenerate element {elem}: det(J) = {det:.3e} <= 0")]
    DegenerateElement { elem: usize, det: f64 },

    #[error("unknown boundary tag \"{0}\"")]
    UnknownTag(String),

    #[error("nonpositive drag alpha = {alpha:.6e} at p = {pressure:.6e}")]
    NonpositiveDrag { alpha: f64, pressure: f64 },

    #[error("drag overflow: beta*p = {exponent:.6e} exceeds the exp guard")]
    DragOverflow { exponent: f64 },

    #[error("element {elem} (quadrature-point pressure {pressure:.6e}): {source}")]
    InElement {
        elem: usize,
        pressure: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported constraint: facet normal ({nx:.6}, {ny:.6}) is not axis-aligned")]
    UnsupportedConstraint { nx: f64, ny: f64 },

    #[error("conflicting constraint at dof {dof}: {a:.6e} vs {b:.6e}")]
    ConstraintConflict { dof: usize, a: f64, b: f64 },

    #[error("incompatible pure-Neumann data: net flux imbalance {net:.6e}")]
    Incompatible { net: f64 },

    #[error("singular linear system{}", hint_suffix(.hint))]
    Singular { hint: Option<String> },

    #[error("Newton did not converge in {iterations} iterations (last residual {last:.6e})")]
    MaxIterations {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("config {path}:{line}: {msg}")]
    Config {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("vtk file {path}:{line}: {msg}")]
    VtkFormat {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("internal consistency error: {0}")]
    Internal(String),
}

fn hint_suffix(hint: &Option<String>) -> String {
    match hint {
        Some(h) => format!(" ({h})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
