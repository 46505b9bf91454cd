//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rank mismatch: expected {expected}, got {got}")]
    RankMismatch {
        expected: &'static str,
        got: &'static str,
    },
    #[error("fields live on different grids or centerings")]
    GridMismatch,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("conjugate exponent undefined: p_minus = {p_minus} <= 1")]
    ConjugateUndefined { p_minus: f64 },
    #[error("degenerate weight: sigma = 0 at site {site} where a finite dual weight is requested")]
    DegenerateWeight { site: usize },
    #[error("cover construction failed at ({x}, {y}): no qualifying radius at grid scale")]
    CoverFailure { x: f64, y: f64 },
    #[error("incompatible boundary flux: |contour integral| = {integral:.6e} exceeds {tol:.6e}")]
    IncompatibleFlux { integral: f64, tol: f64 },
    #[error("{what}: no convergence within {limit} iterations (residual {residual:.3e})")]
    IterationLimit {
        what: &'static str,
        limit: usize,
        residual: f64,
    },
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("dyadic level block for j = {j} exceeds the floating-point range")]
    LevelOverflow { j: u32 },
    #[error("damping underflow at step {iteration}: theta = {theta:.3e}, residual {residual:.3e}")]
    Stagnation {
        iteration: usize,
        theta: f64,
        residual: f64,
    },
    #[error("test function does not vanish on the boundary (max |value| = {max_boundary:.3e})")]
    TestSpace { max_boundary: f64 },
    #[error("assumption audit failed: {0}")]
    AuditFailure(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
