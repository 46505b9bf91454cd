//! Numerical toolkit for steady micropolar electrorheological flow with a
//! field-dependent variable shear exponent: weighted variable-exponent norm
//! machinery, the quasi-static electric field and its singular-exponent
//! diagnostics, constitutive stress audits, Lipschitz truncation and
//! Bogovskii devices, and a regularized Picard solver for the coupled
//! velocity / micro-rotation system.

pub mod constitutive;
pub mod efield;
pub mod error;
pub mod exponent;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod solver;
pub mod tensor;
pub mod truncation;
pub mod util;
pub mod verify;

pub use constitutive::{
    assumption_audit, couple_stress_n, eps_contract_s, micro_rotation_tensor, stress_s,
    AssumptionAudit, KinematicState, StressCoefficients,
};
pub use efield::{
    blowup_diagnostic, remark34_e0, remark34_flux, remark34_grid, shear_exponent,
    solve_neumann_harmonic, weighted_embedding_check, BoundaryFlux, ElectricField,
    MaterialFunction, MaterialKind, ShearExponent,
};
pub use error::{Error, Result};
pub use exponent::{
    conjugate, conjugate_excluding_zeros, log_hoelder_modulus, luxembourg_norm, modular,
    oscillation_cover, pairing, theta_interpolation, CoverBall, CoverReport, VariableExponent,
    Weight,
};
pub use grid::{
    discrete_divergence, discrete_gradient, sym_skew_split, Centering, Field, Grid, Rank, Rect,
};
pub use solver::{
    default_r_exp, energy_report, picard_step, solve, stress_norm_report, weak_residual,
    EnergyReport, ProblemSetup, SolverState,
};
pub use tensor::{Mat2, Vec2};
pub use truncation::{
    bogovskii, embedding_constant, inequality_constant, lipschitz_truncate,
    lipschitz_truncate_given_maximal, maximal_function, select_levels, weak_type_quotient,
    BogovskiiResult, InequalityKind, InequalityReport, TruncationResult,
};
