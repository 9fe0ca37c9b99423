//! Adversarially-trained nonnegative matrix factorization (AT-NMF) for
//! matrix completion.
//!
//! The learner fits `V ≈ WH` with `W, H ≥ 0` while an adversary adds a
//! perturbation `R` to the observed data, penalized by `λ‖R‖²_F`:
//!
//! ```text
//! min_{W,H ≥ 0}  max_{R : V+R ≥ 0}  ‖V + R − WH‖²_F − λ‖R‖²_F,   λ > 1
//! ```
//!
//! [`solver::at_nmf`] alternates the closed-form adversary with masked
//! multiplicative updates; [`solver::standard_nmf`] is the unperturbed
//! baseline. [`eval`] and [`experiment`] reproduce hold-out RMSE studies.

pub mod datasets;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod matrix;
pub mod sampling;
pub mod solver;
pub mod synthgen;

pub use error::{Error, Result};
pub use eval::{holdout_split, rmse, run_experiment, HoldoutSplit, RunSummary};
pub use matrix::{Matrix, NonnegMatrix, ObservationMask};
pub use sampling::RngState;
pub use solver::{at_nmf, standard_nmf, FactorPair, Method, Perturbation, Solution, SolveTrace, SolverConfig};
pub use synthgen::{generate_synthetic, SyntheticSpec};
