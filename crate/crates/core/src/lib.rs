//! Reduced-basis surrogate models for parametrized quantum spin
//! Hamiltonians.
//!
//! The crate implements an offline/online decomposition for parametrized
//! Hermitian eigenproblems `H(mu) psi = lambda psi` given in affine form
//! `H(mu) = sum_q theta_q(mu) H_q`:
//!
//! * **offline** — a greedy, residual-driven loop selects a few parameter
//!   points, solves the full problem there ("truth solves", including all
//!   degenerate ground states), and compresses the snapshots into an
//!   orthonormal basis `B` together with the reduced matrices
//!   `b = B^T B`, `h_q = B^T H_q B` and `h_qq' = B^T H_q H_q' B`;
//! * **online** — for any parameter value, a dense eigenproblem of the
//!   small reduced dimension yields the surrogate ground manifold, energies,
//!   residual estimates and observables (structure factors) at a cost
//!   independent of the Hilbert-space dimension.
//!
//! Two benchmark models are built in: a chain of Rydberg atoms and an
//! antiferromagnetic spin-1/2 triangle lattice with strongly degenerate
//! ground manifolds.

pub mod affine;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod lobpcg;
pub mod model;
pub mod modelfile;
pub mod offline;
pub mod online;
pub mod params;
pub mod sparse;
pub mod truth;
pub mod util;

pub use affine::{AffineObservable, AffineOperator, StructureFactorMeta};
pub use error::{Error, Result};
pub use params::{DomainBox, ParameterGrid, ParameterPoint};
pub use model::ModelSpec;
pub use offline::{greedy_train, GreedyConfig, ReducedBasisModel, TrainOutcome};
pub use online::{reduced_ground, scan, ReducedSolution, ScanOptions, ScanRow};
pub use sparse::{CooBuilder, SparseHermitian, SparseMatrix};
pub use truth::{GroundStateManifold, TruthConfig, TruthSolver};
