//! Forward and inverse Sturm–Liouville spectral tools on `(0, pi)`.
//!
//! * [`eigen`]: eigenvalues, eigenfunctions and eigenvalue gradients of
//!   `-u'' + q u` with separated boundary conditions (Prüfer shooting).
//! * [`nonlinear`]: shooting for `-u'' + q0 u = lambda u + delta u^3`, with
//!   nonexistence and multiplicity scans by nodal count.
//! * [`inverse`]: the nearest potential `q` to `q0` with a prescribed `k`-th
//!   eigenvalue, computed both from a nonlinear solution and by constrained
//!   optimization.

pub mod boundary;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod inverse;
pub mod nonlinear;
pub mod ode;
pub mod potential;
pub mod roots;

pub use boundary::BoundaryAngle;
pub use eigen::{eigenfunction, eigenvalue, eigenvalue_gradient, prufer_phase, spectrum, Eigenpair, PhaseTrace};
pub use error::{Result, SpectraError};
pub use inverse::{solve_direct, solve_explicit, InverseResult, OptimizerOptions, Route};
pub use grid::{l2_inner, l2_norm, make_grid, Grid, GridFunction};
pub use potential::{preset_potential, Potential};
